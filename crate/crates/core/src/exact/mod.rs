//! Exact arithmetic for photonic amplitudes.

mod cyclotomic;
mod rational;

pub use cyclotomic::CycNum;
pub use rational::Rational;
