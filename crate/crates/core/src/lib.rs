//! Automated design of quantum-optics experiments.
//!
//! The crate simulates discrete linear-optical setups symbolically over the
//! eighth cyclotomic field, post-selects heralded multi-photon states,
//! evaluates generalized entanglement and gate objectives, and samples setups
//! at random behind cheap necessary-condition prunes. A separate
//! [`block_growth`] module grows parametrized polarization circuits block by
//! block towards a (generally non-unitary) target operator.

pub mod block_growth;
pub mod elements;
pub mod error;
pub mod exact;
pub mod objectives;
pub mod search;
pub mod setup;
pub mod state;

pub use error::{Error, ParseError, Result};
