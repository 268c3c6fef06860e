//! Block-by-block growth of polarization circuits towards a target operator.
//!
//! The signal is the polarization qubit (H, V) of a single photon on one
//! path. Every block is a fixed optical template with eight wave-plate
//! angles:
//!
//! ```text
//!            ┌─ HWP(θ2) QWP(θ3) ─┐
//! HWP(θ0) QWP(θ1) ─ BD ┤                   ├ BD ─ HWP(θ6) QWP(θ7)
//!            └─ HWP(θ4) QWP(θ5) ─┘
//! ```
//!
//! The first beam displacer sends H to rail 0 and V to rail 1. The second one
//! recombines the H component of rail 0 with the V component of rail 1; the
//! two remaining components leave on the loss rails. A block therefore acts
//! as `post · diag(W0_HH, W1_VV) · pre`, which is a contraction with tunable
//! loss on each polarization.
//!
//! [`grow_until`] starts from one block, optimizes with Nelder-Mead and
//! random restarts, and appends near-pass-through blocks while the target
//! fidelity stays below threshold.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};

/// Single-photon operator on the (H, V) signal space.
pub type Jones = Matrix2<Complex64>;

pub const ANGLES_PER_BLOCK: usize = 8;

/// Angles realizing `i·I`, i.e. the identity up to a global phase.
pub const PASS_THROUGH: [f64; ANGLES_PER_BLOCK] = [0.0, 0.0, 0.0, 0.0, FRAC_PI_2, FRAC_PI_2, 0.0, FRAC_PI_2];

const CONTRACTION_SLACK: f64 = 1e-9;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Half-wave plate with its fast axis at `theta`.
pub fn half_wave(theta: f64) -> Jones {
    let (s, co) = (2.0 * theta).sin_cos();
    Jones::new(c(co, 0.0), c(s, 0.0), c(s, 0.0), c(-co, 0.0))
}

/// Quarter-wave plate with its fast axis at `theta`.
pub fn quarter_wave(theta: f64) -> Jones {
    let (s, co) = theta.sin_cos();
    let off = c(1.0, -1.0) * (s * co);
    Jones::new(c(co * co, s * s), off, off, c(s * s, co * co))
}

/// A half-wave plate followed by a quarter-wave plate.
fn plate_pair(hwp: f64, qwp: f64) -> Jones {
    quarter_wave(qwp) * half_wave(hwp)
}

/// The template operator for raw angles (no wrapping needed, every plate is
/// π-periodic).
pub fn block_operator(angles: &[f64; ANGLES_PER_BLOCK]) -> Jones {
    let pre = plate_pair(angles[0], angles[1]);
    let rail0 = plate_pair(angles[2], angles[3]);
    let rail1 = plate_pair(angles[4], angles[5]);
    let post = plate_pair(angles[6], angles[7]);
    let zero = Complex64::new(0.0, 0.0);
    let merged = Jones::new(rail0[(0, 0)], zero, zero, rail1[(1, 1)]);
    post * merged * pre
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub angles: [f64; ANGLES_PER_BLOCK],
}

impl Block {
    /// Wraps every angle into `[0, π)`.
    pub fn new(angles: [f64; ANGLES_PER_BLOCK]) -> Self {
        Block { angles: angles.map(|a| a.rem_euclid(PI)) }
    }

    pub fn pass_through() -> Self {
        Block::new(PASS_THROUGH)
    }

    pub fn operator(&self) -> Jones {
        block_operator(&self.angles)
    }
}

/// Product of block operators in physical order (the first block acts
/// first). The empty circuit is the identity.
pub fn compose(blocks: &[Block]) -> Jones {
    blocks.iter().fold(Jones::identity(), |acc, b| b.operator() * acc)
}

fn compose_flat(params: &[f64]) -> Jones {
    params
        .chunks_exact(ANGLES_PER_BLOCK)
        .fold(Jones::identity(), |acc, ch| block_operator(ch.try_into().expect("chunk of eight angles")) * acc)
}

pub fn spectral_norm(m: &Jones) -> f64 {
    m.singular_values().max()
}

/// Normalized Hilbert-Schmidt overlap `|tr(T†A)|² / (tr(T†T)·tr(A†A))`.
pub fn fidelity(op: &Jones, target: &Jones) -> Result<f64> {
    let op_sq = op.norm_squared();
    let t_sq = target.norm_squared();
    if op_sq == 0.0 || t_sq == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let overlap = (target.adjoint() * op).trace().norm_sqr();
    Ok((overlap / (op_sq * t_sq)).min(1.0))
}

/// Target operator rescaled so that passive optics can reach it.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub matrix: Jones,
    /// Factor applied to the supplied matrix (1 when no rescale was needed).
    pub scale: f64,
}

impl Target {
    pub fn new(matrix: Jones) -> Result<Self> {
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Precondition("target has non-finite entries".into()));
        }
        let norm = spectral_norm(&matrix);
        if norm == 0.0 {
            return Err(Error::ZeroOperator);
        }
        let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
        Ok(Target { matrix: matrix * Complex64::new(scale, 0.0), scale })
    }

    pub fn identity() -> Self {
        Target { matrix: Jones::identity(), scale: 1.0 }
    }
}

fn parse_entry(tok: &str) -> Result<Complex64, ParseError> {
    let bad = || ParseError::new(format!("bad matrix entry {tok:?}"));
    if let Some(inner) = tok.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
        let (re, im) = inner.split_once(',').ok_or_else(bad)?;
        let re = re.trim().parse::<f64>().map_err(|_| bad())?;
        let im = im.trim().parse::<f64>().map_err(|_| bad())?;
        return Ok(Complex64::new(re, im));
    }
    Complex64::from_str(tok).map_err(|_| bad())
}

fn split_entries(line: &str) -> Result<Vec<&str>, ParseError> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(ParseError::new("unbalanced parentheses"));
        }
        let sep = depth == 0 && (ch.is_whitespace() || ch == ';');
        match (sep, start) {
            (true, Some(s)) => {
                out.push(&line[s..i]);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if depth != 0 {
        return Err(ParseError::new("unbalanced parentheses"));
    }
    if let Some(s) = start {
        out.push(&line[s..]);
    }
    Ok(out)
}

/// Parses a 2×2 complex matrix: one row per line, entries separated by
/// whitespace, each either `(re,im)` or a literal such as `0.5-0.5i`.
/// `#` starts a comment.
pub fn parse_matrix(text: &str) -> Result<Jones, ParseError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = split_entries(line)
            .and_then(|toks| toks.into_iter().map(parse_entry).collect::<Result<Vec<_>, _>>())
            .map_err(|e| ParseError::at_line(idx + 1, e))?;
        if row.len() != 2 {
            return Err(ParseError::at_line(
                idx + 1,
                ParseError::new(format!("expected 2 entries, found {}", row.len())),
            ));
        }
        rows.push(row);
    }
    if rows.len() != 2 {
        return Err(ParseError::new(format!("expected 2 rows, found {}", rows.len())));
    }
    Ok(Jones::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]))
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::new(parse_matrix(s)?)
    }
}

/// Formats a matrix in the same text form [`parse_matrix`] reads.
pub fn format_matrix(m: &Jones) -> String {
    let mut out = String::new();
    for r in 0..2 {
        let row: Vec<String> = (0..2).map(|k| format!("({},{})", m[(r, k)].re, m[(r, k)].im)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMode {
    /// Re-optimize every angle after appending a block.
    Joint,
    /// Freeze earlier blocks and optimize only the newest one.
    NewOnly,
}

impl fmt::Display for GrowthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthMode::Joint => "joint",
            GrowthMode::NewOnly => "new-only",
        })
    }
}

impl FromStr for GrowthMode {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        match s {
            "joint" => Ok(GrowthMode::Joint),
            "new-only" | "new_only" => Ok(GrowthMode::NewOnly),
            other => Err(ParseError::new(format!("unknown growth mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSettings {
    pub threshold: f64,
    pub max_blocks: usize,
    pub restarts: usize,
    /// Simplex iterations per restart.
    pub max_iters: u64,
    pub seed: u64,
    pub mode: GrowthMode,
    /// Half-width of the uniform jitter around pass-through for new blocks.
    pub init_spread: f64,
    /// Edge length of the initial simplex.
    pub simplex_step: f64,
}

impl Default for GrowthSettings {
    fn default() -> Self {
        GrowthSettings {
            threshold: 0.99,
            max_blocks: 5,
            restarts: 5,
            max_iters: 4000,
            seed: 0,
            mode: GrowthMode::Joint,
            init_spread: 0.05,
            simplex_step: 0.3,
        }
    }
}

impl GrowthSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!("threshold {} not in (0, 1]", self.threshold)));
        }
        if self.max_blocks == 0 {
            return Err(Error::Config("max_blocks must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.init_spread >= 0.0 && self.simplex_step > 0.0) {
            return Err(Error::Config("init_spread must be >= 0 and simplex_step > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Objective evaluations so far.
    pub evaluation: u64,
    pub blocks: usize,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthResult {
    pub blocks: Vec<Block>,
    pub fidelity: f64,
    pub converged: bool,
    pub target_scale: f64,
    pub evaluations: u64,
    pub trace: Vec<TracePoint>,
}

impl GrowthResult {
    pub fn operator(&self) -> Jones {
        compose(&self.blocks)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("growth result serializes")
    }

    pub fn trace_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.trace {
            w.serialize(p).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }
}

#[derive(Debug, Default)]
struct Tracker {
    evaluations: u64,
    best: f64,
    best_params: Vec<f64>,
    trace: Vec<TracePoint>,
}

struct Problem<'a> {
    target: &'a Jones,
    frozen: &'a [f64],
    tracker: &'a RefCell<Tracker>,
}

impl Problem<'_> {
    fn full(&self, free: &[f64]) -> Vec<f64> {
        let mut all = self.frozen.to_vec();
        all.extend_from_slice(free);
        all
    }
}

impl CostFunction for Problem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, free: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        let all = self.full(free);
        let f = fidelity(&compose_flat(&all), self.target).unwrap_or(0.0);
        let mut t = self.tracker.borrow_mut();
        t.evaluations += 1;
        if f > t.best {
            t.best = f;
            t.best_params = all.clone();
            let point = TracePoint { evaluation: t.evaluations, blocks: all.len() / ANGLES_PER_BLOCK, fidelity: f };
            t.trace.push(point);
        }
        Ok(1.0 - f)
    }
}

fn simplex_around(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        out.push(v);
    }
    out
}

/// Runs one simplex descent over `free` and returns the best point and its
/// cost.
fn descend(problem: Problem<'_>, start: &[f64], settings: &GrowthSettings) -> (Vec<f64>, f64) {
    let solver = NelderMead::new(simplex_around(start, settings.simplex_step))
        .with_sd_tolerance(1e-13)
        .expect("non-negative tolerance");
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(settings.max_iters))
        .run()
        .expect("cost function is infallible");
    let state = res.state();
    let best = state.best_param.clone().unwrap_or_else(|| start.to_vec());
    (best, state.best_cost)
}

fn near_pass_through(rng: &mut ChaCha8Rng, spread: f64) -> Vec<f64> {
    PASS_THROUGH.iter().map(|&a| if spread > 0.0 { a + rng.gen_range(-spread..=spread) } else { a }).collect()
}

fn uniform_angles(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..PI)).collect()
}

/// Grows a circuit until `fidelity ≥ settings.threshold` or
/// `settings.max_blocks` blocks are in use. Falling short is reported through
/// `converged = false`, not as an error.
pub fn grow_until(target: &Target, settings: &GrowthSettings) -> Result<GrowthResult> {
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let tracker = RefCell::new(Tracker::default());
    // Best point of the latest stage; growth always extends it.
    let mut current: Vec<f64> = Vec::new();

    for n_blocks in 1..=settings.max_blocks {
        let new_block = near_pass_through(&mut rng, settings.init_spread);
        let (frozen, base): (Vec<f64>, Vec<f64>) = match settings.mode {
            GrowthMode::Joint => {
                let mut b = current.clone();
                b.extend(&new_block);
                (Vec::new(), b)
            }
            GrowthMode::NewOnly => (current.clone(), new_block),
        };

        let mut stage_best: Option<(Vec<f64>, f64)> = None;
        for restart in 0..settings.restarts {
            let start = match (n_blocks, restart) {
                (1, _) => uniform_angles(&mut rng, ANGLES_PER_BLOCK),
                (_, 0) => base.clone(),
                _ => {
                    // Keep the earlier blocks, redraw the newest one.
                    let mut s = base.clone();
                    let tail = s.len() - ANGLES_PER_BLOCK;
                    s[tail..].copy_from_slice(&uniform_angles(&mut rng, ANGLES_PER_BLOCK));
                    s
                }
            };
            let problem = Problem { target: &target.matrix, frozen: &frozen, tracker: &tracker };
            let (x, cost) = descend(problem, &start, settings);
            if stage_best.as_ref().is_none_or(|(_, c)| cost < *c) {
                stage_best = Some((x, cost));
            }
            if tracker.borrow().best >= settings.threshold {
                break;
            }
        }

        let (x, _) = stage_best.expect("at least one restart");
        current = frozen;
        current.extend(x);
        if tracker.borrow().best >= settings.threshold {
            break;
        }
    }

    let t = tracker.into_inner();
    let blocks = t
        .best_params
        .chunks_exact(ANGLES_PER_BLOCK)
        .map(|ch| Block::new(ch.try_into().expect("chunk of eight angles")))
        .collect();
    Ok(GrowthResult {
        blocks,
        fidelity: t.best,
        converged: t.best >= settings.threshold,
        target_scale: target.scale,
        evaluations: t.evaluations,
        trace: t.trace,
    })
}

/// Largest singular value may exceed one only by rounding.
pub fn is_contraction(m: &Jones) -> bool {
    spectral_norm(m) <= 1.0 + CONTRACTION_SLACK
}
