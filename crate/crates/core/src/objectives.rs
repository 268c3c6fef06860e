//! Target predicates evaluated on heralded states or on gate truth tables.
//!
//! "Orthogonal" throughout means "different OAM value": only basis-distinct
//! patterns are certified, never a continuous local-unitary equivalence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::elements::{split_top_level, Element, Spdc};
use crate::error::{Error, ParseError, Result};
use crate::exact::CycNum;
use crate::setup::{Setup, SimOptions};
use crate::state::{FockTerm, ModeLabel, Path, PhotonicState, Rules, Srv};

/// Each slot carries at least `dims` distinct OAM values. A necessary
/// condition for both the GHZ pattern and for every Schmidt rank ≥ `dims`.
pub fn cheap_state_check(state: &PhotonicState, dims: usize) -> bool {
    match state.slot_modes() {
        Ok(modes) => modes.iter().all(|m| m.len() >= dims),
        Err(_) => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: FockTerm,
    pub amplitude: CycNum,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Maverick {
    pub term: FockTerm,
    pub amplitude: CycNum,
    /// Slots whose mode lies outside that slot's core set.
    pub slots: Vec<usize>,
}

/// A per-path projector onto the listed modes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotFilter {
    pub path: Path,
    pub keep: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhzCertificate {
    pub slot_paths: Vec<Path>,
    pub core: Vec<WeightedTerm>,
    /// Amplitude of each core term relative to the first.
    pub ratios: Vec<CycNum>,
    pub slot_modes: Vec<Vec<i32>>,
    pub mavericks: Vec<Maverick>,
    pub filters: Vec<SlotFilter>,
}

impl GhzCertificate {
    /// The core terms alone, as a state.
    pub fn core_state(&self) -> PhotonicState {
        let order = self.slot_paths.len();
        PhotonicState::from_terms(order, self.core.iter().map(|w| (w.term.clone(), w.amplitude.clone())))
            .expect("core terms share the slot layout")
    }
}

/// Looks for `dims` terms that differ from each other in every slot. Without
/// mavericks the state must consist of exactly those terms; with them, every
/// other term must carry an out-of-core mode in some slot so that local
/// projections remove it.
pub fn ghz_match(state: &PhotonicState, dims: usize, allow_mavericks: bool) -> Option<GhzCertificate> {
    if dims == 0 || state.len() < dims || (!allow_mavericks && state.len() != dims) {
        return None;
    }
    let slot_paths = state.slot_paths().ok()?;
    let terms: Vec<(&FockTerm, &CycNum)> = state.iter().collect();
    let modes: Vec<Vec<i32>> = terms.iter().map(|(t, _)| t.labels().iter().map(|l| l.oam).collect()).collect();
    let apart = |i: usize, j: usize| modes[i].iter().zip(&modes[j]).all(|(a, b)| a != b);

    let mut chosen = Vec::with_capacity(dims);
    let mut found = None;
    search_core(terms.len(), dims, &apart, &mut chosen, 0, &mut |core| {
        let sets: Vec<BTreeSet<i32>> =
            (0..slot_paths.len()).map(|s| core.iter().map(|&i| modes[i][s]).collect()).collect();
        let mut mavericks = Vec::new();
        for i in (0..terms.len()).filter(|i| !core.contains(i)) {
            let slots: Vec<usize> = (0..sets.len()).filter(|&s| !sets[s].contains(&modes[i][s])).collect();
            if slots.is_empty() {
                return false;
            }
            mavericks.push(Maverick { term: terms[i].0.clone(), amplitude: terms[i].1.clone(), slots });
        }
        found = Some((core.to_vec(), sets, mavericks));
        true
    });
    let (core, sets, mavericks) = found?;
    let first_inv = terms[core[0]].1.inv()?;
    Some(GhzCertificate {
        core: core.iter().map(|&i| WeightedTerm { term: terms[i].0.clone(), amplitude: terms[i].1.clone() }).collect(),
        ratios: core.iter().map(|&i| terms[i].1 * &first_inv).collect(),
        filters: slot_paths
            .iter()
            .zip(&sets)
            .map(|(p, s)| SlotFilter { path: *p, keep: s.iter().copied().collect() })
            .collect(),
        slot_modes: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        slot_paths,
        mavericks,
    })
}

/// Depth-first over increasing index sets of pairwise-`apart` terms; stops
/// as soon as `accept` returns true.
fn search_core(
    n: usize,
    dims: usize,
    apart: &impl Fn(usize, usize) -> bool,
    chosen: &mut Vec<usize>,
    from: usize,
    accept: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if chosen.len() == dims {
        return accept(chosen);
    }
    for i in from..n {
        if n - i < dims - chosen.len() {
            break;
        }
        if chosen.iter().all(|&j| apart(i, j)) {
            chosen.push(i);
            if search_core(n, dims, apart, chosen, i + 1, accept) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// SRVs seen during a run, with hit counts. Insertion is atomic, so exactly
/// one caller learns that a given vector is new.
#[derive(Debug, Default)]
pub struct SrvRegistry {
    seen: Mutex<BTreeMap<Srv, u64>>,
}

impl SrvRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a hit; true when `srv` had not been seen before.
    pub fn insert(&self, srv: &Srv) -> bool {
        let mut seen = self.seen.lock().expect("registry lock");
        let count = seen.entry(srv.clone()).or_insert(0);
        *count += 1;
        *count == 1
    }

    pub fn contains(&self, srv: &Srv) -> bool {
        self.seen.lock().expect("registry lock").contains_key(srv)
    }

    pub fn snapshot(&self) -> BTreeMap<Srv, u64> {
        self.seen.lock().expect("registry lock").clone()
    }

    pub fn len(&self) -> usize {
        self.seen.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Computes the SRV and decides whether it is a hit: every rank must be at
/// least 2 (a rank-1 party is not entangled with the rest), and with
/// `targets` given the SRV must also be one of them. Hits are recorded in the
/// registry; the flag reports novelty.
pub fn srv_objective(
    state: &PhotonicState,
    targets: Option<&BTreeSet<Srv>>,
    registry: &SrvRegistry,
) -> Option<(Srv, bool)> {
    let srv = state.srv().ok()?;
    debug_assert!(srv.is_algebraically_valid(), "{srv}");
    if !srv.all_at_least(2) || targets.is_some_and(|set| !set.contains(&srv)) {
        return None;
    }
    let novel = registry.insert(&srv);
    Some((srv, novel))
}

/// Output of one gate probe: the OAM leaving on the control and target paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateResponse {
    pub control: i32,
    pub target: i32,
}

/// Anything that maps a (control, target) input pair to a single product
/// output, or to nothing when the output is empty or a superposition.
pub trait GateOracle {
    fn probe(&self, control: i32, target: i32) -> Result<Option<GateResponse>>;
}

impl<F: Fn(i32, i32) -> Option<GateResponse>> GateOracle for F {
    fn probe(&self, control: i32, target: i32) -> Result<Option<GateResponse>> {
        Ok(self(control, target))
    }
}

/// A linear-optics chain probed with one control and one target photon,
/// optionally assisted by heralded ancilla pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateSetup {
    pub options: SimOptions,
    pub ancillas: Vec<Spdc>,
    pub elements: Vec<Element>,
    /// Input and output path of the control photon.
    pub control: (Path, Path),
    pub target: (Path, Path),
    /// One photon expected in each of these modes for a heralded event.
    pub heralds: Vec<ModeLabel>,
}

impl GateSetup {
    /// Probes the element chain of `setup` directly: control enters and
    /// leaves on the first coincidence path, target on the second. Sources
    /// and trigger are not used.
    pub fn from_setup(setup: &Setup) -> Result<Self> {
        let [c, t, ..] = setup.detection.coincidence[..] else {
            return Err(Error::InvalidSetup("gate probing needs two coincidence paths".into()));
        };
        Ok(GateSetup {
            options: setup.options,
            ancillas: Vec::new(),
            elements: setup.elements.clone(),
            control: (c, c),
            target: (t, t),
            heralds: Vec::new(),
        })
    }

    fn rules(&self) -> Result<Rules> {
        let cutoff = self.options.cutoff();
        self.elements.iter().try_fold(Rules::identity(), |acc, e| Ok(acc.then(&e.rules(&cutoff)?)))
    }

    /// All in-range modes, the default probe range.
    pub fn modes(&self) -> Vec<i32> {
        (-self.options.max_oam..=self.options.max_oam).collect()
    }

    /// Builds the full truth table over the given probe modes.
    pub fn table(&self, controls: &[i32], targets: &[i32]) -> Result<GateTable> {
        let rules = self.rules()?;
        let cells = controls
            .iter()
            .map(|&c| targets.iter().map(|&t| self.probe_with(&rules, c, t)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(GateTable { controls: controls.to_vec(), targets: targets.to_vec(), cells })
    }

    fn probe_with(&self, rules: &Rules, control: i32, target: i32) -> Result<Option<GateResponse>> {
        let photon = |p: Path, m: i32| {
            PhotonicState::from_terms(1, [(FockTerm::new([ModeLabel::new(p, m)]), CycNum::one())])
                .expect("single photon")
        };
        let mut input = photon(self.control.0, control).product(&photon(self.target.0, target));
        for a in &self.ancillas {
            input = input.product(&a.emission());
        }
        let out = input.substitute(rules, &self.options.cutoff())?.state;
        let (cp, tp) = (self.control.1, self.target.1);
        let mut hits = out.iter().filter_map(|(term, _)| {
            let mut heralds = self.heralds.clone();
            let (mut c, mut t) = (None, None);
            for l in term.labels() {
                if let Some(i) = heralds.iter().position(|h| h == l) {
                    heralds.swap_remove(i);
                } else if l.path == cp && c.is_none() {
                    c = Some(l.oam);
                } else if l.path == tp && t.is_none() {
                    t = Some(l.oam);
                } else {
                    return None;
                }
            }
            match (heralds.is_empty(), c, t) {
                (true, Some(control), Some(target)) => Some(GateResponse { control, target }),
                _ => None,
            }
        });
        let first = hits.next();
        Ok(if hits.next().is_some() { None } else { first })
    }
}

impl GateOracle for GateSetup {
    fn probe(&self, control: i32, target: i32) -> Result<Option<GateResponse>> {
        self.probe_with(&self.rules()?, control, target)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCertificate {
    pub control_in: Vec<i32>,
    pub target_in: Vec<i32>,
    /// Row per control input, entry per target input.
    pub control_out: Vec<Vec<i32>>,
    pub target_out: Vec<Vec<i32>>,
}

/// Probe outcomes, row per control mode, column per target mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateTable {
    pub controls: Vec<i32>,
    pub targets: Vec<i32>,
    pub cells: Vec<Vec<Option<GateResponse>>>,
}

impl GateTable {
    pub fn from_oracle(oracle: &impl GateOracle, controls: &[i32], targets: &[i32]) -> Result<Self> {
        let cells = controls
            .iter()
            .map(|&c| targets.iter().map(|&t| oracle.probe(c, t)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(GateTable { controls: controls.to_vec(), targets: targets.to_vec(), cells })
    }

    /// First choice of `d_control` control rows and `d_target` target columns
    /// where every row maps its targets to distinct outputs and, for each
    /// target column, different rows give different outputs.
    pub fn find(&self, d_control: usize, d_target: usize) -> Option<GateCertificate> {
        for rows in (0..self.controls.len()).combinations(d_control) {
            let mut cols = Vec::with_capacity(d_target);
            if self.extend_columns(&rows, &mut cols, 0, d_target) {
                let cell = |r: usize, c: usize| self.cells[r][c].expect("checked");
                return Some(GateCertificate {
                    control_in: rows.iter().map(|&r| self.controls[r]).collect(),
                    target_in: cols.iter().map(|&c| self.targets[c]).collect(),
                    control_out: rows.iter().map(|&r| cols.iter().map(|&c| cell(r, c).control).collect()).collect(),
                    target_out: rows.iter().map(|&r| cols.iter().map(|&c| cell(r, c).target).collect()).collect(),
                });
            }
        }
        None
    }

    fn extend_columns(&self, rows: &[usize], cols: &mut Vec<usize>, from: usize, want: usize) -> bool {
        if cols.len() == want {
            return true;
        }
        for c in from..self.targets.len() {
            let outs: Option<Vec<i32>> = rows.iter().map(|&r| self.cells[r][c].map(|g| g.target)).collect();
            let Some(outs) = outs else { continue };
            if !outs.iter().all_unique() {
                continue;
            }
            let clash = rows
                .iter()
                .zip(&outs)
                .any(|(&r, o)| cols.iter().any(|&prev| self.cells[r][prev].map(|g| g.target) == Some(*o)));
            if clash {
                continue;
            }
            cols.push(c);
            if self.extend_columns(rows, cols, c + 1, want) {
                return true;
            }
            cols.pop();
        }
        false
    }
}

/// Probes `oracle` on every control/target pair and looks for the pattern.
pub fn gate_match(
    oracle: &impl GateOracle,
    controls: &[i32],
    targets: &[i32],
    d_control: usize,
    d_target: usize,
) -> Result<Option<GateCertificate>> {
    Ok(GateTable::from_oracle(oracle, controls, targets)?.find(d_control, d_target))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    TargetState { state: PhotonicState, min_fidelity: f64 },
    GhzPattern { dims: usize, allow_mavericks: bool },
    SrvTarget(BTreeSet<Srv>),
    SrvScan,
    GatePattern { d_control: usize, d_target: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    Fidelity { fidelity: f64 },
    Ghz(GhzCertificate),
    Srv { srv: Srv, novel: bool },
    Gate(GateCertificate),
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("objective {self}: {m}")));
        match self {
            Objective::TargetState { state, min_fidelity } => {
                if !(*min_fidelity > 0.0 && *min_fidelity <= 1.0) {
                    return bad("min_fidelity must lie in (0, 1]");
                }
                if state.is_empty() {
                    return bad("target state is empty");
                }
            }
            Objective::GhzPattern { dims, .. } if *dims < 2 => return bad("dims must be at least 2"),
            Objective::SrvTarget(set) if set.is_empty() => return bad("no target SRVs"),
            Objective::GatePattern { d_control, d_target } if *d_control < 2 || *d_target < 2 => {
                return bad("gate dimensions must be at least 2")
            }
            _ => {}
        }
        Ok(())
    }

    /// Mode count per slot below which the objective cannot hold, if any.
    pub fn cheap_dims(&self) -> Option<usize> {
        match self {
            Objective::GhzPattern { dims, .. } => Some(*dims),
            Objective::SrvTarget(set) => set.iter().filter_map(|s| s.ranks().last().copied()).min().map(|d| d.max(2)),
            Objective::SrvScan => Some(2),
            Objective::TargetState { .. } | Objective::GatePattern { .. } => None,
        }
    }

    /// Whether the objective is judged on the heralded state (rather than on
    /// gate probes).
    pub fn is_state_based(&self) -> bool {
        !matches!(self, Objective::GatePattern { .. })
    }

    /// Evaluates a state-based objective on a heralded state.
    pub fn evaluate_state(&self, state: &PhotonicState, registry: &SrvRegistry) -> Option<Certificate> {
        match self {
            Objective::TargetState { state: target, min_fidelity } => {
                let fidelity = state.fidelity(target).ok()?;
                (fidelity >= *min_fidelity).then_some(Certificate::Fidelity { fidelity })
            }
            Objective::GhzPattern { dims, allow_mavericks } => {
                ghz_match(state, *dims, *allow_mavericks).map(Certificate::Ghz)
            }
            Objective::SrvTarget(set) => {
                srv_objective(state, Some(set), registry).map(|(srv, novel)| Certificate::Srv { srv, novel })
            }
            Objective::SrvScan => {
                srv_objective(state, None, registry).map(|(srv, novel)| Certificate::Srv { srv, novel })
            }
            Objective::GatePattern { .. } => None,
        }
    }

    /// Full evaluation of a setup, without any pruning.
    pub fn evaluate(&self, setup: &Setup, registry: &SrvRegistry) -> Result<Option<Certificate>> {
        match self {
            Objective::GatePattern { d_control, d_target } => {
                let gate = GateSetup::from_setup(setup)?;
                let modes = gate.modes();
                Ok(gate.table(&modes, &modes)?.find(*d_control, *d_target).map(Certificate::Gate))
            }
            _ => Ok(self.evaluate_state(&setup.simulate()?, registry)),
        }
    }

    /// Side-effect-free check, as used by simplification.
    pub fn holds(&self, setup: &Setup) -> bool {
        matches!(self.evaluate(setup, &SrvRegistry::new()), Ok(Some(_)))
    }

    /// The objective a found solution must keep satisfying while it is
    /// simplified: a scan hit is pinned to the SRV it produced.
    pub fn pinned(&self, certificate: &Certificate) -> Objective {
        match (self, certificate) {
            (Objective::SrvScan, Certificate::Srv { srv, .. }) => Objective::SrvTarget([srv.clone()].into()),
            _ => self.clone(),
        }
    }
}

/// Text forms: `ghz:3`, `ghz:3+mavericks`, `srv:(3,3,2),(4,2,2)`, `scan`,
/// `gate:2x3`, `state:0.99:<state>`.
impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::TargetState { state, min_fidelity } => write!(f, "state:{min_fidelity}:{state}"),
            Objective::GhzPattern { dims, allow_mavericks: false } => write!(f, "ghz:{dims}"),
            Objective::GhzPattern { dims, allow_mavericks: true } => write!(f, "ghz:{dims}+mavericks"),
            Objective::SrvTarget(set) => write!(f, "srv:{}", set.iter().join(",")),
            Objective::SrvScan => f.write_str("scan"),
            Objective::GatePattern { d_control, d_target } => write!(f, "gate:{d_control}x{d_target}"),
        }
    }
}

impl FromStr for Objective {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        let bad = || ParseError::new(format!("invalid objective `{s}`"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let obj = match kind {
            "scan" if rest.is_empty() => Objective::SrvScan,
            "ghz" => {
                let (dims, mav) = match rest.strip_suffix("+mavericks") {
                    Some(d) => (d, true),
                    None => (rest, false),
                };
                Objective::GhzPattern { dims: dims.parse().map_err(|_| bad())?, allow_mavericks: mav }
            }
            "srv" => Objective::SrvTarget(
                split_top_level(rest, ',').into_iter().map(str::parse).collect::<Result<BTreeSet<Srv>, _>>()?,
            ),
            "gate" => {
                let (c, t) = rest.split_once('x').ok_or_else(bad)?;
                Objective::GatePattern {
                    d_control: c.parse().map_err(|_| bad())?,
                    d_target: t.parse().map_err(|_| bad())?,
                }
            }
            "state" => {
                let (fid, state) = rest.split_once(':').ok_or_else(bad)?;
                Objective::TargetState { state: state.parse()?, min_fidelity: fid.parse().map_err(|_| bad())? }
            }
            _ => return Err(bad()),
        };
        obj.validate().map_err(|e| ParseError::new(e.to_string()))?;
        Ok(obj)
    }
}

#[cfg(test)]
mod tests;
