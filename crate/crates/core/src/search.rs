//! Random search over setups with staged early aborts.
//!
//! Trial `t` draws its setup from ChaCha8 stream `t` of the master seed, so a
//! trial's setup does not depend on which worker runs it. With one worker the
//! whole solution stream is reproducible; with several, only the set of
//! sampled setups is (emission order and toolbox growth depend on timing).

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, RwLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elements::{Element, Toolbox};
use crate::error::{Error, Result};
use crate::objectives::{cheap_state_check, Certificate, Objective, SrvRegistry};
use crate::setup::Setup;
use crate::state::Srv;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Sources, detection and simulation options; its element list is ignored.
    pub base: Setup,
    pub toolbox: Toolbox,
    pub objective: Objective,
    pub budget: u64,
    pub seed: u64,
    pub workers: usize,
    pub augment_toolbox: bool,
    pub simplify: bool,
    /// Force-evaluate pruned trials and count any that would have passed.
    pub audit: bool,
    /// Visit every setup with at most `max_elements` elements instead of
    /// sampling; the budget is then the size of that space.
    pub enumerate: bool,
    pub stop_after: Option<u64>,
    /// Print a counter line to standard error every this many trials.
    pub progress_every: Option<u64>,
    /// Record elapsed wall-clock time in each solution.
    pub timestamps: bool,
}

impl SearchConfig {
    pub fn new(objective: Objective) -> Self {
        SearchConfig {
            base: Setup::standard(3),
            toolbox: Toolbox::default(),
            objective,
            budget: 10_000,
            seed: 0,
            workers: 1,
            augment_toolbox: false,
            simplify: true,
            audit: false,
            enumerate: false,
            stop_after: None,
            progress_every: None,
            timestamps: false,
        }
    }

    pub fn max_elements(&self) -> usize {
        self.base.options.max_elements
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 && !self.enumerate {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.max_elements() == 0 {
            return Err(Error::Config("max_elements must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        self.objective.validate()?;
        self.toolbox.validate(self.base.n_paths, self.base.options.max_oam)?;
        self.base.clone().with_elements(Vec::new()).validate()
    }

    /// Number of trials the run will perform.
    pub fn trial_count(&self) -> u64 {
        if self.enumerate {
            Enumeration::new(self).total()
        } else {
            self.budget
        }
    }
}

/// One draw: length uniform in `1..=max_elements`, then each element a
/// uniformly chosen template with uniformly drawn paths and parameters.
pub fn random_setup<R: Rng + ?Sized>(base: &Setup, toolbox: &Toolbox, max_elements: usize, rng: &mut R) -> Setup {
    let len = rng.gen_range(1..=max_elements);
    let elements =
        (0..len).map(|_| toolbox.templates()[rng.gen_range(0..toolbox.len())].instantiate(base.n_paths, rng)).collect();
    base.clone().with_elements(elements)
}

/// The RNG for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Mixed-radix numbering of all chains of length `0..=max_elements` over
/// the toolbox's placements.
struct Enumeration {
    instances: Vec<Element>,
    max_len: usize,
}

impl Enumeration {
    fn new(config: &SearchConfig) -> Self {
        let instances = config.toolbox.templates().iter().flat_map(|t| t.all_instances(config.base.n_paths)).collect();
        Enumeration { instances, max_len: config.max_elements() }
    }

    fn total(&self) -> u64 {
        let n = self.instances.len() as u64;
        (0..=self.max_len as u32).map(|l| n.saturating_pow(l)).fold(0u64, u64::saturating_add)
    }

    fn chain(&self, mut index: u64) -> Vec<Element> {
        let n = self.instances.len() as u64;
        let mut len = 0;
        while len < self.max_len as u32 && index >= n.pow(len) {
            index -= n.pow(len);
            len += 1;
        }
        (0..len)
            .map(|_| {
                let e = self.instances[(index % n) as usize].clone();
                index /= n;
                e
            })
            .collect()
    }
}

/// How a trial ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    NoMixing,
    Empty,
    ModeCount,
    ObjectiveMiss,
    Hit(Certificate),
}

/// Runs the staged pipeline on one setup: coupling test, simulation, empty
/// check, mode-count check, full objective.
pub fn evaluate(setup: &Setup, objective: &Objective, registry: &SrvRegistry) -> Result<Stage> {
    if !objective.is_state_based() {
        return Ok(match objective.evaluate(setup, registry)? {
            Some(c) => Stage::Hit(c),
            None => Stage::ObjectiveMiss,
        });
    }
    if !setup.mixes_pairs() {
        return Ok(Stage::NoMixing);
    }
    let state = setup.simulate()?;
    if state.is_empty() {
        return Ok(Stage::Empty);
    }
    if let Some(dims) = objective.cheap_dims() {
        if !cheap_state_check(&state, dims) {
            return Ok(Stage::ModeCount);
        }
    }
    Ok(match objective.evaluate_state(&state, registry) {
        Some(c) => Stage::Hit(c),
        None => Stage::ObjectiveMiss,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub trials: u64,
    pub no_mixing: u64,
    pub empty: u64,
    pub mode_count: u64,
    pub objective_miss: u64,
    pub hits: u64,
    pub solutions: u64,
    pub audited: u64,
    pub audit_violations: u64,
}

impl SearchStats {
    /// Abort-stage counters plus hits; equals `trials`.
    pub fn stage_sum(&self) -> u64 {
        self.no_mixing + self.empty + self.mode_count + self.objective_miss + self.hits
    }
}

#[derive(Default)]
struct AtomicStats {
    trials: AtomicU64,
    no_mixing: AtomicU64,
    empty: AtomicU64,
    mode_count: AtomicU64,
    objective_miss: AtomicU64,
    hits: AtomicU64,
    solutions: AtomicU64,
    audited: AtomicU64,
    audit_violations: AtomicU64,
}

impl AtomicStats {
    fn snapshot(&self) -> SearchStats {
        let g = |a: &AtomicU64| a.load(Ordering::SeqCst);
        SearchStats {
            trials: g(&self.trials),
            no_mixing: g(&self.no_mixing),
            empty: g(&self.empty),
            mode_count: g(&self.mode_count),
            objective_miss: g(&self.objective_miss),
            hits: g(&self.hits),
            solutions: g(&self.solutions),
            audited: g(&self.audited),
            audit_violations: g(&self.audit_violations),
        }
    }
}

/// One line of the solutions file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub schema: u32,
    pub seed: u64,
    /// Index of the trial; also the RNG stream it was drawn from.
    pub trial: u64,
    pub worker: usize,
    /// Setup file text of the (simplified) setup.
    pub setup: String,
    pub elements_before: usize,
    pub certificate: Certificate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl Solution {
    pub fn parsed_setup(&self) -> Result<Setup> {
        Ok(self.setup.parse()?)
    }

    /// Re-simulates the stored setup and compares certificates exactly. The
    /// novelty flag of SRV certificates is run history and is not compared.
    pub fn verify(&self, objective: &Objective) -> Result<bool> {
        let setup = self.parsed_setup()?;
        let fresh = objective.pinned(&self.certificate).evaluate(&setup, &SrvRegistry::new())?;
        Ok(match (fresh, &self.certificate) {
            (Some(Certificate::Srv { srv: a, .. }), Certificate::Srv { srv: b, .. }) => &a == b,
            (Some(Certificate::Fidelity { fidelity: a }), Certificate::Fidelity { fidelity: b }) => {
                a.to_bits() == b.to_bits()
            }
            (Some(c), stored) => &c == stored,
            (None, _) => false,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub stats: SearchStats,
    pub registry: Vec<(Srv, u64)>,
    pub toolbox: Toolbox,
    pub cancelled: bool,
}

struct Shared<'a> {
    config: &'a SearchConfig,
    toolbox: RwLock<Toolbox>,
    registry: SrvRegistry,
    stats: AtomicStats,
    next: AtomicU64,
    total: u64,
    stop: AtomicBool,
    cancel: &'a AtomicBool,
    started: Instant,
    enumeration: Option<Enumeration>,
}

impl Shared<'_> {
    fn halted(&self) -> bool {
        self.stop.load(Ordering::SeqCst) || self.cancel.load(Ordering::SeqCst)
    }

    fn setup_for(&self, trial: u64) -> Setup {
        match &self.enumeration {
            Some(en) => self.config.base.clone().with_elements(en.chain(trial)),
            None => {
                let mut rng = trial_rng(self.config.seed, trial);
                let toolbox = self.toolbox.read().expect("toolbox lock");
                random_setup(&self.config.base, &toolbox, self.config.max_elements(), &mut rng)
            }
        }
    }

    fn run_trial(&self, trial: u64, worker: usize) -> Result<Option<Solution>> {
        let setup = self.setup_for(trial);
        let elements_before = setup.elements.len();
        let objective = &self.config.objective;
        let stage = evaluate(&setup, objective, &self.registry)?;
        let s = &self.stats;
        let counter = match &stage {
            Stage::NoMixing => &s.no_mixing,
            Stage::Empty => &s.empty,
            Stage::ModeCount => &s.mode_count,
            Stage::ObjectiveMiss => &s.objective_miss,
            Stage::Hit(_) => &s.hits,
        };
        counter.fetch_add(1, Ordering::SeqCst);
        if self.config.audit && matches!(stage, Stage::NoMixing | Stage::Empty | Stage::ModeCount) {
            s.audited.fetch_add(1, Ordering::SeqCst);
            if objective.evaluate(&setup, &SrvRegistry::new())?.is_some() {
                s.audit_violations.fetch_add(1, Ordering::SeqCst);
            }
        }
        let Stage::Hit(certificate) = stage else {
            return Ok(None);
        };
        if matches!(certificate, Certificate::Srv { novel: false, .. }) {
            return Ok(None);
        }
        let pinned = objective.pinned(&certificate);
        let (setup, certificate) = if self.config.simplify {
            let simple = setup.simplify(|c| pinned.holds(c))?;
            let fresh = pinned.evaluate(&simple, &SrvRegistry::new())?.ok_or(Error::ObjectiveNotSatisfied)?;
            let cert = match (fresh, &certificate) {
                (Certificate::Srv { srv, .. }, Certificate::Srv { novel, .. }) => {
                    Certificate::Srv { srv, novel: *novel }
                }
                (c, _) => c,
            };
            (simple, cert)
        } else {
            (setup, certificate)
        };
        if self.config.augment_toolbox && !setup.elements.is_empty() {
            self.toolbox.write().expect("toolbox lock").add_composite(setup.to_composite(&format!("t{trial}")));
        }
        Ok(Some(Solution {
            schema: SCHEMA_VERSION,
            seed: self.config.seed,
            trial,
            worker,
            setup: setup.to_string(),
            elements_before,
            certificate,
            elapsed_ms: self.config.timestamps.then(|| self.started.elapsed().as_millis() as u64),
        }))
    }

    fn worker(&self, worker: usize, tx: mpsc::Sender<Result<Solution>>) {
        loop {
            if self.halted() {
                return;
            }
            let trial = self.next.fetch_add(1, Ordering::SeqCst);
            if trial >= self.total {
                return;
            }
            let result = self.run_trial(trial, worker);
            let done = self.stats.trials.fetch_add(1, Ordering::SeqCst) + 1;
            if let Some(every) = self.config.progress_every.filter(|e| *e > 0) {
                if done.is_multiple_of(every) {
                    let st = self.stats.snapshot();
                    eprintln!(
                        "[{done}/{}] mixing-pruned {} empty {} mode-pruned {} miss {} hits {} solutions {} srvs {}",
                        self.total,
                        st.no_mixing,
                        st.empty,
                        st.mode_count,
                        st.objective_miss,
                        st.hits,
                        st.solutions,
                        self.registry.len()
                    );
                }
            }
            match result {
                Ok(None) => {}
                Ok(Some(sol)) => {
                    let n = self.stats.solutions.fetch_add(1, Ordering::SeqCst) + 1;
                    if self.config.stop_after.is_some_and(|k| n >= k) {
                        self.stop.store(true, Ordering::SeqCst);
                    }
                    if tx.send(Ok(sol)).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    self.stop.store(true, Ordering::SeqCst);
                    let _ = tx.send(Err(e));
                    return;
                }
            }
        }
    }
}

/// Runs the search, handing each solution to `sink` on the calling thread
/// as soon as it is found. Setting `cancel` stops the run after the trials in
/// flight.
pub fn run_search(
    config: &SearchConfig,
    cancel: &AtomicBool,
    mut sink: impl FnMut(&Solution) -> Result<()>,
) -> Result<SearchOutcome> {
    config.validate()?;
    let enumeration = config.enumerate.then(|| Enumeration::new(config));
    let total = enumeration.as_ref().map_or(config.budget, Enumeration::total);
    let shared = Shared {
        config,
        toolbox: RwLock::new(config.toolbox.clone()),
        registry: SrvRegistry::new(),
        stats: AtomicStats::default(),
        next: AtomicU64::new(0),
        total,
        stop: AtomicBool::new(false),
        cancel,
        started: Instant::now(),
        enumeration,
    };
    let (tx, rx) = mpsc::channel();
    let mut failure = None;
    std::thread::scope(|scope| {
        for w in 0..config.workers {
            let tx = tx.clone();
            let shared = &shared;
            scope.spawn(move || shared.worker(w, tx));
        }
        drop(tx);
        for msg in rx {
            let outcome = msg.and_then(|sol| sink(&sol));
            if let Err(e) = outcome {
                shared.stop.store(true, Ordering::SeqCst);
                failure.get_or_insert(e);
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SearchOutcome {
        stats: shared.stats.snapshot(),
        registry: shared.registry.snapshot().into_iter().collect(),
        toolbox: shared.toolbox.into_inner().expect("toolbox lock"),
        cancelled: cancel.load(Ordering::SeqCst),
    })
}

/// Appends a solution's chain to the toolbox as a composite; duplicates
/// (same chain up to path names) are ignored.
pub fn augment_toolbox(toolbox: &mut Toolbox, solution: &Solution, name: &str) -> Result<bool> {
    let setup = solution.parsed_setup()?;
    Ok(toolbox.add_composite(setup.to_composite(name)))
}

#[cfg(test)]
mod tests;
