use super::*;
use crate::elements::Template;
use crate::state::Path;

fn collect(config: &SearchConfig) -> (Vec<Solution>, SearchOutcome) {
    let mut out = Vec::new();
    let outcome = run_search(config, &AtomicBool::new(false), |s| {
        out.push(s.clone());
        Ok(())
    })
    .unwrap();
    (out, outcome)
}

fn scan(budget: u64, seed: u64) -> SearchConfig {
    SearchConfig { budget, seed, ..SearchConfig::new(Objective::SrvScan) }
}

#[test]
fn sampling_is_reproducible() {
    let base = Setup::standard(3);
    let tb = Toolbox::default();
    let a = random_setup(&base, &tb, 15, &mut trial_rng(9, 4));
    let b = random_setup(&base, &tb, 15, &mut trial_rng(9, 4));
    let c = random_setup(&base, &tb, 15, &mut trial_rng(9, 5));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!((1..=15).contains(&a.elements.len()));
}

#[test]
fn single_template_single_element() {
    let tb: Toolbox = "COMP[x]{BS[a,b];LI[c,d]}".parse().unwrap();
    let s = random_setup(&Setup::standard(3), &tb, 1, &mut trial_rng(1, 0));
    assert_eq!(s.elements.len(), 1);
    let Element::Composite { inner, .. } = &s.elements[0] else { panic!() };
    assert!(matches!(inner[..], [Element::BeamSplitter(..), Element::ParitySorter(..)]));
}

#[test]
fn template_choice_is_uniform() {
    let tb: Toolbox = "BS,REFL".parse().unwrap();
    let base = Setup::standard(3);
    let n = 100_000u64;
    let mut rng = trial_rng(3, 0);
    let bs = (0..n)
        .filter(|_| matches!(random_setup(&base, &tb, 1, &mut rng).elements[0], Element::BeamSplitter(..)))
        .count() as f64;
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((bs - n as f64 / 2.0).abs() < 3.0 * sigma, "{bs}");
}

#[test]
fn counters_sum_to_budget_and_solutions_verify() {
    let config = scan(3000, 5);
    let (sols, outcome) = collect(&config);
    assert_eq!(outcome.stats.trials, 3000);
    assert_eq!(outcome.stats.stage_sum(), 3000);
    assert_eq!(sols.len() as u64, outcome.stats.solutions);
    assert_eq!(sols.len(), outcome.registry.len());
    assert!(!sols.is_empty());
    for s in &sols {
        assert!(s.verify(&config.objective).unwrap(), "{}", s.setup);
        assert!(s.parsed_setup().unwrap().elements.len() <= s.elements_before);
        assert!(matches!(s.certificate, Certificate::Srv { novel: true, .. }));
    }
}

#[test]
fn single_worker_runs_are_identical() {
    let config = scan(1500, 77);
    let (a, _) = collect(&config);
    let (b, _) = collect(&config);
    let text = |v: &[Solution]| v.iter().map(|s| serde_json::to_string(s).unwrap()).collect::<Vec<_>>();
    assert_eq!(text(&a), text(&b));
}

#[test]
fn worker_count_does_not_change_the_trials() {
    let ghz = SearchConfig { budget: 1500, seed: 4, simplify: false, ..SearchConfig::new("ghz:2".parse().unwrap()) };
    let (one, o1) = collect(&ghz);
    let (three, o3) = collect(&SearchConfig { workers: 3, ..ghz.clone() });
    assert_eq!(o1.stats, o3.stats);
    let trials = |v: &[Solution]| {
        let mut t: Vec<u64> = v.iter().map(|s| s.trial).collect();
        t.sort_unstable();
        t
    };
    assert_eq!(trials(&one), trials(&three));
}

#[test]
fn product_target_is_never_hit() {
    let config = SearchConfig { budget: 2000, ..SearchConfig::new("srv:(1,1,1)".parse().unwrap()) };
    let (sols, outcome) = collect(&config);
    assert!(sols.is_empty());
    assert_eq!(outcome.stats.hits, 0);
}

#[test]
fn exhaustive_micro_search_finds_two_dimensional_ghz() {
    let mut base = Setup::standard(3);
    for s in &mut base.sources {
        *s = s.clone().with_window(0, 1);
    }
    base.options.max_elements = 3;
    let config = SearchConfig {
        base,
        toolbox: "BS,LI".parse().unwrap(),
        enumerate: true,
        ..SearchConfig::new("ghz:2".parse().unwrap())
    };
    assert_eq!(config.trial_count(), 1 + 12 + 144 + 1728);
    let (sols, outcome) = collect(&config);
    assert_eq!(outcome.stats.trials, config.trial_count());
    assert!(!sols.is_empty());
    let st = sols[0].parsed_setup().unwrap().simulate().unwrap();
    assert_eq!(st.srv().unwrap(), Srv::new(vec![2, 2, 2]));
}

#[test]
fn audit_finds_no_unsound_prunes() {
    let mut config =
        SearchConfig { budget: 1500, audit: true, ..SearchConfig::new("ghz:2+mavericks".parse().unwrap()) };
    config.base.options.max_elements = 8;
    let (_, outcome) = collect(&config);
    assert!(outcome.stats.audited > 0);
    assert_eq!(outcome.stats.audit_violations, 0);
}

#[test]
fn stop_after_and_cancel() {
    let config = SearchConfig { stop_after: Some(1), ..scan(5000, 2) };
    let (sols, outcome) = collect(&config);
    assert_eq!(sols.len(), 1);
    assert!(outcome.stats.trials < 5000);

    let cancel = AtomicBool::new(true);
    let outcome = run_search(&scan(100, 0), &cancel, |_| Ok(())).unwrap();
    assert!(outcome.cancelled);
    assert_eq!(outcome.stats.trials, 0);

    let err = run_search(&scan(5000, 2), &AtomicBool::new(false), |_| Err(Error::Config("disk full".into())));
    assert!(err.is_err());
}

#[test]
fn augmentation_registers_composites() {
    let mut config = SearchConfig { augment_toolbox: true, ..scan(150, 5) };
    config.base.options.max_elements = 4;
    let (sols, outcome) = collect(&config);
    assert!(outcome.toolbox.len() > Toolbox::default().len());
    assert!(outcome.toolbox.len() <= Toolbox::default().len() + sols.len());

    let mut tb = Toolbox::default();
    assert!(augment_toolbox(&mut tb, &sols[0], "x").unwrap());
    assert!(!augment_toolbox(&mut tb, &sols[0], "y").unwrap());

    // A toolbox holding only the composite places it.
    let only = Toolbox::new(vec![tb.templates().last().unwrap().clone()]).unwrap();
    let drawn = random_setup(&Setup::standard(3), &only, 1, &mut trial_rng(0, 0));
    assert!(matches!(drawn.elements[0], Element::Composite { .. }));
}

#[test]
fn config_validation() {
    assert!(scan(0, 0).validate().is_err());
    let mut c = scan(10, 0);
    c.workers = 0;
    assert!(c.validate().is_err());
    let mut c = scan(10, 0);
    c.toolbox = Toolbox::new(vec![Template::Hologram(vec![9])]).unwrap();
    assert!(c.validate().is_err());
    let mut c = scan(10, 0);
    c.base.detection.trigger.path = Path(9);
    assert!(c.validate().is_err());
}

#[test]
fn gate_objective_runs_through_the_pipeline() {
    let config = SearchConfig { budget: 200, ..SearchConfig::new("gate:2x3".parse().unwrap()) };
    let (_, outcome) = collect(&config);
    assert_eq!(outcome.stats.stage_sum(), 200);
    assert_eq!(outcome.stats.no_mixing, 0);
}

#[test]
#[ignore = "throughput probe"]
fn scan_throughput() {
    let t = std::time::Instant::now();
    let config = SearchConfig { progress_every: Some(5000), ..scan(20_000, 1) };
    let (sols, outcome) = collect(&config);
    eprintln!(
        "{:?} {:?} {:?}",
        t.elapsed(),
        outcome.stats,
        sols.iter().map(|s| s.certificate.clone()).collect::<Vec<_>>()
    );
}
