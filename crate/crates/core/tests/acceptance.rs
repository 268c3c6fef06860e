//! Acceptance checks 1-10. Prints one PASS/FAIL line per check and exits
//! non-zero if any check fails or exceeds its time limit.

use std::collections::HashSet;
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use qexp::block_growth::{grow_until, GrowthSettings, Jones, Target};
use qexp::elements::{Element, Toolbox};
use qexp::exact::CycNum;
use qexp::objectives::{gate_match, Certificate, GateResponse, Objective};
use qexp::search::{run_search, SearchConfig, SearchOutcome, Solution};
use qexp::setup::{Setup, SimOptions};
use qexp::state::{FockTerm, ModeLabel, Path, PhotonicState, Srv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn srv_of(text: &str) -> Result<Srv, String> {
    let st: PhotonicState = text.parse().map_err(|e| format!("{e}"))?;
    st.srv().map_err(|e| e.to_string())
}

fn srv_golden() -> Check {
    let cases = [
        ("|a:0 b:0 c:0⟩ + |a:1 b:1 c:1⟩ + |a:2 b:2 c:2⟩", [3, 3, 3]),
        ("|a:0 b:0 c:0⟩ + |a:1 b:1 c:1⟩ + |a:2 b:2 c:1⟩", [3, 3, 2]),
        ("|a:0 b:0 c:0⟩ + |a:1 b:0 c:1⟩ + |a:2 b:1 c:0⟩ + |a:3 b:1 c:1⟩", [4, 2, 2]),
    ];
    let mut got = Vec::new();
    for (state, want) in cases {
        let srv = srv_of(state)?;
        ensure(srv == Srv::new(want.to_vec()), || format!("{state}: got {srv}"))?;
        got.push(srv.to_string());
    }
    Ok(got.join(" "))
}

fn hong_ou_mandel() -> Check {
    let (a, b) = (Path(0), Path(1));
    let input =
        PhotonicState::from_terms(2, [(FockTerm::new([ModeLabel::new(a, 0), ModeLabel::new(b, 0)]), CycNum::one())])
            .map_err(|e| e.to_string())?;
    let rules = Element::BeamSplitter(a, b).rules(&SimOptions::default().cutoff()).map_err(|e| e.to_string())?;
    let out = input.substitute(&rules, &SimOptions::default().cutoff()).map_err(|e| e.to_string())?.state;
    let coincidence = out.iter().filter(|(t, _)| t.count_in(a) == 1 && t.count_in(b) == 1).count();
    ensure(coincidence == 0, || format!("coincidence terms survive: {out}"))?;
    let bunched = out.iter().filter(|(t, _)| t.count_in(a) == 2 || t.count_in(b) == 2).count();
    ensure(bunched == 2, || format!("expected both photons together, got {out}"))?;
    Ok(format!("output {out}"))
}

fn random_amp(rng: &mut ChaCha8Rng) -> CycNum {
    let mut amp = CycNum::zero();
    for _ in 0..rng.gen_range(1..=2) {
        amp = amp + CycNum::from_integer(rng.gen_range(-3..=3)) * CycNum::phase(rng.gen_range(0..8));
    }
    amp
}

fn random_terms(rng: &mut ChaCha8Rng, paths: &[Path], n: usize) -> Vec<(FockTerm, CycNum)> {
    let modes: Vec<Vec<i32>> = paths
        .iter()
        .map(|_| {
            let k = rng.gen_range(1..=4);
            (-2..=2).collect::<Vec<_>>().into_iter().sorted_by_key(|_| rng.gen::<u32>()).take(k).collect()
        })
        .collect();
    (0..n)
        .map(|_| {
            let labels = paths.iter().zip(&modes).map(|(&p, ms)| ModeLabel::new(p, ms[rng.gen_range(0..ms.len())]));
            (FockTerm::new(labels), random_amp(rng))
        })
        .collect()
}

/// Numeric ranks of every one-versus-rest reshaping.
fn svd_ranks(st: &PhotonicState) -> Vec<usize> {
    let terms: Vec<(Vec<i32>, Complex64)> =
        st.iter().map(|(t, a)| (t.labels().iter().map(|l| l.oam).collect(), a.to_complex())).collect();
    (0..3)
        .map(|slot| {
            let rows: Vec<i32> = terms.iter().map(|(m, _)| m[slot]).unique().collect();
            let rest =
                |m: &[i32]| m.iter().enumerate().filter(|(i, _)| *i != slot).map(|(_, x)| *x).collect::<Vec<_>>();
            let cols: Vec<Vec<i32>> = terms.iter().map(|(m, _)| rest(m)).unique().collect();
            let mut mat = DMatrix::<Complex64>::zeros(rows.len(), cols.len());
            for (m, a) in &terms {
                let r = rows.iter().position(|x| *x == m[slot]).unwrap();
                let c = cols.iter().position(|x| *x == rest(m)).unwrap();
                mat[(r, c)] += a;
            }
            let sv = mat.singular_values();
            let top = sv.max();
            sv.iter().filter(|s| **s > 1e-8 * top).count()
        })
        .sorted_by(|x, y| y.cmp(x))
        .collect()
}

fn exact_vs_svd() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let abc = [Path(0), Path(1), Path(2)];
    let (mut checked, mut deficient) = (0, 0);
    while checked < 1000 {
        let n = rng.gen_range(1..=8);
        let st = if checked % 2 == 0 {
            PhotonicState::from_terms(3, random_terms(&mut rng, &abc, n))
        } else {
            // Product of a one-photon and a two-photon part, sometimes
            // perturbed by a single extra term.
            let (n1, n2) = (rng.gen_range(1..=3), rng.gen_range(1..=4));
            let one = PhotonicState::from_terms(1, random_terms(&mut rng, &abc[..1], n1)).unwrap();
            let two = PhotonicState::from_terms(2, random_terms(&mut rng, &abc[1..], n2)).unwrap();
            let mut st = one.product(&two);
            if rng.gen_bool(0.5) {
                for (t, a) in random_terms(&mut rng, &abc, 1) {
                    st.add_term(t, a).unwrap();
                }
            }
            Ok(st)
        }
        .map_err(|e| e.to_string())?;
        if st.is_empty() {
            continue;
        }
        let exact = st.srv().map_err(|e| e.to_string())?;
        let numeric = svd_ranks(&st);
        ensure(exact.ranks() == numeric.as_slice(), || format!("{st}: exact {exact}, svd {numeric:?}"))?;
        deficient += usize::from(exact.ranks().contains(&1));
        checked += 1;
    }
    Ok(format!("{checked} states agree ({deficient} with a product bipartition)"))
}

fn run(config: &SearchConfig) -> Result<(SearchOutcome, Vec<Solution>), String> {
    let mut found = Vec::new();
    let outcome = run_search(config, &AtomicBool::new(false), |s| {
        found.push(s.clone());
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    Ok((outcome, found))
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(8)
}

fn prune_audit() -> Check {
    let mut report = Vec::new();
    for objective in ["ghz:2+mavericks", "ghz:3"] {
        let mut config = SearchConfig::new(objective.parse().map_err(|e| format!("{e}"))?);
        config.base.options.max_elements = 8;
        config.budget = 10_000;
        config.seed = 4;
        config.audit = true;
        config.simplify = false;
        config.workers = workers();
        let (out, _) = run(&config)?;
        let s = &out.stats;
        ensure(s.audit_violations == 0, || format!("{objective}: {} pruned setups pass", s.audit_violations))?;
        ensure(s.audited == s.no_mixing + s.empty + s.mode_count, || format!("{objective}: audited {}", s.audited))?;
        report.push(format!("{objective}: {} pruned, 0 pass", s.audited));
    }
    Ok(report.join("; "))
}

fn micro_search() -> Check {
    let base: Setup = "paths 4\nmax_elements 3\nsource SPDC[a,b,dim=3,modes=0..1]\nsource SPDC[c,d,dim=3,modes=0..1]\n\
                       trigger d:0\ncoincidence a,b,c\n"
        .parse()
        .map_err(|e| format!("{e}"))?;
    let mut config = SearchConfig::new(Objective::GhzPattern { dims: 2, allow_mavericks: false });
    config.base = base;
    config.toolbox = "BS, LI".parse().map_err(|e| format!("{e}"))?;
    config.enumerate = true;
    config.simplify = false;
    config.workers = workers();
    let total = config.trial_count();
    let (out, found) = run(&config)?;
    ensure(out.stats.trials == total, || format!("visited {} of {total}", out.stats.trials))?;
    let witness = found.iter().find(|s| matches!(s.certificate, Certificate::Ghz(_))).ok_or("no GHZ setup found")?;
    let srv = witness.parsed_setup().and_then(|s| s.simulate()).and_then(|s| s.srv()).map_err(|e| e.to_string())?;
    ensure(srv == Srv::new(vec![2, 2, 2]), || format!("witness has SRV {srv}"))?;
    let chain = witness.setup.lines().skip_while(|l| !l.starts_with("coincidence")).skip(1).join("; ");
    Ok(format!("{} of {total} setups pass, e.g. {chain}", found.len()))
}

fn stochastic_scan() -> Check {
    let mut config = SearchConfig::new(Objective::SrvScan);
    config.budget = 1_000_000;
    config.seed = 0;
    config.workers = workers();
    let (out, _) = run(&config)?;
    let srvs: Vec<&Srv> = out.registry.iter().map(|(s, _)| s).collect();
    ensure(srvs.iter().all(|s| s.all_at_least(2)), || "registry holds a product SRV".into())?;
    ensure(srvs.len() >= 3, || format!("only {} SRVs", srvs.len()))?;
    ensure(srvs.iter().any(|s| s.ranks() == [3, 3, 2]), || "(3,3,2) missing".into())?;
    Ok(format!("{} SRVs on {} workers: {}", srvs.len(), config.workers, srvs.iter().join(" ")))
}

fn median(v: &mut [u64]) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

fn augmentation_direction() -> Check {
    let plain = "BS, REFL, Dove(0|1|2|3|4|5|6|7), Holo(-2|-1|1|2), PS(1|2|3|4|5|6|7)";
    let sorter = "COMP[leach]{BS[a,b];Dove[a,k=0];Dove[b,k=2];PS[b,k=4];BS[a,b]}";
    let budget = 100_000;
    let mut trials = [Vec::new(), Vec::new()];
    for (arm, text) in [plain.to_string(), format!("{plain}, {sorter}")].iter().enumerate() {
        let toolbox: Toolbox = text.parse().map_err(|e| format!("{e}"))?;
        for seed in 0..20 {
            let mut config = SearchConfig::new(Objective::GhzPattern { dims: 2, allow_mavericks: false });
            config.toolbox = toolbox.clone();
            config.seed = seed;
            config.budget = budget;
            config.stop_after = Some(1);
            config.simplify = false;
            let (_, found) = run(&config)?;
            // Unsolved runs count as the full budget.
            trials[arm].push(found.first().map_or(budget, |s| s.trial + 1));
        }
    }
    let (without, with) = (median(&mut trials[0]), median(&mut trials[1]));
    ensure(with < without, || format!("median trials {with} with sorter vs {without} without"))?;
    Ok(format!("median trials to first solution: {without} without, {with} with the sorter"))
}

fn determinism() -> Check {
    let jsonl = || -> Result<Vec<u8>, String> {
        let mut config = SearchConfig::new(Objective::GhzPattern { dims: 2, allow_mavericks: false });
        config.seed = 8;
        config.budget = 5000;
        let (_, found) = run(&config)?;
        let mut bytes = Vec::new();
        for s in &found {
            serde_json::to_writer(&mut bytes, s).map_err(|e| e.to_string())?;
            bytes.push(b'\n');
        }
        Ok(bytes)
    };
    let (a, b) = (jsonl()?, jsonl()?);
    ensure(!a.is_empty(), || "no solutions to compare".into())?;
    ensure(a == b, || "solution logs differ".into())?;
    Ok(format!("{} identical lines", a.iter().filter(|c| **c == b'\n').count()))
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn haar_su2(rng: &mut ChaCha8Rng) -> Jones {
    let mut q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= n);
    Jones::new(c(q[0], q[1]), c(q[2], q[3]), c(-q[2], q[3]), c(q[0], -q[1]))
}

fn block_growth() -> Check {
    let limit = Duration::from_secs(120);
    let mut slowest = Duration::ZERO;
    let mut timed = |target: &Target, settings: &GrowthSettings| {
        let t = Instant::now();
        let res = grow_until(target, settings).map_err(|e| e.to_string());
        slowest = slowest.max(t.elapsed());
        res
    };

    let id = timed(&Target::identity(), &GrowthSettings { threshold: 0.999, max_blocks: 1, ..Default::default() })?;
    ensure(id.converged, || format!("identity reached {}", id.fidelity))?;

    let proj =
        Target::new(Jones::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))).map_err(|e| e.to_string())?;
    let p = timed(&proj, &GrowthSettings { threshold: 0.98, max_blocks: 3, ..Default::default() })?;
    ensure(p.converged && p.blocks.len() <= 3, || format!("projector: {} blocks, {}", p.blocks.len(), p.fidelity))?;

    let mut ok = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d =
            Jones::new(c(rng.gen_range(0.3..=1.0), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(rng.gen_range(0.3..=1.0), 0.0));
        let target = Target::new(haar_su2(&mut rng) * d * haar_su2(&mut rng)).map_err(|e| e.to_string())?;
        let res = timed(&target, &GrowthSettings { threshold: 0.98, max_blocks: 5, seed, ..Default::default() })?;
        ok += usize::from(res.converged && res.blocks.len() <= 5);
    }
    ensure(ok >= 95, || format!("{ok}/100 random contractions converged"))?;
    ensure(slowest < limit, || format!("slowest run took {slowest:?}"))?;
    Ok(format!(
        "identity {:.6} in 1 block; projector {:.4} in {}; {ok}/100 contractions; slowest run {:.2?}",
        id.fidelity,
        p.fidelity,
        p.blocks.len(),
        slowest
    ))
}

/// Tries every row and column subset and checks the distinctness rules on
/// the resulting output grid.
fn brute_force_gate(cells: &[Vec<Option<GateResponse>>], dc: usize, dt: usize) -> bool {
    let (nc, nt) = (cells.len(), cells[0].len());
    (0..nc).combinations(dc).any(|rows| {
        (0..nt).combinations(dt).any(|cols| {
            let grid: Option<Vec<Vec<i32>>> =
                rows.iter().map(|&r| cols.iter().map(|&k| cells[r][k].map(|g| g.target)).collect()).collect();
            let Some(grid) = grid else { return false };
            let rows_ok = grid.iter().all(|row| row.iter().collect::<HashSet<_>>().len() == dt);
            let cols_ok = (0..dt).all(|k| grid.iter().map(|row| row[k]).collect::<HashSet<_>>().len() == dc);
            rows_ok && cols_ok
        })
    })
}

fn gate_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut found, mut agree) = (0, 0);
    for _ in 0..500 {
        let nc = rng.gen_range(2..=4);
        let nt = rng.gen_range(3..=6);
        let cells: Vec<Vec<Option<GateResponse>>> = (0..nc)
            .map(|_| {
                (0..nt)
                    .map(|_| {
                        rng.gen_bool(0.9)
                            .then(|| GateResponse { control: rng.gen_range(-2..3), target: rng.gen_range(0..4) })
                    })
                    .collect()
            })
            .collect();
        let controls: Vec<i32> = (0..nc).collect();
        let targets: Vec<i32> = (10..10 + nt).collect();
        let oracle = |ci: i32, ti: i32| cells[ci as usize][(ti - 10) as usize];
        let cert = gate_match(&oracle, &controls, &targets, 2, 3).map_err(|e| e.to_string())?;
        let expected = brute_force_gate(&cells, 2, 3);
        if let Some(cert) = &cert {
            // The certificate must describe the table it came from.
            for (r, &ci) in cert.control_in.iter().enumerate() {
                for (k, &ti) in cert.target_in.iter().enumerate() {
                    let g = oracle(ci, ti).ok_or("certificate uses an empty cell")?;
                    ensure(g.target == cert.target_out[r][k] && g.control == cert.control_out[r][k], || {
                        "certificate disagrees with the table".into()
                    })?;
                }
            }
            found += 1;
        }
        ensure(cert.is_some() == expected, || format!("disagreement on {cells:?}"))?;
        agree += 1;
    }
    Ok(format!("{agree}/500 agree ({found} tables contain the pattern)"))
}

fn main() -> ExitCode {
    let checks: [Criterion; 10] = [
        ("SRV golden values", 1, srv_golden),
        ("Hong-Ou-Mandel cancellation", 1, hong_ou_mandel),
        ("exact rank vs SVD", 30, exact_vs_svd),
        ("prune soundness audit", 600, prune_audit),
        ("exhaustive micro-search", 300, micro_search),
        ("stochastic SRV scan", 1800, stochastic_scan),
        ("toolbox augmentation direction", 1800, augmentation_direction),
        ("determinism", 300, determinism),
        ("block growth", 1800, block_growth),
        ("gate checker equivalence", 60, gate_equivalence),
    ];
    let only: Option<usize> = std::env::var("QEXP_ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, limit, check)) in checks.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let over = took > Duration::from_secs(*limit);
        let (verdict, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {limit} s limit")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        failed += usize::from(verdict == "FAIL");
        println!("{verdict} {n:>2} {name} [{:.2} s] {detail}", took.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}
