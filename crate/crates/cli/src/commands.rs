use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use qexp::block_growth::{grow_until, GrowthMode, GrowthSettings, Target};
use qexp::objectives::{Objective, SrvRegistry};
use qexp::search::{run_search, Solution};
use qexp::setup::Setup;
use qexp::state::PhotonicState;

use crate::config::{file_or_inline, read, RunConfig};
use crate::error::{CliError, EXIT_NEGATIVE, EXIT_OK};
use crate::manifest::{unix_ms, write_atomic, RunManifest};
use crate::{GrowArgs, RenderArgs, SearchArgs, SimplifyArgs, SrvArgs, VerifyArgs};

type CmdResult = Result<u8, CliError>;

pub const SOLUTIONS_FILE: &str = "solutions.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

fn flag_overrides(a: &SearchArgs) -> Result<RunConfig, CliError> {
    Ok(RunConfig {
        objective: a.objective.clone(),
        seed: a.seed,
        budget: a.budget,
        workers: a.workers,
        toolbox: a.toolbox.as_deref().map(file_or_inline).transpose()?,
        setup_file: a.setup.clone(),
        dim: a.dim,
        max_elements: a.max_elements,
        stop_after: a.stop_after,
        progress_every: a.progress,
        enumerate: a.enumerate.then_some(true),
        augment_toolbox: a.augment.then_some(true),
        audit: a.audit.then_some(true),
        simplify: a.no_simplify.then_some(false),
        timestamps: a.timestamps.then_some(true),
        ..RunConfig::default()
    })
}

pub fn search(args: SearchArgs) -> CmdResult {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.overlay(&flag_overrides(&args)?);
    let (search, snapshot) = cfg.resolve()?;

    let out = &args.out.out;
    fs::create_dir_all(out)?;
    let mut log = File::create(out.join(SOLUTIONS_FILE))?;

    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        eprintln!("qexp: Ctrl-C handler unavailable: {e}");
    }

    let started = unix_ms();
    let mut written = 0u64;
    let outcome = run_search(&search, &cancel, |sol| {
        let mut line = serde_json::to_vec(sol).expect("solution serializes");
        line.push(b'\n');
        log.write_all(&line)?;
        log.flush()?;
        written += 1;
        Ok(())
    })?;

    let manifest = RunManifest::new(snapshot, started, &outcome, written);
    write_atomic(&out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    let s = &outcome.stats;
    println!(
        "trials {} | no-mixing {} | empty {} | mode-count {} | miss {} | hits {} | solutions {}{}",
        s.trials,
        s.no_mixing,
        s.empty,
        s.mode_count,
        s.objective_miss,
        s.hits,
        written,
        if outcome.cancelled { " | cancelled" } else { "" }
    );
    if search.audit {
        println!("audited {} | prune violations {}", s.audited, s.audit_violations);
    }
    for (srv, hits) in &outcome.registry {
        println!("srv {srv} x{hits}");
    }
    println!("wrote {}", out.display());
    Ok(if outcome.cancelled && written == 0 { EXIT_NEGATIVE } else { EXIT_OK })
}

fn looks_like_jsonl(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

fn manifest_objective(log: &Path) -> Result<String, CliError> {
    let path = log.parent().unwrap_or(Path::new("")).join(MANIFEST_FILE);
    let manifest: RunManifest = serde_json::from_str(&read(&path)?)?;
    manifest.config.objective.ok_or_else(|| CliError::usage(format!("{} records no objective", path.display())))
}

fn print_certificate(cert: &impl serde::Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string(cert)?);
    Ok(())
}

pub fn verify(args: VerifyArgs) -> CmdResult {
    let objective = args.objective.as_deref().map(str::parse::<Objective>).transpose()?;

    if let Some(text) = &args.state {
        let state: PhotonicState = text.parse()?;
        println!("srv {}", state.srv()?);
        let Some(objective) = objective else { return Ok(EXIT_OK) };
        if !objective.is_state_based() {
            return Err(CliError::usage(format!("objective {objective} needs a setup, not a state")));
        }
        return match objective.evaluate_state(&state, &SrvRegistry::new()) {
            Some(cert) => print_certificate(&cert).map(|_| EXIT_OK),
            None => {
                println!("no match");
                Ok(EXIT_NEGATIVE)
            }
        };
    }

    let path = args.file.as_deref().ok_or_else(|| CliError::usage("give a file or --state"))?;
    let text = read(path)?;

    if looks_like_jsonl(&text) {
        let objective = match objective {
            Some(o) => o,
            None => manifest_objective(path)?.parse()?,
        };
        let mut checked = 0;
        let mut failed = 0;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let sol: Solution = serde_json::from_str(line)
                .map_err(|e| CliError::usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
            let ok = sol.verify(&objective)?;
            println!("trial {}: {}", sol.trial, if ok { "ok" } else { "MISMATCH" });
            checked += 1;
            failed += usize::from(!ok);
        }
        println!("{checked} checked, {failed} failed");
        return Ok(if checked > 0 && failed == 0 { EXIT_OK } else { EXIT_NEGATIVE });
    }

    let objective = objective.ok_or_else(|| CliError::usage("verifying a setup file needs --objective"))?;
    let setup: Setup = text.parse()?;
    match objective.evaluate(&setup, &SrvRegistry::new())? {
        Some(cert) => print_certificate(&cert).map(|_| EXIT_OK),
        None => {
            println!("no match");
            Ok(EXIT_NEGATIVE)
        }
    }
}

pub fn srv(args: SrvArgs) -> CmdResult {
    let state = match (&args.state, &args.setup) {
        (Some(text), _) => text.parse::<PhotonicState>()?,
        (None, Some(path)) => read(path)?.parse::<Setup>()?.simulate()?,
        (None, None) => return Err(CliError::usage("give a state or --setup")),
    };
    if state.is_empty() {
        println!("empty state");
        return Ok(EXIT_NEGATIVE);
    }
    println!("{}", state.srv()?);
    Ok(EXIT_OK)
}

pub fn simplify(args: SimplifyArgs) -> CmdResult {
    let objective: Objective = args.objective.parse()?;
    let setup: Setup = read(&args.setup)?.parse()?;
    let simple = setup.simplify(|s| objective.holds(s))?;
    let text = simple.to_string();
    match &args.output {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    eprintln!("{} -> {} elements", setup.elements.len(), simple.elements.len());
    Ok(EXIT_OK)
}

pub fn grow(args: GrowArgs) -> CmdResult {
    let mode: GrowthMode = args.mode.parse()?;
    let target: Target = read(&args.target)?.parse()?;
    let settings = GrowthSettings {
        threshold: args.threshold,
        max_blocks: args.max_blocks,
        restarts: args.restarts,
        max_iters: args.max_iters,
        seed: args.seed,
        mode,
        ..GrowthSettings::default()
    };
    let res = grow_until(&target, &settings)?;

    let out = &args.out.out;
    fs::create_dir_all(out)?;
    write_atomic(&out.join("growth.json"), res.to_json().as_bytes())?;
    write_atomic(&out.join("trace.csv"), res.trace_csv().as_bytes())?;

    if target.scale != 1.0 {
        println!("target rescaled by {}", target.scale);
    }
    println!(
        "{} after {} block(s), fidelity {:.6}, {} evaluations",
        if res.converged { "converged" } else { "not converged" },
        res.blocks.len(),
        res.fidelity,
        res.evaluations
    );
    for (i, b) in res.blocks.iter().enumerate() {
        let angles: Vec<String> = b.angles.iter().map(|a| format!("{a:.6}")).collect();
        println!("block {}: {}", i + 1, angles.join(" "));
    }
    Ok(if res.converged { EXIT_OK } else { EXIT_NEGATIVE })
}

pub fn render(args: RenderArgs) -> CmdResult {
    let setup: Setup = read(&args.setup)?.parse()?;
    setup.validate()?;
    print!("{}", setup.render());
    Ok(EXIT_OK)
}
