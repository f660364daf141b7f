//! `debiasot`: experiment runner.

mod config;
mod run;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use debiasot::experiments::{run_criterion, CriterionOutcome, Faults, CRITERIA};
use debiasot::io::{CostJson, MeasureJson};
use debiasot::random::derive_seed;

use config::{ConfigError, Experiment, ExperimentConfig, Format, Generator, Instance, OutputSpec};
use run::{Report, RunError, Table};

#[derive(Parser, Debug)]
#[command(name = "debiasot", version, about = "Debiased transport experiments")]
struct Cli {
    /// JSON experiment config; subcommand flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for results and the run manifest.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    CheckDebias(RunArgs),
    Sinkhorn(RunArgs),
    Divergence(RunArgs),
    Uot(RunArgs),
    Mmd(RunArgs),
    Decompose(RunArgs),
    Interpolate(RunArgs),
    GaussianIdentity(RunArgs),
    SaddleCheck(RunArgs),
    KlLemmas(RunArgs),
    NegdefRoundtrip(RunArgs),
    Counterexample(RunArgs),
    /// Runs every acceptance criterion.
    Suite(SuiteArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    epsilon: Vec<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// JSON cost file: `{"entries": [[...]], "symmetric": bool}`.
    #[arg(long)]
    cost: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    nu: Vec<f64>,
    /// Generate a random instance with this many points.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Generated cost: `squared`, `distance` or `power:<p>`.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    z_points: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    strict: bool,
    /// Include transport plans in sinkhorn output.
    #[arg(long)]
    plan: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteName {
    Fast,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fault {
    DebiasSignFlip,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[arg(value_enum)]
    name: SuiteName,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
}

const VALIDATION: u8 = 2;
const FAILURE: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Exit { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct Exit {
    code: u8,
    message: String,
}

fn validation(message: impl std::fmt::Display) -> Exit {
    Exit {
        code: VALIDATION,
        message: message.to_string(),
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Exit {
    Exit {
        code: FAILURE,
        message: format!("{}: {e}", path.display()),
    }
}

fn execute(cli: Cli) -> Result<u8, Exit> {
    let (experiment, args) = match cli.command {
        Some(Command::Suite(s)) => return Ok(suite(&s, cli.output.as_deref())),
        Some(cmd) => {
            let (e, a) = split(cmd);
            (Some(e), a)
        }
        None => (None, RunArgs::default()),
    };
    let mut cfg = match (&cli.config, experiment) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
            let cfg = ExperimentConfig::parse(&text).map_err(|e| located(path, &e))?;
            if let Some(e) = experiment.filter(|e| *e != cfg.experiment) {
                return Err(validation(format!(
                    "subcommand {} does not match config experiment {}",
                    e.name(),
                    cfg.experiment.name()
                )));
            }
            cfg
        }
        (None, Some(e)) => ExperimentConfig::new(e),
        (None, None) => return Err(validation("give a subcommand or --config")),
    };
    apply(&mut cfg, args)?;
    if let Some(f) = cli.format {
        cfg.output
            .get_or_insert(OutputSpec {
                path: None,
                format: None,
            })
            .format = Some(f);
    }
    cfg.validate(None).map_err(validation)?;
    let dir = cli
        .output
        .or_else(|| cfg.output.as_ref().and_then(|o| o.path.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let report = match run::run(&cfg) {
        Ok(r) => r,
        Err(RunError::Invalid(m)) => return Err(validation(m)),
        Err(RunError::Failed(m)) => {
            return Err(Exit {
                code: FAILURE,
                message: m,
            })
        }
    };
    let outputs = write_outputs(&cfg, &report, &dir)?;
    write_manifest(&dir, &cfg, &outputs, report.passed())?;
    for c in &report.checks {
        println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.label, c.detail);
    }
    for o in &outputs {
        println!("wrote {}", dir.join(o).display());
    }
    if report.passed() {
        Ok(0)
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.label.as_str())
            .collect();
        eprintln!("failed assertions: {}", failed.join(", "));
        Ok(FAILURE)
    }
}

fn located(path: &Path, e: &ConfigError) -> Exit {
    validation(format!("{}: {e}", path.display()))
}

fn split(cmd: Command) -> (Experiment, RunArgs) {
    match cmd {
        Command::CheckDebias(a) => (Experiment::CheckDebias, a),
        Command::Sinkhorn(a) => (Experiment::Sinkhorn, a),
        Command::Divergence(a) => (Experiment::Divergence, a),
        Command::Uot(a) => (Experiment::Uot, a),
        Command::Mmd(a) => (Experiment::Mmd, a),
        Command::Decompose(a) => (Experiment::Decompose, a),
        Command::Interpolate(a) => (Experiment::Interpolate, a),
        Command::GaussianIdentity(a) => (Experiment::GaussianIdentity, a),
        Command::SaddleCheck(a) => (Experiment::SaddleCheck, a),
        Command::KlLemmas(a) => (Experiment::KlLemmas, a),
        Command::NegdefRoundtrip(a) => (Experiment::NegdefRoundtrip, a),
        Command::Counterexample(a) => (Experiment::Counterexample, a),
        Command::Suite(_) => unreachable!("handled by the caller"),
    }
}

fn list(v: Vec<f64>) -> Option<Vec<f64>> {
    (!v.is_empty()).then_some(v)
}

/// Overlays command-line flags on `cfg`.
fn apply(cfg: &mut ExperimentConfig, a: RunArgs) -> Result<(), Exit> {
    cfg.seed = a.seed.or(cfg.seed);
    if !a.epsilon.is_empty() {
        cfg.epsilons = a.epsilon;
    }
    cfg.rho = a.rho.or(cfg.rho);
    cfg.x = list(a.x).or(cfg.x.take());
    cfg.y = list(a.y).or(cfg.y.take());
    cfg.t = list(a.t).or(cfg.t.take());
    cfg.step = a.step.or(cfg.step);
    cfg.n_samples = a.samples.or(cfg.n_samples);
    cfg.instances = a.instances.or(cfg.instances);
    cfg.strict |= a.strict;
    cfg.include_plan |= a.plan;
    let touches_instance = a.cost.is_some()
        || !a.mu.is_empty()
        || !a.nu.is_empty()
        || a.points.is_some()
        || a.dim.is_some()
        || a.kind.is_some();
    if !touches_instance {
        return Ok(());
    }
    let inst = cfg.instance.get_or_insert_with(Instance::default);
    if let Some(path) = a.cost {
        let text = fs::read_to_string(&path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
        let cost: CostJson = serde_json::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))?;
        inst.cost = Some(cost);
    }
    if !a.mu.is_empty() {
        inst.mu = Some(MeasureJson {
            weights: a.mu,
            coordinates: None,
        });
    }
    if !a.nu.is_empty() {
        inst.nu = Some(MeasureJson {
            weights: a.nu,
            coordinates: None,
        });
    }
    if a.points.is_some() || a.dim.is_some() || a.kind.is_some() || a.z_points.is_some() {
        let g = inst.generator.get_or_insert(Generator {
            kind: "uniform".into(),
            n_points: 0,
            dimension: 1,
            cost: "squared".into(),
            z_points: None,
        });
        g.n_points = a.points.unwrap_or(g.n_points);
        g.dimension = a.dim.unwrap_or(g.dimension);
        g.cost = a.kind.unwrap_or(std::mem::take(&mut g.cost));
        g.z_points = a.z_points.or(g.z_points);
    }
    Ok(())
}

fn write_outputs(cfg: &ExperimentConfig, report: &Report, dir: &Path) -> Result<Vec<String>, Exit> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let hash = cfg.hash();
    let name = cfg.experiment.name();
    let (file, bytes) = match (cfg.format(), &report.table) {
        (Format::Csv, Some(table)) => (
            format!("{name}.csv"),
            csv_bytes(table, &hash).map_err(|e| io_failure(dir, e))?,
        ),
        _ => {
            let doc = json!({
                "experiment": name,
                "config_hash": hash,
                "seed": cfg.seed,
                "results": report.results,
                "assertions": report.checks,
                "passed": report.passed(),
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
            text.push('\n');
            (format!("{name}.json"), text.into_bytes())
        }
    };
    let path = dir.join(&file);
    fs::write(&path, bytes).map_err(|e| io_failure(&path, e))?;
    Ok(vec![file])
}

fn csv_bytes(table: &Table, hash: &str) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(table.header.iter().map(String::as_str).chain(["config_hash"]))?;
    for row in &table.rows {
        w.write_record(row.iter().map(String::as_str).chain([hash]))?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig, outputs: &[String], passed: bool) -> Result<(), Exit> {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default();
    let manifest = json!({
        "experiment": cfg.experiment.name(),
        "config_hash": cfg.hash(),
        "config": cfg,
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "outputs": outputs,
        "passed": passed,
        "timestamp": timestamp,
    });
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_failure(&path, e))
}

/// Seeds for one criterion: the suite seed once, or ten derived streams.
fn member_seeds(suite: SuiteName, seed: u64, name: &str, stochastic: bool) -> Vec<u64> {
    match suite {
        SuiteName::Full if stochastic => (0..10).map(|k| derive_seed(seed, &format!("{name}/{k}"))).collect(),
        _ => vec![derive_seed(seed, name)],
    }
}

fn suite(args: &SuiteArgs, output: Option<&Path>) -> u8 {
    let faults = Faults {
        debias_sign_flip: args.inject_fault == Some(Fault::DebiasSignFlip),
    };
    let jobs: Vec<_> = CRITERIA
        .iter()
        .flat_map(|c| {
            member_seeds(args.name, args.seed, c.name, c.stochastic)
                .into_iter()
                .map(move |s| (c, s))
        })
        .collect();
    let outcomes: Vec<CriterionOutcome> = jobs.par_iter().map(|(c, s)| run_criterion(c, *s, &faults)).collect();
    let mut by_id: BTreeMap<u8, Vec<&CriterionOutcome>> = BTreeMap::new();
    for o in &outcomes {
        by_id.entry(o.id).or_default().push(o);
        println!("{o}");
    }
    let failed: Vec<&str> = by_id
        .values()
        .filter(|runs| runs.iter().any(|o| !o.passed()))
        .map(|runs| runs[0].name)
        .collect();
    println!(
        "{} of {} criteria passed{}",
        by_id.len() - failed.len(),
        by_id.len(),
        if args.name == SuiteName::Full {
            " across 10 seeds"
        } else {
            ""
        }
    );
    if let Some(dir) = output {
        if let Err(e) = write_suite_report(dir, args, &outcomes) {
            eprintln!("error: {}", e.message);
            return FAILURE;
        }
    }
    if failed.is_empty() {
        0
    } else {
        eprintln!("failed criteria: {}", failed.join(", "));
        FAILURE
    }
}

fn write_suite_report(dir: &Path, args: &SuiteArgs, outcomes: &[CriterionOutcome]) -> Result<(), Exit> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let rows: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            json!({
                "id": o.id, "name": o.name, "seed": o.seed, "passed": o.passed(),
                "checks": o.checks, "error": o.error,
            })
        })
        .collect();
    let suite = match args.name {
        SuiteName::Fast => "fast",
        SuiteName::Full => "full",
    };
    let doc = json!({"suite": suite, "seed": args.seed, "criteria": rows});
    let path = dir.join(format!("suite-{suite}.json"));
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_failure(&path, e))
}
