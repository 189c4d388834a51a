use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pinsync::bounds::{soundness_sample, BoundConstants};
use pinsync::config::{load_config, LoadedConfig, RunManifest};
use pinsync::engine::Simulation;
use pinsync::output;
use pinsync::rules::{zeno_lower_bound, Rule};
use pinsync::Error;

/// Event-triggered pinning synchronization on Markov-switching networks.
#[derive(Parser)]
#[command(name = "pinsync", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the mode-wise stability certificate.
    Check(Common),
    /// Simulate one trial and write trajectory, events and mode path.
    Run(RunArgs),
    /// Run a Monte-Carlo ensemble and write mean-square curves.
    Ensemble(EnsembleArgs),
    /// Sample the trajectory bounds against paired integration.
    BoundsTest(BoundsArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_parser = parse_rule, value_name = "RULE")]
    rule: Option<Rule>,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_name = "DIR", env = "PINSYNC_OUT_DIR", default_value = "pinsync-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EnsembleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

fn parse_rule(s: &str) -> Result<Rule, String> {
    s.parse::<Rule>().map_err(|e| e.to_string())
}

enum Failure {
    Violation(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) | Error::DeltaOutOfRange { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Violation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Violation(format!("i/o error: {e}"))
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(args) => check(&args),
        Command::Run(args) => run(&args),
        Command::Ensemble(args) => ensemble(&args),
        Command::BoundsTest(args) => bounds_test(&args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Violation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &Common) -> Result<LoadedConfig, Failure> {
    let mut loaded = load_config(&common.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(rule) = common.rule {
        loaded.sim = loaded.sim.with_rule(rule);
        loaded
            .sim
            .validate()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(loaded)
}

fn create(dir: &Path, name: &str, manifest: &mut RunManifest) -> Result<BufWriter<File>, Failure> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    manifest.outputs.push(path.clone());
    Ok(BufWriter::new(File::create(path)?))
}

fn finish(dir: &Path, mut manifest: RunManifest, started: Instant) -> Result<(), Failure> {
    manifest.wall_clock = started.elapsed();
    std::fs::write(dir.join("manifest.txt"), manifest.render())?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn check(args: &Common) -> Outcome {
    let loaded = load(args)?;
    let sim = &loaded.sim;
    let started = Instant::now();
    let cert = sim.certificate()?;
    println!("config: {}", args.config.display());
    println!("digest: {}", loaded.digest);
    for (u, m) in cert.margins.iter().enumerate() {
        let verdict = if *m <= cert.tolerance { "ok" } else { "FAIL" };
        println!("mode {}: lambda_max = {m:.6e} {verdict}", u + 1);
    }
    println!("lambda_lo = {}", cert.lambda_lo);
    println!("lambda_hi = {}", cert.lambda_hi);
    println!("beta = {:.6}", sim.dynamics.quad.beta);
    if let Some(k) = cert.threshold_coeff {
        println!("threshold coefficient = {k:.6}");
    }
    if sim.a > 0.0 && sim.b > 0.0 {
        let zeno = zeno_lower_bound(
            sim.nodes(),
            sim.dynamics.lipschitz,
            sim.coupling,
            sim.pinning_gain,
            sim.a,
            sim.b,
        )?;
        println!("zeno lower bound = {zeno:.6e} s");
    }
    println!("elapsed = {:.3} s", started.elapsed().as_secs_f64());
    println!("{}", if cert.feasible { "feasible" } else { "infeasible" });
    Ok(cert.feasible)
}

fn run(args: &RunArgs) -> Outcome {
    let started = Instant::now();
    let loaded = load(&args.common)?;
    let seed = args.seed.unwrap_or(loaded.sim.seed);
    let rule = loaded.sim.rule;
    let horizon = loaded.sim.horizon;
    let sim = Simulation::new(loaded.sim)?;
    let trial = sim.run_trial(seed)?;

    let dir = &args.output.out;
    let mut manifest = RunManifest::new(&loaded.digest, seed);
    manifest.push("rule", rule);
    manifest.push("exploratory", trial.exploratory);
    manifest.push("rule_violations", trial.events.total_triggers());
    if let Some(stats) = trial.events.interval_stats() {
        manifest.push("min_interval", stats.min);
        manifest.push("mean_interval", stats.mean);
    }
    manifest.push("V_0", trial.record.lyapunov[0]);
    manifest.push("V_end", trial.record.lyapunov.last().copied().unwrap_or(f64::NAN));

    let mut w = create(dir, "trajectory.csv", &mut manifest)?;
    output::write_trajectory(&mut w, &trial.record)?;
    w.flush()?;
    let mut w = create(dir, "events.csv", &mut manifest)?;
    output::write_events(&mut w, &trial.events)?;
    w.flush()?;
    let mut w = create(dir, "modes.csv", &mut manifest)?;
    output::write_modes(&mut w, &trial.path)?;
    w.flush()?;
    let mut w = create(dir, "histogram.csv", &mut manifest)?;
    output::write_histogram(&mut w, &trial.events, (horizon - 1.0).max(0.0), horizon)?;
    w.flush()?;
    finish(dir, manifest, started)?;
    Ok(true)
}

fn ensemble(args: &EnsembleArgs) -> Outcome {
    let started = Instant::now();
    let mut loaded = load(&args.common)?;
    if let Some(seed) = args.seed {
        loaded.sim.seed = seed;
    }
    if let Some(trials) = args.trials {
        loaded.sim.trials = trials;
    }
    let (seed, trials, rule) = (loaded.sim.seed, loaded.sim.trials, loaded.sim.rule);
    let sim = Simulation::new(loaded.sim)?;
    let summary = sim.run_ensemble()?;

    let dir = &args.output.out;
    let mut manifest = RunManifest::new(&loaded.digest, seed);
    manifest.push("rule", rule);
    manifest.push("trials", trials);
    let show = |v: Option<f64>| v.map_or("none".to_string(), |r| r.to_string());
    manifest.push("fitted_rate", show(summary.fitted_rate));
    manifest.push("lyapunov_rate", show(summary.lyapunov_rate));
    manifest.push("mean_rule_violations", summary.mean_trigger_total());
    manifest.push("min_interval", show(summary.min_interval));
    let mut w = create(dir, "ensemble.csv", &mut manifest)?;
    output::write_ensemble(&mut w, &summary)?;
    w.flush()?;
    println!("fitted_rate = {}", show(summary.fitted_rate));
    finish(dir, manifest, started)?;
    Ok(true)
}

fn bounds_test(args: &BoundsArgs) -> Outcome {
    let started = Instant::now();
    let loaded = load_config(&args.config).map_err(|e| Failure::Config(e.to_string()))?;
    let dynamics = &loaded.sim.dynamics;
    let constants = BoundConstants::new(
        dynamics.lipschitz,
        dynamics.one_sided,
        loaded.sim.bounds.mu,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut samples = Vec::with_capacity(args.samples * 3);
    let mut violations = 0usize;
    for _ in 0..args.samples {
        for t in [0.01, 0.05, 0.1] {
            let s = soundness_sample(&dynamics.field, &constants, t, 1e-5, 5.0, 2.0, &mut rng)?;
            if !s.rho_holds(1e-6) || !s.varrho_holds(1e-6) {
                violations += 1;
                eprintln!(
                    "violation at t = {}: theta = {:?}, vartheta = {:?}, u0 = {:?}, v0 = {:?}, \
                     rho = {}, deviation = {}, varrho = {}, distance = {}",
                    s.t, s.theta, s.vartheta, s.u0, s.v0, s.rho, s.deviation, s.varrho, s.distance
                );
            }
            samples.push(s);
        }
    }
    let dir = &args.output.out;
    let mut manifest = RunManifest::new(&loaded.digest, args.seed);
    manifest.push("samples", samples.len());
    manifest.push("violations", violations);
    let mut w = create(dir, "bounds_test.csv", &mut manifest)?;
    output::write_bounds_test(&mut w, &samples)?;
    w.flush()?;
    println!("{} samples, {violations} violations", samples.len());
    finish(dir, manifest, started)?;
    Ok(violations == 0)
}
