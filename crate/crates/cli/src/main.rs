//! `brwlab` command-line driver.
//!
//! Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 for
//! usage and configuration errors, 3 for runtime errors such as too few
//! surviving replicates.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use brwlab::brw::{generation_horizon, run_to_horizon, SiteConfiguration};
use brwlab::exact::{kac_transition_prob, rw_dp_transition_prob};
use brwlab::experiments::{self, ExperimentConfig, ExperimentKind, KeyValues, Tolerances};
use brwlab::feller::{feller_euler_terminal, feller_exact_marginal};
use brwlab::gw::survival_curve;
use brwlab::rng::StreamFamily;
use brwlab::{Error, LawName, OffspringLaw, WalkParams};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "brwlab", version, about = "Branching random walks with drift toward a reflecting origin")]
struct Cli {
    /// Worker threads; never changes numerical output.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,

    /// Output directory (falls back to $BRWLAB_OUT, then ./brwlab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one BRW and write its snapshots as CSV.
    SimulateBrw(SimulateArgs),
    /// Exact m-step transition row as CSV `site,probability` on stdout.
    ExactProb(ExactArgs),
    /// Galton-Watson survival table as CSV on stdout.
    GwStats(GwArgs),
    /// Feller diffusion marginals as CSV `index,mass` on stdout.
    Feller(FellerArgs),
    /// Rightmost particle given survival.
    MaxDisplacement(ExperimentArgs),
    /// Rescaled spatial profile against the exponential law.
    Profile(ExperimentArgs),
    /// Total mass survival against the Feller diffusion.
    TotalMass(ExperimentArgs),
    /// Exact survival curve and BRW survival.
    SurvivalCurve(ExperimentArgs),
    /// Quick invariant suite.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    n: u64,
    #[arg(long, default_value = "geom")]
    law: LawName,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Initial particles.
    #[arg(long, default_value_t = 1)]
    z0: u64,
    /// Site of the initial particles.
    #[arg(long, default_value_t = 0)]
    start: u64,
    /// Horizon in generations; defaults to `[n^alpha t]`.
    #[arg(long)]
    generations: Option<u64>,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Snapshot every this many generations.
    #[arg(long, default_value_t = 1)]
    every: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ExactMethod {
    Dp,
    Kac,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    start: u64,
    #[arg(long)]
    m: u64,
    #[arg(long, value_enum, default_value_t = ExactMethod::Dp)]
    method: ExactMethod,
    /// Quadrature tolerance for the spectral method.
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
}

#[derive(Args, Debug)]
struct GwArgs {
    #[arg(long, default_value = "geom")]
    law: LawName,
    /// Largest generation.
    #[arg(long, default_value_t = 1000)]
    m: u64,
    /// Print every this many generations.
    #[arg(long, default_value_t = 1)]
    step: u64,
}

#[derive(Args, Debug)]
struct FellerArgs {
    #[arg(long, default_value_t = 1.0)]
    y: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Offspring law supplying sigma^2.
    #[arg(long, default_value = "geom")]
    law: LawName,
    /// Overrides the law's sigma^2.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    replicates: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Euler step; exact marginals when absent.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated, increasing.
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    /// Record wall-clock time in report.json (makes reruns differ).
    #[arg(long)]
    wallclock: bool,
    /// Extra `key=value` overrides, applied last.
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Failure modes mapped to exit codes.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParams(_) | Error::InvalidArgument(_) | Error::OutsideFastPathRegime { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult = Result<bool, Failure>;

fn output_dir(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os("BRWLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("brwlab-out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(usize::from(w)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let out = output_dir(cli.out);
    let result = match cli.command {
        Command::SimulateBrw(a) => simulate_brw(a, &out),
        Command::ExactProb(a) => exact_prob(a),
        Command::GwStats(a) => gw_stats(a),
        Command::Feller(a) => feller(a),
        Command::MaxDisplacement(a) => experiment(ExperimentKind::MaxDisplacement, a, &out),
        Command::Profile(a) => experiment(ExperimentKind::Profile, a, &out),
        Command::TotalMass(a) => experiment(ExperimentKind::TotalMass, a, &out),
        Command::SurvivalCurve(a) => experiment(ExperimentKind::SurvivalCurve, a, &out),
        Command::Validate(a) => Ok(validate(a)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn experiment_config(kind: ExperimentKind, args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut kv = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            KeyValues::parse(&text)?
        }
        None => KeyValues::default(),
    };
    let flags = [
        ("beta", &args.beta),
        ("n", &args.n),
        ("alpha", &args.alpha),
        ("t", &args.t),
        ("y", &args.y),
        ("delta", &args.delta),
        ("law", &args.law),
        ("replicates", &args.replicates),
        ("seed", &args.seed),
        ("n_grid", &args.n_grid),
    ];
    let mut overrides = Vec::new();
    for (key, value) in flags {
        if let Some(v) = value {
            overrides.push((key.to_string(), v.clone()));
        }
    }
    for entry in &args.overrides {
        overrides.push(KeyValues::parse_override(entry)?);
    }
    // a single n replaces a file grid and vice versa
    for (key, _) in &overrides {
        let other = match key.as_str() {
            "n" => "n_grid",
            "n_grid" => "n",
            _ => continue,
        };
        if kv.contains(other) {
            let mut fresh = KeyValues::default();
            for (k, v) in kv.iter().filter(|(k, _)| *k != other) {
                fresh.set(k, v);
            }
            kv = fresh;
        }
    }
    for (k, v) in overrides {
        kv.set(k, v);
    }
    Ok(ExperimentConfig::from_key_values(&kv, Some(kind))?)
}

fn experiment(kind: ExperimentKind, args: ExperimentArgs, out: &Path) -> CliResult {
    let config = experiment_config(kind, &args)?;
    let started = Instant::now();
    let mut report = experiments::run(&config, &Tolerances::builtin())?;
    if args.wallclock {
        report.wallclock_s = Some(started.elapsed().as_secs_f64());
    }
    report.write_to(out)?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for cell in &report.cells {
        for (name, v) in &cell.verdicts {
            let status = if v.pass { "PASS" } else { "FAIL" };
            writeln!(w, "{status} n={} {name}: {:.6} vs {:.6} ({})", cell.n, v.observed, v.tolerance, v.rule)?;
        }
    }
    writeln!(w, "wrote {}", out.display())?;
    Ok(report.all_pass())
}

fn simulate_brw(args: SimulateArgs, out: &Path) -> CliResult {
    let params = WalkParams::new(args.beta, args.n)?;
    let law = OffspringLaw::by_name(args.law)?;
    if args.every == 0 {
        return Err(Failure::Usage("--every must be at least 1".into()));
    }
    let horizon = match args.generations {
        Some(g) => g,
        None => {
            if !(args.alpha > 1.0 && args.t > 0.0) {
                return Err(Failure::Usage("need alpha > 1 and t > 0".into()));
            }
            generation_horizon(args.n, args.alpha, args.t)
        }
    };
    let times: Vec<u64> = (0..=horizon).step_by(args.every as usize).collect();
    let initial = SiteConfiguration::point(args.start, args.z0);
    let mut rng = StreamFamily::new(args.seed, "simulate_brw", args.n).stream(0);
    let record = run_to_horizon(&initial, &params, &law, horizon, &times, &mut rng)?;
    fs::create_dir_all(out)?;
    let mut w = BufWriter::new(fs::File::create(out.join("snapshots.csv"))?);
    writeln!(w, "generation,site,count")?;
    for snap in &record.snapshots {
        snap.write_csv_rows(&mut w)?;
    }
    w.flush()?;
    let mut w = BufWriter::new(fs::File::create(out.join("run.csv"))?);
    writeln!(w, "generation,total,rightmost")?;
    for snap in &record.snapshots {
        let right = snap.rightmost().map(|r| r.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{}", snap.generation(), snap.total(), right)?;
    }
    w.flush()?;
    let rightmost = record.rightmost_at_horizon.map(|r| r.to_string()).unwrap_or_else(|| "none".into());
    println!(
        "horizon {horizon}: survived = {}, total = {}, rightmost = {rightmost}; wrote {}",
        record.survived,
        record.final_total,
        out.display()
    );
    Ok(true)
}

fn exact_prob(args: ExactArgs) -> CliResult {
    let params = WalkParams::new(args.beta, args.n)?;
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    writeln!(w, "site,probability")?;
    match args.method {
        ExactMethod::Dp => {
            for (site, p) in rw_dp_transition_prob(&params, args.start, args.m).iter() {
                writeln!(w, "{site},{p}")?;
            }
        }
        ExactMethod::Kac => {
            if args.m == 0 {
                return Err(Failure::Usage("the spectral method needs m >= 1".into()));
            }
            // site 0 from the complement, since the formula covers k >= 1
            let rest: Vec<f64> = (1..=args.start + args.m)
                .map(|k| kac_transition_prob(&params, args.start, args.m, k, args.tol).map(|d| d.total()))
                .collect::<Result<_, _>>()?;
            let at_zero = if (args.start + args.m) % 2 == 0 { 1.0 - rest.iter().sum::<f64>() } else { 0.0 };
            writeln!(w, "0,{}", at_zero.max(0.0))?;
            for (k, p) in rest.iter().enumerate() {
                writeln!(w, "{},{p}", k + 1)?;
            }
        }
    }
    w.flush()?;
    Ok(true)
}

fn gw_stats(args: GwArgs) -> CliResult {
    let law = OffspringLaw::by_name(args.law)?;
    if args.step == 0 {
        return Err(Failure::Usage("--step must be at least 1".into()));
    }
    let sigma2 = law.variance();
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    writeln!(w, "m,rho,m_rho_sigma2_half")?;
    for (m, rho) in survival_curve(&law, args.m).into_iter().enumerate().step_by(args.step as usize) {
        writeln!(w, "{m},{rho},{}", m as f64 * rho * sigma2 / 2.0)?;
    }
    w.flush()?;
    Ok(true)
}

fn feller(args: FellerArgs) -> CliResult {
    let sigma2 = match args.sigma2 {
        Some(s) => s,
        None => OffspringLaw::by_name(args.law)?.variance(),
    };
    let streams = StreamFamily::new(args.seed, "feller", 0);
    let draws: Vec<f64> = streams
        .run(args.replicates, |_, rng| match args.dt {
            Some(dt) => feller_euler_terminal(args.y, sigma2, args.t, dt, rng),
            None => feller_exact_marginal(args.y, sigma2, args.t, rng),
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    writeln!(w, "index,mass")?;
    for (i, y) in draws.iter().enumerate() {
        writeln!(w, "{i},{y}")?;
    }
    w.flush()?;
    Ok(true)
}

fn validate(args: ValidateArgs) -> bool {
    let checks = brwlab::validate::run_suite(args.seed);
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.pass)
}
