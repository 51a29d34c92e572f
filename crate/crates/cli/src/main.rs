mod config;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use config::*;
use paratess::io::{self, fmt_f64, Table, MOMENT_COLUMNS};
use paratess::typical::{importance_moment, volume_moment, CellLawParams};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "paratess", version, about = "Random paraboloid tessellations: simulation, typical cells, convergence and bound checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with values for the subcommand's flags; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the resolved configuration, version and kernel hash here (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Worker threads (also PARATESS_THREADS); default: all cores.
    #[arg(long, global = true, env = "PARATESS_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one tessellation window and export it.
    Simulate(SimulateArgs),
    /// Monte Carlo moments of the typical-cell volume against closed forms.
    Moments(MomentsArgs),
    /// Capacity-functional convergence towards the Gaussian limit.
    Converge(ConvergeArgs),
    /// Empirical checks of the growth-event probability bounds.
    Bounds(BoundsArgs),
    /// Run the reference oracle suite.
    Oracles(OraclesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// gaussian, beta or beta-prime.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Intensity multiplier; default 1 (gaussian) or sqrt(2 beta).
    #[arg(long)]
    gamma: Option<f64>,
    /// Window radius.
    #[arg(long = "R", alias = "radius")]
    radius: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tessellation JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skeleton SVG (d = 3 only).
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    nu: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    /// Importance samples per grid point.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// JSON array of test sets, e.g. '[{"type":"ball","center":[0],"radius":0.3}]'.
    #[arg(long)]
    compacts: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "R", alias = "radius")]
    radius: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    n_reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Subset of 1a,1b,1c,2a,2b,2c.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<String>>,
    /// Random admissible parameter points per bound.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OraclesArgs {
    /// JUnit XML report path.
    #[arg(long)]
    junit: Option<PathBuf>,
    /// Directory for the result cache (keyed by kernel hash).
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    kernel_hash: String,
    threads: usize,
    config: &'a T,
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
    kind: String,
    chain: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let kind = match e.downcast_ref::<paratess::Error>() {
                Some(pe) => format!("{pe:?}").split('(').next().unwrap_or("Error").to_string(),
                None => "Usage".into(),
            };
            let report = ErrorReport { error: e.to_string(), kind, chain: e.chain().skip(1).map(|c| c.to_string()).collect() };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.common.threads {
        anyhow::ensure!(n > 0, "threads must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    let cfg_path = cli.common.config.as_deref();
    let manifest = cli.common.manifest.as_deref();
    match cli.cmd {
        Command::Simulate(a) => {
            let file: SimulateFile = read_toml(cfg_path)?;
            let flags = SimulateFile { model: a.model, d: a.d, beta: a.beta, gamma: a.gamma, radius: a.radius, eps: a.eps, seed: a.seed, out: a.out, svg: a.svg };
            let c = file.merge(flags).resolve()?;
            write_manifest(manifest, "simulate", &c)?;
            simulate(&c)
        }
        Command::Moments(a) => {
            let file: MomentsFile = read_toml(cfg_path)?;
            let flags = MomentsFile { d: a.d, nu: a.nu, s: a.s, n: a.n, seed: a.seed, out: a.out };
            let c = file.merge(flags).resolve()?;
            write_manifest(manifest, "moments", &c)?;
            moments(&c)
        }
        Command::Converge(a) => {
            let file: ConvergeFile = read_toml(cfg_path)?;
            let compacts = match a.compacts {
                Some(s) => Some(serde_json::from_str(&s).context("parsing --compacts")?),
                None => None,
            };
            let flags = ConvergeFile { models: a.models, betas: a.betas, compacts, d: a.d, radius: a.radius, eps: a.eps, n_reps: a.n_reps, seed: a.seed, out: a.out };
            let c = file.merge(flags).resolve()?;
            write_manifest(manifest, "converge", &c)?;
            converge(&c)
        }
        Command::Bounds(a) => {
            let file: BoundsFile = read_toml(cfg_path)?;
            let flags = BoundsFile { bounds: a.bounds, points: a.points, n_seeds: a.n_seeds, seed: a.seed, queries: None, out: a.out };
            let c = file.merge(flags).resolve()?;
            write_manifest(manifest, "bounds", &c)?;
            bounds(&c)
        }
        Command::Oracles(a) => {
            #[derive(Serialize)]
            struct OracleConfig<'a> {
                junit: &'a Option<PathBuf>,
                cache: &'a Option<PathBuf>,
            }
            write_manifest(manifest, "oracles", &OracleConfig { junit: &a.junit, cache: &a.cache })?;
            oracles(a.junit.as_deref(), a.cache.as_deref())
        }
    }
}

fn write_manifest<T: Serialize>(path: Option<&Path>, command: &str, config: &T) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        kernel_hash: paratess::oracles::kernel_hash(),
        threads: rayon::current_num_threads(),
        config,
    };
    write_out(Some(path), &serde_json::to_string_pretty(&m)?)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(c: &SimulateConfig) -> Result<ExitCode> {
    let t = paratess::tessellation::simulate(&c.window, c.seed)?;
    write_out(c.out.as_deref(), &(io::tessellation_json(&t)? + "\n"))?;
    if let Some(p) = &c.svg {
        write_out(Some(p), &io::skeleton_svg(&t)?)?;
    }
    if !t.complete {
        eprintln!("warning: window certification incomplete after {} enlargements", t.enlargements);
    }
    Ok(ExitCode::SUCCESS)
}

fn moments(c: &MomentsConfig) -> Result<ExitCode> {
    let mut table = Table::new(&MOMENT_COLUMNS);
    for &d in &c.d {
        for &nu in &c.nu {
            for &s in &c.s {
                let p = CellLawParams::new(d, nu, s);
                let exact = volume_moment(&p)?;
                let est = importance_moment(&p, c.n, c.seed)?;
                table.push(vec![
                    d.to_string(),
                    nu.to_string(),
                    s.to_string(),
                    fmt_f64(exact),
                    fmt_f64(est.value),
                    fmt_f64(est.stderr),
                    fmt_f64(est.z(exact)),
                    c.n.to_string(),
                    c.seed.to_string(),
                ]);
            }
        }
    }
    write_out(c.out.as_deref(), &table.to_csv()?)?;
    Ok(ExitCode::SUCCESS)
}

fn converge(c: &ConvergeConfig) -> Result<ExitCode> {
    let t = paratess::convergence::convergence_experiment(&c.experiment)?;
    write_out(c.out.as_deref(), &io::convergence_table(&t).to_csv()?)?;
    if t.incomplete > 0 {
        eprintln!("warning: {} replications dropped as incomplete", t.incomplete);
    }
    Ok(ExitCode::SUCCESS)
}

fn bounds(c: &BoundsConfig) -> Result<ExitCode> {
    let mut jobs: Vec<_> = c.queries.clone();
    for &which in &c.bounds {
        for q in paratess::convergence::admissible_points(which, c.points, c.seed) {
            jobs.push((which, q));
        }
    }
    let mut rows = Vec::with_capacity(jobs.len());
    for (i, (which, q)) in jobs.iter().enumerate() {
        rows.push(paratess::convergence::bound_check(*which, q, c.n_seeds, c.seed.wrapping_add(i as u64))?);
    }
    write_out(c.out.as_deref(), &io::bound_table(&rows).to_csv()?)?;
    Ok(if rows.iter().all(|r| r.ok) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn oracles(junit: Option<&Path>, cache: Option<&Path>) -> Result<ExitCode> {
    let cases = paratess::oracles::standard_cases();
    if let Some(dir) = cache {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let cache = cache.map(paratess::oracles::cache_path);
    let report = paratess::oracles::run_oracles_with(&cases, cache.as_deref());
    println!("{}", report.summary());
    if let Some(p) = junit {
        write_out(Some(p), &report.junit_xml())?;
    }
    Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
