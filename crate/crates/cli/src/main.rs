//! `dragreg`: learn regulator gains from simulated relative-motion data and
//! compare them with the model-based design.
//!
//! Exit codes: 0 ok, 2 configuration or I/O, 3 rank deficiency,
//! 4 non-convergence, 5 any other numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dragreg::config::{parse_config, ScenarioConfig};
use dragreg::io::{self, Gains};
use dragreg::scenario::{compare, Scenario};
use dragreg::Error;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "DRAGREG_OUT";
const OUT_FALLBACK: &str = "dragreg-out";

#[derive(Debug, Parser)]
#[command(name = "dragreg", version, about = "Data-driven optimal output regulation for differential-drag formation flying")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collect exploration data, run data-driven value iteration and write
    /// gains.txt and vi_trace.csv.
    Learn(Common),
    /// Simulate learned (or supplied) gains against the LQR baseline and
    /// write vi.csv, lqr.csv and summary.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Gains file to use instead of learning in-process.
        #[arg(long, value_name = "PATH")]
        gains: Option<PathBuf>,
    },
    /// Print the full default scenario as TOML.
    Defaults,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Scenario file (TOML). Omitted fields take their defaults.
    #[arg(short, long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config file and $DRAGREG_OUT.
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Io { .. } => 2,
        Error::RankDeficient { .. } => 3,
        Error::NonConvergence { .. } => 4,
        _ => 5,
    }
}

fn load(common: &Common) -> dragreg::Result<(ScenarioConfig, PathBuf)> {
    let config = match &common.config {
        Some(path) => parse_config(path)?,
        None => ScenarioConfig::default(),
    };
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(OUT_FALLBACK));
    Ok((config, out))
}

fn learn(common: &Common) -> dragreg::Result<()> {
    let (config, out) = load(common)?;
    let sc = Scenario::new(config)?;
    let data = sc.collect()?;
    let learned = sc.learn(&data)?;
    let gains = Gains {
        k: learned.k.clone(),
        l: learned.l.clone(),
        p: learned.p.clone(),
    };
    io::write_gains(out.join("gains.txt"), &gains)?;
    io::write_trace_csv(out.join("vi_trace.csv"), &learned.trace.vi)?;
    println!(
        "value iteration converged after {} iterations ({} resets); wrote {}",
        learned.trace.vi.iterations,
        learned.trace.vi.resets.len(),
        out.display()
    );
    Ok(())
}

fn read_checked_gains(path: &Path, sc: &Scenario) -> dragreg::Result<Gains> {
    let g = io::read_gains(path)?;
    let (n, m, q) = (sc.plant.n(), sc.plant.m(), sc.plant.q());
    if g.k.shape() != (m, n) || g.l.shape() != (m, q) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: format!("expected K {m}x{n} and L {m}x{q}"),
        });
    }
    Ok(g)
}

fn run_compare(common: &Common, gains: Option<&Path>) -> dragreg::Result<()> {
    let (config, out) = load(common)?;
    let sc = Scenario::new(config)?;
    let (k, l) = match gains {
        Some(path) => {
            let g = read_checked_gains(path, &sc)?;
            (g.k, g.l)
        }
        None => {
            let learned = sc.learn(&sc.collect()?)?;
            (learned.k, learned.l)
        }
    };
    let cmp = compare(&sc, &k, &l)?;
    io::write_trajectory_csv(out.join("vi.csv"), &cmp.vi)?;
    io::write_trajectory_csv(out.join("lqr.csv"), &cmp.lqr)?;
    let rows = [("vi", &cmp.vi_metrics), ("lqr", &cmp.lqr_metrics)];
    io::write_summary(out.join("summary.csv"), &rows)?;
    print!("{}", io::summary_csv(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Learn(common) => learn(common),
        Command::Compare { common, gains } => run_compare(common, gains.as_deref()),
        Command::Defaults => ScenarioConfig::default().to_toml().map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error[{code}]: {e}");
            ExitCode::from(code)
        }
    }
}
