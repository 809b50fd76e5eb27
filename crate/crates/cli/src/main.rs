//! `rs-hierarchy`: runs the verification suites, exports flow trajectories
//! and evaluates single brackets.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a
//! computation breaks down, 2 on configuration errors.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use rs_hierarchy::harness::{
    bracket_value, export_trajectory, format_float, parse_observable, resolve_profile, run_checks,
    uniform_grid, Profile, Suite,
};
use rs_hierarchy::phase::sample_point;
use rs_hierarchy::{Chart, Error, FullPoint};

#[derive(Parser, Debug)]
#[command(
    name = "rs-hierarchy",
    version,
    about = "Verification suite for the U(n) bi-Hamiltonian hierarchy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a suite of registered checks and write the JSON report.
    Check {
        /// all, theorem1, theorem2, prop3, prop4 or flows
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// strict, default or nested; RS_HIERARCHY_PROFILE takes precedence
        #[arg(long, default_value = "default")]
        profile: Profile,
        /// Report path; the report goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the trajectory of the k-th flow from a seeded initial point as CSV.
    Flow {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the value of one bracket of two invariant observables `m,k,re|im`.
    Bracket {
        /// full, red, rs or suth
        #[arg(long)]
        chart: Chart,
        /// 1 or 2
        #[arg(long)]
        which: u8,
        #[arg(long)]
        f: String,
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
}

/// Failure of a command, carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::UnknownCheck(_)
            | Error::TooSmall(_)
            | Error::DimensionMismatch { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Check {
            suite,
            n,
            seeds,
            profile,
            out,
        } => {
            let profile = resolve_profile(profile)?;
            let specs = suite.specs(n, seeds, profile)?;
            let report = run_checks(&specs)?;
            for r in &report.checks {
                eprintln!("{r}");
                for e in &r.errors {
                    eprintln!("    {e}");
                }
            }
            let json = report.to_json_string(profile);
            match out {
                Some(path) => {
                    fs::write(&path, json + "\n").map_err(Error::from)?;
                    info!("report written to {}", path.display());
                }
                // a closed pipe is not an error worth reporting
                None => {
                    let _ = writeln!(std::io::stdout().lock(), "{json}");
                }
            }
            Ok(if report.all_pass() { 0 } else { 1 })
        }
        Command::Flow {
            n,
            k,
            t0,
            t1,
            steps,
            seed,
            out,
        } => {
            if k == 0 {
                return Err(Error::Config("flow order k must be at least 1".into()).into());
            }
            if !(t0.is_finite() && t1.is_finite()) {
                return Err(Error::Config("t0 and t1 must be finite".into()).into());
            }
            let x0: FullPoint = sample_point(n, seed)?;
            let tr = export_trajectory(&x0, k, &uniform_grid(t0, t1, steps), &out)?;
            for w in &tr.warnings {
                eprintln!("warning: {w}");
            }
            info!("{} samples written to {}", tr.len(), out.display());
            Ok(0)
        }
        Command::Bracket {
            chart,
            which,
            f,
            h,
            seed,
            n,
        } => {
            let (f, h) = (parse_observable(&f)?, parse_observable(&h)?);
            let value = bracket_value(chart, which, &f, &h, n, seed)?;
            let _ = writeln!(std::io::stdout().lock(), "{}", format_float(value));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
