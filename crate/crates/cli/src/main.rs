use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use momentum_traffic::experiments::{self, ScenarioDef, Suite, BUILTIN};
use momentum_traffic::microsim::SimConfig;
use momentum_traffic::risk_model::InjuryCurveSet;

#[derive(Parser)]
#[command(name = "momsim", version, about = "Momentum-based access and speed control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in suite or a suite / scenario TOML file and write CSV output.
    Run {
        /// Built-in suite name (access_ABC, overtake_ABC, combined_ABCD, volume_CDEF) or path.
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Override the number of Monte Carlo runs.
        #[arg(long)]
        runs: Option<u64>,
        /// Override the number of 1 s steps per run.
        #[arg(long)]
        duration: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long, env = "MOMSIM_OUT_DIR", default_value = "momsim-out")]
        out: PathBuf,
    },
    /// Check a suite or scenario TOML file without running it.
    Validate { config: PathBuf },
    /// Print the summary table of a finished run.
    Report { dir: PathBuf },
    /// Print a built-in suite as TOML, as a starting point for custom suites.
    Show { suite: String },
    /// Write the injury-probability curves as CSV.
    Curves {
        /// Alternative curve set (TOML with [[curve]] tables).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "injury_curves.csv")]
        out: PathBuf,
    },
}

/// A file holds either a whole suite or a single scenario config.
fn load_suite(arg: &str) -> Result<Suite> {
    if BUILTIN.contains(&arg) {
        return Ok(Suite::builtin(arg)?);
    }
    let path = Path::new(arg);
    if !path.exists() {
        bail!("`{arg}` is neither a built-in suite ({}) nor a file", BUILTIN.join(", "));
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.contains_key("scenario") {
        return Suite::from_toml_str(&text).with_context(|| format!("invalid suite {}", path.display()));
    }
    let config: SimConfig = toml::from_str(&text).with_context(|| format!("invalid scenario {}", path.display()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario").to_string();
    let suite = Suite {
        name: name.clone(),
        runs: 1,
        duration: config.duration,
        scenarios: vec![ScenarioDef {
            name,
            match_admitted_of: None,
            config,
        }],
    };
    suite.validate().with_context(|| format!("invalid scenario {}", path.display()))?;
    Ok(suite)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            suite,
            seed,
            runs,
            duration,
            parallelism,
            out,
        } => {
            let mut suite = load_suite(&suite)?;
            if let Some(r) = runs {
                suite.runs = r;
            }
            if let Some(d) = duration {
                suite.duration = d;
            }
            suite.validate()?;
            let t0 = Instant::now();
            let result = experiments::run_suite(&suite, seed, parallelism)?;
            let files = experiments::write_suite(&result, &out)?;
            eprintln!(
                "{}: {} scenario(s) x {} run(s) x {} steps in {:.1} s",
                suite.name,
                suite.scenarios.len(),
                suite.runs,
                suite.duration,
                t0.elapsed().as_secs_f64()
            );
            for f in files {
                eprintln!("  wrote {}", f.display());
            }
            print!("{}", experiments::render_report(&out)?);
        }
        Command::Validate { config } => {
            let arg = config.to_string_lossy();
            let suite = load_suite(&arg)?;
            println!(
                "ok: suite `{}` with {} scenario(s), {} run(s) x {} steps",
                suite.name,
                suite.scenarios.len(),
                suite.runs,
                suite.duration
            );
        }
        Command::Report { dir } => {
            print!("{}", experiments::render_report(&dir)?);
        }
        Command::Show { suite } => {
            print!("{}", Suite::builtin(&suite)?.to_toml_string()?);
        }
        Command::Curves { config, out } => {
            let set = match config {
                Some(p) => InjuryCurveSet::load(&p)?,
                None => InjuryCurveSet::default(),
            };
            set.write_csv(fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?)?;
            eprintln!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
