use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfgmaster::{exit_code, run_config, write_reports, ExperimentConfig, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};
use mfgmaster_core::model::validate_hypotheses;
use mfgmaster_core::MfgModel;

#[derive(Parser)]
#[command(name = "mfgmaster", version, about = "Run mean field game solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments of a config and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `out` field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check the structural hypotheses of the config's model.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        code(EXIT_USAGE)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            jobs,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return e,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let Some(dir) = out.or_else(|| cfg.out.clone()) else {
                eprintln!("error: no output directory (pass --out or set `out`)");
                return code(EXIT_USAGE);
            };
            let outcomes = match run_config(&cfg, jobs) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(EXIT_USAGE);
                }
            };
            if let Err(e) = write_reports(&dir, cfg.seed, &outcomes) {
                eprintln!("error: writing reports to {}: {e}", dir.display());
                return code(EXIT_USAGE);
            }
            for o in &outcomes {
                let status = if o.passed() { "PASS" } else { "FAIL" };
                println!("{status} {} ({})", o.experiment, o.kind);
                if let Some(err) = &o.error {
                    println!("  aborted: {err}");
                }
                for c in o.failures() {
                    println!("  {} {} = {:e}, want {} [{}]", c.parameter, c.metric, c.value, c.bound, c.tolerance);
                }
            }
            code(exit_code(&outcomes))
        }
        Command::Validate { config, pairs } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return e,
            };
            let model = match MfgModel::from_spec(&cfg.model) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(EXIT_USAGE);
                }
            };
            let report = validate_hypotheses(&model, pairs, cfg.seed);
            for c in &report.checks {
                let status = if c.passed { "ok  " } else { "FAIL" };
                println!("{status} {:<16} worst={:e} {}", c.name, c.worst, c.detail);
            }
            code(if report.passed() { EXIT_PASS } else { EXIT_FAIL })
        }
    }
}
