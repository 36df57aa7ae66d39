use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rcmdp_bench::config::{parse_json, parse_radii, read_json};
use rcmdp_bench::experiment::{eval_policy, resolve, run_experiment, write_atomic};
use rcmdp_bench::{BenchError, EvalConfig, ExperimentConfig, Result};
use rcmdp_core::instance::{generate_instance, GeneratorSpec};
use rcmdp_core::mdp::{validate_raw, RawRcmdp};

#[derive(Parser)]
#[command(name = "rcmdp", version, about = "Robust constrained average-cost MDP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (directory for `run`, file otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from a generator spec.
    Generate(Common),
    /// Run an experiment over every radius and repetition.
    Run {
        #[command(flatten)]
        common: Common,
        /// Track exact oracle F every iteration and report oracle values.
        #[arg(long)]
        exact_oracle: bool,
        /// Comma-separated radii, overriding the config.
        #[arg(long)]
        radius: Option<String>,
    },
    /// Evaluate a fixed policy.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Radius, overriding the config.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Check an instance file or experiment config.
    Validate(Common),
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("RCMDP_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| BenchError::Config(format!("RCMDP_THREADS={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let spec: GeneratorSpec = read_json(&c.config)?;
            let mdp = generate_instance(&spec, c.seed.unwrap_or(0))?;
            emit(&pretty(&mdp), c.out.as_deref())
        }
        Command::Run {
            common: c,
            exact_oracle,
            radius,
        } => {
            let mut cfg: ExperimentConfig = read_json(&c.config)?;
            if let Some(seed) = c.seed {
                cfg.seed = seed;
            }
            if let Some(out) = c.out {
                cfg.out_dir = out;
            }
            if let Some(list) = radius {
                cfg.radii = parse_radii(&list)?;
            }
            cfg.actor.track_exact |= exact_oracle;
            let (mdp, cfg) = resolve(&cfg, &base_dir(&c.config))?;
            let outcomes = run_experiment(&mdp, &cfg, threads()?)?;
            if !c.quiet {
                for o in &outcomes {
                    eprintln!(
                        "radius {} rep {}: best F_hat {} -> {}",
                        o.run.radius,
                        o.run.repetition,
                        o.final_f_hat.map_or("n/a".into(), |f| f.to_string()),
                        o.dir.display()
                    );
                }
            }
            Ok(())
        }
        Command::Eval { common: c, radius } => {
            let mut cfg: EvalConfig = read_json(&c.config)?;
            if let Some(seed) = c.seed {
                cfg.seed = seed;
            }
            if let Some(r) = radius {
                cfg.radius = r;
            }
            let report = eval_policy(&cfg, &base_dir(&c.config))?;
            emit(&pretty(&report), c.out.as_deref())
        }
        Command::Validate(c) => {
            let text = std::fs::read_to_string(&c.config).map_err(|source| BenchError::Io {
                path: c.config.clone(),
                source,
            })?;
            let value: serde_json::Value = parse_json(&text, &c.config)?;
            let raw: RawRcmdp = if value.get("instance").is_some() {
                let cfg: ExperimentConfig = parse_json(&text, &c.config)?;
                cfg.check()?;
                cfg.instance.resolve(c.seed.unwrap_or(cfg.seed), &base_dir(&c.config))?.into()
            } else {
                parse_json(&text, &c.config)?
            };
            let report = validate_raw(&raw)?;
            if !c.quiet {
                emit(&pretty(&report), c.out.as_deref())?;
            }
            if report.structural_violations.is_empty() && report.is_ergodic() {
                Ok(())
            } else {
                Err(BenchError::Config("instance failed validation".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = e.record();
            eprintln!("{}", serde_json::to_string(&record).unwrap());
            ExitCode::from(record.exit_code as u8)
        }
    }
}
