use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use rcmdp_core::actor::{self, f_value, RunTrace};
use rcmdp_core::critic::td_evaluate;
use rcmdp_core::mdp::validate;
use rcmdp_core::oracle::{exact_f, robust_values};
use rcmdp_core::sampling::derive_seed;
use rcmdp_core::{ActorConfig, GenerativeModel, PolicyTable, TabularRcmdp, PRNG_FAMILY};

use crate::config::{EvalConfig, EvalMode, ExperimentConfig, InstanceSource, PolicySource};
use crate::error::{BenchError, Result};

pub const CODE_VERSION: &str = concat!("rcmdp ", env!("CARGO_PKG_VERSION"));

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut file = std::fs::File::create(&tmp).map_err(io)?;
    file.write_all(bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `t,active_index,g0_hat,..,gI_hat,F_hat[,F_exact]`.
pub fn trace_csv(trace: &RunTrace, n_constraints: usize, exact: bool) -> String {
    let mut out = String::from("t,active_index");
    for i in 0..=n_constraints {
        write!(out, ",g{i}_hat").unwrap();
    }
    out.push_str(",F_hat");
    if exact {
        out.push_str(",F_exact");
    }
    out.push('\n');
    for r in &trace.records {
        write!(out, "{},{}", r.t, r.active_index).unwrap();
        for g in &r.g_hat {
            write!(out, ",{g}").unwrap();
        }
        write!(out, ",{}", r.f_hat).unwrap();
        if exact {
            match r.f_exact {
                Some(f) => write!(out, ",{f}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunId {
    pub radius_index: usize,
    pub radius: f64,
    pub repetition: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub g: Vec<f64>,
    pub f: f64,
    pub active_index: usize,
    pub feasible: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub run: RunId,
    pub config: ExperimentConfig,
    pub policy: PolicyTable,
    pub best_t: Option<usize>,
    pub lambda: f64,
    pub final_f_hat: Option<f64>,
    /// Oracle evaluation of the returned policy, when the exact oracle is on.
    pub oracle: Option<OracleReport>,
    /// Oracle robust values of the uniform policy under this run's set.
    pub uniform_reference: Vec<f64>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub prng_family: &'static str,
    pub code_version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub run: RunId,
    pub dir: PathBuf,
    pub final_f_hat: Option<f64>,
}

pub fn run_dir(out: &Path, radius_index: usize, repetition: usize) -> PathBuf {
    out.join(format!("r{radius_index}_rep{repetition}"))
}

fn oracle_report(mdp: &TabularRcmdp, policy: &PolicyTable, cfg: &ExperimentConfig, radius: f64) -> Result<OracleReport> {
    let model = cfg.uncertainty.model(radius, mdp.n_states())?;
    let ex = exact_f(mdp, policy, &model, cfg.actor.lambda()?, cfg.actor.zeta)?;
    let feasible = ex.g[1..].iter().zip(mdp.thresholds()).map(|(g, b)| g <= b).collect();
    Ok(OracleReport {
        g: ex.g,
        f: ex.f,
        active_index: ex.active_index,
        feasible,
    })
}

/// Resolves the instance and inlines it, so the echoed config reproduces the
/// run without the original files.
pub fn resolve(cfg: &ExperimentConfig, base: &Path) -> Result<(TabularRcmdp, ExperimentConfig)> {
    cfg.check()?;
    let mdp = cfg.instance.resolve(cfg.seed, base)?;
    let report = validate(&mdp)?;
    if !report.is_ergodic() {
        return Err(BenchError::Config(format!(
            "instance failed the ergodicity check: {}",
            serde_json::to_string(&report).unwrap()
        )));
    }
    let mut echo = cfg.clone();
    echo.instance = InstanceSource::Inline(mdp.clone());
    Ok((mdp, echo))
}

fn single_run(
    mdp: &TabularRcmdp,
    cfg: &ExperimentConfig,
    radius_index: usize,
    repetition: usize,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let radius = cfg.radii[radius_index];
    let seed = derive_seed(derive_seed(cfg.seed, radius_index as u64), repetition as u64);
    let model = cfg.uncertainty.model(radius, mdp.n_states())?;
    let gm = GenerativeModel::new(mdp, seed);
    let (policy, trace) = actor::run(mdp, &model, &cfg.actor, &gm)?;

    let exact = cfg.actor.track_exact;
    let oracle = if exact {
        Some(oracle_report(mdp, &policy, cfg, radius)?)
    } else {
        None
    };
    let uniform_reference = robust_values(mdp, &PolicyTable::uniform(mdp.n_states(), mdp.n_actions()), &model)?;
    let run = RunId {
        radius_index,
        radius,
        repetition,
        seed,
    };
    let final_f_hat = trace.best_t.map(|t| trace.records[t].f_hat);

    let dir = run_dir(&cfg.out_dir, radius_index, repetition);
    std::fs::create_dir_all(&dir).map_err(|source| BenchError::Io {
        path: dir.clone(),
        source,
    })?;
    write_atomic(&dir.join("trace.csv"), trace_csv(&trace, mdp.n_constraints(), exact).as_bytes())?;
    write_json(
        &dir.join("meta.json"),
        &Meta {
            prng_family: PRNG_FAMILY,
            code_version: CODE_VERSION,
        },
    )?;
    write_json(
        &dir.join("summary.json"),
        &Summary {
            run: run.clone(),
            config: cfg.clone(),
            policy,
            best_t: trace.best_t,
            lambda: trace.lambda,
            final_f_hat,
            oracle,
            uniform_reference,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(RunOutcome { run, dir, final_f_hat })
}

/// Runs every radius and repetition; `cfg` must already be resolved.
pub fn run_experiment(mdp: &TabularRcmdp, cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<RunOutcome>> {
    cfg.check()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.radii.len())
        .flat_map(|r| (0..cfg.repetitions).map(move |k| (r, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|&(r, k)| single_run(mdp, cfg, r, k)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub model: &'static str,
    pub radius: f64,
    pub g: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub feasible: Vec<bool>,
    pub violated: Vec<usize>,
    pub lambda: f64,
    pub f: f64,
    pub active_index: usize,
}

pub fn eval_policy(cfg: &EvalConfig, base: &Path) -> Result<EvalReport> {
    let mdp = cfg.instance.resolve(cfg.seed, base)?;
    let policy = match &cfg.policy {
        PolicySource::Inline(p) => p.clone(),
        PolicySource::File(path) => crate::config::read_json(&base.join(path))?,
        PolicySource::Uniform => PolicyTable::uniform(mdp.n_states(), mdp.n_actions()),
    };
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(BenchError::Config("policy shape does not match the instance".into()));
    }
    let model = cfg.uncertainty.model(cfg.radius, mdp.n_states())?;
    let g = match cfg.mode {
        EvalMode::Oracle => robust_values(&mdp, &policy, &model)?,
        EvalMode::Critic => {
            cfg.critic.check()?;
            let gm = GenerativeModel::new(&mdp, cfg.seed);
            mdp.signals()
                .iter()
                .map(|signal| {
                    let mut stream = gm.fork(signal.index as u64);
                    td_evaluate(&mut stream, &policy, signal, &model, &cfg.critic).map(|e| e.g)
                })
                .collect::<rcmdp_core::Result<_>>()?
        }
    };
    let lambda = ActorConfig {
        epsilon: cfg.epsilon,
        zeta: cfg.zeta,
        ..ActorConfig::default()
    }
    .lambda()?;
    let (f, active_index) = f_value(&g, mdp.thresholds(), lambda, cfg.zeta)?;
    let feasible: Vec<bool> = g[1..].iter().zip(mdp.thresholds()).map(|(g, b)| g <= b).collect();
    let violated = feasible.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    Ok(EvalReport {
        mode: cfg.mode,
        model: model.name(),
        radius: cfg.radius,
        g,
        thresholds: mdp.thresholds().to_vec(),
        feasible,
        violated,
        lambda,
        f,
        active_index,
    })
}
