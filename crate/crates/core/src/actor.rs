//! Primal-only actor.
//!
//! Each iteration evaluates the cost and every constraint with the critic,
//! forms robust Q tables, picks the index that attains
//! `F = max(g_0 / lambda, max_i (g_i - b_i + zeta))`, and takes a projected
//! step on that index's Q table. The returned policy is the iterate with the
//! smallest `F`.


use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critic::{td_evaluate, CriticConfig, RobustEval, SigmaMode};
use crate::error::{RcmdpError, Result};
use crate::mdp::{IndexedSignal, PolicyTable, TabularRcmdp};
use crate::oracle::exact_f;
use crate::sampling::{estimate_sigma, GenerativeModel, MlmcConfig};
use crate::uncertainty::{sigma_exact, span_seminorm, UncertaintyModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    /// `lambda = 4 / max(epsilon, zeta)`.
    Auto,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize {
    Fixed(f64),
    /// `eta = epsilon / (2 C Q_max^2)` with `Q_max = 1 + max span(V)` seen so
    /// far. `C` is the distribution-mismatch constant, which cannot be
    /// estimated from samples; 1 is the usual choice.
    Theory { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BestIterateMode {
    #[default]
    CriticEstimates,
    ExactOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActorConfig {
    pub total_iters: usize,
    pub step_size: StepSize,
    pub epsilon: f64,
    pub zeta: f64,
    pub lambda_rule: LambdaRule,
    pub critic: CriticConfig,
    pub best_iterate_mode: BestIterateMode,
    /// Record the oracle `F` of every iterate even when selection uses
    /// critic estimates.
    pub track_exact: bool,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self {
            total_iters: 100,
            step_size: StepSize::Theory { c: 1.0 },
            epsilon: 0.05,
            zeta: 0.0,
            lambda_rule: LambdaRule::Auto,
            critic: CriticConfig::default(),
            best_iterate_mode: BestIterateMode::CriticEstimates,
            track_exact: false,
        }
    }
}

impl ActorConfig {
    pub fn lambda(&self) -> Result<f64> {
        let lambda = match self.lambda_rule {
            LambdaRule::Auto => {
                let m = self.epsilon.max(self.zeta);
                if !(m > 0.0) {
                    return Err(RcmdpError::Config(
                        "automatic lambda needs epsilon > 0 or zeta > 0".into(),
                    ));
                }
                4.0 / m
            }
            LambdaRule::Explicit(l) => l,
        };
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(RcmdpError::Config(format!("lambda must be positive, got {lambda}")));
        }
        Ok(lambda)
    }

    pub fn check(&self) -> Result<()> {
        self.lambda()?;
        if self.zeta < 0.0 {
            return Err(RcmdpError::Config("zeta must be nonnegative".into()));
        }
        match self.step_size {
            StepSize::Fixed(eta) if !(eta > 0.0) => {
                return Err(RcmdpError::Config(format!("step size must be positive, got {eta}")))
            }
            StepSize::Theory { c } if !(c > 0.0 && self.epsilon > 0.0) => {
                return Err(RcmdpError::Config("theory step size needs C > 0 and epsilon > 0".into()))
            }
            _ => {}
        }
        self.critic.check()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub values: Vec<Vec<f64>>,
    pub index: usize,
}

/// Support-function source for [`build_q`].
pub enum SigmaSource<'s, 'm> {
    Sampled {
        gm: &'s mut GenerativeModel<'m>,
        mlmc: MlmcConfig,
    },
    Exact,
}

/// `Q(s,a) = signal(s,a) - g + sigma(V)` for every pair.
pub fn build_q(
    mdp: &TabularRcmdp,
    eval: &RobustEval,
    signal: &IndexedSignal,
    model: &UncertaintyModel,
    mut source: SigmaSource,
) -> Result<QTable> {
    let mut values = vec![vec![0.0; mdp.n_actions()]; mdp.n_states()];
    for (s, row) in values.iter_mut().enumerate() {
        for (a, q) in row.iter_mut().enumerate() {
            let sigma = match &mut source {
                SigmaSource::Sampled { gm, mlmc } => estimate_sigma(gm, s, a, &eval.v, model, mlmc)?,
                SigmaSource::Exact => sigma_exact(model, mdp.nominal_row(s, a), &eval.v)?.sigma,
            };
            *q = signal.get(s, a) - eval.g + sigma;
        }
    }
    Ok(QTable {
        values,
        index: signal.index,
    })
}

/// `F` and the index attaining it; ties go to the lowest index.
pub fn f_value(g_hats: &[f64], thresholds: &[f64], lambda: f64, zeta: f64) -> Result<(f64, usize)> {
    if !(lambda > 0.0) {
        return Err(RcmdpError::Config(format!("lambda must be positive, got {lambda}")));
    }
    if g_hats.len() != thresholds.len() + 1 {
        return Err(RcmdpError::Param(format!(
            "{} values for {} thresholds",
            g_hats.len(),
            thresholds.len()
        )));
    }
    let mut best = (g_hats[0] / lambda, 0);
    for (i, (g, b)) in g_hats[1..].iter().zip(thresholds).enumerate() {
        let term = g - b + zeta;
        if term > best.0 {
            best = (term, i + 1);
        }
    }
    Ok(best)
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Proximal step `argmin_p eta <Q, p> + |p - pi|^2` for every state.
pub fn policy_update(policy: &PolicyTable, q: &QTable, eta: f64) -> Result<PolicyTable> {
    let probs = policy
        .rows()
        .iter()
        .zip(&q.values)
        .map(|(pi, qs)| {
            let y: Vec<f64> = pi.iter().zip(qs).map(|(p, x)| p - 0.5 * eta * x).collect();
            project_simplex(&y)
        })
        .collect();
    PolicyTable::new(probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub g_hat: Vec<f64>,
    pub f_hat: f64,
    pub active_index: usize,
    pub policy_hash: u64,
    pub step_size: f64,
    pub f_exact: Option<f64>,
    pub g_exact: Option<Vec<f64>>,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub lambda: f64,
    pub zeta: f64,
    pub thresholds: Vec<f64>,
    pub records: Vec<TraceRecord>,
    pub best_t: Option<usize>,
    pub policy: PolicyTable,
}

impl RunTrace {
    /// `F` recomputed from a record's stored estimates.
    pub fn recompute_f(&self, record: &TraceRecord) -> Result<(f64, usize)> {
        f_value(&record.g_hat, &self.thresholds, self.lambda, self.zeta)
    }
}

/// Wall-clock timer; reads zero where the platform has no clock.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn secs(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Runs the actor from the uniform policy.
pub fn run(
    mdp: &TabularRcmdp,
    model: &UncertaintyModel,
    cfg: &ActorConfig,
    gm: &GenerativeModel,
) -> Result<(PolicyTable, RunTrace)> {
    run_from(mdp, model, cfg, gm, PolicyTable::uniform(mdp.n_states(), mdp.n_actions()))
}

/// Runs the actor from `initial`. Iteration `t`, index `i` draws from the
/// stream `gm.fork(t * (I + 1) + i)`, so results do not depend on thread
/// scheduling.
pub fn run_from(
    mdp: &TabularRcmdp,
    model: &UncertaintyModel,
    cfg: &ActorConfig,
    gm: &GenerativeModel,
    initial: PolicyTable,
) -> Result<(PolicyTable, RunTrace)> {
    cfg.check()?;
    let lambda = cfg.lambda()?;
    let n_idx = mdp.n_constraints() + 1;
    let signals = mdp.signals();
    let exact_needed = cfg.track_exact || cfg.best_iterate_mode == BestIterateMode::ExactOracle;
    let started = Stopwatch::start();

    let mut policy = initial;
    let mut snapshots = Vec::with_capacity(cfg.total_iters);
    let mut records = Vec::with_capacity(cfg.total_iters);
    let mut max_span: f64 = 0.0;

    for t in 0..cfg.total_iters {
        let per_index: Vec<(RobustEval, QTable)> = signals
            .par_iter()
            .map(|signal| {
                let mut stream = gm.fork((t * n_idx + signal.index) as u64);
                let eval = td_evaluate(&mut stream, &policy, signal, model, &cfg.critic)?;
                let source = match cfg.critic.sigma_mode {
                    SigmaMode::Sampled => SigmaSource::Sampled {
                        gm: &mut stream,
                        mlmc: cfg.critic.mlmc,
                    },
                    SigmaMode::Exact => SigmaSource::Exact,
                };
                let q = build_q(mdp, &eval, signal, model, source)?;
                Ok((eval, q))
            })
            .collect::<Result<_>>()?;

        let g_hat: Vec<f64> = per_index.iter().map(|(e, _)| e.g).collect();
        let (f_hat, active_index) = f_value(&g_hat, mdp.thresholds(), lambda, cfg.zeta)?;
        let (f_exact, g_exact) = if exact_needed {
            let ex = exact_f(mdp, &policy, model, lambda, cfg.zeta)?;
            (Some(ex.f), Some(ex.g))
        } else {
            (None, None)
        };

        for (e, _) in &per_index {
            max_span = max_span.max(span_seminorm(&e.v));
        }
        let eta = match cfg.step_size {
            StepSize::Fixed(eta) => eta,
            StepSize::Theory { c } => cfg.epsilon / (2.0 * c * (1.0 + max_span).powi(2)),
        };

        records.push(TraceRecord {
            t,
            g_hat,
            f_hat,
            active_index,
            policy_hash: policy.snapshot_hash(),
            step_size: eta,
            f_exact,
            g_exact,
            elapsed_secs: started.secs(),
        });
        let next = policy_update(&policy, &per_index[active_index].1, eta)?;
        snapshots.push(std::mem::replace(&mut policy, next));
    }

    let score = |r: &TraceRecord| match cfg.best_iterate_mode {
        BestIterateMode::CriticEstimates => r.f_hat,
        BestIterateMode::ExactOracle => r.f_exact.expect("exact F recorded"),
    };
    let best_t = records
        .iter()
        .min_by(|a, b| score(a).total_cmp(&score(b)).then(a.t.cmp(&b.t)))
        .map(|r| r.t);
    let returned = match best_t {
        Some(t) => snapshots.swap_remove(t),
        None => policy,
    };
    let trace = RunTrace {
        lambda,
        zeta: cfg.zeta,
        thresholds: mdp.thresholds().to_vec(),
        records,
        best_t,
        policy: returned.clone(),
    };
    Ok((returned, trace))
}
