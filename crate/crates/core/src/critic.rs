//! Robust average-cost TD evaluation.
//!
//! Phase 1 runs anchored relative value iteration on sampled robust Bellman
//! targets with `g` held at zero. Phase 2 freezes `V` and averages the
//! sampled one-step gain `T_0(V)(s) - V(s)` over states and iterations.

use serde::{Deserialize, Serialize};

use crate::error::{RcmdpError, Result};
use crate::mdp::{IndexedSignal, PolicyTable, TabularRcmdp, ANCHOR_STATE};
use crate::sampling::{estimate_sigma, GenerativeModel, MlmcConfig};
use crate::uncertainty::{sigma_exact, span_seminorm, UncertaintyModel};

/// Step size `scale / (1 + t)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub scale: f64,
    pub exponent: f64,
}

impl StepSchedule {
    pub fn at(&self, t: usize) -> f64 {
        self.scale / (1.0 + t as f64).powf(self.exponent)
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite() && self.exponent >= 0.0) {
            return Err(RcmdpError::Config(format!(
                "{name} schedule needs scale > 0 and exponent >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Where support-function values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// One-sample contamination estimator or truncated MLMC.
    #[default]
    Sampled,
    /// Exact support function; removes estimator noise in tests.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticConfig {
    pub t_value_iters: usize,
    pub t_gain_iters: usize,
    pub eta: StepSchedule,
    pub beta: StepSchedule,
    pub anchor: usize,
    pub mlmc: MlmcConfig,
    pub sigma_mode: SigmaMode,
    /// Overrides the default blow-up bound on `|V|_inf`.
    pub divergence_bound: Option<f64>,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            t_value_iters: 10_000,
            t_gain_iters: 2_000,
            eta: StepSchedule {
                scale: 0.5,
                exponent: 0.6,
            },
            beta: StepSchedule {
                scale: 1.0,
                exponent: 1.0,
            },
            anchor: ANCHOR_STATE,
            mlmc: MlmcConfig::default(),
            sigma_mode: SigmaMode::Sampled,
            divergence_bound: None,
        }
    }
}

impl CriticConfig {
    pub fn with_iters(t_value_iters: usize, t_gain_iters: usize) -> Self {
        Self {
            t_value_iters,
            t_gain_iters,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.t_value_iters == 0 || self.t_gain_iters == 0 {
            return Err(RcmdpError::Config("critic iteration counts must be positive".into()));
        }
        self.eta.check("eta")?;
        self.beta.check("beta")?;
        self.mlmc.check()
    }
}

/// Critic output for one signal index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustEval {
    pub g: f64,
    pub v: Vec<f64>,
    pub index: usize,
}

/// `1e3 * (1 + span(signal)) / p_min`, with `p_min` the smallest positive
/// nominal transition probability (floored at 1e-6).
pub fn default_divergence_bound(mdp: &TabularRcmdp, signal: &IndexedSignal) -> f64 {
    let p_min = (0..mdp.n_states())
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .flat_map(|(s, a)| mdp.nominal_row(s, a).iter().copied())
        .filter(|p| *p > 0.0)
        .fold(1.0, f64::min)
        .max(1e-6);
    1e3 * (1.0 + signal.span()) / p_min
}

/// Fills `sigma[s][a]` for every pair with positive policy weight.
fn fill_sigma(
    gm: &mut GenerativeModel,
    policy: &PolicyTable,
    v: &[f64],
    model: &UncertaintyModel,
    cfg: &CriticConfig,
    sigma: &mut [Vec<f64>],
) -> Result<()> {
    let mdp = gm.mdp();
    for (s, row) in sigma.iter_mut().enumerate() {
        for (a, out) in row.iter_mut().enumerate() {
            if policy.prob(s, a) == 0.0 {
                *out = 0.0;
                continue;
            }
            *out = match cfg.sigma_mode {
                SigmaMode::Sampled => estimate_sigma(gm, s, a, v, model, &cfg.mlmc)?,
                SigmaMode::Exact => sigma_exact(model, mdp.nominal_row(s, a), v)?.sigma,
            };
        }
    }
    Ok(())
}

pub fn td_evaluate(
    gm: &mut GenerativeModel,
    policy: &PolicyTable,
    signal: &IndexedSignal,
    model: &UncertaintyModel,
    cfg: &CriticConfig,
) -> Result<RobustEval> {
    cfg.check()?;
    let mdp = gm.mdp();
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if policy.n_states() != ns || policy.n_actions() != na {
        return Err(RcmdpError::Structural("policy shape does not match instance".into()));
    }
    if cfg.anchor >= ns {
        return Err(RcmdpError::Config(format!("anchor {} out of range", cfg.anchor)));
    }
    let bound = cfg
        .divergence_bound
        .unwrap_or_else(|| default_divergence_bound(mdp, signal));

    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    let mut sigma = vec![vec![0.0; na]; ns];
    let g0 = 0.0;

    for t in 0..cfg.t_value_iters {
        fill_sigma(gm, policy, &v, model, cfg, &mut sigma)?;
        let eta = cfg.eta.at(t);
        for s in 0..ns {
            let target: f64 = (0..na)
                .map(|a| policy.prob(s, a) * (signal.get(s, a) - g0 + sigma[s][a]))
                .sum();
            next[s] = v[s] + eta * (target - v[s]);
        }
        let pin = next[cfg.anchor];
        for s in 0..ns {
            v[s] = next[s] - pin;
        }
        let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(norm <= bound) {
            return Err(RcmdpError::Divergence {
                iteration: t,
                norm,
                bound,
            });
        }
    }

    let mut g = 0.0;
    for t in 0..cfg.t_gain_iters {
        fill_sigma(gm, policy, &v, model, cfg, &mut sigma)?;
        let delta_bar = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| policy.prob(s, a) * (signal.get(s, a) + sigma[s][a]))
                    .sum::<f64>()
                    - v[s]
            })
            .sum::<f64>()
            / ns as f64;
        g += cfg.beta.at(t) * (delta_bar - g);
    }

    Ok(RobustEval {
        g,
        v,
        index: signal.index,
    })
}

/// `T_g(V)(s) = sum_a pi(a|s) (signal(s,a) - g + sigma(V))` with exact
/// support functions.
pub fn robust_bellman(
    mdp: &TabularRcmdp,
    policy: &PolicyTable,
    signal: &IndexedSignal,
    model: &UncertaintyModel,
    g: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| {
                    let w = policy.prob(s, a);
                    if w == 0.0 {
                        return Ok(0.0);
                    }
                    let sig = sigma_exact(model, mdp.nominal_row(s, a), v)?.sigma;
                    Ok(w * (signal.get(s, a) - g + sig))
                })
                .sum::<Result<f64>>()
        })
        .collect()
}

/// `span(T_g(V) - V)` under exact support functions.
pub fn bellman_residual(
    mdp: &TabularRcmdp,
    policy: &PolicyTable,
    signal: &IndexedSignal,
    model: &UncertaintyModel,
    eval: &RobustEval,
) -> Result<f64> {
    let tv = robust_bellman(mdp, policy, signal, model, eval.g, &eval.v)?;
    let diff: Vec<f64> = tv.iter().zip(&eval.v).map(|(a, b)| a - b).collect();
    Ok(span_seminorm(&diff))
}
