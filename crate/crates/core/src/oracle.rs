//! Exact ground truth at desk scale.
//!
//! Robust evaluation alternates worst-case kernel extraction with exact
//! evaluation under that kernel (policy iteration for the adversary). Rows
//! are only switched on strict improvement, so the alternation cannot cycle
//! between tied kernels.

use rayon::prelude::*;
use serde::Serialize;

use crate::actor::f_value;
use crate::critic::robust_bellman;
use crate::error::{RcmdpError, Result};
use crate::mdp::{evaluate_fixed, FixedKernel, IndexedSignal, PolicyTable, TabularRcmdp, ANCHOR_STATE};
use crate::uncertainty::{sigma_exact, span_seminorm, UncertaintyModel};

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const MAX_ALTERNATIONS: usize = 10_000;
const SWITCH_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEval {
    pub g: f64,
    pub v: Vec<f64>,
    pub worst_kernel: FixedKernel,
    pub residual: f64,
    pub iterations: usize,
}

pub fn robust_evaluate(
    mdp: &TabularRcmdp,
    policy: &PolicyTable,
    signal: &IndexedSignal,
    model: &UncertaintyModel,
    anchor: usize,
) -> Result<OracleEval> {
    let mut kernel = mdp.nominal();
    let (mut g, mut v) = evaluate_fixed(&kernel, policy, signal, anchor)?;
    let mut residual = f64::INFINITY;

    for iteration in 1..=MAX_ALTERNATIONS {
        let mut changed = false;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                if policy.prob(s, a) == 0.0 {
                    continue;
                }
                let best = sigma_exact(model, mdp.nominal_row(s, a), &v)?;
                let current: f64 = kernel.trans[s][a].iter().zip(&v).map(|(p, x)| p * x).sum();
                if best.sigma > current + SWITCH_TOL * (1.0 + span_seminorm(&v)) {
                    kernel.trans[s][a] = best.worst_row;
                    changed = true;
                }
            }
        }
        let tv = robust_bellman(mdp, policy, signal, model, g, &v)?;
        let diff: Vec<f64> = tv.iter().zip(&v).map(|(a, b)| a - b).collect();
        residual = span_seminorm(&diff);
        if !changed {
            if residual <= RESIDUAL_TOL {
                // Rows with zero policy weight never affect (g, V); fill them
                // with achieving rows so the kernel is a full worst case.
                for s in 0..mdp.n_states() {
                    for a in 0..mdp.n_actions() {
                        if policy.prob(s, a) == 0.0 {
                            kernel.trans[s][a] = sigma_exact(model, mdp.nominal_row(s, a), &v)?.worst_row;
                        }
                    }
                }
                return Ok(OracleEval {
                    g,
                    v,
                    worst_kernel: kernel,
                    residual,
                    iterations: iteration,
                });
            }
            break;
        }
        (g, v) = evaluate_fixed(&kernel, policy, signal, anchor)?;
    }
    Err(RcmdpError::NoConvergence {
        iterations: MAX_ALTERNATIONS,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactF {
    pub f: f64,
    pub active_index: usize,
    pub g: Vec<f64>,
}

impl ExactF {
    /// `max_i (g_i - b_i)`, or `-inf` without constraints.
    pub fn max_violation(&self, thresholds: &[f64]) -> f64 {
        self.g[1..]
            .iter()
            .zip(thresholds)
            .map(|(g, b)| g - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Robust values for every index `0..=I`.
pub fn robust_values(mdp: &TabularRcmdp, policy: &PolicyTable, model: &UncertaintyModel) -> Result<Vec<f64>> {
    mdp.signals()
        .iter()
        .map(|sig| robust_evaluate(mdp, policy, sig, model, ANCHOR_STATE).map(|e| e.g))
        .collect()
}

pub fn exact_f(
    mdp: &TabularRcmdp,
    policy: &PolicyTable,
    model: &UncertaintyModel,
    lambda: f64,
    zeta: f64,
) -> Result<ExactF> {
    let g = robust_values(mdp, policy, model)?;
    let (f, active_index) = f_value(&g, mdp.thresholds(), lambda, zeta)?;
    Ok(ExactF { f, active_index, g })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptimum {
    pub policy: PolicyTable,
    pub g_star: f64,
    pub feasible: bool,
    /// Robust values of `policy` for every index.
    pub g: Vec<f64>,
    pub evaluated: usize,
}

pub const DEFAULT_GRID_BUDGET: u128 = 2_000_000;

/// Points of the `units`-resolution grid on the `n`-simplex, as integer
/// compositions of `units`.
fn compositions(units: usize, n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![units]];
    }
    let mut out = Vec::new();
    for first in 0..=units {
        for mut rest in compositions(units - first, n - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Exhaustive search over per-state simplex grids with spacing `grid_step`
/// (`1 / grid_step` must be an integer).
pub fn grid_optimal(
    mdp: &TabularRcmdp,
    model: &UncertaintyModel,
    grid_step: f64,
    budget: u128,
) -> Result<GridOptimum> {
    let units = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || units < 1.0 || (units * grid_step - 1.0).abs() > 1e-9 {
        return Err(RcmdpError::Param(format!("grid step {grid_step} does not divide 1")));
    }
    let units = units as usize;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let per_state = binomial((units + na - 1) as u128, (na - 1) as u128);
    let count = (0..ns).fold(1u128, |acc, _| acc.saturating_mul(per_state));
    if count > budget {
        return Err(RcmdpError::BudgetExceeded { count, budget });
    }

    let rows: Vec<Vec<f64>> = compositions(units, na)
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / units as f64).collect())
        .collect();
    let total = count as usize;
    let results: Vec<(PolicyTable, Vec<f64>)> = (0..total)
        .into_par_iter()
        .map(|mut code| {
            let probs = (0..ns)
                .map(|_| {
                    let r = rows[code % rows.len()].clone();
                    code /= rows.len();
                    r
                })
                .collect();
            let policy = PolicyTable::new(probs)?;
            let g = robust_values(mdp, &policy, model)?;
            Ok((policy, g))
        })
        .collect::<Result<_>>()?;

    let violation = |g: &[f64]| {
        g[1..]
            .iter()
            .zip(mdp.thresholds())
            .map(|(x, b)| x - b)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let feasible_best = results
        .iter()
        .filter(|(_, g)| violation(g) <= 1e-12)
        .min_by(|a, b| a.1[0].total_cmp(&b.1[0]));
    let (chosen, feasible) = match feasible_best {
        Some(best) => (best, true),
        None => (
            results
                .iter()
                .min_by(|a, b| violation(&a.1).total_cmp(&violation(&b.1)))
                .expect("grid is never empty"),
            false,
        ),
    };
    Ok(GridOptimum {
        policy: chosen.0.clone(),
        g_star: chosen.1[0],
        feasible,
        g: chosen.1.clone(),
        evaluated: total,
    })
}
