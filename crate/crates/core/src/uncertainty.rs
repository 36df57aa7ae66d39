//! `(s,a)`-rectangular uncertainty sets and their exact support functions.
//!
//! The adversary maximizes: `sigma(V) = sup { q . V : q in set around p }`,
//! where `p` is the nominal row. Contamination has a closed form, total
//! variation is solved by greedy mass transfer, and Wasserstein by the
//! finite optimal-transport LP.

use serde::{Deserialize, Serialize};

use crate::error::{RcmdpError, Result};
use crate::lp::{self, Constraint, LpOutcome, Relation};
use crate::mdp::{FixedKernel, TabularRcmdp};

/// Tolerance for set membership and `worst_row . V == sigma`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UncertaintyModel {
    /// `{(1 - R) p + R q : q in simplex}`.
    Contamination { radius: f64 },
    /// `{q : 0.5 |q - p|_1 <= R}`.
    TotalVariation { radius: f64 },
    /// `{q : W_l(p, q) <= R}` under the ground metric `metric`.
    Wasserstein {
        order: f64,
        radius: f64,
        metric: Vec<Vec<f64>>,
    },
}

impl UncertaintyModel {
    pub fn contamination(radius: f64) -> Result<Self> {
        let m = Self::Contamination { radius };
        m.check()?;
        Ok(m)
    }

    pub fn total_variation(radius: f64) -> Result<Self> {
        let m = Self::TotalVariation { radius };
        m.check()?;
        Ok(m)
    }

    pub fn wasserstein(order: f64, radius: f64, metric: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self::Wasserstein {
            order,
            radius,
            metric,
        };
        m.check()?;
        Ok(m)
    }

    /// Wasserstein set with the line metric `d(i, j) = |i - j|`.
    pub fn wasserstein_line(order: f64, radius: f64, n_states: usize) -> Result<Self> {
        Self::wasserstein(order, radius, line_metric(n_states))
    }

    pub fn radius(&self) -> f64 {
        match self {
            Self::Contamination { radius }
            | Self::TotalVariation { radius }
            | Self::Wasserstein { radius, .. } => *radius,
        }
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        let mut m = self.clone();
        match &mut m {
            Self::Contamination { radius: r }
            | Self::TotalVariation { radius: r }
            | Self::Wasserstein { radius: r, .. } => *r = radius,
        }
        m.check()?;
        Ok(m)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Contamination { .. } => "contamination",
            Self::TotalVariation { .. } => "total-variation",
            Self::Wasserstein { .. } => "wasserstein",
        }
    }

    /// Validates radius ranges and the ground metric.
    ///
    /// Contamination accepts `R in [0, 1)`, with `R = 0` the degenerate
    /// nominal set.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(RcmdpError::InvalidModel(msg));
        match self {
            Self::Contamination { radius } => {
                if !(0.0..1.0).contains(radius) {
                    return bad(format!("contamination radius {radius} not in [0, 1)"));
                }
            }
            Self::TotalVariation { radius } => {
                if !(0.0..=1.0).contains(radius) {
                    return bad(format!("total-variation radius {radius} not in [0, 1]"));
                }
            }
            Self::Wasserstein {
                order,
                radius,
                metric,
            } => {
                if !(order.is_finite() && *order >= 1.0) {
                    return bad(format!("wasserstein order {order} must be >= 1"));
                }
                if !(radius.is_finite() && *radius >= 0.0) {
                    return bad(format!("wasserstein radius {radius} must be >= 0"));
                }
                let n = metric.len();
                for (i, row) in metric.iter().enumerate() {
                    if row.len() != n {
                        return bad(format!("metric row {i} has length {}", row.len()));
                    }
                    if row[i] != 0.0 {
                        return bad(format!("metric diagonal entry {i} is nonzero"));
                    }
                    for (j, &d) in row.iter().enumerate() {
                        if !(d.is_finite() && d >= 0.0) || d != metric[j][i] {
                            return bad(format!("metric entry ({i},{j}) is negative or asymmetric"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that a ground metric covers `n` states.
    pub fn check_dims(&self, n: usize) -> Result<()> {
        if let Self::Wasserstein { metric, .. } = self {
            if metric.len() != n {
                return Err(RcmdpError::InvalidModel(format!(
                    "metric is {0}x{0} but rows have {n} states",
                    metric.len()
                )));
            }
        }
        Ok(())
    }

    /// Distance of `q` from `nominal` in this set's divergence, compared
    /// against [`UncertaintyModel::radius`] for membership.
    pub fn divergence(&self, nominal: &[f64], q: &[f64]) -> Result<f64> {
        match self {
            Self::Contamination { radius } => {
                // q = (1-R)p + R r for some distribution r.
                let ok = nominal
                    .iter()
                    .zip(q)
                    .all(|(p, x)| x - (1.0 - radius) * p >= -MEMBERSHIP_TOL);
                Ok(if ok { *radius } else { f64::INFINITY })
            }
            Self::TotalVariation { .. } => Ok(tv_distance(nominal, q)),
            Self::Wasserstein { order, metric, .. } => wasserstein_distance(nominal, q, metric, *order),
        }
    }

    pub fn contains(&self, nominal: &[f64], q: &[f64]) -> Result<bool> {
        let on_simplex = q.iter().all(|x| *x >= -MEMBERSHIP_TOL)
            && (q.iter().sum::<f64>() - 1.0).abs() <= MEMBERSHIP_TOL;
        Ok(on_simplex && self.divergence(nominal, q)? <= self.radius() + MEMBERSHIP_TOL)
    }
}

/// `d(i, j) = |i - j|`.
pub fn line_metric(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| i.abs_diff(j) as f64).collect())
        .collect()
}

/// `d(i, j) = 1` for `i != j`; Wasserstein-1 under it is total variation.
pub fn discrete_metric(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportResult {
    pub sigma: f64,
    pub worst_row: Vec<f64>,
}

pub fn span_seminorm(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    hi - lo
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `W_l(p, q)` via the transport LP.
pub fn wasserstein_distance(p: &[f64], q: &[f64], metric: &[Vec<f64>], order: f64) -> Result<f64> {
    let n = p.len();
    let cost: Vec<f64> = (0..n * n)
        .map(|k| -metric[k / n][k % n].powf(order))
        .collect();
    let mut rows = Vec::with_capacity(2 * n);
    for x in 0..n {
        let mut c = vec![0.0; n * n];
        c[x * n..(x + 1) * n].fill(1.0);
        rows.push(Constraint::new(c, Relation::Eq, p[x]));
    }
    for y in 0..n {
        let mut c = vec![0.0; n * n];
        for x in 0..n {
            c[x * n + y] = 1.0;
        }
        rows.push(Constraint::new(c, Relation::Eq, q[y]));
    }
    match lp::maximize(&cost, &rows) {
        LpOutcome::Optimal { value, .. } => Ok((-value).max(0.0).powf(1.0 / order)),
        _ => Err(RcmdpError::InfeasibleSet("transport LP between p and q failed".into())),
    }
}

/// Exact support function and an achieving row.
pub fn sigma_exact(model: &UncertaintyModel, nominal_row: &[f64], v: &[f64]) -> Result<SupportResult> {
    if nominal_row.len() != v.len() {
        return Err(RcmdpError::Param(format!(
            "row has {} entries, V has {}",
            nominal_row.len(),
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(RcmdpError::Param("V has non-finite entries".into()));
    }
    model.check_dims(v.len())?;
    match model {
        UncertaintyModel::Contamination { radius } => Ok(contamination_support(*radius, nominal_row, v)),
        UncertaintyModel::TotalVariation { radius } => Ok(tv_support(*radius, nominal_row, v)),
        UncertaintyModel::Wasserstein {
            order,
            radius,
            metric,
        } => wasserstein_support(*order, *radius, metric, nominal_row, v),
    }
}

fn contamination_support(radius: f64, p: &[f64], v: &[f64]) -> SupportResult {
    if span_seminorm(v) == 0.0 {
        return SupportResult {
            sigma: dot(p, v),
            worst_row: p.to_vec(),
        };
    }
    let k = argmax(v);
    let mut worst_row: Vec<f64> = p.iter().map(|x| (1.0 - radius) * x).collect();
    worst_row[k] += radius;
    let sigma = (1.0 - radius) * dot(p, v) + radius * v[k];
    SupportResult { sigma, worst_row }
}

fn tv_support(radius: f64, p: &[f64], v: &[f64]) -> SupportResult {
    let k = argmax(v);
    let mut q = p.to_vec();
    let mut order: Vec<usize> = (0..v.len()).filter(|&j| v[j] < v[k]).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut budget = radius;
    for j in order {
        if budget <= 0.0 {
            break;
        }
        let take = q[j].min(budget);
        q[j] -= take;
        q[k] += take;
        budget -= take;
    }
    SupportResult {
        sigma: dot(&q, v),
        worst_row: q,
    }
}

fn wasserstein_support(
    order: f64,
    radius: f64,
    metric: &[Vec<f64>],
    p: &[f64],
    v: &[f64],
) -> Result<SupportResult> {
    if radius == 0.0 || span_seminorm(v) == 0.0 {
        return Ok(SupportResult {
            sigma: dot(p, v),
            worst_row: p.to_vec(),
        });
    }
    let n = v.len();
    let sources: Vec<usize> = (0..n).filter(|&x| p[x] > 0.0).collect();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let nv = sources.len() * n;

    // gamma(x, y) for x in supp(p): sum_y gamma = p(x), sum gamma d^l <= R^l.
    let objective: Vec<f64> = (0..nv).map(|k| v[k % n] - lo).collect();
    let mut rows = Vec::with_capacity(sources.len() + 1);
    for (i, &x) in sources.iter().enumerate() {
        let mut c = vec![0.0; nv];
        c[i * n..(i + 1) * n].fill(1.0);
        rows.push(Constraint::new(c, Relation::Eq, p[x]));
    }
    let budget: Vec<f64> = (0..nv)
        .map(|k| metric[sources[k / n]][k % n].powf(order))
        .collect();
    rows.push(Constraint::new(budget, Relation::Le, radius.powf(order)));

    match lp::maximize(&objective, &rows) {
        LpOutcome::Optimal { x, .. } => {
            let mut q = vec![0.0; n];
            for (k, g) in x.iter().enumerate() {
                q[k % n] += g;
            }
            // Absorb round-off so the row stays exactly stochastic.
            let total: f64 = q.iter().sum();
            if total > 0.0 {
                q.iter_mut().for_each(|e| *e /= total);
            }
            Ok(SupportResult {
                sigma: dot(&q, v),
                worst_row: q,
            })
        }
        _ => Err(RcmdpError::InfeasibleSet(
            "Wasserstein transport LP reported no optimum".into(),
        )),
    }
}

/// Wasserstein support through its one-dimensional dual,
/// `min_{lambda >= 0} lambda R^l + sum_x p(x) max_y (V(y) - lambda d(x,y)^l)`.
///
/// The dual objective is convex and piecewise linear, so its minimum sits
/// at `lambda = 0` or at a breakpoint where two `y` tie for some `x`; every
/// candidate is evaluated. Independent of the primal LP route.
pub fn wasserstein_dual(order: f64, radius: f64, metric: &[Vec<f64>], p: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    let rl = radius.powf(order);
    let cost = |x: usize, y: usize| metric[x][y].powf(order);
    let dual = |lambda: f64| -> f64 {
        lambda * rl
            + (0..n)
                .filter(|&x| p[x] > 0.0)
                .map(|x| {
                    p[x] * (0..n)
                        .map(|y| v[y] - lambda * cost(x, y))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum::<f64>()
    };
    let mut best = dual(0.0);
    for x in (0..n).filter(|&x| p[x] > 0.0) {
        for y1 in 0..n {
            for y2 in (y1 + 1)..n {
                let dc = cost(x, y1) - cost(x, y2);
                if dc.abs() < 1e-15 {
                    continue;
                }
                let lambda = (v[y1] - v[y2]) / dc;
                if lambda > 0.0 && lambda.is_finite() {
                    best = best.min(dual(lambda));
                }
            }
        }
    }
    best
}

/// Kernel assembled row by row from the achieving rows of
/// [`sigma_exact`].
pub fn worst_case_kernel(model: &UncertaintyModel, mdp: &TabularRcmdp, v: &[f64]) -> Result<FixedKernel> {
    let trans = (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| sigma_exact(model, mdp.nominal_row(s, a), v).map(|r| r.worst_row))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FixedKernel { trans })
}
