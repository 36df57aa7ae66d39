//! Tabular robust constrained MDP instances, policies, and exact evaluation
//! of a policy under one fixed transition kernel.
//!
//! Signals are indexed `0..=I`: index 0 is the cost, index `i >= 1` is
//! constraint `i`. Relative value functions are anchored at
//! [`ANCHOR_STATE`].

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RcmdpError, Result};

/// State whose relative value is pinned to zero.
pub const ANCHOR_STATE: usize = 0;

const KERNEL_SUM_TOL: f64 = 1e-12;
const POLICY_SUM_TOL: f64 = 1e-10;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// A finite MDP with one cost, `I` constraint signals and their thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRcmdp", into = "RawRcmdp")]
pub struct TabularRcmdp {
    n_states: usize,
    n_actions: usize,
    cost: Vec<Vec<f64>>,
    constraints: Vec<Vec<Vec<f64>>>,
    thresholds: Vec<f64>,
    nominal_kernel: Vec<Vec<Vec<f64>>>,
    initial_dist: Vec<f64>,
}

/// Unvalidated on-disk form of [`TabularRcmdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRcmdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub cost: Vec<Vec<f64>>,
    #[serde(default)]
    pub constraints: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    pub nominal_kernel: Vec<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
}

impl RawRcmdp {
    /// Every shape, range and stochasticity violation, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 {
            out.push("n_states must be positive".into());
        }
        if na == 0 {
            out.push("n_actions must be positive".into());
        }
        check_signal(&mut out, "cost", &self.cost, ns, na);
        for (i, c) in self.constraints.iter().enumerate() {
            check_signal(&mut out, &format!("constraints[{i}]"), c, ns, na);
        }
        if self.thresholds.len() != self.constraints.len() {
            out.push(format!(
                "{} constraints but {} thresholds",
                self.constraints.len(),
                self.thresholds.len()
            ));
        }
        if let Some(i) = self.thresholds.iter().position(|b| !b.is_finite()) {
            out.push(format!("thresholds[{i}] is not finite"));
        }
        if self.nominal_kernel.len() != ns {
            out.push(format!(
                "nominal_kernel has {} rows, expected {ns}",
                self.nominal_kernel.len()
            ));
        }
        for (s, per_action) in self.nominal_kernel.iter().enumerate() {
            if per_action.len() != na {
                out.push(format!(
                    "nominal_kernel[{s}] has {} actions, expected {na}",
                    per_action.len()
                ));
            }
            for (a, row) in per_action.iter().enumerate() {
                if let Err(e) = check_distribution(row, ns, KERNEL_SUM_TOL) {
                    out.push(format!("nominal_kernel[{s}][{a}]: {e}"));
                }
            }
        }
        if let Err(e) = check_distribution(&self.initial_dist, ns, KERNEL_SUM_TOL) {
            out.push(format!("initial_dist: {e}"));
        }
        out
    }
}

fn check_signal(out: &mut Vec<String>, name: &str, sig: &[Vec<f64>], ns: usize, na: usize) {
    if sig.len() != ns {
        out.push(format!("{name} has {} rows, expected {ns}", sig.len()));
    }
    for (s, row) in sig.iter().enumerate() {
        if row.len() != na {
            out.push(format!("{name}[{s}] has {} entries, expected {na}", row.len()));
        }
        for (a, &x) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) {
                out.push(format!("{name}[{s}][{a}] = {x} is outside [0, 1]"));
            }
        }
    }
}

pub(crate) fn check_distribution(row: &[f64], len: usize, tol: f64) -> std::result::Result<(), String> {
    if row.len() != len {
        return Err(format!("length {} but expected {len}", row.len()));
    }
    if let Some(i) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(format!("entry {i} = {} is negative or not finite", row[i]));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("sums to {sum}, not 1"));
    }
    Ok(())
}

impl TryFrom<RawRcmdp> for TabularRcmdp {
    type Error = RcmdpError;

    fn try_from(raw: RawRcmdp) -> Result<Self> {
        let violations = raw.violations();
        if !violations.is_empty() {
            return Err(RcmdpError::Structural(violations.join("; ")));
        }
        Ok(Self {
            n_states: raw.n_states,
            n_actions: raw.n_actions,
            cost: raw.cost,
            constraints: raw.constraints,
            thresholds: raw.thresholds,
            nominal_kernel: raw.nominal_kernel,
            initial_dist: raw.initial_dist,
        })
    }
}

impl From<TabularRcmdp> for RawRcmdp {
    fn from(m: TabularRcmdp) -> Self {
        Self {
            n_states: m.n_states,
            n_actions: m.n_actions,
            cost: m.cost,
            constraints: m.constraints,
            thresholds: m.thresholds,
            nominal_kernel: m.nominal_kernel,
            initial_dist: m.initial_dist,
        }
    }
}

impl TabularRcmdp {
    pub fn new(
        cost: Vec<Vec<f64>>,
        constraints: Vec<Vec<Vec<f64>>>,
        thresholds: Vec<f64>,
        nominal_kernel: Vec<Vec<Vec<f64>>>,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let n_states = nominal_kernel.len();
        let n_actions = nominal_kernel.first().map_or(0, Vec::len);
        RawRcmdp {
            n_states,
            n_actions,
            cost,
            constraints,
            thresholds,
            nominal_kernel,
            initial_dist,
        }
        .try_into()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of constraints `I`.
    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn cost(&self) -> &[Vec<f64>] {
        &self.cost
    }

    pub fn constraints(&self) -> &[Vec<Vec<f64>>] {
        &self.constraints
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn nominal_row(&self, s: usize, a: usize) -> &[f64] {
        &self.nominal_kernel[s][a]
    }

    pub fn nominal(&self) -> FixedKernel {
        FixedKernel {
            trans: self.nominal_kernel.clone(),
        }
    }

    /// Signal `index` (0 = cost, `i >= 1` = constraint `i`).
    ///
    /// Panics if `index > I`.
    pub fn signal(&self, index: usize) -> IndexedSignal {
        let values = if index == 0 {
            self.cost.clone()
        } else {
            self.constraints[index - 1].clone()
        };
        IndexedSignal { index, values }
    }

    /// All `I + 1` signals in index order.
    pub fn signals(&self) -> Vec<IndexedSignal> {
        (0..=self.n_constraints()).map(|i| self.signal(i)).collect()
    }

    /// Same instance with different constraint thresholds.
    pub fn with_thresholds(&self, thresholds: Vec<f64>) -> Result<Self> {
        let mut raw: RawRcmdp = self.clone().into();
        raw.thresholds = thresholds;
        raw.try_into()
    }
}

/// Row-stochastic map from states to action distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy", into = "RawPolicy")]
pub struct PolicyTable {
    probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPolicy {
    pub probs: Vec<Vec<f64>>,
}

impl TryFrom<RawPolicy> for PolicyTable {
    type Error = RcmdpError;

    fn try_from(raw: RawPolicy) -> Result<Self> {
        PolicyTable::new(raw.probs)
    }
}

impl From<PolicyTable> for RawPolicy {
    fn from(p: PolicyTable) -> Self {
        Self { probs: p.probs }
    }
}

impl PolicyTable {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(RcmdpError::Structural("policy has no states".into()));
        }
        let na = probs[0].len();
        if na == 0 {
            return Err(RcmdpError::Structural("policy has no actions".into()));
        }
        for (s, row) in probs.iter().enumerate() {
            check_distribution(row, na, POLICY_SUM_TOL)
                .map_err(|e| RcmdpError::Structural(format!("policy row {s}: {e}")))?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let probs = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Self { probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.probs
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// FNV-1a hash over the bit patterns of all entries.
    pub fn snapshot_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in self.probs.iter().flatten() {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states() != n_states || self.n_actions() != n_actions {
            return Err(RcmdpError::Structural(format!(
                "policy is {}x{}, instance is {n_states}x{n_actions}",
                self.n_states(),
                self.n_actions()
            )));
        }
        Ok(())
    }
}

/// One transition kernel `trans[s][a][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedKernel {
    pub trans: Vec<Vec<Vec<f64>>>,
}

impl FixedKernel {
    pub fn new(trans: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let ns = trans.len();
        for (s, per_action) in trans.iter().enumerate() {
            for (a, row) in per_action.iter().enumerate() {
                check_distribution(row, ns, KERNEL_SUM_TOL)
                    .map_err(|e| RcmdpError::Structural(format!("kernel[{s}][{a}]: {e}")))?;
            }
        }
        Ok(Self { trans })
    }

    pub fn n_states(&self) -> usize {
        self.trans.len()
    }

    pub fn n_actions(&self) -> usize {
        self.trans.first().map_or(0, Vec::len)
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.trans[s][a]
    }

    /// State-to-state matrix `M[s][s'] = sum_a pi(a|s) P(s'|s,a)`.
    pub fn induced_chain(&self, policy: &PolicyTable) -> DMatrix<f64> {
        let n = self.n_states();
        let mut m = DMatrix::zeros(n, n);
        for s in 0..n {
            for (a, row) in self.trans[s].iter().enumerate() {
                let w = policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                for (t, p) in row.iter().enumerate() {
                    m[(s, t)] += w * p;
                }
            }
        }
        m
    }
}

/// A cost or constraint table together with its index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedSignal {
    pub index: usize,
    pub values: Vec<Vec<f64>>,
}

impl IndexedSignal {
    pub fn new(index: usize, values: Vec<Vec<f64>>) -> Self {
        Self { index, values }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s][a]
    }

    /// Policy-averaged signal per state.
    pub fn averaged(&self, policy: &PolicyTable) -> Vec<f64> {
        self.values
            .iter()
            .zip(policy.rows())
            .map(|(sig, pi)| sig.iter().zip(pi).map(|(x, p)| x * p).sum())
            .collect()
    }

    pub fn span(&self) -> f64 {
        let flat = self.values.iter().flatten();
        let hi = flat.clone().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = flat.cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCheck {
    pub label: String,
    pub irreducible: bool,
    pub aperiodic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub structural_violations: Vec<String>,
    pub checks: Vec<ChainCheck>,
    /// Non-fatal ergodicity warnings, one per offending policy.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ergodic(&self) -> bool {
        self.checks.iter().all(|c| c.irreducible && c.aperiodic)
    }
}

/// Number of deterministic policies tested besides the uniform one.
pub fn sampled_policy_count(n_states: usize, n_actions: usize) -> usize {
    let mut total: usize = 1;
    for _ in 0..n_states {
        total = total.saturating_mul(n_actions);
        if total >= 32 {
            return 32;
        }
    }
    total
}

/// Sampled ergodicity check: the uniform policy plus up to 32 deterministic
/// policies (all of them when `|A|^|S| <= 32`).
pub fn validate(mdp: &TabularRcmdp) -> Result<ValidationReport> {
    let raw: RawRcmdp = mdp.clone().into();
    validate_raw(&raw)
}

/// Like [`validate`] but on an unchecked instance; stochasticity failures
/// become [`RcmdpError::Structural`].
pub fn validate_raw(raw: &RawRcmdp) -> Result<ValidationReport> {
    let violations = raw.violations();
    if !violations.is_empty() {
        return Err(RcmdpError::Structural(violations.join("; ")));
    }
    let kernel = FixedKernel {
        trans: raw.nominal_kernel.clone(),
    };
    let (ns, na) = (raw.n_states, raw.n_actions);

    let mut policies = vec![("uniform".to_string(), PolicyTable::uniform(ns, na))];
    for actions in deterministic_sample(ns, na) {
        let label = format!("deterministic{actions:?}");
        policies.push((label, PolicyTable::deterministic(&actions, na)));
    }

    let mut checks = Vec::with_capacity(policies.len());
    let mut warnings = Vec::new();
    for (label, policy) in policies {
        let m = kernel.induced_chain(&policy);
        let (irreducible, aperiodic) = chain_structure(&m);
        if !irreducible {
            warnings.push(format!("{label}: induced chain is reducible"));
        } else if !aperiodic {
            warnings.push(format!("{label}: induced chain is periodic"));
        }
        checks.push(ChainCheck {
            label,
            irreducible,
            aperiodic,
        });
    }
    Ok(ValidationReport {
        structural_violations: Vec::new(),
        checks,
        warnings,
    })
}

fn deterministic_sample(ns: usize, na: usize) -> Vec<Vec<usize>> {
    let k = sampled_policy_count(ns, na);
    let exhaustive = (na as f64).powi(ns as i32) <= 32.0;
    if exhaustive {
        return (0..k)
            .map(|mut code| {
                (0..ns)
                    .map(|_| {
                        let a = code % na;
                        code /= na;
                        a
                    })
                    .collect()
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let actions: Vec<usize> = (0..ns).map(|_| rng.gen_range(0..na)).collect();
        if seen.insert(actions.clone()) {
            out.push(actions);
        }
    }
    out
}

/// `(irreducible, aperiodic)` for the support graph of `m`.
pub fn chain_structure(m: &DMatrix<f64>) -> (bool, bool) {
    let n = m.nrows();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|u| (0..n).filter(|&v| m[(u, v)] > 0.0).collect())
        .collect();

    // BFS levels from state 0 along forward edges.
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for &v in &succ[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let forward_all = level.iter().all(|&l| l != usize::MAX);

    let mut back = vec![false; n];
    back[0] = true;
    let mut stack = vec![0];
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if !back[u] && succ[u].contains(&v) {
                back[u] = true;
                stack.push(u);
            }
        }
    }
    let irreducible = forward_all && back.iter().all(|&b| b);
    if !irreducible {
        return (false, false);
    }

    // Period = gcd over edges u->v of level[u] + 1 - level[v].
    let mut period = 0usize;
    for u in 0..n {
        for &v in &succ[u] {
            let diff = (level[u] + 1).abs_diff(level[v]);
            period = gcd(period, diff);
        }
    }
    (true, period == 1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary distribution of the chain induced by `policy` on `kernel`.
pub fn stationary_distribution(kernel: &FixedKernel, policy: &PolicyTable) -> Result<Vec<f64>> {
    policy.check_shape(kernel.n_states(), kernel.n_actions())?;
    let m = kernel.induced_chain(policy);
    stationary_of_chain(&m)
}

pub fn stationary_of_chain(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    // (M^T - I) d = 0 with the last equation replaced by sum(d) = 1.
    let mut a = m.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let d = a
        .lu()
        .solve(&b)
        .ok_or_else(|| RcmdpError::SingularChain("stationary system is singular".into()))?;
    let d: Vec<f64> = d.iter().copied().collect();

    let residual = (0..n)
        .map(|t| ((0..n).map(|s| d[s] * m[(s, t)]).sum::<f64>() - d[t]).abs())
        .fold(0.0, f64::max);
    if !(residual <= STATIONARY_RESIDUAL_TOL) || d.iter().any(|x| *x < -1e-9) {
        return Err(RcmdpError::SingularChain(format!(
            "stationary solve residual {residual:e}; chain is not unichain"
        )));
    }
    Ok(d)
}

/// Exact average value and anchored relative value function of `policy`
/// under a single kernel.
pub fn evaluate_fixed(
    kernel: &FixedKernel,
    policy: &PolicyTable,
    signal: &IndexedSignal,
    anchor: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = kernel.n_states();
    policy.check_shape(n, kernel.n_actions())?;
    if anchor >= n {
        return Err(RcmdpError::Param(format!("anchor {anchor} out of range")));
    }
    let m = kernel.induced_chain(policy);
    let reward = signal.averaged(policy);
    let d = stationary_of_chain(&m)?;
    let g: f64 = d.iter().zip(&reward).map(|(p, r)| p * r).sum();

    // Unknowns (V, g): V - M V + g 1 = r_pi and V(anchor) = 0.
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut b = DVector::zeros(n + 1);
    for s in 0..n {
        for t in 0..n {
            a[(s, t)] = -m[(s, t)];
        }
        a[(s, s)] += 1.0;
        a[(s, n)] = 1.0;
        b[s] = reward[s];
    }
    a[(n, anchor)] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| RcmdpError::SingularChain("Poisson system is singular".into()))?;
    let mut v: Vec<f64> = x.iter().take(n).copied().collect();
    v[anchor] = 0.0;
    Ok((g, v))
}
