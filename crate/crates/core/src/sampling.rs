//! Generative access to the nominal kernel and sample-based estimators of
//! the support function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RcmdpError, Result};
use crate::mdp::TabularRcmdp;
use crate::uncertainty::{sigma_exact, UncertaintyModel};

/// Name of the PRNG family behind every sample stream.
pub const PRNG_FAMILY: &str = "ChaCha8";

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for stream `key` under `root`:
/// `mix64(root ^ mix64(key + 0x9e3779b97f4a7c15))`.
pub fn derive_seed(root: u64, key: u64) -> u64 {
    mix64(root ^ mix64(key.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Sampler for next states under the nominal kernel.
#[derive(Debug, Clone)]
pub struct GenerativeModel<'a> {
    mdp: &'a TabularRcmdp,
    cumulative: Vec<Vec<Vec<f64>>>,
    rng: ChaCha8Rng,
    seed: u64,
}

impl<'a> GenerativeModel<'a> {
    pub fn new(mdp: &'a TabularRcmdp, seed: u64) -> Self {
        let cumulative = (0..mdp.n_states())
            .map(|s| {
                (0..mdp.n_actions())
                    .map(|a| {
                        let mut acc = 0.0;
                        mdp.nominal_row(s, a)
                            .iter()
                            .map(|p| {
                                acc += p;
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            mdp,
            cumulative,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn mdp(&self) -> &'a TabularRcmdp {
        self.mdp
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream seeded by [`derive_seed`]`(self.seed, key)`.
    /// Does not advance `self`.
    pub fn fork(&self, key: u64) -> Self {
        Self {
            mdp: self.mdp,
            cumulative: self.cumulative.clone(),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(self.seed, key)),
            seed: derive_seed(self.seed, key),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn sample_next(&mut self, s: usize, a: usize) -> usize {
        let cum = &self.cumulative[s][a];
        let u: f64 = self.rng.gen();
        match cum.iter().position(|&c| c > u) {
            Some(t) => t,
            // u landed in the round-off gap above the last partial sum.
            None => {
                let row = self.mdp.nominal_row(s, a);
                row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlmcConfig {
    pub n_max: u32,
    #[serde(default = "default_geom_p")]
    pub geom_p: f64,
}

fn default_geom_p() -> f64 {
    0.5
}

impl Default for MlmcConfig {
    fn default() -> Self {
        Self {
            n_max: 12,
            geom_p: 0.5,
        }
    }
}

impl MlmcConfig {
    pub fn new(n_max: u32) -> Result<Self> {
        let cfg = Self { n_max, geom_p: 0.5 };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_max == 0 || self.n_max > 30 {
            return Err(RcmdpError::Config(format!("n_max = {} not in 1..=30", self.n_max)));
        }
        if self.geom_p != 0.5 {
            return Err(RcmdpError::Config(format!(
                "geom_p = {} but only 0.5 is supported",
                self.geom_p
            )));
        }
        Ok(())
    }

    /// `P(min(N, n_max) = n)` for `N` counting failures of a fair coin:
    /// `2^-(n+1)` below `n_max`, `2^-n_max` at `n_max`.
    pub fn level_mass(&self, n: u32) -> f64 {
        match n.cmp(&self.n_max) {
            std::cmp::Ordering::Less => 0.5f64.powi(n as i32 + 1),
            std::cmp::Ordering::Equal => 0.5f64.powi(self.n_max as i32),
            std::cmp::Ordering::Greater => 0.0,
        }
    }

    /// Draws the truncated level `min(N, n_max)`.
    pub fn sample_level<R: Rng>(&self, rng: &mut R) -> u32 {
        let mut n = 0;
        while n < self.n_max && !rng.gen_bool(0.5) {
            n += 1;
        }
        n
    }
}

/// `(1 - R) V(s') + R max V` with `s'` one nominal draw.
pub fn estimate_sigma_contamination(gm: &mut GenerativeModel, s: usize, a: usize, v: &[f64], radius: f64) -> f64 {
    let next = gm.sample_next(s, a);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (1.0 - radius) * v[next] + radius * hi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlmcSample {
    pub value: f64,
    pub level: u32,
    pub samples: usize,
}

/// Truncated multilevel Monte-Carlo estimate of `sigma(V)` for a
/// total-variation or Wasserstein set.
pub fn estimate_sigma_mlmc(
    gm: &mut GenerativeModel,
    s: usize,
    a: usize,
    v: &[f64],
    model: &UncertaintyModel,
    cfg: &MlmcConfig,
) -> Result<f64> {
    estimate_sigma_mlmc_detailed(gm, s, a, v, model, cfg).map(|m| m.value)
}

pub fn estimate_sigma_mlmc_detailed(
    gm: &mut GenerativeModel,
    s: usize,
    a: usize,
    v: &[f64],
    model: &UncertaintyModel,
    cfg: &MlmcConfig,
) -> Result<MlmcSample> {
    if matches!(model, UncertaintyModel::Contamination { .. }) {
        return Err(RcmdpError::Config(
            "MLMC estimator applies to total-variation and Wasserstein sets".into(),
        ));
    }
    let n = v.len();
    let level = cfg.sample_level(gm.rng());
    let half = 1usize << level;
    let total = 2 * half;

    let mut odd = vec![0.0; n];
    let mut even = vec![0.0; n];
    let mut first = 0;
    // Samples are 1-indexed: odd positions 1, 3, ...; even positions 2, 4, ...
    for i in 0..total {
        let next = gm.sample_next(s, a);
        if i == 0 {
            first = next;
        }
        if i % 2 == 0 {
            odd[next] += 1.0;
        } else {
            even[next] += 1.0;
        }
    }
    let full: Vec<f64> = odd
        .iter()
        .zip(&even)
        .map(|(o, e)| (o + e) / total as f64)
        .collect();
    odd.iter_mut().for_each(|x| *x /= half as f64);
    even.iter_mut().for_each(|x| *x /= half as f64);
    let mut single = vec![0.0; n];
    single[first] = 1.0;

    let sigma = |row: &[f64]| sigma_exact(model, row, v).map(|r| r.sigma);
    let delta = sigma(&full)? - 0.5 * (sigma(&even)? + sigma(&odd)?);
    let value = sigma(&single)? + delta / cfg.level_mass(level);
    Ok(MlmcSample {
        value,
        level,
        samples: total,
    })
}

/// One draw of the support-function estimator appropriate for `model`.
pub fn estimate_sigma(
    gm: &mut GenerativeModel,
    s: usize,
    a: usize,
    v: &[f64],
    model: &UncertaintyModel,
    cfg: &MlmcConfig,
) -> Result<f64> {
    match model {
        UncertaintyModel::Contamination { radius } => Ok(estimate_sigma_contamination(gm, s, a, v, *radius)),
        _ => estimate_sigma_mlmc(gm, s, a, v, model, cfg),
    }
}
