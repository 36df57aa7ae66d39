//! Seeded benchmark instance generators.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RcmdpError, Result};
use crate::mdp::TabularRcmdp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    RandomGarnet {
        n_states: usize,
        n_actions: usize,
        branching: usize,
        #[serde(default)]
        n_constraints: usize,
        /// Threshold applied to every constraint.
        #[serde(default = "default_garnet_threshold")]
        threshold: f64,
    },
    Gridworld {
        size: usize,
        #[serde(default)]
        slip: f64,
        /// Hazard cells as row-major indices; defaults to the center cell.
        #[serde(default)]
        hazards: Option<Vec<usize>>,
        #[serde(default = "default_hazard_threshold")]
        hazard_threshold: f64,
    },
}

fn default_garnet_threshold() -> f64 {
    0.5
}

fn default_hazard_threshold() -> f64 {
    0.1
}

pub fn generate_instance(spec: &GeneratorSpec, seed: u64) -> Result<TabularRcmdp> {
    match spec {
        GeneratorSpec::RandomGarnet {
            n_states,
            n_actions,
            branching,
            n_constraints,
            threshold,
        } => {
            let mdp = garnet(*n_states, *n_actions, *branching, *n_constraints, seed)?;
            mdp.with_thresholds(vec![*threshold; *n_constraints])
        }
        GeneratorSpec::Gridworld {
            size,
            slip,
            hazards,
            hazard_threshold,
        } => gridworld(*size, *slip, hazards.as_deref(), *hazard_threshold),
    }
}

/// Garnet instance: each `(s,a)` row puts Dirichlet(1) weights on
/// `branching` distinct uniformly chosen states; costs and constraints are
/// i.i.d. uniform on `[0, 1]`; thresholds default to 0.5; uniform initial
/// distribution.
pub fn garnet(
    n_states: usize,
    n_actions: usize,
    branching: usize,
    n_constraints: usize,
    seed: u64,
) -> Result<TabularRcmdp> {
    if n_states == 0 || n_actions == 0 {
        return Err(RcmdpError::Param("garnet sizes must be positive".into()));
    }
    if branching == 0 || branching > n_states {
        return Err(RcmdpError::Param(format!(
            "branching {branching} not in 1..={n_states}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernel = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
    for per_action in kernel.iter_mut() {
        for row in per_action.iter_mut() {
            let support = sample(&mut rng, n_states, branching);
            // Normalized exponentials are Dirichlet(1).
            let weights: Vec<f64> = (0..branching)
                .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                .collect();
            let total: f64 = weights.iter().sum();
            for (t, w) in support.iter().zip(&weights) {
                row[t] = w / total;
            }
        }
    }
    let mut table = || -> Vec<Vec<f64>> {
        (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.gen::<f64>()).collect())
            .collect()
    };
    let cost = table();
    let constraints = (0..n_constraints).map(|_| table()).collect();
    TabularRcmdp::new(
        cost,
        constraints,
        vec![0.5; n_constraints],
        kernel,
        vec![1.0 / n_states as f64; n_states],
    )
}

/// `size x size` grid with actions up, down, left, right. The intended move
/// happens with probability `1 - slip`; otherwise one of the other three
/// directions is taken uniformly. Moves into walls stay put. The goal is the
/// last cell and every action there resets to cell 0. Cost is 1 off the
/// goal and 0 on it; the single constraint is hazard-cell occupancy.
pub fn gridworld(size: usize, slip: f64, hazards: Option<&[usize]>, hazard_threshold: f64) -> Result<TabularRcmdp> {
    if size == 0 {
        return Err(RcmdpError::Param("grid size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&slip) {
        return Err(RcmdpError::Param(format!("slip {slip} not in [0, 1]")));
    }
    let n = size * size;
    let goal = n - 1;
    let center = (size / 2) * size + size / 2;
    let default_hazards = if center != 0 && center != goal { vec![center] } else { vec![] };
    let hazards = hazards.map_or(default_hazards, <[usize]>::to_vec);
    if let Some(h) = hazards.iter().find(|&&h| h >= n) {
        return Err(RcmdpError::Param(format!("hazard cell {h} outside the grid")));
    }

    let step = |cell: usize, dir: usize| -> usize {
        let (r, c) = (cell / size, cell % size);
        match dir {
            0 if r > 0 => cell - size,
            1 if r + 1 < size => cell + size,
            2 if c > 0 => cell - 1,
            3 if c + 1 < size => cell + 1,
            _ => cell,
        }
    };
    let mut kernel = vec![vec![vec![0.0; n]; 4]; n];
    for (cell, per_action) in kernel.iter_mut().enumerate() {
        for (action, row) in per_action.iter_mut().enumerate() {
            if cell == goal {
                row[0] = 1.0;
                continue;
            }
            for dir in 0..4 {
                let p = if dir == action { 1.0 - slip } else { slip / 3.0 };
                row[step(cell, dir)] += p;
            }
        }
    }
    let cost = (0..n)
        .map(|s| vec![if s == goal { 0.0 } else { 1.0 }; 4])
        .collect();
    let hazard = (0..n)
        .map(|s| vec![if hazards.contains(&s) { 1.0 } else { 0.0 }; 4])
        .collect();
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    TabularRcmdp::new(cost, vec![hazard], vec![hazard_threshold], kernel, initial)
}
