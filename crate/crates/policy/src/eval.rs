use massid_core::geom::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demo::random_pose;
use crate::env::{grasp_outcome, pinch_action, scaled_env_force, GraspEnvConfig, FINGERS};
use crate::mlp::ACTION_DIM;
use crate::{Policy, PolicyError};

/// Anything that maps an observed object and a believed mass to joint
/// targets and a force command.
pub trait GraspPolicy: Sync {
    fn act(&self, vertices: &[Vec3], mass: f64, env: &GraspEnvConfig) -> Result<([f64; ACTION_DIM], f64), PolicyError>;
}

impl GraspPolicy for Policy {
    fn act(&self, vertices: &[Vec3], mass: f64, _env: &GraspEnvConfig) -> Result<([f64; ACTION_DIM], f64), PolicyError> {
        let out = self.predict(vertices, mass)?;
        Ok((out.action, out.force))
    }
}

/// Hard-wired reference: a pinch closing 2 mm into the object and the
/// scaled force label for all four fingers at the given mass.
#[derive(Clone, Copy, Debug, Default)]
pub struct OraclePolicy;

impl GraspPolicy for OraclePolicy {
    fn act(&self, vertices: &[Vec3], mass: f64, env: &GraspEnvConfig) -> Result<([f64; ACTION_DIM], f64), PolicyError> {
        Ok((pinch_action(vertices, env, 0.002), scaled_env_force(mass, env.g, FINGERS, env.f_max)))
    }
}

/// Mass fed to a policy during evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassInput {
    /// The mass the policy was trained for, whatever object it faces.
    Fixed(f64),
    /// The true mass of the evaluated object.
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub train_mass: f64,
    pub eval_mass: f64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossMassMatrix {
    pub train_masses: Vec<f64>,
    pub eval_masses: Vec<f64>,
    /// Row-major: policy `i`, eval mass `j`.
    pub cells: Vec<EvalCell>,
}

impl CrossMassMatrix {
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.eval_masses.len() + j].rate
    }

    /// Per row whose training mass appears among the eval masses: is the
    /// matched cell at least as good as every other cell in the row?
    pub fn diagonal_dominance(&self) -> Vec<Option<bool>> {
        (0..self.train_masses.len())
            .map(|i| {
                let d = self.eval_masses.iter().position(|&m| m == self.train_masses[i])?;
                let diag = self.rate(i, d);
                Some((0..self.eval_masses.len()).all(|j| j == d || self.rate(i, j) <= diag))
            })
            .collect()
    }
}

/// Per-trial placement jitter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialJitter {
    pub yaw: f64,
    pub offset: f64,
}

impl Default for TrialJitter {
    fn default() -> Self {
        Self { yaw: 0.3, offset: 0.005 }
    }
}

/// Success matrix of `policies[i]` (labelled with `train_masses[i]`)
/// against objects of each eval mass. Cells run in parallel; each draws
/// its placements from its own ChaCha stream, so results do not depend on
/// scheduling.
#[allow(clippy::too_many_arguments)]
pub fn cross_mass_eval(
    policies: &[(&dyn GraspPolicy, MassInput)],
    train_masses: &[f64],
    eval_masses: &[f64],
    mesh_vertices: &[Vec3],
    trials: usize,
    seed: u64,
    jitter: TrialJitter,
    env: &GraspEnvConfig,
) -> Result<CrossMassMatrix, PolicyError> {
    if trials == 0 {
        return Err(PolicyError::Invalid("at least one trial per cell".into()));
    }
    if policies.len() != train_masses.len() {
        return Err(PolicyError::Invalid("one training mass label per policy".into()));
    }
    let n_eval = eval_masses.len();
    let cells: Result<Vec<EvalCell>, PolicyError> = (0..policies.len() * n_eval)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / n_eval, c % n_eval);
            let (policy, input) = policies[i];
            let m_eval = eval_masses[j];
            let believed = match input {
                MassInput::Fixed(m) => m,
                MassInput::Eval => m_eval,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut successes = 0;
            for _ in 0..trials {
                let verts = random_pose(&mut rng, jitter.yaw, jitter.offset).apply(mesh_vertices);
                let (action, force) = policy.act(&verts, believed, env)?;
                successes += usize::from(grasp_outcome(&action, force, &verts, m_eval, env).held_at_end);
            }
            Ok(EvalCell {
                train_mass: train_masses[i],
                eval_mass: m_eval,
                trials,
                successes,
                rate: successes as f64 / trials as f64,
            })
        })
        .collect();
    Ok(CrossMassMatrix {
        train_masses: train_masses.to_vec(),
        eval_masses: eval_masses.to_vec(),
        cells: cells?,
    })
}
