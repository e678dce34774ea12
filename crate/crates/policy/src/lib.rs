//! Force-aware grasp policy.
//!
//! A mass-conditioned three-headed MLP over positionally encoded mesh
//! vertices, trained in two phases (supervised imitation of pinch
//! demonstrations, then environment feedback on the reward and force
//! heads) and evaluated across object masses in an analytic grasp
//! environment.

pub mod demo;
pub mod encode;
pub mod env;
pub mod eval;
pub mod io;
pub mod mlp;
pub mod train;

use massid_core::geom::Vec3;
use serde::{Deserialize, Serialize};

pub use demo::{generate_demos, read_demos, write_demos, Demo, DemoConfig};
pub use encode::{encode_input, positional_encode, EncodedInput};
pub use env::{force_target, grasp_env_rollout, scaled_env_force, GraspEnvConfig, GraspEnvOutcome, ObjectPose};
pub use eval::{cross_mass_eval, CrossMassMatrix, GraspPolicy, MassInput, OraclePolicy};
pub use mlp::{mlp_forward, GraspMLPParams, PolicyOutput};
pub use train::{phase1_train, phase2_train, train_two_phase, EnvFixture, EpochLoss, TrainConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{0}")]
    Domain(String),
    #[error("non-finite loss in batch {batch} of epoch {epoch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("empty dataset")]
    Empty,
    #[error("I/O: {0}")]
    Io(String),
    #[error("bad format: {0}")]
    Format(String),
}

/// Encoding settings and network width; travels with the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySpec {
    pub bands: usize,
    pub hidden: usize,
    /// Mass slot is `mass / m_ref`.
    pub m_ref: f64,
    /// Zero the mass slot.
    pub mass_blind: bool,
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self {
            bands: 4,
            hidden: mlp::HIDDEN,
            m_ref: 0.1,
            mass_blind: false,
        }
    }
}

impl PolicySpec {
    pub fn input_dim(&self) -> usize {
        encode::features_per_vertex(self.bands) + 1
    }

    pub fn encode(&self, vertices: &[Vec3], mass: f64) -> EncodedInput {
        let m = if self.mass_blind { 0.0 } else { mass };
        encode_input(vertices, m, self.bands, self.m_ref)
    }
}

/// Network parameters together with the encoding they expect.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub spec: PolicySpec,
    pub params: GraspMLPParams,
}

impl Policy {
    pub fn init(spec: PolicySpec, seed: u64) -> Self {
        let params = GraspMLPParams::init(spec.input_dim(), spec.hidden, seed);
        Self { spec, params }
    }

    pub fn check(&self) -> Result<(), PolicyError> {
        if self.params.input_dim() != self.spec.input_dim() || self.params.hidden() != self.spec.hidden {
            return Err(PolicyError::Shape("parameters do not match the policy spec".into()));
        }
        if !self.params.is_finite() {
            return Err(PolicyError::Invalid("parameters contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn predict(&self, vertices: &[Vec3], mass: f64) -> Result<PolicyOutput, PolicyError> {
        mlp_forward(&self.params, &self.spec.encode(vertices, mass))
    }
}
