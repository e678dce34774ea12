//! Mass identification: scenarios, synthetic observations, alignment and
//! the optimization loop.

mod observe;
mod optimize;
mod scenario;

use std::path::PathBuf;

pub use observe::{align_trajectories, sample_at, synthesize_real_trajectory, trajectory_loss, NoiseModel, SyncSpec};
pub use optimize::{
    ablate_integrators, adaptive_schedule, identify_mass, loss_problem, prepare_observations, pushdown_fit, AblationReport,
    AdaptiveSchedule, IdentifyConfig, IdentifyReport, IdentifyStatus, Observations, ScheduleKind, HEAVY_KG,
    LIGHT_DECAY, LIGHT_KG, LR_HI, LR_MID, M_MAX, M_MIN,
};
pub use scenario::{Scenario, ScenarioFile};

use crate::adjoint::AdjointError;
use crate::dynamics::SimError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IdentifyError {
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("{path}: {msg}")]
    Scenario { path: PathBuf, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("range error: {0}")]
    Range(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Adjoint(#[from] AdjointError),
}
