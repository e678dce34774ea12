//! Forward simulation of one free rigid body under gravity, scheduled
//! pushes and frictionless penalty ground contact.

mod body;
mod contact;
mod integrate;
mod rollout;
mod trajectory;

pub use body::{BodyModel, ForceEntry, ForceSchedule, Integrator, RigidState, SimConfig, DEFAULT_GRAVITY};
pub use contact::{contact_force, detect_ground_contacts, ContactEvent, GROUND_NORMAL};
pub use integrate::{step_explicit, step_semi_implicit, step_with_mass};
pub use rollout::{rollout, rollout_with_mass, GenericRollout, Rollout};
pub use trajectory::{read_particle_frames, write_particle_frames, PoseSample, Trajectory, TrajectoryError};

use crate::geom::GeomError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },
    #[error("inertia tensor is singular but a torque is applied")]
    SingularInertia,
    #[error("inertia tensor is singular but a torque is applied (step {step})")]
    SingularInertiaAt { step: usize },
    #[error("invalid simulation input: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

impl SimError {
    fn at_step(self, step: usize) -> Self {
        match self {
            SimError::SingularInertia => SimError::SingularInertiaAt { step },
            other => other,
        }
    }

    pub fn divergence_step(&self) -> Option<usize> {
        match self {
            SimError::Diverged { step } => Some(*step),
            _ => None,
        }
    }
}

/// Initial height of the center of mass: lowest vertex 1 cm above ground.
pub fn drop_height(body: &BodyModel, ground_height: f64) -> f64 {
    ground_height + body.com_height() + 0.01
}
