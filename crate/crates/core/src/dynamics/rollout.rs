use crate::geom::Vec3;
use crate::scalar::Scalar;

use super::{
    detect_ground_contacts, step_with_mass, BodyModel, ContactEvent, ForceSchedule, RigidState, SimConfig, SimError,
    Trajectory,
};

/// Output of a plain `f64` rollout.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub trajectory: Trajectory,
    /// Contacts detected at the start of each step (`steps` entries).
    pub contacts: Vec<Vec<ContactEvent>>,
    /// Full state at every sample (`steps + 1` entries).
    pub states: Vec<RigidState>,
}

/// Generic rollout result: every state plus per-step contact events.
pub struct GenericRollout<S> {
    pub states: Vec<RigidState<S>>,
    pub contacts: Vec<Vec<ContactEvent<S>>>,
}

/// Simulate `cfg.steps` steps with the body's own mass.
pub fn rollout(init: &RigidState, body: &BodyModel, sched: &ForceSchedule, cfg: &SimConfig) -> Result<Rollout, SimError> {
    let out = rollout_with_mass(init.lift(), body, body.mass, sched, cfg)?;
    let states: Vec<RigidState> = out.states.iter().map(|s| s.values()).collect();
    let trajectory = Trajectory::from_states(&body.mesh.name, &states, cfg.dt);
    Ok(Rollout {
        trajectory,
        contacts: out.contacts,
        states,
    })
}

/// Simulate with `mass` supplied as a scalar of any kind.
///
/// Each step aggregates ground contact forces and torques, then the
/// scheduled pushes active at the step's start time, then advances with
/// the integrator chosen in `cfg`. A non-finite or runaway state ends the
/// rollout with [`SimError::Diverged`].
pub fn rollout_with_mass<S: Scalar>(
    init: RigidState<S>,
    body: &BodyModel,
    mass: S,
    sched: &ForceSchedule,
    cfg: &SimConfig,
) -> Result<GenericRollout<S>, SimError> {
    cfg.validate()?;
    sched.validate()?;
    if !init.values().is_finite() {
        return Err(SimError::Diverged { step: 0 });
    }

    let share_count = if body.per_particle_full_mass { body.contact_vertices.len() } else { 1 };
    let share_scale = 1.0 / share_count as f64;

    let mut states = Vec::with_capacity(cfg.steps + 1);
    let mut contacts = Vec::with_capacity(cfg.steps);
    let mut state = init;
    states.push(state);

    for step in 0..cfg.steps {
        let t = init.t + step as f64 * cfg.dt;
        state.t = t;

        let events = detect_ground_contacts(&state, body, cfg.ground_height);
        let mut force = Vec3::<S>::zeros();
        let mut torque = Vec3::<S>::zeros();
        for e in &events {
            let r = e.point_world - state.p;
            force += e.force;
            torque += r.cross(&e.force);
        }

        let mut rot = None;
        for entry in sched.active_at(t) {
            let rot = *rot.get_or_insert_with(|| state.q.to_rotation());
            let r = rot.mul_vec(&Vec3::lift(entry.point));
            let share = Vec3::<S>::lift(entry.force.scale(share_scale));
            for _ in 0..share_count {
                force += share;
                torque += r.cross(&share);
            }
        }

        let next = step_with_mass(&state, body, mass, force, torque, cfg, cfg.integrator)
            .map_err(|e| e.at_step(step + 1))?;
        check_divergence(&next, cfg, step + 1)?;
        contacts.push(events);
        state = next;
        state.t = init.t + (step + 1) as f64 * cfg.dt;
        states.push(state);
    }

    Ok(GenericRollout { states, contacts })
}

fn check_divergence<S: Scalar>(state: &RigidState<S>, cfg: &SimConfig, step: usize) -> Result<(), SimError> {
    let s = state.values();
    if !s.is_finite() || s.v.norm() > cfg.max_speed || s.w.norm() > cfg.max_angular_speed {
        return Err(SimError::Diverged { step });
    }
    Ok(())
}
