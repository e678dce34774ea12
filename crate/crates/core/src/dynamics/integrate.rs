use crate::geom::{quat_integrate, Mat3, Vec3};
use crate::scalar::Scalar;

use super::{BodyModel, Integrator, RigidState, SimConfig, SimError};

/// Semi-implicit (symplectic) Euler: velocities first, then positions and
/// orientation from the new velocities.
pub fn step_semi_implicit(
    state: &RigidState,
    body: &BodyModel,
    net_force: Vec3,
    net_torque: Vec3,
    cfg: &SimConfig,
) -> Result<RigidState, SimError> {
    step_with_mass(state, body, body.mass, net_force, net_torque, cfg, Integrator::SemiImplicit)
}

/// Explicit Euler: positions and orientation advance with the old velocities.
pub fn step_explicit(
    state: &RigidState,
    body: &BodyModel,
    net_force: Vec3,
    net_torque: Vec3,
    cfg: &SimConfig,
) -> Result<RigidState, SimError> {
    step_with_mass(state, body, body.mass, net_force, net_torque, cfg, Integrator::Explicit)
}

/// One integration step with the mass supplied separately, so the taped
/// path can make it a differentiable input.
pub fn step_with_mass<S: Scalar>(
    state: &RigidState<S>,
    body: &BodyModel,
    mass: S,
    net_force: Vec3<S>,
    net_torque: Vec3<S>,
    cfg: &SimConfig,
    integrator: Integrator,
) -> Result<RigidState<S>, SimError> {
    let dt = S::cst(cfg.dt);
    let g = Vec3::<S>::lift(cfg.gravity);

    let accel = Vec3::new(net_force.x / mass, net_force.y / mass, net_force.z / mass) + g;
    let v_next = state.v + accel.scale(dt);

    let w_next = match body.inertia_inverse() {
        Some(inv_body) => {
            let rot = state.q.to_rotation();
            let inertia_world = rot.congruence(&Mat3::lift(&body.inertia_body));
            let inv_world = rot.congruence(&Mat3::lift(inv_body));
            let gyro = state.w.cross(&inertia_world.mul_vec(&state.w));
            let w_dot = inv_world.mul_vec(&(net_torque - gyro));
            state.w + w_dot.scale(dt)
        }
        None => {
            let tau = net_torque.values();
            if tau.x != 0.0 || tau.y != 0.0 || tau.z != 0.0 {
                return Err(SimError::SingularInertia);
            }
            state.w
        }
    };

    let (p_next, q_next) = match integrator {
        Integrator::SemiImplicit => (state.p + v_next.scale(dt), quat_integrate(&state.q, &w_next, dt)),
        Integrator::Explicit => (state.p + state.v.scale(dt), quat_integrate(&state.q, &state.w, dt)),
    };

    Ok(RigidState {
        p: p_next,
        q: q_next,
        v: v_next,
        w: w_next,
        t: state.t + cfg.dt,
    })
}
