//! Position-based dynamics for particle sets: semi-implicit prediction,
//! Gauss-Seidel constraint projection, velocity update.

use crate::geom::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct PbdParticleState {
    pub positions: Vec<Vec3>,
    pub prev_positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    /// Inverse masses; zero pins a particle.
    pub inv_masses: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintKind {
    /// `|x_i − x_j| − rest = 0`.
    Distance { i: usize, j: usize, rest: f64 },
    /// `z_i − height ≥ 0`.
    GroundPlane { i: usize, height: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub stiffness: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PbdError {
    #[error("particle list lengths differ")]
    LengthMismatch,
    #[error("negative inverse mass at particle {0}")]
    NegativeInverseMass(usize),
    #[error("constraint {0} is malformed or references a missing particle")]
    BadConstraint(usize),
    #[error("constraint {0} is violated but every particle it involves is pinned")]
    Unsatisfiable(usize),
    #[error("iterations must be at least 1")]
    NoIterations,
}

/// What a single projection did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Satisfied,
    Corrected,
    Unsatisfiable,
}

impl PbdParticleState {
    pub fn new(positions: Vec<Vec3>, inv_masses: Vec<f64>) -> Result<Self, PbdError> {
        let n = positions.len();
        let s = Self {
            prev_positions: positions.clone(),
            velocities: vec![Vec3::ZERO; n],
            positions,
            inv_masses,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PbdError> {
        let n = self.positions.len();
        if self.prev_positions.len() != n || self.velocities.len() != n || self.inv_masses.len() != n {
            return Err(PbdError::LengthMismatch);
        }
        if let Some(i) = self.inv_masses.iter().position(|&w| !(w >= 0.0)) {
            return Err(PbdError::NegativeInverseMass(i));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

impl Constraint {
    pub fn distance(i: usize, j: usize, rest: f64, stiffness: f64) -> Self {
        Self {
            kind: ConstraintKind::Distance { i, j, rest },
            stiffness,
        }
    }

    pub fn ground(i: usize, height: f64, stiffness: f64) -> Self {
        Self {
            kind: ConstraintKind::GroundPlane { i, height },
            stiffness,
        }
    }

    fn check(&self, n: usize) -> bool {
        let stiff_ok = (0.0..=1.0).contains(&self.stiffness);
        match self.kind {
            ConstraintKind::Distance { i, j, rest } => stiff_ok && i != j && i < n && j < n && rest >= 0.0,
            ConstraintKind::GroundPlane { i, .. } => stiff_ok && i < n,
        }
    }

    /// Magnitude of violation: `|C|` for equalities, `max(0, −C)` for the
    /// ground inequality.
    pub fn residual(&self, positions: &[Vec3]) -> f64 {
        match self.kind {
            ConstraintKind::Distance { i, j, rest } => ((positions[i] - positions[j]).norm() - rest).abs(),
            ConstraintKind::GroundPlane { i, height } => (height - positions[i].z).max(0.0),
        }
    }
}

/// `v ← v + dt·f·w`, `x ← x + dt·v` for every unpinned particle; the old
/// positions are kept for the velocity update.
pub fn pbd_predict(state: &PbdParticleState, external_force_per_particle: Vec3, dt: f64) -> PbdParticleState {
    let mut out = state.clone();
    predict_in_place(&mut out, external_force_per_particle, dt);
    out
}

fn predict_in_place(state: &mut PbdParticleState, f: Vec3, dt: f64) {
    state.prev_positions.clone_from(&state.positions);
    for i in 0..state.positions.len() {
        let w = state.inv_masses[i];
        if w == 0.0 {
            continue;
        }
        state.velocities[i] += f.scale(dt * w);
        state.positions[i] += state.velocities[i].scale(dt);
    }
}

/// Apply one mass-weighted correction `Δx_i = −s·λ·w_i·∇_i C` with
/// `λ = C / Σ_j w_j ‖∇_j C‖²`.
pub fn project_constraint(state: &PbdParticleState, c: &Constraint) -> Result<(PbdParticleState, Projection), PbdError> {
    if !c.check(state.len()) {
        return Err(PbdError::BadConstraint(0));
    }
    let mut out = state.clone();
    let p = project_in_place(&mut out.positions, &out.inv_masses, c);
    Ok((out, p))
}

fn project_in_place(x: &mut [Vec3], w: &[f64], c: &Constraint) -> Projection {
    match c.kind {
        ConstraintKind::Distance { i, j, rest } => {
            let d = x[i] - x[j];
            let len = d.norm();
            let value = len - rest;
            if value == 0.0 {
                return Projection::Satisfied;
            }
            let denom = w[i] + w[j];
            if denom == 0.0 || len == 0.0 {
                return Projection::Unsatisfiable;
            }
            let n = d.scale(1.0 / len);
            let lambda = value / denom;
            x[i] -= n.scale(c.stiffness * lambda * w[i]);
            x[j] += n.scale(c.stiffness * lambda * w[j]);
            Projection::Corrected
        }
        ConstraintKind::GroundPlane { i, height } => {
            let value = x[i].z - height;
            if value >= 0.0 {
                return Projection::Satisfied;
            }
            if w[i] == 0.0 {
                return Projection::Unsatisfiable;
            }
            // ∇C = ẑ, so λ·w = C and the particle lands on the plane
            let lambda = value / w[i];
            x[i].z -= c.stiffness * lambda * w[i];
            if c.stiffness == 1.0 {
                x[i].z = height;
            }
            Projection::Corrected
        }
    }
}

/// `v = (x − x_prev) / dt`.
pub fn pbd_velocity_update(state: &PbdParticleState, dt: f64) -> PbdParticleState {
    let mut out = state.clone();
    velocity_in_place(&mut out, dt);
    out
}

fn velocity_in_place(state: &mut PbdParticleState, dt: f64) {
    for ((v, x), x0) in state.velocities.iter_mut().zip(&state.positions).zip(&state.prev_positions) {
        *v = (*x - *x0).scale(1.0 / dt);
    }
}

/// Predict, run `iterations` Gauss-Seidel sweeps over `constraints` in list
/// order, then update velocities.
pub fn pbd_step(
    state: &PbdParticleState,
    constraints: &[Constraint],
    force: Vec3,
    dt: f64,
    iterations: usize,
) -> Result<PbdParticleState, PbdError> {
    pbd_step_traced(state, constraints, force, dt, iterations).map(|(s, _)| s)
}

/// As [`pbd_step`], also returning the maximum residual after each sweep.
pub fn pbd_step_traced(
    state: &PbdParticleState,
    constraints: &[Constraint],
    force: Vec3,
    dt: f64,
    iterations: usize,
) -> Result<(PbdParticleState, Vec<f64>), PbdError> {
    state.validate()?;
    if iterations == 0 {
        return Err(PbdError::NoIterations);
    }
    if let Some(k) = constraints.iter().position(|c| !c.check(state.len())) {
        return Err(PbdError::BadConstraint(k));
    }
    let mut s = state.clone();
    predict_in_place(&mut s, force, dt);
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        for (k, c) in constraints.iter().enumerate() {
            if project_in_place(&mut s.positions, &s.inv_masses, c) == Projection::Unsatisfiable {
                return Err(PbdError::Unsatisfiable(k));
            }
        }
        trace.push(max_residual(&s.positions, constraints));
    }
    velocity_in_place(&mut s, dt);
    Ok((s, trace))
}

pub fn max_residual(positions: &[Vec3], constraints: &[Constraint]) -> f64 {
    constraints.iter().map(|c| c.residual(positions)).fold(0.0, f64::max)
}
