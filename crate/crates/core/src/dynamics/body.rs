use serde::{Deserialize, Serialize};

use crate::geom::{center_of_mass, inertia_tensor, GeomError, Mat3, MeshModel, ParticleSet, Quat, Vec3};
use crate::scalar::Scalar;

use super::SimError;

/// Pose and twist of one rigid body. `p` is the center of mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidState<S = f64> {
    pub p: Vec3<S>,
    pub q: Quat<S>,
    pub v: Vec3<S>,
    pub w: Vec3<S>,
    pub t: f64,
}

impl RigidState<f64> {
    pub fn at_rest(p: Vec3, q: Quat) -> Self {
        Self {
            p,
            q,
            v: Vec3::ZERO,
            w: Vec3::ZERO,
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.is_finite() && self.v.is_finite() && self.w.is_finite() && self.t.is_finite()
    }

    pub fn lift<S: Scalar>(&self) -> RigidState<S> {
        RigidState {
            p: Vec3::lift(self.p),
            q: Quat::lift(self.q),
            v: Vec3::lift(self.v),
            w: Vec3::lift(self.w),
            t: self.t,
        }
    }
}

impl<S: Scalar> RigidState<S> {
    pub fn values(&self) -> RigidState<f64> {
        RigidState {
            p: self.p.values(),
            q: self.q.values(),
            v: self.v.values(),
            w: self.w.values(),
            t: self.t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    SemiImplicit,
    Explicit,
}

impl std::str::FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "semi" | "semi_implicit" | "semi-implicit" => Ok(Self::SemiImplicit),
            "explicit" => Ok(Self::Explicit),
            other => Err(format!("unknown integrator {other:?} (expected semi or explicit)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub gravity: Vec3,
    pub integrator: Integrator,
    pub ground_height: f64,
    pub steps: usize,
    /// A state whose linear speed exceeds this (m/s) counts as diverged.
    pub max_speed: f64,
    /// Same, for angular speed (rad/s).
    pub max_angular_speed: f64,
}

pub const DEFAULT_GRAVITY: Vec3 = Vec3 { x: 0.0, y: 0.0, z: -9.81 };

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            gravity: DEFAULT_GRAVITY,
            integrator: Integrator::SemiImplicit,
            ground_height: 0.0,
            steps: 500,
            max_speed: 50.0,
            max_angular_speed: 1e4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(SimError::InvalidConfig("steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One scheduled push: `force` (world frame, N) acting at `point` (body
/// frame, relative to the center of mass) for `t_start <= t < t_end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceEntry {
    #[serde(rename = "t0")]
    pub t_start: f64,
    #[serde(rename = "t1")]
    pub t_end: f64,
    pub force: Vec3,
    pub point: Vec3,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForceSchedule {
    pub entries: Vec<ForceEntry>,
}

impl ForceSchedule {
    pub fn new(entries: Vec<ForceEntry>) -> Result<Self, SimError> {
        let s = Self { entries };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.t_start < e.t_end) {
                return Err(SimError::InvalidConfig(format!(
                    "schedule entry {i}: t0 {} must be before t1 {}",
                    e.t_start, e.t_end
                )));
            }
        }
        Ok(())
    }

    pub fn active_at(&self, t: f64) -> impl Iterator<Item = &ForceEntry> {
        self.entries.iter().filter(move |e| e.t_start <= t && t < e.t_end)
    }

    /// Sum of the world-frame forces active at `t`.
    pub fn total_force_at(&self, t: f64) -> Vec3 {
        self.active_at(t).fold(Vec3::ZERO, |acc, e| acc + e.force)
    }
}

/// Rigid body: mesh recentered on its center of mass, mass, inertia and
/// penalty-contact parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyModel {
    pub mesh: MeshModel,
    pub mass: f64,
    pub inertia_body: Mat3,
    pub contact_vertices: Vec<usize>,
    pub k_e: f64,
    pub k_d: f64,
    /// Give every particle the full object mass and split scheduled forces
    /// evenly over the contact vertices. When false a scheduled force is
    /// applied once, unsplit. The translational update always uses `mass`.
    pub per_particle_full_mass: bool,
    inertia_inv: Option<Mat3>,
}

impl BodyModel {
    /// Build a body whose inertia is that of `mass` spread uniformly over the
    /// mesh vertices. The mesh is translated so its center of mass is the
    /// body-frame origin.
    pub fn new(mesh: MeshModel, mass: f64, contact_vertices: Vec<usize>, k_e: f64, k_d: f64) -> Result<Self, SimError> {
        if mesh.vertices.is_empty() {
            return Err(SimError::Geom(GeomError::Empty));
        }
        let particles = ParticleSet::uniform(mesh.vertices.clone(), mass)?;
        let com = center_of_mass(&particles)?;
        let centered = MeshModel {
            name: mesh.name.clone(),
            vertices: mesh.vertices.iter().map(|v| *v - com).collect(),
            faces: mesh.faces.clone(),
        };
        let inertia = inertia_tensor(&particles, com);
        Self::from_parts(centered, mass, inertia, contact_vertices, k_e, k_d)
    }

    pub fn from_parts(
        mesh: MeshModel,
        mass: f64,
        inertia_body: Mat3,
        contact_vertices: Vec<usize>,
        k_e: f64,
        k_d: f64,
    ) -> Result<Self, SimError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(SimError::InvalidConfig(format!("mass must be positive, got {mass}")));
        }
        if !(k_e >= 0.0) || !(k_d >= 0.0) {
            return Err(SimError::InvalidConfig(format!("contact parameters must be non-negative (k_e {k_e}, k_d {k_d})")));
        }
        if contact_vertices.is_empty() {
            return Err(SimError::InvalidConfig("contact vertex set is empty".into()));
        }
        if let Some(&bad) = contact_vertices.iter().find(|&&i| i >= mesh.vertices.len()) {
            return Err(SimError::InvalidConfig(format!("contact vertex {bad} out of range")));
        }
        Ok(Self {
            inertia_inv: inertia_body.try_inverse(),
            mesh,
            mass,
            inertia_body,
            contact_vertices,
            k_e,
            k_d,
            per_particle_full_mass: true,
        })
    }

    /// Same body with a different total mass; inertia is left unchanged.
    pub fn with_mass(&self, mass: f64) -> Result<Self, SimError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(SimError::InvalidConfig(format!("mass must be positive, got {mass}")));
        }
        let mut out = self.clone();
        out.mass = mass;
        Ok(out)
    }

    pub fn inertia_inverse(&self) -> Option<&Mat3> {
        self.inertia_inv.as_ref()
    }

    /// Body-frame offset of vertex `i` from the center of mass.
    pub fn local_vertex(&self, i: usize) -> Vec3 {
        self.mesh.vertices[i]
    }

    /// Height of the center of mass above the lowest vertex.
    pub fn com_height(&self) -> f64 {
        -self.mesh.bounds().0.z
    }
}
