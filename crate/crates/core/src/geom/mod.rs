//! Geometric and inertial primitives.

mod linalg;
mod mass;
mod mesh;

pub use linalg::{Mat3, Quat, Vec3};
pub use mass::{center_of_mass, inertia_tensor, ParticleSet};
pub use mesh::{load_mesh, sample_contact_vertices, MeshError, MeshModel};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("particle set is empty")]
    Empty,
    #[error("total mass is zero")]
    ZeroTotalMass,
    #[error("particle {index} has non-positive mass {mass}")]
    NonPositiveMass { index: usize, mass: f64 },
    #[error("{positions} positions but {masses} masses")]
    LengthMismatch { positions: usize, masses: usize },
    #[error("cannot sample {k} contact vertices from a mesh with {vertices}")]
    SampleCount { k: usize, vertices: usize },
}

/// First-order quaternion update `q + (dt/2)·(0, ω)⊗q`, renormalized.
pub fn quat_integrate<S: Scalar>(q: &Quat<S>, omega: &Vec3<S>, dt: S) -> Quat<S> {
    let dq = Quat::pure(*omega).mul(q).scale(dt * S::cst(0.5));
    q.add(&dq).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_rate_keeps_orientation() {
        let q = Quat::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.4);
        let out = quat_integrate(&q, &Vec3::ZERO, 0.01);
        assert!((out.w - q.w).abs() < 1e-15 && (out.vector() - q.vector()).norm() < 1e-15);
    }

    #[test]
    fn small_step_about_z_matches_exponential() {
        for &dt in &[1e-3, 5e-4, 1e-4] {
            let out = quat_integrate(&Quat::IDENTITY, &Vec3::new(0.0, 0.0, PI), dt);
            let exact = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), PI * dt);
            // one step of the first-order map is exact up to O(dt²) in angle
            assert!(out.angle_to(&exact) <= (PI * dt).powi(2));
        }
    }

    #[test]
    fn repeated_integration_converges_at_least_first_order() {
        let omega = Vec3::new(0.3, -1.2, 2.0);
        let total = 1.0;
        let exact = Quat::from_rotation_vector(omega.scale(total));
        let err = |dt: f64| {
            let n = (total / dt).round() as usize;
            let mut q = Quat::IDENTITY;
            for _ in 0..n {
                q = quat_integrate(&q, &omega, dt);
            }
            q.angle_to(&exact)
        };
        let e1 = err(1e-2);
        let e2 = err(5e-3);
        let e3 = err(2.5e-3);
        let (r1, r2) = (e1 / e2, e2 / e3);
        assert!(r1 >= 1.7, "ratio {r1}");
        assert!(r2 >= 1.7, "ratio {r2}");
    }

    proptest! {
        #[test]
        fn result_is_unit(
            axis in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
            angle in -3.0..3.0f64,
            w in (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64),
            dt in 1e-5..0.1f64,
        ) {
            let q = Quat::from_axis_angle(Vec3::new(axis.0, axis.1, axis.2 + 1.5), angle);
            let out = quat_integrate(&q, &Vec3::new(w.0, w.1, w.2), dt);
            prop_assert!((out.norm() - 1.0).abs() <= 1e-9);
        }
    }
}
