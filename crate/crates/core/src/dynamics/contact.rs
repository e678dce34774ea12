use crate::geom::Vec3;
use crate::scalar::Scalar;

use super::{BodyModel, RigidState};

/// Upward normal of the ground plane.
pub const GROUND_NORMAL: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactEvent<S = f64> {
    pub vertex_index: usize,
    pub point_world: Vec3<S>,
    /// Outward surface normal of the obstacle.
    pub normal: Vec3,
    pub penetration: S,
    pub penetration_rate: S,
    pub force: Vec3<S>,
}

impl<S: Scalar> ContactEvent<S> {
    /// True when the penalty force was clamped to zero (would have pulled).
    pub fn is_clamped(&self) -> bool {
        self.force.x.value() == 0.0 && self.force.y.value() == 0.0 && self.force.z.value() == 0.0
    }

    pub fn values(&self) -> ContactEvent<f64> {
        ContactEvent {
            vertex_index: self.vertex_index,
            point_world: self.point_world.values(),
            normal: self.normal,
            penetration: self.penetration.value(),
            penetration_rate: self.penetration_rate.value(),
            force: self.force.values(),
        }
    }
}

/// Penalty normal force `−n·(k_e·C + k_d·Ċ)`.
///
/// `normal` points from the body into the obstacle, so a penetrating body is
/// pushed back along `−normal`. A negative magnitude (the damping term
/// winning while the body separates) is clamped to zero: contact never pulls.
pub fn contact_force<S: Scalar>(penetration: S, penetration_rate: S, normal: Vec3, k_e: f64, k_d: f64) -> Vec3<S> {
    let magnitude = S::cst(k_e) * penetration + S::cst(k_d) * penetration_rate;
    if magnitude.value() <= 0.0 {
        return Vec3::zeros();
    }
    Vec3::new(
        -S::cst(normal.x) * magnitude,
        -S::cst(normal.y) * magnitude,
        -S::cst(normal.z) * magnitude,
    )
}

/// One event per contact vertex at or below the ground plane.
pub fn detect_ground_contacts<S: Scalar>(state: &RigidState<S>, body: &BodyModel, ground_height: f64) -> Vec<ContactEvent<S>> {
    let rot = state.q.to_rotation();
    let mut events = Vec::new();
    for &vi in &body.contact_vertices {
        let r = rot.mul_vec(&Vec3::lift(body.local_vertex(vi)));
        let z = state.p.z + r.z;
        if z.value() > ground_height {
            continue;
        }
        let point = state.p + r;
        let vel = state.v + state.w.cross(&r);
        let penetration = S::cst(ground_height) - z;
        // n = +z, so −v·n = −v_z
        let rate = -vel.z;
        let force = contact_force(penetration, rate, -GROUND_NORMAL, body.k_e, body.k_d);
        events.push(ContactEvent {
            vertex_index: vi,
            point_world: point,
            normal: GROUND_NORMAL,
            penetration,
            penetration_rate: rate,
            force,
        });
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{MeshModel, Quat};

    fn cube_body(k_e: f64, k_d: f64) -> BodyModel {
        let mesh = MeshModel::cuboid("cube", Vec3::new(0.05, 0.05, 0.05));
        BodyModel::new(mesh, 0.1, (0..8).collect(), k_e, k_d).unwrap()
    }

    #[test]
    fn no_penetration_no_force() {
        let f = contact_force(0.0, 0.0, Vec3::new(0.0, 0.0, -1.0), 1000.0, 10.0);
        assert_eq!(f, Vec3::ZERO);
    }

    #[test]
    fn spring_only_force() {
        let f = contact_force(0.01, 0.0, Vec3::new(0.0, 0.0, -1.0), 1000.0, 0.0);
        assert_eq!(f, Vec3::new(0.0, 0.0, 10.0));
    }

    #[test]
    fn separating_contact_is_not_adhesive() {
        let f = contact_force(0.001, -5.0, Vec3::new(0.0, 0.0, -1.0), 1000.0, 100.0);
        assert_eq!(f, Vec3::ZERO);
    }

    #[test]
    fn airborne_body_has_no_contacts() {
        let body = cube_body(1e4, 0.0);
        let s = RigidState::at_rest(Vec3::new(0.0, 0.0, 0.2), Quat::IDENTITY);
        assert!(detect_ground_contacts(&s, &body, 0.0).is_empty());
    }

    #[test]
    fn resting_on_ground_reports_bottom_face() {
        let body = cube_body(1e4, 0.0);
        let s = RigidState::at_rest(Vec3::new(0.0, 0.0, 0.05), Quat::IDENTITY);
        let ev = detect_ground_contacts(&s, &body, 0.0);
        assert_eq!(ev.len(), 4);
        assert!(ev.iter().all(|e| e.penetration == 0.0 && e.force == Vec3::ZERO));
    }

    #[test]
    fn sunk_cube_carries_spring_force() {
        let body = cube_body(1e4, 5.0);
        let s = RigidState::at_rest(Vec3::new(0.0, 0.0, 0.049), Quat::IDENTITY);
        let ev = detect_ground_contacts(&s, &body, 0.0);
        assert_eq!(ev.len(), 4);
        for e in ev {
            assert!((e.penetration - 1e-3).abs() < 1e-15);
            assert!((e.force - Vec3::new(0.0, 0.0, 10.0)).norm() < 1e-10);
            assert!((e.normal.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn penetration_rate_includes_spin() {
        let body = cube_body(1e4, 0.0);
        let mut s = RigidState::at_rest(Vec3::new(0.0, 0.0, 0.049), Quat::IDENTITY);
        s.w = Vec3::new(1.0, 0.0, 0.0);
        // w × r = (0, −r_z, r_y), so the vertical speed is r_y
        let ev = detect_ground_contacts(&s, &body, 0.0);
        for e in ev {
            let r = body.local_vertex(e.vertex_index);
            assert!((e.penetration_rate - (-(1.0 * r.y))).abs() < 1e-15);
        }
    }
}
