use std::f64::consts::FRAC_PI_2;

use massid_core::dynamics::BodyModel;
use massid_core::geom::{Quat, Vec3};
use serde::{Deserialize, Serialize};

use crate::mlp::ACTION_DIM;
use crate::PolicyError;

pub const FINGERS: usize = 4;
pub const JOINTS_PER_FINGER: usize = ACTION_DIM / FINGERS;

/// Per-contact force target `m·g / n_active`.
pub fn force_target(m: f64, g: f64, n_active: usize) -> Result<f64, PolicyError> {
    if n_active == 0 {
        return Err(PolicyError::Domain("no active contacts, no force target".into()));
    }
    Ok(m * g / n_active as f64)
}

/// Scaled total-force label `clip(m·g·n / f_max, 0, 1)`.
pub fn scaled_env_force(m: f64, g: f64, n_contacts: usize, f_max: f64) -> f64 {
    (m * g * n_contacts as f64 / f_max).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraspEnvConfig {
    /// Total grip force at `force_command = 1` (N).
    pub f_max: f64,
    pub g: f64,
    /// Slip margin: the grip must reach `γ·m·g`.
    pub gamma: f64,
    /// Bounce-off bound: a grip above `κ·m·g` ejects the object.
    pub kappa: f64,
    /// Contacts needed for a grasp.
    pub n_min: usize,
    /// Steps per rollout; fingers close over the first half.
    pub horizon: usize,
    /// Fingertip-to-surface distance still counted as contact (m).
    pub contact_tol: f64,
    /// Radial fingertip distance from the grasp axis with the hand open (m).
    pub reach: f64,
    /// Steps an under-gripped object keeps sliding before it is lost.
    pub slip_steps: usize,
}

impl Default for GraspEnvConfig {
    fn default() -> Self {
        Self {
            f_max: 40.0,
            g: 9.81,
            gamma: 1.2,
            kappa: 8.0,
            n_min: 2,
            horizon: 40,
            contact_tol: 0.004,
            reach: 0.15,
            slip_steps: 5,
        }
    }
}

impl GraspEnvConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let ok = self.f_max > 0.0
            && self.g > 0.0
            && self.gamma > 0.0
            && self.kappa >= self.gamma
            && self.horizon >= 2
            && self.contact_tol >= 0.0
            && self.reach > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PolicyError::Invalid(format!("bad grasp environment config {self:?}")))
        }
    }

    /// Force commands that hold an object of mass `m`, ignoring geometry.
    pub fn holding_interval(&self, m: f64) -> (f64, f64) {
        let w = m * self.g;
        (self.gamma * w / self.f_max, self.kappa * w / self.f_max)
    }
}

/// Object placement in the hand frame: yaw about the vertical axis, then a
/// horizontal offset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub yaw: f64,
    pub offset: Vec3,
}

impl ObjectPose {
    pub fn apply(&self, vertices: &[Vec3]) -> Vec<Vec3> {
        let q = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), self.yaw);
        vertices.iter().map(|v| q.rotate(v) + self.offset).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspFailure {
    /// Fewer than `n_min` fingers reached the object.
    NoContact,
    Slip,
    BounceOff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspEnvOutcome {
    pub n_active: Vec<usize>,
    pub in_hand: Vec<bool>,
    pub held_at_end: bool,
    /// Mean total grip force over the steps with contact (N).
    pub mean_force_applied: f64,
    pub failure: Option<GraspFailure>,
}

impl GraspEnvOutcome {
    /// Contacts at the moment the hand finishes closing.
    pub fn contacts_at_close(&self) -> usize {
        self.n_active[self.n_active.len() / 2]
    }

    /// `n_active ≥ n_min` at every step from closing to the end.
    pub fn sustained_contact(&self, n_min: usize) -> bool {
        self.n_active[self.n_active.len() / 2..].iter().all(|&n| n >= n_min)
    }
}

fn approach(k: usize) -> Vec3 {
    let a = k as f64 * 2.0 * std::f64::consts::PI / FINGERS as f64;
    Vec3::new(a.cos(), a.sin(), 0.0)
}

fn support(vertices: &[Vec3], dir: Vec3) -> f64 {
    vertices.iter().map(|v| v.dot(&dir)).fold(f64::NEG_INFINITY, f64::max)
}

/// Radial fingertip distance reached by one finger's joint targets.
fn fingertip(cfg: &GraspEnvConfig, joints: &[f64]) -> f64 {
    let flex: f64 = joints
        .iter()
        .map(|a| a.clamp(-std::f64::consts::PI, std::f64::consts::PI).clamp(0.0, FRAC_PI_2).sin())
        .sum();
    cfg.reach * (1.0 - flex / JOINTS_PER_FINGER as f64)
}

/// Joint targets closing each finger to `squeeze` metres inside the
/// object's support along its approach direction.
pub fn pinch_action(posed_vertices: &[Vec3], cfg: &GraspEnvConfig, squeeze: f64) -> [f64; ACTION_DIM] {
    let mut action = [0.0; ACTION_DIM];
    for k in 0..FINGERS {
        let target = support(posed_vertices, approach(k)) - squeeze;
        let s = ((cfg.reach - target) / cfg.reach).clamp(0.0, 1.0);
        for j in 0..JOINTS_PER_FINGER {
            action[k * JOINTS_PER_FINGER + j] = s.asin();
        }
    }
    action
}

/// Antipodal-pinch abstraction of a grasp-and-lift.
///
/// Fingers move linearly from open to their commanded tips over the first
/// half of the horizon. A finger is active when its tip is within
/// `contact_tol` of the object's support. At closing the grasp holds iff
/// enough fingers are active and the total grip `force_command·f_max`
/// lies in `[γ·m·g, κ·m·g]`; otherwise the object is lost, at once for a
/// bounce-off and after `slip_steps` for a slip.
pub fn grasp_env_rollout(
    actions: &[f64; ACTION_DIM],
    force_command: f64,
    body: &BodyModel,
    pose: &ObjectPose,
    cfg: &GraspEnvConfig,
) -> GraspEnvOutcome {
    grasp_outcome(actions, force_command, &pose.apply(&body.mesh.vertices), body.mass, cfg)
}

/// [`grasp_env_rollout`] for vertices already placed in the hand frame.
pub fn grasp_outcome(
    actions: &[f64; ACTION_DIM],
    force_command: f64,
    verts: &[Vec3],
    mass: f64,
    cfg: &GraspEnvConfig,
) -> GraspEnvOutcome {
    let close = cfg.horizon / 2;
    let tips: Vec<f64> = (0..FINGERS)
        .map(|k| fingertip(cfg, &actions[k * JOINTS_PER_FINGER..(k + 1) * JOINTS_PER_FINGER]))
        .collect();
    let supports: Vec<f64> = (0..FINGERS).map(|k| support(verts, approach(k))).collect();
    let grip = force_command.clamp(0.0, 1.0) * cfg.f_max;
    let weight = mass * cfg.g;

    let touching = |t: usize| {
        let frac = (t as f64 / close as f64).min(1.0);
        (0..FINGERS)
            .filter(|&k| cfg.reach - (cfg.reach - tips[k]) * frac <= supports[k] + cfg.contact_tol)
            .count()
    };
    let at_close = touching(close);
    let failure = if at_close < cfg.n_min {
        Some(GraspFailure::NoContact)
    } else if grip > cfg.kappa * weight {
        Some(GraspFailure::BounceOff)
    } else if grip < cfg.gamma * weight {
        Some(GraspFailure::Slip)
    } else {
        None
    };
    let lost_after = match failure {
        None => usize::MAX,
        Some(GraspFailure::BounceOff) | Some(GraspFailure::NoContact) => close,
        Some(GraspFailure::Slip) => close + cfg.slip_steps,
    };

    let n_active: Vec<usize> = (0..cfg.horizon)
        .map(|t| if t > lost_after { 0 } else { touching(t) })
        .collect();
    let in_hand: Vec<bool> = n_active.iter().map(|&n| n >= 1).collect();
    let contact_steps = n_active.iter().filter(|&&n| n > 0).count();
    let mean_force_applied = if contact_steps > 0 && grip > 0.0 { grip } else { 0.0 };
    GraspEnvOutcome {
        held_at_end: failure.is_none() && grip > 0.0,
        n_active,
        in_hand,
        mean_force_applied,
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use massid_core::geom::{sample_contact_vertices, MeshModel};

    fn cube(m: f64) -> BodyModel {
        let mesh = MeshModel::cuboid("cube", Vec3::new(0.05, 0.05, 0.05));
        let c = sample_contact_vertices(&mesh, 4, 0).unwrap();
        BodyModel::new(mesh, m, c, 1e3, 1.0).unwrap()
    }

    fn pinch(body: &BodyModel, cfg: &GraspEnvConfig) -> [f64; ACTION_DIM] {
        pinch_action(&body.mesh.vertices, cfg, 0.002)
    }

    #[test]
    fn force_target_arithmetic() {
        assert!((force_target(0.1, 9.81, 4).unwrap() - 0.24525).abs() < 1e-12);
        assert_eq!(force_target(0.3, 9.81, 1).unwrap(), 0.3 * 9.81);
        assert_eq!(force_target(0.3, 9.81, 6).unwrap(), force_target(0.3, 9.81, 3).unwrap() / 2.0);
        assert_eq!(force_target(0.7, 9.81, 5).unwrap() * 5.0, 0.7 * 9.81);
        assert!(force_target(0.1, 9.81, 0).is_err());
    }

    #[test]
    fn scaled_force_arithmetic() {
        assert_eq!(scaled_env_force(0.2, 9.81, 0, 20.0), 0.0);
        assert_eq!(scaled_env_force(0.5, 10.0, 4, 20.0), 1.0);
        assert!((scaled_env_force(0.2, 9.81, 3, 20.0) - 0.2943).abs() < 1e-12);
        assert_eq!(scaled_env_force(5.0, 9.81, 4, 20.0), 1.0);
    }

    #[test]
    fn margin_inside_the_window_holds() {
        let cfg = GraspEnvConfig::default();
        let b = cube(0.2);
        let cmd = 1.5 * 0.2 * cfg.g / cfg.f_max;
        let out = grasp_env_rollout(&pinch(&b, &cfg), cmd, &b, &ObjectPose::default(), &cfg);
        assert!(out.held_at_end);
        assert_eq!(out.contacts_at_close(), FINGERS);
        assert!(out.in_hand.iter().zip(&out.n_active).all(|(&h, &n)| h == (n >= 1)));
    }

    #[test]
    fn no_force_no_grasp() {
        let cfg = GraspEnvConfig::default();
        let b = cube(0.2);
        let out = grasp_env_rollout(&pinch(&b, &cfg), 0.0, &b, &ObjectPose::default(), &cfg);
        assert!(!out.held_at_end);
        assert_eq!(out.failure, Some(GraspFailure::Slip));
    }

    #[test]
    fn heavy_grip_ejects_a_light_object() {
        let cfg = GraspEnvConfig::default();
        let light = cube(0.05);
        let cmd = 1.5 * 8.0 * 0.05 * cfg.g / cfg.f_max;
        let out = grasp_env_rollout(&pinch(&light, &cfg), cmd, &light, &ObjectPose::default(), &cfg);
        assert_eq!(out.failure, Some(GraspFailure::BounceOff));
        assert_eq!(*out.n_active.last().unwrap(), 0);
    }

    #[test]
    fn open_hand_makes_no_contact() {
        let cfg = GraspEnvConfig::default();
        let b = cube(0.2);
        let out = grasp_env_rollout(&[0.0; ACTION_DIM], 0.5, &b, &ObjectPose::default(), &cfg);
        assert_eq!(out.failure, Some(GraspFailure::NoContact));
        assert!(out.n_active.iter().all(|&n| n == 0));
    }

    #[test]
    fn holding_commands_form_the_predicted_interval() {
        let cfg = GraspEnvConfig::default();
        for m in [0.05, 0.2, 0.8] {
            let b = cube(m);
            let a = pinch(&b, &cfg);
            let (lo, hi) = cfg.holding_interval(m);
            let held: Vec<(f64, bool)> = (0..=4000)
                .map(|i| i as f64 / 4000.0)
                .map(|c| (c, grasp_env_rollout(&a, c, &b, &ObjectPose::default(), &cfg).held_at_end))
                .collect();
            let ok: Vec<f64> = held.iter().filter(|(_, h)| *h).map(|(c, _)| *c).collect();
            let (first, last) = (ok[0], *ok.last().unwrap());
            assert!(held.iter().all(|&(c, h)| h == (c >= first && c <= last)), "m {m}: not contiguous");
            assert!(first >= lo && first - lo < 1.0 / 4000.0 + 1e-12, "m {m}: {first} vs {lo}");
            assert!(last <= hi.min(1.0) && hi.min(1.0) - last < 1.0 / 4000.0 + 1e-12, "m {m}: {last} vs {hi}");
        }
    }
}
