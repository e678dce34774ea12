use std::f64::consts::PI;
use std::io::{BufRead, Write};

use massid_core::geom::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{pinch_action, GraspEnvConfig, ObjectPose};
use crate::mlp::{ACTION_DIM, REWARD_DIM};
use crate::PolicyError;

/// One supervised demonstration; serialized as one JSON line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demo {
    pub vertices: Vec<Vec3>,
    pub mass_kg: f64,
    pub action: Vec<f64>,
    pub reward: [f64; REWARD_DIM],
    pub force: f64,
}

impl Demo {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::Invalid(m));
        if self.vertices.is_empty() || self.vertices.iter().any(|v| !v.is_finite()) {
            return bad("demo vertices must be a non-empty list of finite points".into());
        }
        if !(self.mass_kg > 0.0 && self.mass_kg.is_finite()) {
            return bad(format!("demo mass must be positive, got {}", self.mass_kg));
        }
        if self.action.len() != ACTION_DIM {
            return bad(format!("demo action has {} joints, expected {ACTION_DIM}", self.action.len()));
        }
        if self.action.iter().any(|a| !(a.abs() <= PI)) {
            return bad("demo action outside the joint limits [-pi, pi]".into());
        }
        if self.reward.iter().chain([&self.force]).any(|l| !(0.0..=1.0).contains(l)) {
            return bad("demo labels must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn action_array(&self) -> [f64; ACTION_DIM] {
        std::array::from_fn(|j| self.action[j])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    pub count: usize,
    /// Demo masses are cycled through in order.
    pub masses: Vec<f64>,
    pub yaw_jitter: f64,
    pub offset_jitter: f64,
    pub squeeze: (f64, f64),
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            count: 200,
            masses: vec![0.05, 0.2, 0.8],
            yaw_jitter: 0.3,
            offset_jitter: 0.005,
            squeeze: (0.001, 0.003),
            seed: 0,
        }
    }
}

/// Random placement within the configured jitter.
pub fn random_pose(rng: &mut impl Rng, yaw_jitter: f64, offset_jitter: f64) -> ObjectPose {
    let mut u = |a: f64| if a > 0.0 { rng.random_range(-a..a) } else { 0.0 };
    ObjectPose {
        yaw: u(yaw_jitter),
        offset: Vec3::new(u(offset_jitter), u(offset_jitter), 0.0),
    }
}

/// Pinch demonstrations of `mesh_vertices` at jittered placements, with
/// both reward labels and the force label set to 1.
pub fn generate_demos(mesh_vertices: &[Vec3], cfg: &DemoConfig, env: &GraspEnvConfig) -> Result<Vec<Demo>, PolicyError> {
    if cfg.masses.is_empty() || cfg.masses.iter().any(|m| !(*m > 0.0)) {
        return Err(PolicyError::Invalid("demo masses must be a non-empty list of positive values".into()));
    }
    if mesh_vertices.is_empty() {
        return Err(PolicyError::Invalid("mesh has no vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let demos = (0..cfg.count)
        .map(|i| {
            let pose = random_pose(&mut rng, cfg.yaw_jitter, cfg.offset_jitter);
            let squeeze = if cfg.squeeze.1 > cfg.squeeze.0 {
                rng.random_range(cfg.squeeze.0..cfg.squeeze.1)
            } else {
                cfg.squeeze.0
            };
            let vertices = pose.apply(mesh_vertices);
            let action = pinch_action(&vertices, env, squeeze).to_vec();
            Demo {
                vertices,
                mass_kg: cfg.masses[i % cfg.masses.len()],
                action,
                reward: [1.0; REWARD_DIM],
                force: 1.0,
            }
        })
        .collect();
    Ok(demos)
}

pub fn write_demos(out: &mut impl Write, demos: &[Demo]) -> Result<(), PolicyError> {
    for d in demos {
        serde_json::to_writer(&mut *out, d).map_err(|e| PolicyError::Io(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| PolicyError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Parse JSON Lines, validating every record; blank lines are skipped.
pub fn read_demos(input: impl BufRead) -> Result<Vec<Demo>, PolicyError> {
    let mut demos = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| PolicyError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Demo = serde_json::from_str(&line).map_err(|e| PolicyError::Format(format!("line {}: {e}", i + 1)))?;
        d.validate().map_err(|e| PolicyError::Format(format!("line {}: {e}", i + 1)))?;
        demos.push(d);
    }
    Ok(demos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use massid_core::geom::MeshModel;

    fn cube() -> Vec<Vec3> {
        MeshModel::cuboid("cube", Vec3::new(0.05, 0.05, 0.05)).vertices
    }

    #[test]
    fn generated_demos_are_valid_and_cycle_masses() {
        let cfg = DemoConfig {
            count: 30,
            ..DemoConfig::default()
        };
        let demos = generate_demos(&cube(), &cfg, &GraspEnvConfig::default()).unwrap();
        assert_eq!(demos.len(), 30);
        for (i, d) in demos.iter().enumerate() {
            d.validate().unwrap();
            assert_eq!(d.mass_kg, cfg.masses[i % 3]);
            assert_eq!(d.reward, [1.0, 1.0]);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let cfg = DemoConfig {
            count: 5,
            ..DemoConfig::default()
        };
        let demos = generate_demos(&cube(), &cfg, &GraspEnvConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_demos(&mut buf, &demos).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 5);
        let back = read_demos(&buf[..]).unwrap();
        assert_eq!(back, demos);
    }

    #[test]
    fn bad_records_name_their_line() {
        let text = "\n{\"vertices\": [[0,0,0]], \"mass_kg\": 0.1, \"action\": [0.0], \"reward\": [1,1], \"force\": 1}\n";
        let err = read_demos(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
