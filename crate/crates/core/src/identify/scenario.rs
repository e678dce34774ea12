use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    rollout, BodyModel, ForceSchedule, Integrator, PoseSample, RigidState, Rollout, SimConfig, SimError, Trajectory,
    DEFAULT_GRAVITY,
};
use crate::geom::{load_mesh, sample_contact_vertices, MeshModel, Quat, Vec3};

use super::{IdentifyError, NoiseModel, SyncSpec};

fn default_m_init() -> f64 {
    0.002
}
fn default_dt() -> f64 {
    1e-3
}
fn default_steps() -> usize {
    500
}
fn default_contacts() -> usize {
    4
}
fn default_gap() -> f64 {
    0.01
}
fn default_gravity() -> Vec3 {
    DEFAULT_GRAVITY
}
fn default_true() -> bool {
    true
}
fn default_orientation() -> Quat {
    Quat::IDENTITY
}
fn default_quat_weight() -> f64 {
    1.0
}
fn default_substeps() -> usize {
    1
}

/// On-disk scenario description. `mesh` is resolved relative to the
/// directory holding the scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_mass_kg: Option<f64>,
    #[serde(default = "default_m_init")]
    pub m_init_kg: f64,
    pub k_e: f64,
    pub k_d: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub ground_height: f64,
    #[serde(default)]
    pub schedule: ForceSchedule,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub sync: SyncSpec,

    /// Number of sampled contact vertices.
    #[serde(default = "default_contacts")]
    pub contact_vertices: usize,
    #[serde(default)]
    pub sample_seed: u64,
    #[serde(default = "default_gravity")]
    pub gravity: Vec3,
    #[serde(default)]
    pub integrator: Integrator,
    /// Clearance between the lowest vertex and the ground at t = 0.
    #[serde(default = "default_gap")]
    pub initial_gap: f64,
    #[serde(default = "default_orientation")]
    pub initial_orientation: Quat,
    #[serde(default)]
    pub initial_velocity: Vec3,
    #[serde(default)]
    pub initial_angular_velocity: Vec3,
    /// Rough prior on the object's mass scale, used to pick the adaptive
    /// optimizer schedule. Falls back to `m_init_kg`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_scale_guess_kg: Option<f64>,
    #[serde(default = "default_true")]
    pub per_particle_full_mass: bool,
    #[serde(default = "default_quat_weight")]
    pub quat_weight: f64,
    /// Synthetic observations are simulated at `dt / reference_substeps` and
    /// decimated back to the scenario rate.
    #[serde(default = "default_substeps")]
    pub reference_substeps: usize,
}

/// A scenario with its mesh loaded and its body, initial state and
/// simulation config built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub body: BodyModel,
    pub init: RigidState,
    pub sched: ForceSchedule,
    pub cfg: SimConfig,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, IdentifyError> {
        let text = std::fs::read_to_string(path).map_err(|e| IdentifyError::Io {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| IdentifyError::Scenario {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_file(file, base)
    }

    pub fn from_file(file: ScenarioFile, base_dir: &Path) -> Result<Self, IdentifyError> {
        let mesh_path = base_dir.join(&file.mesh);
        let bytes = std::fs::read(&mesh_path).map_err(|e| IdentifyError::Io {
            path: mesh_path.clone(),
            msg: e.to_string(),
        })?;
        let mesh = load_mesh(&bytes).map_err(|e| IdentifyError::Scenario {
            path: mesh_path.clone(),
            msg: e.to_string(),
        })?;
        Self::with_mesh(file, mesh)
    }

    /// Build from an already loaded mesh; `file.mesh` is kept only as a label.
    pub fn with_mesh(file: ScenarioFile, mesh: MeshModel) -> Result<Self, IdentifyError> {
        let bad = |msg: String| IdentifyError::Invalid(msg);
        if !(file.m_init_kg > 0.0) {
            return Err(bad(format!("m_init_kg must be positive, got {}", file.m_init_kg)));
        }
        if let Some(m) = file.true_mass_kg {
            if !(m > 0.0) {
                return Err(bad(format!("true_mass_kg must be positive, got {m}")));
            }
        }
        if !(file.quat_weight >= 0.0) {
            return Err(bad(format!("quat_weight must be non-negative, got {}", file.quat_weight)));
        }
        if file.reference_substeps == 0 {
            return Err(bad("reference_substeps must be at least 1".into()));
        }
        file.noise.validate()?;
        file.sync.validate()?;

        let contacts = sample_contact_vertices(&mesh, file.contact_vertices, file.sample_seed).map_err(SimError::from)?;
        let inertia_mass = file.true_mass_kg.unwrap_or(file.m_init_kg);
        let mut body = BodyModel::new(mesh, inertia_mass, contacts, file.k_e, file.k_d)?;
        body.per_particle_full_mass = file.per_particle_full_mass;

        let cfg = SimConfig {
            dt: file.dt,
            gravity: file.gravity,
            integrator: file.integrator,
            ground_height: file.ground_height,
            steps: file.steps,
            ..SimConfig::default()
        };
        cfg.validate()?;
        file.schedule.validate()?;

        let init = RigidState {
            p: Vec3::new(0.0, 0.0, file.ground_height + body.com_height() + file.initial_gap),
            q: file.initial_orientation.normalize(),
            v: file.initial_velocity,
            w: file.initial_angular_velocity,
            t: 0.0,
        };
        Ok(Self {
            sched: file.schedule.clone(),
            file,
            body,
            init,
            cfg,
        })
    }

    pub fn true_mass(&self) -> Result<f64, IdentifyError> {
        self.file
            .true_mass_kg
            .ok_or_else(|| IdentifyError::Invalid("scenario has no true_mass_kg".into()))
    }

    pub fn mass_scale_guess(&self) -> f64 {
        self.file.mass_scale_guess_kg.unwrap_or(self.file.m_init_kg)
    }

    pub fn with_integrator(&self, integrator: Integrator) -> Self {
        let mut s = self.clone();
        s.cfg.integrator = integrator;
        s.file.integrator = integrator;
        s
    }

    /// Plain rollout at mass `m`.
    pub fn simulate(&self, m: f64) -> Result<Rollout, SimError> {
        rollout(&self.init, &self.body.with_mass(m)?, &self.sched, &self.cfg)
    }

    /// Noise-free observation at mass `m`, integrated `reference_substeps`
    /// times finer than the scenario and sampled at the scenario rate.
    pub fn reference_trajectory(&self, m: f64) -> Result<Trajectory, SimError> {
        let sub = self.file.reference_substeps;
        if sub == 1 {
            return Ok(self.simulate(m)?.trajectory);
        }
        let cfg = SimConfig {
            dt: self.cfg.dt / sub as f64,
            steps: self.cfg.steps * sub,
            ..self.cfg.clone()
        };
        let fine = rollout(&self.init, &self.body.with_mass(m)?, &self.sched, &cfg)?.trajectory;
        let samples = fine
            .samples
            .iter()
            .step_by(sub)
            .enumerate()
            .map(|(k, s)| PoseSample {
                t: k as f64 * self.cfg.dt,
                ..*s
            })
            .collect();
        Ok(Trajectory {
            frame_rate: 1.0 / self.cfg.dt,
            samples,
            ..fine
        })
    }
}
