use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adjoint::{check_alignment, pose_loss, TIME_TOL};
use crate::dynamics::{PoseSample, Trajectory};
use crate::geom::{Quat, Vec3};

use super::{IdentifyError, Scenario};

/// Pose noise applied to synthetic observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Isotropic Gaussian position noise (m).
    pub pos_sigma: f64,
    /// Constant vertical offset (m).
    pub z_bias: f64,
    /// Per-axis small-angle orientation noise (rad).
    pub quat_sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), IdentifyError> {
        if !(self.pos_sigma >= 0.0) || !(self.quat_sigma >= 0.0) || !self.z_bias.is_finite() {
            return Err(IdentifyError::Invalid(format!(
                "noise sigmas must be non-negative and finite (pos_sigma {}, quat_sigma {}, z_bias {})",
                self.pos_sigma, self.quat_sigma, self.z_bias
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.pos_sigma == 0.0 && self.z_bias == 0.0 && self.quat_sigma == 0.0
    }

    /// Perturb every sample. Draw order per sample: three position draws,
    /// then three rotation draws.
    pub fn apply(&self, traj: &Trajectory) -> Trajectory {
        if self.is_zero() {
            return traj.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut draw = |sigma: f64| sigma * std_normal.sample(&mut rng);
        let samples = traj
            .samples
            .iter()
            .map(|s| {
                let dp = Vec3::new(draw(self.pos_sigma), draw(self.pos_sigma), draw(self.pos_sigma) + self.z_bias);
                let phi = Vec3::new(draw(self.quat_sigma), draw(self.quat_sigma), draw(self.quat_sigma));
                PoseSample {
                    t: s.t,
                    p: s.p + dp,
                    q: Quat::from_rotation_vector(phi).mul(&s.q).normalize(),
                }
            })
            .collect();
        Trajectory {
            body: traj.body.clone(),
            frame_rate: traj.frame_rate,
            samples,
        }
    }
}

/// Rollout at `true_mass`, then pose noise.
pub fn synthesize_real_trajectory(
    scenario: &Scenario,
    true_mass: f64,
    noise: &NoiseModel,
) -> Result<Trajectory, IdentifyError> {
    if !(true_mass > 0.0) {
        return Err(IdentifyError::Invalid(format!("true mass must be positive, got {true_mass}")));
    }
    noise.validate()?;
    let clean = scenario.reference_trajectory(true_mass)?;
    Ok(noise.apply(&clean))
}

/// Window, re-centering and optional resampling used to pair observed and
/// simulated samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncSpec {
    /// First simulation sample of the window.
    pub start: usize,
    /// One past the last simulation sample; `None` runs to the end.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    /// Added to every observed position.
    pub recenter: Vec3,
    /// Common sampling rate (Hz) for both sides; `None` keeps the
    /// simulation's own samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resample_rate: Option<f64>,
}

impl SyncSpec {
    pub fn validate(&self) -> Result<(), IdentifyError> {
        if let Some(end) = self.end {
            if self.start >= end {
                return Err(IdentifyError::Invalid(format!("sync start {} must be before end {end}", self.start)));
            }
        }
        if let Some(r) = self.resample_rate {
            if !(r > 0.0) || !r.is_finite() {
                return Err(IdentifyError::Invalid(format!("resample rate must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Timestamps both sides are evaluated at, given the simulation times.
    pub fn target_times(&self, sim_times: &[f64]) -> Result<Vec<f64>, IdentifyError> {
        self.validate()?;
        let end = self.end.unwrap_or(sim_times.len());
        if end > sim_times.len() || self.start >= end {
            return Err(IdentifyError::Range(format!(
                "sync window {}..{end} outside the {} simulated samples",
                self.start,
                sim_times.len()
            )));
        }
        let window = &sim_times[self.start..end];
        match self.resample_rate {
            None => Ok(window.to_vec()),
            Some(rate) => {
                let (t0, t1) = (window[0], window[window.len() - 1]);
                let count = ((t1 - t0) * rate + TIME_TOL * rate).floor() as usize + 1;
                Ok((0..count).map(|j| t0 + j as f64 / rate).collect())
            }
        }
    }

    /// Simulation sample indices matching `target_times`; fails when a
    /// target falls between simulation samples.
    pub fn sim_indices(&self, sim_times: &[f64]) -> Result<Vec<usize>, IdentifyError> {
        let targets = self.target_times(sim_times)?;
        let mut out = Vec::with_capacity(targets.len());
        let mut k = self.start;
        for t in targets {
            while k < sim_times.len() && sim_times[k] < t - TIME_TOL {
                k += 1;
            }
            if k == sim_times.len() || (sim_times[k] - t).abs() > TIME_TOL {
                return Err(IdentifyError::Range(format!(
                    "resample time {t} does not coincide with a simulation sample; the rate must divide the simulation rate"
                )));
            }
            out.push(k);
        }
        Ok(out)
    }
}

fn lerp_pose(a: &PoseSample, b: &PoseSample, t: f64) -> PoseSample {
    let s = (t - a.t) / (b.t - a.t);
    let p = a.p + (b.p - a.p).scale(s);
    let qb = if a.q.dot(&b.q) < 0.0 { b.q.scale(-1.0) } else { b.q };
    let q = a.q.scale(1.0 - s).add(&qb.scale(s)).normalize();
    PoseSample { t, p, q }
}

/// Evaluate `traj` at `times`: samples within the time tolerance are taken
/// verbatim, others interpolated (linear for positions, normalized linear
/// for quaternions).
pub fn sample_at(traj: &Trajectory, times: &[f64]) -> Result<Vec<PoseSample>, IdentifyError> {
    let s = &traj.samples;
    let (first, last) = match (s.first(), s.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(IdentifyError::Range("trajectory is empty".into())),
    };
    let mut out = Vec::with_capacity(times.len());
    let mut k = 0;
    for &t in times {
        if t < first - TIME_TOL || t > last + TIME_TOL {
            return Err(IdentifyError::Range(format!(
                "time {t} outside trajectory span [{first}, {last}]"
            )));
        }
        while k + 1 < s.len() && s[k + 1].t <= t + TIME_TOL {
            k += 1;
        }
        if (s[k].t - t).abs() <= TIME_TOL {
            out.push(PoseSample { t, ..s[k] });
        } else {
            out.push(lerp_pose(&s[k], &s[k + 1], t));
        }
    }
    Ok(out)
}

/// Crop both trajectories to the sync window, shift `real` by the
/// recentering vector and bring both onto common timestamps.
pub fn align_trajectories(
    real: &Trajectory,
    sim_template: &Trajectory,
    sync: &SyncSpec,
) -> Result<(Trajectory, Trajectory), IdentifyError> {
    let sim_times: Vec<f64> = sim_template.times().collect();
    let times = sync.target_times(&sim_times)?;
    let mut real_s = sample_at(real, &times)?;
    for s in &mut real_s {
        s.p += sync.recenter;
    }
    let sim_s = sample_at(sim_template, &times)?;
    let rate = sync.resample_rate.unwrap_or(sim_template.frame_rate);
    Ok((
        Trajectory {
            body: real.body.clone(),
            frame_rate: rate,
            samples: real_s,
        },
        Trajectory {
            body: sim_template.body.clone(),
            frame_rate: rate,
            samples: sim_s,
        },
    ))
}

/// `Σ_t ‖Δp‖² + w_q·‖Δq‖²` over aligned trajectories.
pub fn trajectory_loss(sim: &Trajectory, real: &Trajectory, quat_weight: f64) -> Result<f64, IdentifyError> {
    check_alignment(&sim.samples, &real.samples)?;
    Ok(pose_loss(&sim.samples, &real.samples, quat_weight))
}
