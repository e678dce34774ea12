use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::{pushdown_least_squares, AdjointError, GradReport, LossProblem, PushdownFit, PushdownModel};
use crate::dynamics::{Integrator, PoseSample, SimError, Trajectory};

use super::{sample_at, IdentifyError, Scenario};

pub const M_MIN: f64 = 1e-4;
pub const M_MAX: f64 = 100.0;

/// Initial step (kg) for heavy objects under the adaptive schedule.
pub const LR_HI: f64 = 0.02;
/// Initial step (kg) for light and medium objects.
pub const LR_MID: f64 = 0.005;
pub const HEAVY_KG: f64 = 0.5;
pub const LIGHT_KG: f64 = 0.05;
pub const LIGHT_DECAY: f64 = 0.95;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Projected gradient descent, `m ← clamp(m − lr·∇L)`.
    Fixed,
    /// Sign-based steps: `lr` is the initial step in kg, grown by 1.2 while
    /// the gradient keeps its sign and halved when it flips.
    #[default]
    Adaptive,
}

impl std::str::FromStr for ScheduleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(format!("unknown schedule {other:?} (expected fixed or adaptive)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSchedule {
    pub lr: f64,
    pub max_epochs: usize,
    pub lr_decay: Option<f64>,
}

/// Piecewise schedule by mass scale: heavy objects get a larger initial
/// step and a long budget, light ones a per-plateau decay.
pub fn adaptive_schedule(m_scale_guess: f64) -> AdaptiveSchedule {
    if m_scale_guess >= HEAVY_KG {
        AdaptiveSchedule {
            lr: LR_HI,
            max_epochs: 2000,
            lr_decay: None,
        }
    } else if m_scale_guess >= LIGHT_KG {
        AdaptiveSchedule {
            lr: LR_MID,
            max_epochs: 200,
            lr_decay: None,
        }
    } else {
        AdaptiveSchedule {
            lr: LR_MID,
            max_epochs: 200,
            lr_decay: Some(LIGHT_DECAY),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyConfig {
    pub m_init: f64,
    pub lr: f64,
    pub max_epochs: usize,
    pub tol_loss: f64,
    pub tol_grad: f64,
    /// Step multiplier applied after `plateau_patience` epochs without a
    /// new best loss.
    pub lr_decay: Option<f64>,
    pub plateau_patience: usize,
    pub schedule: ScheduleKind,
    /// Adaptive runs stop once the step falls below `tol_step·m`.
    pub tol_step: f64,
    pub quat_weight: f64,
    /// Finite-difference step relative to `m` for the explicit integrator.
    pub fd_rel_step: f64,
    pub max_retries: usize,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self::adaptive(0.002, 0.1)
    }
}

impl IdentifyConfig {
    pub fn adaptive(m_init: f64, m_scale_guess: f64) -> Self {
        let s = adaptive_schedule(m_scale_guess);
        Self {
            m_init,
            lr: s.lr,
            max_epochs: s.max_epochs,
            tol_loss: 1e-14,
            tol_grad: 1e-10,
            lr_decay: s.lr_decay,
            plateau_patience: 5,
            schedule: ScheduleKind::Adaptive,
            tol_step: 1e-6,
            quat_weight: 1.0,
            fd_rel_step: 1e-5,
            max_retries: 10,
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        let mut c = Self::adaptive(scenario.file.m_init_kg, scenario.mass_scale_guess());
        c.quat_weight = scenario.file.quat_weight;
        c
    }

    pub fn validate(&self) -> Result<(), IdentifyError> {
        let bad = |m: String| Err(IdentifyError::Invalid(m));
        if !(self.m_init > 0.0) {
            return bad(format!("m_init must be positive, got {}", self.m_init));
        }
        if !(self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if let Some(d) = self.lr_decay {
            if !(d > 0.0 && d <= 1.0) {
                return bad(format!("lr_decay must lie in (0, 1], got {d}"));
            }
        }
        if !(self.fd_rel_step > 0.0 && self.fd_rel_step < 0.5) {
            return bad(format!("fd_rel_step must lie in (0, 0.5), got {}", self.fd_rel_step));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifyStatus {
    Converged,
    MaxEpochs,
    /// The gradient vanished at the first iterate: the data carry no
    /// information about the mass.
    Unobservable,
    /// A rollout diverged and halving the step did not recover.
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifyReport {
    /// Lowest-loss iterate; absent when no iterate was usable.
    pub m_hat: Option<f64>,
    pub loss_curve: Vec<f64>,
    pub m_curve: Vec<f64>,
    pub grad_curve: Vec<f64>,
    pub epochs_run: usize,
    pub converged: bool,
    pub status: IdentifyStatus,
    pub integrator: Integrator,
    /// Rollouts that diverged and forced a smaller step.
    pub divergences: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
    pub config: IdentifyConfig,
    #[serde(skip)]
    pub wall_clock: f64,
}

impl IdentifyReport {
    pub fn sec_per_iter(&self) -> f64 {
        self.wall_clock / self.epochs_run.max(1) as f64
    }

    /// `(epoch, m, loss)` rows for plotting.
    pub fn curve_rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.m_curve
            .iter()
            .zip(&self.loss_curve)
            .enumerate()
            .map(|(e, (m, l))| (e, *m, *l))
    }

    pub fn relative_error(&self, truth: f64) -> Option<f64> {
        self.m_hat.map(|m| (m - truth).abs() / truth)
    }
}

/// Observations paired with simulation sample indices.
#[derive(Clone, Debug)]
pub struct Observations {
    pub indices: Vec<usize>,
    pub samples: Vec<PoseSample>,
}

/// Apply the scenario's sync spec to an observed trajectory.
pub fn prepare_observations(scenario: &Scenario, real: &Trajectory) -> Result<Observations, IdentifyError> {
    let sim_times: Vec<f64> = (0..=scenario.cfg.steps)
        .map(|k| scenario.init.t + k as f64 * scenario.cfg.dt)
        .collect();
    let sync = &scenario.file.sync;
    let indices = sync.sim_indices(&sim_times)?;
    let times: Vec<f64> = indices.iter().map(|&k| sim_times[k]).collect();
    let mut samples = sample_at(real, &times)?;
    for s in &mut samples {
        s.p += sync.recenter;
    }
    Ok(Observations { indices, samples })
}

pub fn loss_problem<'a>(scenario: &'a Scenario, obs: &'a Observations, quat_weight: f64) -> LossProblem<'a> {
    LossProblem {
        init: &scenario.init,
        body: &scenario.body,
        sched: &scenario.sched,
        cfg: &scenario.cfg,
        real: &obs.samples,
        indices: &obs.indices,
        quat_weight,
    }
}

fn evaluate(problem: &LossProblem, integrator: Integrator, m: f64, fd_rel: f64) -> Result<GradReport, AdjointError> {
    match integrator {
        Integrator::SemiImplicit => problem.grad(m),
        Integrator::Explicit => {
            let loss = problem.loss(m)?;
            let fd = problem.fd_grad(m, fd_rel * m)?;
            Ok(GradReport {
                grad: fd,
                loss,
                fd_grad: None,
                rel_err: None,
            })
        }
    }
}

fn is_divergence(e: &AdjointError) -> bool {
    match e {
        AdjointError::Sim(SimError::Diverged { .. }) => true,
        AdjointError::Loss(msg) => msg.contains("diverged"),
        _ => false,
    }
}

/// Gradient-based identification of the mass from `real`.
///
/// Gradients are reverse-mode through the tape for the semi-implicit
/// integrator and central finite differences for the explicit one.
pub fn identify_mass(scenario: &Scenario, real: &Trajectory, cfg: &IdentifyConfig) -> Result<IdentifyReport, IdentifyError> {
    cfg.validate()?;
    let obs = prepare_observations(scenario, real)?;
    let problem = loss_problem(scenario, &obs, cfg.quat_weight);
    let integrator = scenario.cfg.integrator;
    let started = Instant::now();

    let mut report = IdentifyReport {
        m_hat: None,
        loss_curve: Vec::new(),
        m_curve: Vec::new(),
        grad_curve: Vec::new(),
        epochs_run: 0,
        converged: false,
        status: IdentifyStatus::MaxEpochs,
        integrator,
        divergences: 0,
        diagnostic: None,
        config: cfg.clone(),
        wall_clock: 0.0,
    };

    let mut m = cfg.m_init.clamp(M_MIN, M_MAX);
    let mut current = match evaluate(&problem, integrator, m, cfg.fd_rel_step) {
        Ok(g) => g,
        Err(e) if is_divergence(&e) => {
            report.divergences += 1;
            report.status = IdentifyStatus::Diverged;
            report.diagnostic = Some(format!("rollout diverged at the initial mass {m}: {e}"));
            report.wall_clock = started.elapsed().as_secs_f64();
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };

    let mut lr = cfg.lr;
    let mut step = cfg.lr;
    let mut prev_sign = 0.0;
    let mut best = (f64::INFINITY, m);
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        report.m_curve.push(m);
        report.loss_curve.push(current.loss);
        report.grad_curve.push(current.grad);
        report.epochs_run = epoch + 1;
        if current.loss < best.0 {
            best = (current.loss, m);
            since_best = 0;
        } else {
            since_best += 1;
        }

        if epoch == 0 && current.grad.abs() < cfg.tol_grad {
            report.status = IdentifyStatus::Unobservable;
            report.diagnostic = Some(format!(
                "mass unobservable: |dL/dm| = {:e} below tol_grad {:e} at the initial mass",
                current.grad.abs(),
                cfg.tol_grad
            ));
            report.wall_clock = started.elapsed().as_secs_f64();
            return Ok(report);
        }
        if current.loss <= cfg.tol_loss || current.grad.abs() < cfg.tol_grad {
            report.status = IdentifyStatus::Converged;
            break;
        }
        if epoch + 1 == cfg.max_epochs {
            break;
        }

        if let Some(decay) = cfg.lr_decay {
            if since_best >= cfg.plateau_patience {
                lr *= decay;
                step *= decay;
                since_best = 0;
            }
        }

        let sign = current.grad.signum();
        let mut delta = match cfg.schedule {
            ScheduleKind::Fixed => lr * current.grad,
            ScheduleKind::Adaptive => {
                if prev_sign * sign > 0.0 {
                    step *= 1.2;
                    prev_sign = sign;
                } else if prev_sign * sign < 0.0 {
                    step *= 0.5;
                    prev_sign = 0.0;
                } else {
                    prev_sign = sign;
                }
                if step < cfg.tol_step * m {
                    report.status = IdentifyStatus::Converged;
                    break;
                }
                sign * step
            }
        };

        let mut accepted = None;
        for _ in 0..=cfg.max_retries {
            let cand = (m - delta).clamp(M_MIN, M_MAX);
            match evaluate(&problem, integrator, cand, cfg.fd_rel_step) {
                Ok(g) => {
                    accepted = Some((cand, g));
                    break;
                }
                Err(e) if is_divergence(&e) => {
                    report.divergences += 1;
                    delta *= 0.5;
                    lr *= 0.5;
                    step *= 0.5;
                }
                Err(e) => return Err(e.into()),
            }
        }
        match accepted {
            Some((cand, g)) => {
                m = cand;
                current = g;
            }
            None => {
                report.status = IdentifyStatus::Diverged;
                report.diagnostic = Some(format!(
                    "rollout kept diverging after {} step halvings from m = {m}",
                    cfg.max_retries
                ));
                break;
            }
        }
    }

    report.converged = report.status == IdentifyStatus::Converged;
    report.m_hat = Some(best.1);
    report.wall_clock = started.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub semi: IdentifyReport,
    pub explicit: IdentifyReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truth: Option<f64>,
}

impl AblationReport {
    pub fn abs_err(&self, integrator: Integrator) -> Option<f64> {
        let r = match integrator {
            Integrator::SemiImplicit => &self.semi,
            Integrator::Explicit => &self.explicit,
        };
        Some((r.m_hat? - self.truth?).abs())
    }
}

/// Identify the same observations once per integrator.
pub fn ablate_integrators(scenario: &Scenario, real: &Trajectory, cfg: &IdentifyConfig) -> Result<AblationReport, IdentifyError> {
    let semi = identify_mass(&scenario.with_integrator(Integrator::SemiImplicit), real, cfg)?;
    let explicit = identify_mass(&scenario.with_integrator(Integrator::Explicit), real, cfg)?;
    Ok(AblationReport {
        semi,
        explicit,
        truth: scenario.file.true_mass_kg,
    })
}

/// Convex least-squares fit of a contact-free vertical push. Only the
/// vertical component of the schedule and of the observations is used.
pub fn pushdown_fit(scenario: &Scenario, real: &Trajectory) -> Result<PushdownFit, IdentifyError> {
    let obs = prepare_observations(scenario, real)?;
    let (init, cfg) = (&scenario.init, &scenario.cfg);
    let u: Vec<f64> = (0..cfg.steps)
        .map(|k| scenario.sched.total_force_at(init.t + k as f64 * cfg.dt).z)
        .collect();
    let model = PushdownModel::new(&u, init.p.z, init.v.z, -cfg.gravity.z, cfg.dt);
    let alpha: Vec<f64> = obs.indices.iter().map(|&k| model.alpha[k]).collect();
    let beta: Vec<f64> = obs.indices.iter().map(|&k| model.beta[k]).collect();
    let z: Vec<f64> = obs.samples.iter().map(|s| s.p.z).collect();
    Ok(pushdown_least_squares(&z, &alpha, &beta)?)
}
