//! Reverse-mode gradients of the trajectory loss with respect to mass.
//!
//! [`record_rollout`] runs the ordinary simulator with the mass as a taped
//! [`Var`]; [`grad_mass`] seeds the pose outputs with the loss derivative
//! and sweeps the tape backwards. Contact branches are taken as recorded,
//! so the gradient at a switching instant is the one-sided derivative of
//! the branch that actually ran.

mod pushdown;
mod tape;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    rollout_with_mass, BodyModel, ForceSchedule, Integrator, PoseSample, RigidState, SimConfig, SimError, Trajectory,
};
use crate::geom::{Quat, Vec3};

pub use pushdown::{pushdown_closed_form, pushdown_least_squares, pushdown_residual, PushdownFit, PushdownModel};
pub use tape::Var;

use tape::{backpropagate, evaluate, Node, NodeList, Operand};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdjointError {
    #[error("explicit Euler rollouts cannot be taped; use the semi-implicit integrator")]
    ExplicitIntegrator,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("trajectory length mismatch: simulated {sim}, observed {real}")]
    LengthMismatch { sim: usize, real: usize },
    #[error("timestamp mismatch at sample {index}: simulated {sim}, observed {real}")]
    TimeMismatch { index: usize, sim: f64, real: f64 },
    #[error("sample window {start}..{end} is empty or exceeds {len} samples")]
    BadWindow { start: usize, end: usize, len: usize },
    #[error("finite-difference step must satisfy 0 < h < m (m = {m}, h = {h})")]
    BadStep { m: f64, h: f64 },
    #[error("mass is unobservable: the applied force never acts (sum of beta^2 is zero)")]
    Unobservable,
    #[error("non-physical mass: least-squares inverse mass {theta} is not positive")]
    NonPhysical { theta: f64 },
    #[error("loss evaluation failed: {0}")]
    Loss(String),
}

/// Timestamps of simulated and observed samples must agree this closely.
pub const TIME_TOL: f64 = 1e-9;

/// Which vertex was in contact at which step, and whether its force was
/// clamped to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContactBranch {
    pub step: usize,
    pub vertex_index: usize,
    pub clamped: bool,
}

/// Recorded computation of one rollout as a function of mass.
#[derive(Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    outputs: Vec<[Operand; 7]>,
    times: Vec<f64>,
    mass: f64,
    body: String,
    frame_rate: f64,
    branches: Vec<ContactBranch>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub grad: f64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fd_grad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rel_err: Option<f64>,
}

impl GradReport {
    /// Attach a finite-difference estimate; the relative error is taken
    /// against `max(|fd|, 1e-12)`.
    pub fn with_fd(mut self, fd: f64) -> Self {
        self.fd_grad = Some(fd);
        self.rel_err = Some((self.grad - fd).abs() / fd.abs().max(1e-12));
        self
    }
}

impl Tape {
    /// Number of recorded operations.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn samples(&self) -> usize {
        self.outputs.len()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn contact_branches(&self) -> &[ContactBranch] {
        &self.branches
    }

    /// Re-evaluate the tape at the recorded mass.
    pub fn replay(&self) -> Trajectory {
        self.replay_at(self.mass)
    }

    /// Re-evaluate the tape at another mass with the contact branches frozen
    /// as recorded. Away from the recorded mass this is the branch-fixed
    /// model, not a fresh rollout.
    pub fn replay_at(&self, mass: f64) -> Trajectory {
        let vals = evaluate(&self.nodes, mass);
        let get = |o: Operand| match o {
            Operand::Node(i) => vals[i as usize],
            Operand::Const(c) => c,
        };
        let samples = self
            .outputs
            .iter()
            .zip(&self.times)
            .map(|(o, &t)| PoseSample {
                t,
                p: Vec3::new(get(o[0]), get(o[1]), get(o[2])),
                q: Quat::new(get(o[3]), get(o[4]), get(o[5]), get(o[6])),
            })
            .collect();
        Trajectory {
            body: self.body.clone(),
            frame_rate: self.frame_rate,
            samples,
        }
    }

    fn value(&self, o: Operand) -> f64 {
        match o {
            Operand::Node(i) => self.nodes[i as usize].val,
            Operand::Const(c) => c,
        }
    }

    fn sample(&self, k: usize) -> PoseSample {
        let o = &self.outputs[k];
        PoseSample {
            t: self.times[k],
            p: Vec3::new(self.value(o[0]), self.value(o[1]), self.value(o[2])),
            q: Quat::new(self.value(o[3]), self.value(o[4]), self.value(o[5]), self.value(o[6])),
        }
    }
}

/// Record a rollout at the body's own mass.
pub fn record_rollout(
    init: &RigidState,
    body: &BodyModel,
    sched: &ForceSchedule,
    cfg: &SimConfig,
) -> Result<(Trajectory, Tape), AdjointError> {
    record_rollout_at(init, body, body.mass, sched, cfg)
}

/// Record a rollout with `mass` overriding the body's mass.
pub fn record_rollout_at(
    init: &RigidState,
    body: &BodyModel,
    mass: f64,
    sched: &ForceSchedule,
    cfg: &SimConfig,
) -> Result<(Trajectory, Tape), AdjointError> {
    if cfg.integrator == Integrator::Explicit {
        return Err(AdjointError::ExplicitIntegrator);
    }
    let list = NodeList::default();
    let m = Var::input(&list, mass);
    let out = rollout_with_mass(init.lift::<Var>(), body, m, sched, cfg)?;

    let outputs: Vec<[Operand; 7]> = out
        .states
        .iter()
        .map(|s| {
            [
                s.p.x.operand(),
                s.p.y.operand(),
                s.p.z.operand(),
                s.q.w.operand(),
                s.q.x.operand(),
                s.q.y.operand(),
                s.q.z.operand(),
            ]
        })
        .collect();
    let times: Vec<f64> = out.states.iter().map(|s| s.t).collect();
    let branches = out
        .contacts
        .iter()
        .enumerate()
        .flat_map(|(step, events)| {
            events.iter().map(move |e| ContactBranch {
                step,
                vertex_index: e.vertex_index,
                clamped: e.is_clamped(),
            })
        })
        .collect();
    let states: Vec<RigidState> = out.states.iter().map(|s| s.values()).collect();
    drop(out);

    let trajectory = Trajectory::from_states(&body.mesh.name, &states, cfg.dt);
    let tape = Tape {
        nodes: list.into_inner(),
        outputs,
        times,
        mass,
        body: body.mesh.name.clone(),
        frame_rate: trajectory.frame_rate,
        branches,
    };
    Ok((trajectory, tape))
}

/// Flip `real` onto the hemisphere of `sim` so the quaternion residual is
/// well defined under the double cover.
pub fn align_sign(sim: &Quat, real: &Quat) -> Quat {
    if sim.dot(real) < 0.0 {
        real.scale(-1.0)
    } else {
        *real
    }
}

/// `‖Δp‖² + w_q·‖q_sim − q_real‖²` for one sample.
pub fn pose_residual(sim: &PoseSample, real: &PoseSample, quat_weight: f64) -> f64 {
    let dp = sim.p - real.p;
    let dq = sim.q.sub(&align_sign(&sim.q, &real.q));
    dp.norm_squared() + quat_weight * dq.dot(&dq)
}

/// Trajectory loss over paired samples.
pub fn pose_loss(sim: &[PoseSample], real: &[PoseSample], quat_weight: f64) -> f64 {
    sim.iter().zip(real).map(|(s, r)| pose_residual(s, r, quat_weight)).sum()
}

pub fn check_alignment(sim: &[PoseSample], real: &[PoseSample]) -> Result<(), AdjointError> {
    if sim.len() != real.len() {
        return Err(AdjointError::LengthMismatch {
            sim: sim.len(),
            real: real.len(),
        });
    }
    for (index, (s, r)) in sim.iter().zip(real).enumerate() {
        if (s.t - r.t).abs() > TIME_TOL {
            return Err(AdjointError::TimeMismatch { index, sim: s.t, real: r.t });
        }
    }
    Ok(())
}

fn check_indices(indices: &[usize], len: usize) -> Result<(), AdjointError> {
    match (indices.first(), indices.last()) {
        (Some(_), Some(&last)) if last < len && indices.windows(2).all(|w| w[0] < w[1]) => Ok(()),
        _ => Err(AdjointError::BadWindow {
            start: indices.first().copied().unwrap_or(0),
            end: indices.last().map_or(0, |l| l + 1),
            len,
        }),
    }
}

/// dL/dm over the whole tape with unit quaternion weight; `real` must have
/// one sample per tape output.
pub fn grad_mass(tape: &Tape, real: &Trajectory) -> Result<GradReport, AdjointError> {
    let all: Vec<usize> = (0..tape.samples()).collect();
    grad_mass_at(tape, &real.samples, &all, 1.0)
}

/// dL/dm with the loss restricted to tape samples `window`.
pub fn grad_mass_range(tape: &Tape, real: &[PoseSample], window: Range<usize>) -> Result<GradReport, AdjointError> {
    let idx: Vec<usize> = window.collect();
    grad_mass_at(tape, real, &idx, 1.0)
}

/// dL/dm with the loss taken over the strictly increasing tape sample
/// `indices`; `real[j]` is the observation paired with `indices[j]`.
pub fn grad_mass_at(tape: &Tape, real: &[PoseSample], indices: &[usize], quat_weight: f64) -> Result<GradReport, AdjointError> {
    check_indices(indices, tape.samples())?;
    let sim: Vec<PoseSample> = indices.iter().map(|&k| tape.sample(k)).collect();
    check_alignment(&sim, real)?;

    let mut adj = vec![0.0; tape.nodes.len()];
    let mut loss = 0.0;
    for ((&k, s), r) in indices.iter().zip(&sim).zip(real) {
        loss += pose_residual(s, r, quat_weight);
        let rq = align_sign(&s.q, &r.q);
        let seeds = [
            2.0 * (s.p.x - r.p.x),
            2.0 * (s.p.y - r.p.y),
            2.0 * (s.p.z - r.p.z),
            2.0 * quat_weight * (s.q.w - rq.w),
            2.0 * quat_weight * (s.q.x - rq.x),
            2.0 * quat_weight * (s.q.y - rq.y),
            2.0 * quat_weight * (s.q.z - rq.z),
        ];
        for (o, d) in tape.outputs[k].iter().zip(seeds) {
            if let Operand::Node(i) = o {
                adj[*i as usize] += d;
            }
        }
    }
    backpropagate(&tape.nodes, &mut adj);
    let grad = adj.first().copied().unwrap_or(0.0);
    Ok(GradReport {
        grad,
        loss,
        fd_grad: None,
        rel_err: None,
    })
}

/// Central difference `(L(m+h) − L(m−h)) / 2h`.
pub fn finite_diff_grad<E: std::fmt::Display>(
    loss: impl Fn(f64) -> Result<f64, E>,
    m: f64,
    h: f64,
) -> Result<f64, AdjointError> {
    if !(h > 0.0) || !(m - h > 0.0) {
        return Err(AdjointError::BadStep { m, h });
    }
    let eval = |x: f64| loss(x).map_err(|e| AdjointError::Loss(e.to_string()));
    Ok((eval(m + h)? - eval(m - h)?) / (2.0 * h))
}

/// Everything needed to turn a mass into a loss with a fresh rollout.
#[derive(Clone, Copy)]
pub struct LossProblem<'a> {
    pub init: &'a RigidState,
    pub body: &'a BodyModel,
    pub sched: &'a ForceSchedule,
    pub cfg: &'a SimConfig,
    pub real: &'a [PoseSample],
    pub indices: &'a [usize],
    pub quat_weight: f64,
}

impl LossProblem<'_> {
    /// Loss of a plain `f64` rollout at mass `m`, with either integrator.
    pub fn loss(&self, m: f64) -> Result<f64, AdjointError> {
        let out = rollout_with_mass(self.init.lift::<f64>(), self.body, m, self.sched, self.cfg)?;
        check_indices(self.indices, out.states.len())?;
        let sim: Vec<PoseSample> = self
            .indices
            .iter()
            .map(|&k| {
                let s = &out.states[k];
                PoseSample { t: s.t, p: s.p, q: s.q }
            })
            .collect();
        check_alignment(&sim, self.real)?;
        Ok(pose_loss(&sim, self.real, self.quat_weight))
    }

    /// Taped loss and reverse-mode gradient at `m` (semi-implicit only).
    pub fn grad(&self, m: f64) -> Result<GradReport, AdjointError> {
        let (_, tape) = record_rollout_at(self.init, self.body, m, self.sched, self.cfg)?;
        grad_mass_at(&tape, self.real, self.indices, self.quat_weight)
    }

    /// Central finite difference of [`Self::loss`].
    pub fn fd_grad(&self, m: f64, h: f64) -> Result<f64, AdjointError> {
        finite_diff_grad(|x| self.loss(x), m, h)
    }
}
