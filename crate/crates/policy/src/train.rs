use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use massid_core::geom::Vec3;

use crate::demo::Demo;
use crate::env::{grasp_outcome, scaled_env_force, GraspEnvConfig};
use crate::mlp::{forward, loss_and_grad, Adam, LossParts, LossWeights, Targets, ACTION_DIM};
use crate::{EncodedInput, Policy, PolicyError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub w_r: f64,
    pub w_f: f64,
    pub seed: u64,
    pub env: GraspEnvConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_phase1: 40,
            epochs_phase2: 40,
            lr: 3e-4,
            batch_size: 32,
            w_r: 0.8,
            w_f: 0.3,
            seed: 0,
            env: GraspEnvConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.lr > 0.0) || self.batch_size == 0 || !(self.w_r >= 0.0) || !(self.w_f >= 0.0) {
            return Err(PolicyError::Invalid(format!("bad training config {self:?}")));
        }
        self.env.validate()
    }
}

/// Mean losses of one epoch. `success` is the fraction of phase-2 rollouts
/// that held the object (absent in phase 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub phase: u8,
    pub epoch: usize,
    pub action: f64,
    pub reward: f64,
    pub force: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub success: Option<f64>,
}

/// Object placement and mass for one phase-2 rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvFixture {
    pub vertices: Vec<Vec3>,
    pub mass: f64,
}

impl From<&Demo> for EnvFixture {
    fn from(d: &Demo) -> Self {
        Self {
            vertices: d.vertices.clone(),
            mass: d.mass_kg,
        }
    }
}

fn batches(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(size).map(|c| c.to_vec()).collect()
}

fn accumulate(acc: &mut LossParts, p: &LossParts, n: usize) {
    let w = n as f64;
    acc.action += p.action * w;
    acc.reward += p.reward * w;
    acc.force += p.force * w;
    acc.total += p.total * w;
}

fn epoch_row(phase: u8, epoch: usize, acc: LossParts, n: usize, success: Option<f64>) -> EpochLoss {
    let d = n as f64;
    EpochLoss {
        phase,
        epoch,
        action: acc.action / d,
        reward: acc.reward / d,
        force: acc.force / d,
        total: acc.total / d,
        success,
    }
}

/// Supervised pre-training on the summed action MSE, reward BCE and force
/// MSE with Adam over shuffled mini-batches.
pub fn phase1_train(policy: &Policy, demos: &[Demo], cfg: &TrainConfig) -> Result<(Policy, Vec<EpochLoss>), PolicyError> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(PolicyError::Empty);
    }
    policy.check()?;
    let inputs: Vec<EncodedInput> = demos.iter().map(|d| policy.spec.encode(&d.vertices, d.mass_kg)).collect();
    let mut out = policy.clone();
    let mut opt = Adam::new(&out.params, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.epochs_phase1);

    for epoch in 0..cfg.epochs_phase1 {
        let mut acc = LossParts::default();
        for (bi, idx) in batches(demos.len(), cfg.batch_size, &mut rng).into_iter().enumerate() {
            let batch: Vec<&EncodedInput> = idx.iter().map(|&i| &inputs[i]).collect();
            let targets = Targets {
                action: Some(Array2::from_shape_fn((idx.len(), ACTION_DIM), |(k, j)| demos[idx[k]].action[j])),
                reward: Array2::from_shape_fn((idx.len(), 2), |(k, j)| demos[idx[k]].reward[j]),
                force: Array1::from_iter(idx.iter().map(|&i| demos[i].force)),
            };
            let (parts, grads) = loss_and_grad(&out.params, &batch, &targets, LossWeights::PHASE1)?;
            if !parts.total.is_finite() {
                return Err(PolicyError::NonFinite { epoch, batch: bi });
            }
            opt.step(&mut out.params, &grads, [false; 6]);
            accumulate(&mut acc, &parts, idx.len());
        }
        curve.push(epoch_row(1, epoch, acc, demos.len(), None));
    }
    Ok((out, curve))
}

/// Environment-feedback training of the reward and force heads: each
/// prediction is rolled out, the outcome supplies the reward labels
/// (sustained contact, held at end) and the scaled force label, and the
/// loss `w_r·L_r + w_f·L_f` updates everything except the action head.
pub fn phase2_train(policy: &Policy, fixtures: &[EnvFixture], cfg: &TrainConfig) -> Result<(Policy, Vec<EpochLoss>), PolicyError> {
    cfg.validate()?;
    if fixtures.is_empty() {
        return Err(PolicyError::Empty);
    }
    policy.check()?;
    let env = &cfg.env;
    let inputs: Vec<EncodedInput> = fixtures.iter().map(|f| policy.spec.encode(&f.vertices, f.mass)).collect();
    let weights = LossWeights {
        action: 0.0,
        reward: cfg.w_r,
        force: cfg.w_f,
    };
    let frozen = [true, true, true, true, false, false];
    let mut out = policy.clone();
    let mut opt = Adam::new(&out.params, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002);
    let mut curve = Vec::with_capacity(cfg.epochs_phase2);

    for epoch in 0..cfg.epochs_phase2 {
        let mut acc = LossParts::default();
        let mut held = 0usize;
        for (bi, idx) in batches(fixtures.len(), cfg.batch_size, &mut rng).into_iter().enumerate() {
            let batch: Vec<&EncodedInput> = idx.iter().map(|&i| &inputs[i]).collect();
            let pred = forward(&out.params, &batch)?;
            let mut reward = Array2::zeros((idx.len(), 2));
            let mut force = Array1::zeros(idx.len());
            for (k, &i) in idx.iter().enumerate() {
                let action: [f64; ACTION_DIM] = std::array::from_fn(|j| pred.action[[k, j]]);
                let fx = &fixtures[i];
                let o = grasp_outcome(&action, pred.force[k], &fx.vertices, fx.mass, env);
                reward[[k, 0]] = f64::from(u8::from(o.sustained_contact(env.n_min)));
                reward[[k, 1]] = f64::from(u8::from(o.held_at_end));
                force[k] = scaled_env_force(fx.mass, env.g, o.contacts_at_close(), env.f_max);
                held += usize::from(o.held_at_end);
            }
            let targets = Targets {
                action: None,
                reward,
                force,
            };
            let (parts, grads) = loss_and_grad(&out.params, &batch, &targets, weights)?;
            if !parts.total.is_finite() {
                return Err(PolicyError::NonFinite { epoch, batch: bi });
            }
            opt.step(&mut out.params, &grads, frozen);
            accumulate(&mut acc, &parts, idx.len());
        }
        let success = held as f64 / fixtures.len() as f64;
        curve.push(epoch_row(2, epoch, acc, fixtures.len(), Some(success)));
    }
    Ok((out, curve))
}

/// Phase 1 on `demos`, then phase 2 on the same placements.
pub fn train_two_phase(policy: &Policy, demos: &[Demo], cfg: &TrainConfig) -> Result<(Policy, Vec<EpochLoss>), PolicyError> {
    let (p1, mut curve) = phase1_train(policy, demos, cfg)?;
    let fixtures: Vec<EnvFixture> = demos.iter().map(EnvFixture::from).collect();
    let (p2, c2) = phase2_train(&p1, &fixtures, cfg)?;
    curve.extend(c2);
    Ok((p2, curve))
}
