//! The three-headed grasp network and its hand-written backward pass.
//!
//! Every vertex row `[features, mass]` runs through the same three ReLU
//! layers; the rows of one sample are mean-pooled and the pooled vector
//! feeds three linear heads (action 16, reward 2 with sigmoid, force 1
//! with sigmoid).

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encode::EncodedInput;
use crate::PolicyError;

pub const ACTION_DIM: usize = 16;
pub const REWARD_DIM: usize = 2;
pub const HIDDEN: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `in × out`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    fn uniform(fan_in: usize, fan_out: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w: Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound)),
            b: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraspMLPParams {
    pub trunk: [Dense; 3],
    pub action: Dense,
    pub reward: Dense,
    pub force: Dense,
}

pub const TENSOR_NAMES: [&str; 6] = ["trunk.0", "trunk.1", "trunk.2", "action", "reward", "force"];

impl GraspMLPParams {
    /// Fan-in uniform initialization: `±√(6/fan_in)` for the ReLU trunk,
    /// `±1/√fan_in` for the heads, zero biases.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let he = |n: usize| (6.0 / n as f64).sqrt();
        let lecun = |n: usize| 1.0 / (n as f64).sqrt();
        Self {
            trunk: [
                Dense::uniform(input_dim, hidden, he(input_dim), &mut rng),
                Dense::uniform(hidden, hidden, he(hidden), &mut rng),
                Dense::uniform(hidden, hidden, he(hidden), &mut rng),
            ],
            action: Dense::uniform(hidden, ACTION_DIM, lecun(hidden), &mut rng),
            reward: Dense::uniform(hidden, REWARD_DIM, lecun(hidden), &mut rng),
            force: Dense::uniform(hidden, 1, lecun(hidden), &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |d: &Dense| Dense::zeros(d.w.nrows(), d.w.ncols());
        Self {
            trunk: [z(&self.trunk[0]), z(&self.trunk[1]), z(&self.trunk[2])],
            action: z(&self.action),
            reward: z(&self.reward),
            force: z(&self.force),
        }
    }

    /// Per-vertex input width, mass slot included.
    pub fn input_dim(&self) -> usize {
        self.trunk[0].w.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.trunk[0].w.ncols()
    }

    pub fn tensors(&self) -> [&Dense; 6] {
        [&self.trunk[0], &self.trunk[1], &self.trunk[2], &self.action, &self.reward, &self.force]
    }

    pub fn tensors_mut(&mut self) -> [&mut Dense; 6] {
        let [t0, t1, t2] = &mut self.trunk;
        [t0, t1, t2, &mut self.action, &mut self.reward, &mut self.force]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|d| d.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|d| d.w.iter().chain(d.b.iter()).all(|v| v.is_finite()))
    }
}

/// Outputs for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub action: [f64; ACTION_DIM],
    pub reward: [f64; REWARD_DIM],
    pub force: f64,
}

pub(crate) struct Forward {
    rows: Array2<f64>,
    acts: [Array2<f64>; 3],
    counts: Vec<usize>,
    pooled: Array2<f64>,
    pub action: Array2<f64>,
    pub reward: Array2<f64>,
    pub force: Array1<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn stack_rows(params: &GraspMLPParams, inputs: &[&EncodedInput]) -> Result<(Array2<f64>, Vec<usize>), PolicyError> {
    let dim = params.input_dim();
    let total: usize = inputs.iter().map(|e| e.vertex_count).sum();
    let mut rows = Array2::zeros((total, dim));
    let mut counts = Vec::with_capacity(inputs.len());
    let mut r = 0;
    for e in inputs {
        if e.per_vertex() + 1 != dim || e.features.len() != e.vertex_count * e.per_vertex() + 1 {
            return Err(PolicyError::Shape(format!(
                "input has {} features per vertex (+1 mass), network expects {}",
                e.per_vertex(),
                dim
            )));
        }
        if e.vertex_count == 0 {
            return Err(PolicyError::Shape("input has no vertices".into()));
        }
        let m = e.mass_slot();
        for i in 0..e.vertex_count {
            let mut row = rows.row_mut(r);
            for (dst, src) in row.iter_mut().zip(e.vertex(i)) {
                *dst = *src;
            }
            row[dim - 1] = m;
            r += 1;
        }
        counts.push(e.vertex_count);
    }
    Ok((rows, counts))
}

pub(crate) fn forward(params: &GraspMLPParams, inputs: &[&EncodedInput]) -> Result<Forward, PolicyError> {
    let (rows, counts) = stack_rows(params, inputs)?;
    let relu = |x: Array2<f64>| x.mapv_into(|v| v.max(0.0));
    let a0 = relu(params.trunk[0].apply(&rows));
    let a1 = relu(params.trunk[1].apply(&a0));
    let a2 = relu(params.trunk[2].apply(&a1));

    let mut pooled = Array2::zeros((counts.len(), params.hidden()));
    let mut start = 0;
    for (k, &n) in counts.iter().enumerate() {
        let mean = a2.slice(s![start..start + n, ..]).mean_axis(Axis(0)).unwrap();
        pooled.row_mut(k).assign(&mean);
        start += n;
    }
    let action = params.action.apply(&pooled);
    let reward = params.reward.apply(&pooled).mapv_into(sigmoid);
    let force = params.force.apply(&pooled).column(0).mapv(sigmoid);
    Ok(Forward {
        rows,
        acts: [a0, a1, a2],
        counts,
        pooled,
        action,
        reward,
        force,
    })
}

/// Batched forward pass.
pub fn mlp_forward_batch(params: &GraspMLPParams, inputs: &[&EncodedInput]) -> Result<Vec<PolicyOutput>, PolicyError> {
    let f = forward(params, inputs)?;
    Ok((0..inputs.len())
        .map(|k| PolicyOutput {
            action: std::array::from_fn(|j| f.action[[k, j]]),
            reward: std::array::from_fn(|j| f.reward[[k, j]]),
            force: f.force[k],
        })
        .collect())
}

pub fn mlp_forward(params: &GraspMLPParams, input: &EncodedInput) -> Result<PolicyOutput, PolicyError> {
    Ok(mlp_forward_batch(params, &[input])?.remove(0))
}

/// Supervision for a batch; `action` may be omitted when its weight is 0.
#[derive(Clone, Debug)]
pub struct Targets {
    pub action: Option<Array2<f64>>,
    pub reward: Array2<f64>,
    pub force: Array1<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub action: f64,
    pub reward: f64,
    pub force: f64,
}

impl LossWeights {
    pub const PHASE1: Self = Self {
        action: 1.0,
        reward: 1.0,
        force: 1.0,
    };
    pub const PHASE2: Self = Self {
        action: 0.0,
        reward: 0.8,
        force: 0.3,
    };
}

/// Batch-mean loss terms: action MSE over 16 joints, reward BCE over both
/// components, force MSE.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossParts {
    pub action: f64,
    pub reward: f64,
    pub force: f64,
    pub total: f64,
}

/// Weighted loss and its gradient with respect to every parameter.
pub fn loss_and_grad(
    params: &GraspMLPParams,
    inputs: &[&EncodedInput],
    targets: &Targets,
    w: LossWeights,
) -> Result<(LossParts, GraspMLPParams), PolicyError> {
    let f = forward(params, inputs)?;
    let b = inputs.len();
    let bf = b as f64;
    if targets.reward.dim() != (b, REWARD_DIM) || targets.force.len() != b {
        return Err(PolicyError::Shape("targets do not match the batch".into()));
    }

    let mut parts = LossParts::default();
    let mut d_action = Array2::zeros((b, ACTION_DIM));
    if w.action != 0.0 {
        let ta = targets
            .action
            .as_ref()
            .filter(|a| a.dim() == (b, ACTION_DIM))
            .ok_or_else(|| PolicyError::Shape("action targets missing or mis-shaped".into()))?;
        let diff = &f.action - ta;
        parts.action = diff.mapv(|d| d * d).sum() / (bf * ACTION_DIM as f64);
        d_action = diff * (2.0 * w.action / (bf * ACTION_DIM as f64));
    }

    let z_reward = params.reward.apply(&f.pooled);
    let mut d_reward = Array2::zeros((b, REWARD_DIM));
    let mut bce = 0.0;
    for ((z, y), (p, d)) in z_reward
        .iter()
        .zip(targets.reward.iter())
        .zip(f.reward.iter().zip(d_reward.iter_mut()))
    {
        bce += softplus(*z) - y * z;
        *d = w.reward * (p - y) / (bf * REWARD_DIM as f64);
    }
    parts.reward = bce / (bf * REWARD_DIM as f64);

    let mut d_force = Array2::zeros((b, 1));
    let mut mse = 0.0;
    for k in 0..b {
        let p = f.force[k];
        let e = p - targets.force[k];
        mse += e * e;
        d_force[[k, 0]] = w.force * 2.0 * e * p * (1.0 - p) / bf;
    }
    parts.force = mse / bf;
    parts.total = w.action * parts.action + w.reward * parts.reward + w.force * parts.force;

    let mut g = params.zeros_like();
    let heads = [
        (&params.action, &mut g.action, &d_action),
        (&params.reward, &mut g.reward, &d_reward),
        (&params.force, &mut g.force, &d_force),
    ];
    let mut d_pooled = Array2::zeros(f.pooled.dim());
    for (p, gd, d) in heads {
        gd.w = f.pooled.t().dot(d);
        gd.b = d.sum_axis(Axis(0));
        d_pooled += &d.dot(&p.w.t());
    }

    let mut delta = Array2::zeros(f.acts[2].dim());
    let mut start = 0;
    for (k, &n) in f.counts.iter().enumerate() {
        let share = &d_pooled.row(k) / n as f64;
        for r in start..start + n {
            delta.row_mut(r).assign(&share);
        }
        start += n;
    }

    for layer in (0..3).rev() {
        Zip::from(&mut delta).and(&f.acts[layer]).for_each(|d, &a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });
        let input = if layer == 0 { &f.rows } else { &f.acts[layer - 1] };
        g.trunk[layer].w = input.t().dot(&delta);
        g.trunk[layer].b = delta.sum_axis(Axis(0));
        if layer > 0 {
            delta = delta.dot(&params.trunk[layer].w.t());
        }
    }
    Ok((parts, g))
}

fn relu_pattern(params: &GraspMLPParams, inputs: &[&EncodedInput]) -> Result<Vec<bool>, PolicyError> {
    let f = forward(params, inputs)?;
    Ok(f.acts.iter().flat_map(|a| a.iter().map(|&v| v > 0.0)).collect())
}

/// Worst disagreement between backprop and central differences.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GradCheck {
    pub checked: usize,
    /// Entries whose ±h probes switch a ReLU on or off.
    pub skipped: usize,
    pub max_rel_err: f64,
    /// `(tensor, flat index)` of the worst entry; biases follow weights.
    pub worst: (usize, usize),
}

/// Compare every gradient entry (or, when `sample` is set, that many
/// randomly chosen entries per tensor plus all biases) with a central
/// difference of step `h`. The relative error is taken against
/// `max(|analytic|, |numeric|, floor)`. Entries whose probes cross a ReLU
/// kink are not differentiable at step `h` and are counted as skipped.
pub fn grad_check(
    params: &GraspMLPParams,
    inputs: &[&EncodedInput],
    targets: &Targets,
    w: LossWeights,
    h: f64,
    floor: f64,
    sample: Option<(usize, u64)>,
) -> Result<GradCheck, PolicyError> {
    let (_, g) = loss_and_grad(params, inputs, targets, w)?;
    let mut probe = params.clone();
    let mut rng = sample.map(|(_, seed)| ChaCha8Rng::seed_from_u64(seed));
    let mut report = GradCheck {
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
        worst: (0, 0),
    };
    for t in 0..6 {
        let nw = params.tensors()[t].w.len();
        let nb = params.tensors()[t].b.len();
        let picks: Vec<usize> = match (&mut rng, sample) {
            (Some(r), Some((k, _))) if k < nw => {
                let mut v: Vec<usize> = (0..k).map(|_| r.random_range(0..nw)).collect();
                v.extend(nw..nw + nb);
                v
            }
            _ => (0..nw + nb).collect(),
        };
        for idx in picks {
            let read = |p: &GraspMLPParams| {
                let d = p.tensors()[t];
                if idx < nw {
                    d.w.as_slice().unwrap()[idx]
                } else {
                    d.b[idx - nw]
                }
            };
            let set = |p: &mut GraspMLPParams, v: f64| {
                let d = &mut p.tensors_mut()[t];
                if idx < nw {
                    d.w.as_slice_mut().unwrap()[idx] = v;
                } else {
                    d.b[idx - nw] = v;
                }
            };
            let x = read(params);
            set(&mut probe, x + h);
            let up = loss_and_grad(&probe, inputs, targets, w)?.0.total;
            let up_mask = relu_pattern(&probe, inputs)?;
            set(&mut probe, x - h);
            let down = loss_and_grad(&probe, inputs, targets, w)?.0.total;
            let down_mask = relu_pattern(&probe, inputs)?;
            set(&mut probe, x);
            if up_mask != down_mask {
                report.skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let analytic = read(&g);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = (t, idx);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: GraspMLPParams,
    v: GraspMLPParams,
}

impl Adam {
    pub fn new(params: &GraspMLPParams, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// Update every tensor except those whose `frozen` flag is set, in
    /// [`TENSOR_NAMES`] order.
    pub fn step(&mut self, params: &mut GraspMLPParams, grads: &GraspMLPParams, frozen: [bool; 6]) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (lr, eps) = (self.lr, self.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
        let moments = self.m.tensors_mut().into_iter().zip(self.v.tensors_mut());
        for (((p, g), (m, v)), skip) in tensors.zip(moments).zip(frozen) {
            if skip {
                continue;
            }
            Zip::from(&mut p.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut p.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}
