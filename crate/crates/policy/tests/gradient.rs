mod common;

use massid_policy::mlp::{grad_check, LossWeights, Targets};
use massid_policy::{generate_demos, DemoConfig, EncodedInput, GraspEnvConfig, Policy, PolicySpec};
use ndarray::{Array1, Array2};

const TOL: f64 = 1e-4;
const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;

fn fixture(spec: &PolicySpec) -> (Vec<EncodedInput>, Targets) {
    let cfg = DemoConfig {
        count: 5,
        seed: 11,
        ..DemoConfig::default()
    };
    let demos = generate_demos(&common::cube(), &cfg, &GraspEnvConfig::default()).unwrap();
    let inputs = demos.iter().map(|d| spec.encode(&d.vertices, d.mass_kg)).collect();
    // Off-label targets keep every head's gradient away from zero.
    let targets = Targets {
        action: Some(Array2::from_shape_fn((5, 16), |(k, j)| demos[k].action[j])),
        reward: Array2::from_shape_fn((5, 2), |(k, j)| if (k + j) % 2 == 0 { 1.0 } else { 0.0 }),
        force: Array1::from_iter((0..5).map(|k| 0.2 * k as f64)),
    };
    (inputs, targets)
}

#[test]
fn every_parameter_of_a_narrow_network() {
    let spec = PolicySpec {
        hidden: 16,
        ..PolicySpec::default()
    };
    let policy = Policy::init(spec.clone(), 3);
    let (inputs, targets) = fixture(&spec);
    let refs: Vec<&EncodedInput> = inputs.iter().collect();
    for w in [LossWeights::PHASE1, LossWeights::PHASE2] {
        let r = grad_check(&policy.params, &refs, &targets, w, STEP, FLOOR, None).unwrap();
        assert_eq!(r.checked + r.skipped, policy.params.param_count());
        assert!(r.skipped * 100 <= r.checked, "{r:?}");
        assert!(r.max_rel_err <= TOL, "{w:?}: {r:?}");
    }
}

#[test]
fn full_width_biases_and_sampled_weights() {
    let spec = PolicySpec::default();
    let policy = Policy::init(spec.clone(), 5);
    let (inputs, targets) = fixture(&spec);
    let refs: Vec<&EncodedInput> = inputs.iter().collect();
    let r = grad_check(&policy.params, &refs, &targets, LossWeights::PHASE1, STEP, FLOOR, Some((64, 9))).unwrap();
    assert!(r.checked + r.skipped > 6 * 64);
    assert!(r.skipped * 100 <= r.checked, "{r:?}");
    assert!(r.max_rel_err <= TOL, "{r:?}");
}
