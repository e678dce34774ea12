mod common;

use common::{paper_noise, scenario};
use massid_core::adjoint::*;
use massid_core::dynamics::{Integrator, PoseSample, Trajectory};
use massid_core::geom::Quat;
use massid_core::identify::{loss_problem, prepare_observations, synthesize_real_trajectory, NoiseModel, Scenario};

fn record(s: &Scenario, m: f64) -> (Trajectory, Tape) {
    record_rollout_at(&s.init, &s.body, m, &s.sched, &s.cfg).unwrap()
}

fn pushdown_model(s: &Scenario) -> PushdownModel {
    let u: Vec<f64> = (0..s.cfg.steps)
        .map(|k| s.sched.total_force_at(k as f64 * s.cfg.dt).z)
        .collect();
    PushdownModel::new(&u, s.init.p.z, s.init.v.z, -s.cfg.gravity.z, s.cfg.dt)
}

#[test]
fn replay_reproduces_the_recorded_rollout() {
    for name in ["free_push", "planar_100"] {
        let s = scenario(name);
        let (traj, tape) = record(&s, 0.07);
        assert_eq!(tape.replay(), traj);
        assert_eq!(traj, s.simulate(0.07).unwrap().trajectory);
    }
}

#[test]
fn branch_free_tape_replays_any_mass_exactly() {
    let s = scenario("free_push");
    let (_, tape) = record(&s, 0.05);
    assert!(tape.contact_branches().is_empty());
    for m in [0.02, 0.1, 0.4] {
        assert_eq!(tape.replay_at(m), s.simulate(m).unwrap().trajectory);
    }
}

#[test]
fn contact_rollouts_record_branches() {
    let s = scenario("planar_100");
    let (_, tape) = record(&s, 0.1);
    assert!(!tape.contact_branches().is_empty());
    assert!(tape.contact_branches().iter().all(|b| b.step <= s.cfg.steps));
}

#[test]
fn tape_grows_linearly_with_steps() {
    for name in ["free_push", "planar_100"] {
        let mut s = scenario(name);
        let per_step: Vec<f64> = [250, 500, 1000]
            .iter()
            .map(|&n| {
                s.cfg.steps = n;
                let (_, tape) = record(&s, 0.1);
                tape.len() as f64 / n as f64
            })
            .collect();
        let lo = per_step.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = per_step.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo <= 1.1, "{name}: nodes per step {per_step:?}");
    }
}

#[test]
fn adjoint_matches_the_closed_form_derivative() {
    for name in ["pushdown_light", "pushdown_mid"] {
        let s = scenario(name);
        let truth = s.true_mass().unwrap();
        let real = synthesize_real_trajectory(&s, truth, &paper_noise(4)).unwrap();
        let model = pushdown_model(&s);
        for m in [0.5 * truth, 1.3 * truth] {
            let (_, tape) = record(&s, m);
            let g = grad_mass(&tape, &real).unwrap().grad;
            let exact: f64 = model
                .alpha
                .iter()
                .zip(&model.beta)
                .zip(&real.samples)
                .map(|((a, b), r)| 2.0 * (a + b / m - r.p.z) * (-b / (m * m)))
                .sum();
            assert!(((g - exact) / exact).abs() <= 1e-9, "{name} m {m}: {g} vs {exact}");
        }
    }
}

#[test]
fn closed_form_matches_the_rollout() {
    let s = scenario("pushdown_mid");
    let m = 0.2;
    let z = pushdown_model(&s).predict(m);
    let traj = s.simulate(m).unwrap().trajectory;
    for (zk, sample) in z.iter().zip(&traj.samples) {
        assert!((zk - sample.p.z).abs() <= 1e-12 * zk.abs().max(1.0), "{zk} vs {}", sample.p.z);
    }
}

fn check_fd(name: &str, tol: f64) {
    let s = scenario(name);
    let truth = s.true_mass().unwrap();
    let real = synthesize_real_trajectory(&s, truth, &paper_noise(0)).unwrap();
    let obs = prepare_observations(&s, &real).unwrap();
    let problem = loss_problem(&s, &obs, 1.0);
    for m in [0.6 * truth, 1.4 * truth] {
        let g = problem.grad(m).unwrap();
        let fd = problem.fd_grad(m, 1e-5 * m).unwrap();
        let r = g.with_fd(fd);
        assert!(r.rel_err.unwrap() <= tol, "{name} m {m}: adjoint {} fd {fd}", r.grad);
    }
}

#[test]
fn contact_free_gradients_match_finite_differences() {
    check_fd("pushdown_light", 1e-6);
    check_fd("free_push", 1e-6);
}

#[test]
fn contact_gradients_match_finite_differences() {
    check_fd("planar_100", 1e-3);
    check_fd("planar_800", 1e-3);
    check_fd("density_125", 1e-3);
}

#[test]
fn identical_trajectories_give_zero_loss_and_gradient() {
    let s = scenario("planar_200");
    let (traj, tape) = record(&s, 0.2);
    let r = grad_mass(&tape, &traj).unwrap();
    assert_eq!(r.loss, 0.0);
    assert_eq!(r.grad, 0.0);
}

#[test]
fn gradient_points_toward_the_truth() {
    let s = scenario("planar_200");
    let real = synthesize_real_trajectory(&s, 0.2, &NoiseModel::default()).unwrap();
    let (_, light) = record(&s, 0.1);
    let (_, heavy) = record(&s, 0.4);
    assert!(grad_mass(&light, &real).unwrap().grad < 0.0);
    assert!(grad_mass(&heavy, &real).unwrap().grad > 0.0);
}

#[test]
fn finite_difference_of_a_quadratic() {
    let g = finite_diff_grad(|m: f64| Ok::<_, String>((m - 2.0) * (m - 2.0)), 3.0, 1e-3).unwrap();
    assert!((g - 2.0).abs() < 1e-9);
    assert!(matches!(
        finite_diff_grad(|m: f64| Ok::<_, String>(m), 1e-4, 1e-3),
        Err(AdjointError::BadStep { .. })
    ));
}

#[test]
fn explicit_tapes_are_refused() {
    let s = scenario("planar_100").with_integrator(Integrator::Explicit);
    assert!(matches!(
        record_rollout_at(&s.init, &s.body, 0.1, &s.sched, &s.cfg),
        Err(AdjointError::ExplicitIntegrator)
    ));
}

#[test]
fn window_and_alignment_errors() {
    let s = scenario("planar_100");
    let (traj, tape) = record(&s, 0.1);
    assert!(matches!(
        grad_mass_range(&tape, &traj.samples[..10], 0..tape.samples() + 1),
        Err(AdjointError::BadWindow { .. })
    ));
    let short = Trajectory {
        samples: traj.samples[..10].to_vec(),
        ..traj.clone()
    };
    assert!(matches!(grad_mass(&tape, &short), Err(AdjointError::LengthMismatch { .. })));
    let mut shifted = traj.clone();
    shifted.samples[3].t += 1e-3;
    assert!(matches!(grad_mass(&tape, &shifted), Err(AdjointError::TimeMismatch { index: 3, .. })));
}

#[test]
fn quaternion_sign_does_not_change_the_loss() {
    let s = scenario("planar_100");
    let (traj, tape) = record(&s, 0.1);
    let real = synthesize_real_trajectory(&s, 0.12, &NoiseModel::default()).unwrap();
    let flipped = Trajectory {
        samples: real
            .samples
            .iter()
            .map(|p| PoseSample { q: p.q.scale(-1.0), ..*p })
            .collect(),
        ..real.clone()
    };
    let a = grad_mass(&tape, &real).unwrap();
    let b = grad_mass(&tape, &flipped).unwrap();
    assert_eq!(a, b);
    let q = Quat::from_axis_angle(massid_core::geom::Vec3::new(0.0, 0.0, 1.0), 0.3);
    assert_eq!(align_sign(&q, &q.scale(-1.0)), q);
    assert!(pose_loss(&traj.samples, &traj.samples, 1.0) == 0.0);
}
