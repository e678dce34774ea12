mod common;

use common::{paper_noise, scenario};
use massid_core::dynamics::Integrator;
use massid_core::identify::*;

fn clean(s: &Scenario) -> massid_core::dynamics::Trajectory {
    synthesize_real_trajectory(s, s.true_mass().unwrap(), &NoiseModel::default()).unwrap()
}

#[test]
fn every_fixture_loads_and_simulates() {
    let dir = common::fixtures_dir().join("scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = Scenario::load(&path).unwrap();
        let r = s.simulate(s.true_mass().unwrap()).unwrap();
        assert_eq!(r.trajectory.samples.len(), s.cfg.steps + 1, "{}", path.display());
        n += 1;
    }
    assert!(n >= 10);
}

#[test]
fn unknown_scenario_fields_are_rejected() {
    let dir = tempdir();
    let mesh = common::fixtures_dir().join("meshes/cube.obj");
    let path = dir.join("bad.json");
    let text = format!(r#"{{"mesh": {:?}, "k_e": 1000.0, "k_d": 0.3, "mass_kg": 1.0}}"#, mesh);
    std::fs::write(&path, text).unwrap();
    assert!(matches!(Scenario::load(&path), Err(IdentifyError::Scenario { .. })));
    assert!(matches!(Scenario::load(&dir.join("missing.json")), Err(IdentifyError::Io { .. })));
}

fn tempdir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("massid-identify-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn zero_force_reports_unobservable() {
    let s = scenario("unforced");
    let real = clean(&s);
    let r = identify_mass(&s, &real, &IdentifyConfig::for_scenario(&s)).unwrap();
    assert_eq!(r.status, IdentifyStatus::Unobservable);
    assert_eq!(r.m_hat, None);
    assert!(r.diagnostic.unwrap().contains("unobservable"));
}

#[test]
fn starting_at_the_truth_stays_there() {
    let s = scenario("planar_100");
    let truth = s.true_mass().unwrap();
    let real = synthesize_real_trajectory(&s, truth, &paper_noise(3)).unwrap();
    let mut cfg = IdentifyConfig::for_scenario(&s);
    cfg.m_init = truth;
    let r = identify_mass(&s, &real, &cfg).unwrap();
    assert!(r.converged, "{:?}", r.status);
    assert!(r.relative_error(truth).unwrap() < 0.02);
    let floor = r.loss_curve[0];
    let best = r.loss_curve.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(best <= floor && best > floor * (1.0 - 1e-3), "floor {floor} best {best}");
}

#[test]
fn noiseless_recovery_from_a_range_of_initial_masses() {
    let s = scenario("planar_100");
    let truth = s.true_mass().unwrap();
    let real = clean(&s);
    for m_init in [truth / 50.0, truth / 5.0, truth * 2.0, truth * 10.0] {
        let mut cfg = IdentifyConfig::for_scenario(&s);
        cfg.m_init = m_init;
        cfg.max_epochs = 400;
        let r = identify_mass(&s, &real, &cfg).unwrap();
        let err = r.relative_error(truth).unwrap();
        assert!(err < 0.01, "init {m_init}: m_hat {:?} after {} epochs", r.m_hat, r.epochs_run);
    }
}

#[test]
fn integrators_agree_without_contact() {
    let s = scenario("free_push");
    let truth = s.true_mass().unwrap();
    let real = synthesize_real_trajectory(&s, truth, &paper_noise(1)).unwrap();
    let a = ablate_integrators(&s, &real, &IdentifyConfig::for_scenario(&s)).unwrap();
    let semi = a.semi.m_hat.unwrap();
    let explicit = a.explicit.m_hat.unwrap();
    assert!((semi - explicit).abs() / semi < 0.02, "semi {semi} explicit {explicit}");
    assert_eq!(a.explicit.divergences, 0);
}

#[test]
fn gradient_descent_matches_least_squares() {
    for name in ["pushdown_light", "pushdown_mid"] {
        let s = scenario(name);
        let truth = s.true_mass().unwrap();
        for seed in 0..3 {
            let real = synthesize_real_trajectory(&s, truth, &paper_noise(seed)).unwrap();
            let ls = pushdown_fit(&s, &real).unwrap();
            let gd = identify_mass(&s, &real, &IdentifyConfig::for_scenario(&s)).unwrap();
            let m = gd.m_hat.unwrap();
            assert!((m - ls.m_hat).abs() / ls.m_hat < 0.005, "{name} seed {seed}: gd {m} ls {}", ls.m_hat);
        }
    }
}

#[test]
fn least_squares_is_exact_on_clean_pushdown() {
    let s = scenario("pushdown_light");
    let fit = pushdown_fit(&s, &clean(&s)).unwrap();
    assert!((fit.m_hat - 0.05).abs() < 1e-9, "{}", fit.m_hat);
    assert!(fit.residual < 1e-20);
}

#[test]
fn fixed_step_descent_is_monotone_on_the_convex_fixture() {
    let s = scenario("pushdown_mid");
    let truth = s.true_mass().unwrap();
    let real = synthesize_real_trajectory(&s, truth, &paper_noise(0)).unwrap();
    let obs = prepare_observations(&s, &real).unwrap();
    let problem = loss_problem(&s, &obs, 1.0);
    let m_init = truth * 0.5;
    let h = 1e-4 * truth;
    let curvature = (0..=40)
        .map(|i| m_init + (2.0 * truth - m_init) * i as f64 / 40.0)
        .map(|m| {
            let l = |x: f64| problem.loss(x).unwrap();
            ((l(m + h) - 2.0 * l(m) + l(m - h)) / (h * h)).abs()
        })
        .fold(0.0, f64::max);

    let mut cfg = IdentifyConfig::for_scenario(&s);
    cfg.schedule = ScheduleKind::Fixed;
    cfg.m_init = m_init;
    cfg.lr = 1.0 / curvature;
    cfg.max_epochs = 60;
    let r = identify_mass(&s, &real, &cfg).unwrap();
    for w in r.loss_curve.windows(2) {
        assert!(w[1] <= w[0], "loss rose: {} -> {}", w[0], w[1]);
    }
    assert!(r.loss_curve.last().unwrap() < &r.loss_curve[0]);
}

#[test]
fn reports_are_reproducible() {
    let s = scenario("density_125");
    let real = synthesize_real_trajectory(&s, s.true_mass().unwrap(), &s.file.noise).unwrap();
    let cfg = IdentifyConfig::for_scenario(&s);
    let a = identify_mass(&s, &real, &cfg).unwrap();
    let b = identify_mass(&s, &real, &cfg).unwrap();
    assert_eq!(a.m_curve, b.m_curve);
    assert_eq!(a.loss_curve, b.loss_curve);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn explicit_arm_diverges_on_the_stiff_fixture() {
    let s = scenario("stiff");
    let truth = s.true_mass().unwrap();
    let real = synthesize_real_trajectory(&s, truth, &s.file.noise).unwrap();
    let a = ablate_integrators(&s, &real, &IdentifyConfig::for_scenario(&s)).unwrap();
    assert!(a.explicit.divergences >= 1);
    assert!(a.abs_err(Integrator::SemiImplicit).unwrap() < a.abs_err(Integrator::Explicit).unwrap());
    assert!(a.semi.relative_error(truth).unwrap() < 0.05);
}

#[test]
fn substepped_reference_keeps_the_scenario_clock() {
    let s = scenario("stiff");
    let r = s.reference_trajectory(0.2).unwrap();
    assert_eq!(r.samples.len(), s.cfg.steps + 1);
    for (k, p) in r.samples.iter().enumerate() {
        assert_eq!(p.t, k as f64 * s.cfg.dt);
    }
    let coarse = scenario("planar_100");
    assert_eq!(coarse.reference_trajectory(0.1).unwrap(), coarse.simulate(0.1).unwrap().trajectory);
}
