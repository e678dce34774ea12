use serde::{Deserialize, Serialize};

use super::AdjointError;

/// Contact-free vertical push: `z_k = α_k + β_k / m`.
///
/// The sums reproduce the semi-implicit update exactly: with `u_j` the
/// vertical applied force during step `j`,
/// `α_k = z0 + k·dt·v0 − g·dt²·k(k+1)/2` and
/// `β_k = dt²·Σ_{n=1..k} Σ_{j<n} u_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushdownModel {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub z0: f64,
    pub v0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushdownFit {
    pub m_hat: f64,
    pub theta: f64,
    pub residual: f64,
}

impl PushdownModel {
    /// `g` is the downward gravity magnitude (positive); `u` holds one
    /// force sample per step, giving `u.len() + 1` samples.
    pub fn new(u: &[f64], z0: f64, v0: f64, g: f64, dt: f64) -> Self {
        let n = u.len();
        let mut alpha = Vec::with_capacity(n + 1);
        let mut beta = Vec::with_capacity(n + 1);
        let mut impulse = 0.0;
        let mut double = 0.0;
        for k in 0..=n {
            let kf = k as f64;
            alpha.push(z0 + kf * dt * v0 - g * dt * dt * kf * (kf + 1.0) / 2.0);
            beta.push(dt * dt * double);
            if k < n {
                impulse += u[k];
                double += impulse;
            }
        }
        Self { alpha, beta, z0, v0 }
    }

    pub fn predict(&self, m: f64) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a + b / m).collect()
    }
}

pub fn pushdown_closed_form(u: &[f64], z0: f64, v0: f64, g: f64, m: f64, dt: f64) -> Vec<f64> {
    PushdownModel::new(u, z0, v0, g, dt).predict(m)
}

/// Least squares in `θ = 1/m`: `θ̂ = Σβ(ẑ − α) / Σβ²`.
pub fn pushdown_least_squares(observed_z: &[f64], alpha: &[f64], beta: &[f64]) -> Result<PushdownFit, AdjointError> {
    let n = observed_z.len();
    if alpha.len() != n || beta.len() != n {
        return Err(AdjointError::LengthMismatch {
            sim: alpha.len().min(beta.len()),
            real: n,
        });
    }
    let bb: f64 = beta.iter().map(|b| b * b).sum();
    if bb == 0.0 {
        return Err(AdjointError::Unobservable);
    }
    let num: f64 = observed_z.iter().zip(alpha).zip(beta).map(|((z, a), b)| b * (z - a)).sum();
    let theta = num / bb;
    if !(theta > 0.0) {
        return Err(AdjointError::NonPhysical { theta });
    }
    Ok(PushdownFit {
        m_hat: 1.0 / theta,
        theta,
        residual: pushdown_residual(observed_z, alpha, beta, theta),
    })
}

pub fn pushdown_residual(observed_z: &[f64], alpha: &[f64], beta: &[f64], theta: f64) -> f64 {
    observed_z
        .iter()
        .zip(alpha)
        .zip(beta)
        .map(|((z, a), b)| {
            let r = a + theta * b - z;
            r * r
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const G: f64 = 9.81;

    #[test]
    fn no_force_is_ballistic() {
        let dt = 1e-3;
        let z = pushdown_closed_form(&[0.0; 100], 1.0, 0.5, G, 0.3, dt);
        for (k, zk) in z.iter().enumerate() {
            let kf = k as f64;
            assert_eq!(*zk, 1.0 + kf * dt * 0.5 - G * dt * dt * kf * (kf + 1.0) / 2.0);
        }
    }

    #[test]
    fn weight_balancing_force_gives_uniform_motion() {
        let (m, dt) = (0.4, 1e-3);
        let z = pushdown_closed_form(&[m * G; 300], 2.0, -0.25, G, m, dt);
        for (k, zk) in z.iter().enumerate() {
            let exact = 2.0 - 0.25 * k as f64 * dt;
            assert!((zk - exact).abs() < 1e-12, "{k}: {zk} vs {exact}");
        }
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let u: Vec<f64> = (0..400).map(|j| if j < 200 { -2.0 } else { 0.0 }).collect();
        let model = PushdownModel::new(&u, 1.0, 0.0, G, 1e-3);
        let z = model.predict(0.5);
        let fit = pushdown_least_squares(&z, &model.alpha, &model.beta).unwrap();
        assert!((fit.m_hat - 0.5).abs() < 1e-10);
        assert!(fit.residual < 1e-20);
    }

    #[test]
    fn zero_force_is_unobservable() {
        let model = PushdownModel::new(&[0.0; 50], 1.0, 0.0, G, 1e-3);
        let z = model.predict(1.0);
        assert_eq!(
            pushdown_least_squares(&z, &model.alpha, &model.beta),
            Err(AdjointError::Unobservable)
        );
    }

    #[test]
    fn wrong_sign_data_is_non_physical() {
        let u = vec![-1.0; 100];
        let model = PushdownModel::new(&u, 1.0, 0.0, G, 1e-3);
        // observed body rises although pushed down
        let z: Vec<f64> = model.alpha.iter().zip(&model.beta).map(|(a, b)| a - b / 0.2).collect();
        assert!(matches!(
            pushdown_least_squares(&z, &model.alpha, &model.beta),
            Err(AdjointError::NonPhysical { .. })
        ));
    }

    #[test]
    fn least_squares_is_global_minimum() {
        let u = vec![-3.0; 250];
        let model = PushdownModel::new(&u, 0.5, 0.1, G, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let z: Vec<f64> = model.predict(0.2).iter().map(|z| z + noise.sample(&mut rng)).collect();
        let fit = pushdown_least_squares(&z, &model.alpha, &model.beta).unwrap();
        for d in [-1e-3, 1e-3] {
            let r = pushdown_residual(&z, &model.alpha, &model.beta, fit.theta + d);
            assert!(r >= fit.residual);
        }
    }

    #[test]
    fn noisy_recovery_within_three_percent() {
        let (m, dt) = (0.2, 2e-3);
        let u: Vec<f64> = vec![-1.0; 199];
        let model = PushdownModel::new(&u, 1.0, 0.0, G, dt);
        let clean = model.predict(m);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let mut errors: Vec<f64> = (0..100)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let z: Vec<f64> = clean.iter().map(|z| z + noise.sample(&mut rng)).collect();
                let fit = pushdown_least_squares(&z, &model.alpha, &model.beta).unwrap();
                (fit.m_hat - m).abs() / m
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        let p95 = errors[94];
        assert!(p95 <= 0.03, "95th percentile error {p95}");
    }
}
