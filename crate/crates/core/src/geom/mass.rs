use super::{GeomError, Mat3, Vec3};

/// Point masses, one per mesh vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    positions: Vec<Vec3>,
    masses: Vec<f64>,
}

impl ParticleSet {
    pub fn new(positions: Vec<Vec3>, masses: Vec<f64>) -> Result<Self, GeomError> {
        if positions.len() != masses.len() {
            return Err(GeomError::LengthMismatch {
                positions: positions.len(),
                masses: masses.len(),
            });
        }
        if let Some((i, &m)) = masses.iter().enumerate().find(|(_, m)| !(**m > 0.0) || !m.is_finite()) {
            return Err(GeomError::NonPositiveMass { index: i, mass: m });
        }
        Ok(Self { positions, masses })
    }

    /// Spread `total` evenly over `positions`.
    pub fn uniform(positions: Vec<Vec3>, total: f64) -> Result<Self, GeomError> {
        if positions.is_empty() {
            return Err(GeomError::Empty);
        }
        let each = total / positions.len() as f64;
        let masses = vec![each; positions.len()];
        Self::new(positions, masses)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn translated(&self, t: Vec3) -> Self {
        Self {
            positions: self.positions.iter().map(|p| *p + t).collect(),
            masses: self.masses.clone(),
        }
    }
}

/// Mass-weighted mean position.
pub fn center_of_mass(ps: &ParticleSet) -> Result<Vec3, GeomError> {
    if ps.is_empty() {
        return Err(GeomError::Empty);
    }
    let total = ps.total_mass();
    if !(total > 0.0) {
        return Err(GeomError::ZeroTotalMass);
    }
    let mut acc = Vec3::ZERO;
    for (p, &m) in ps.positions.iter().zip(&ps.masses) {
        acc += p.scale(m);
    }
    Ok(acc.scale(1.0 / total))
}

/// Inertia tensor about `com`: `Σ mᵢ (‖rᵢ‖² E − rᵢ rᵢᵀ)` with `rᵢ = xᵢ − com`.
pub fn inertia_tensor(ps: &ParticleSet, com: Vec3) -> Mat3 {
    let mut out = Mat3::zeros();
    for (p, &m) in ps.positions.iter().zip(&ps.masses) {
        let r = *p - com;
        let rr = r.norm_squared();
        let ra = r.to_array();
        for i in 0..3 {
            for j in 0..3 {
                let diag = if i == j { rr } else { 0.0 };
                out.m[i][j] += m * (diag - ra[i] * ra[j]);
            }
        }
    }
    // exact symmetry regardless of summation order
    for i in 0..3 {
        for j in (i + 1)..3 {
            let avg = 0.5 * (out.m[i][j] + out.m[j][i]);
            out.m[i][j] = avg;
            out.m[j][i] = avg;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube_corners(half: f64) -> Vec<Vec3> {
        let mut v = Vec::new();
        for &x in &[-half, half] {
            for &y in &[-half, half] {
                for &z in &[-half, half] {
                    v.push(Vec3::new(x, y, z));
                }
            }
        }
        v
    }

    #[test]
    fn com_of_two_unit_masses() {
        let ps = ParticleSet::new(vec![Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0)], vec![1.0, 1.0]).unwrap();
        assert_eq!(center_of_mass(&ps).unwrap(), Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn com_of_centered_cube_is_origin() {
        let ps = ParticleSet::uniform(cube_corners(1.0), 8.0).unwrap();
        assert_eq!(center_of_mass(&ps).unwrap(), Vec3::ZERO);
    }

    #[test]
    fn com_weighted() {
        // (1·0 + 3·4) / 4 = 3
        let ps = ParticleSet::new(vec![Vec3::ZERO, Vec3::new(4.0, 0.0, 0.0)], vec![1.0, 3.0]).unwrap();
        assert_eq!(center_of_mass(&ps).unwrap(), Vec3::new(3.0, 0.0, 0.0));
    }

    #[test]
    fn com_errors() {
        let empty = ParticleSet::new(vec![], vec![]).unwrap();
        assert_eq!(center_of_mass(&empty), Err(GeomError::Empty));
        assert!(matches!(
            ParticleSet::new(vec![Vec3::ZERO], vec![0.0]),
            Err(GeomError::NonPositiveMass { .. })
        ));
        assert!(ParticleSet::new(vec![Vec3::ZERO], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn inertia_single_particle_at_com_is_zero() {
        let ps = ParticleSet::new(vec![Vec3::new(0.5, 0.25, -2.0)], vec![4.0]).unwrap();
        let com = center_of_mass(&ps).unwrap();
        assert_eq!(inertia_tensor(&ps, com), Mat3::zeros());
    }

    #[test]
    fn inertia_unit_mass_on_x_axis() {
        // r = (1,0,0): ‖r‖²E − rrᵀ = diag(1,1,1) − diag(1,0,0)
        let ps = ParticleSet::new(vec![Vec3::new(1.0, 0.0, 0.0)], vec![1.0]).unwrap();
        let i = inertia_tensor(&ps, Vec3::ZERO);
        assert_eq!(i, Mat3::from_diagonal(Vec3::new(0.0, 1.0, 1.0)));
    }

    #[test]
    fn inertia_of_side_two_cube_corners() {
        // each corner: ‖r‖² = 3, diagonal term 3 − 1 = 2; off-diagonals cancel pairwise
        let ps = ParticleSet::new(cube_corners(1.0), vec![1.0; 8]).unwrap();
        let i = inertia_tensor(&ps, Vec3::ZERO);
        assert_eq!(i, Mat3::from_diagonal(Vec3::new(16.0, 16.0, 16.0)));
    }

    fn arb_particles() -> impl Strategy<Value = ParticleSet> {
        prop::collection::vec(((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 0.01..10.0f64), 1..20).prop_map(|v| {
            let (p, m): (Vec<_>, Vec<_>) = v.into_iter().map(|((x, y, z), m)| (Vec3::new(x, y, z), m)).unzip();
            ParticleSet::new(p, m).unwrap()
        })
    }

    proptest! {
        #[test]
        fn com_is_translation_equivariant(ps in arb_particles(), t in (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)) {
            let t = Vec3::new(t.0, t.1, t.2);
            let a = center_of_mass(&ps.translated(t)).unwrap();
            let b = center_of_mass(&ps).unwrap() + t;
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + t.norm() + b.norm()));
        }

        #[test]
        fn inertia_is_symmetric_psd(ps in arb_particles()) {
            let com = center_of_mass(&ps).unwrap();
            let i = inertia_tensor(&ps, com);
            prop_assert!(i.is_symmetric(1e-12));
            let scale = i.m.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
            for e in i.symmetric_eigenvalues() {
                prop_assert!(e >= -1e-10 * scale, "eigenvalue {e}");
            }
        }
    }
}
