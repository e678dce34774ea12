use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<S = f64> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> Vec3<S> {
    #[inline]
    pub fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zeros() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    #[inline]
    pub fn lift(v: Vec3<f64>) -> Self {
        Self::new(S::cst(v.x), S::cst(v.y), S::cst(v.z))
    }

    #[inline]
    pub fn values(&self) -> Vec3<f64> {
        Vec3::new(self.x.value(), self.y.value(), self.z.value())
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn scale(&self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn norm_squared(&self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> S {
        self.norm_squared().sqrt()
    }
}

impl Vec3<f64> {
    pub const ZERO: Vec3<f64> = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl<S: Scalar> Add for Vec3<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Scalar> AddAssign for Vec3<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl<S: Scalar> Sub for Vec3<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Scalar> SubAssign for Vec3<S> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl<S: Scalar> Neg for Vec3<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<S: Scalar> Index<usize> for Vec3<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Serialize for Vec3<f64> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[f64; 3]>::deserialize(d).map(Vec3::from_array)
    }
}

/// Quaternion stored as `w, x, y, z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat<S = f64> {
    pub w: S,
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> Quat<S> {
    #[inline]
    pub fn new(w: S, x: S, y: S, z: S) -> Self {
        Self { w, x, y, z }
    }

    #[inline]
    pub fn identity() -> Self {
        Self::new(S::one(), S::zero(), S::zero(), S::zero())
    }

    #[inline]
    pub fn lift(q: Quat<f64>) -> Self {
        Self::new(S::cst(q.w), S::cst(q.x), S::cst(q.y), S::cst(q.z))
    }

    #[inline]
    pub fn values(&self) -> Quat<f64> {
        Quat::new(self.w.value(), self.x.value(), self.y.value(), self.z.value())
    }

    /// Pure quaternion `(0, v)`.
    #[inline]
    pub fn pure(v: Vec3<S>) -> Self {
        Self::new(S::zero(), v.x, v.y, v.z)
    }

    #[inline]
    pub fn vector(&self) -> Vec3<S> {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Hamilton product `self ⊗ o`.
    #[inline]
    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    #[inline]
    pub fn conj(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> S {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn normalize(&self) -> Self {
        let inv = S::one() / self.norm();
        Self::new(self.w * inv, self.x * inv, self.y * inv, self.z * inv)
    }

    #[inline]
    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }

    #[inline]
    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }

    #[inline]
    pub fn scale(&self, s: S) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_rotation(&self) -> Mat3<S> {
        let two = S::cst(2.0);
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, xz, yz) = (x * y, x * z, y * z);
        let (wx, wy, wz) = (w * x, w * y, w * z);
        Mat3::new([
            [S::one() - two * (yy + zz), two * (xy - wz), two * (xz + wy)],
            [two * (xy + wz), S::one() - two * (xx + zz), two * (yz - wx)],
            [two * (xz - wy), two * (yz + wx), S::one() - two * (xx + yy)],
        ])
    }

    #[inline]
    pub fn rotate(&self, v: &Vec3<S>) -> Vec3<S> {
        self.to_rotation().mul_vec(v)
    }
}

impl Quat<f64> {
    pub const IDENTITY: Quat<f64> = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis.scale(s / n);
        Self::new(c, a.x, a.y, a.z)
    }

    /// Rotation by the vector `phi` (axis times angle).
    pub fn from_rotation_vector(phi: Vec3) -> Self {
        Self::from_axis_angle(phi, phi.norm())
    }

    /// Angle of the relative rotation between two unit quaternions.
    pub fn angle_to(&self, o: &Self) -> f64 {
        let d = self.dot(o).abs().min(1.0);
        2.0 * d.acos()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl Serialize for Quat<f64> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Quat<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[f64; 4]>::deserialize(d).map(Quat::from_array)
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<S = f64> {
    pub m: [[S; 3]; 3],
}

impl<S: Scalar> Mat3<S> {
    #[inline]
    pub fn new(m: [[S; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn zeros() -> Self {
        Self::new([[S::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::from_diagonal(Vec3::new(S::one(), S::one(), S::one()))
    }

    pub fn from_diagonal(d: Vec3<S>) -> Self {
        let z = S::zero();
        Self::new([[d.x, z, z], [z, d.y, z], [z, z, d.z]])
    }

    pub fn lift(a: &Mat3<f64>) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = S::cst(a.m[i][j]);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3<S>) -> Vec3<S> {
        let r = &self.m;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        out
    }

    /// `self * o * selfᵀ`, the frame change of a tensor.
    pub fn congruence(&self, o: &Mat3<S>) -> Self {
        self.mul_mat(o).mul_mat(&self.transpose())
    }
}

impl Mat3<f64> {
    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; `None` when the matrix is numerically singular
    /// relative to its own scale.
    pub fn try_inverse(&self) -> Option<Self> {
        let m = &self.m;
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let det = self.determinant();
        if scale == 0.0 || det.abs() <= 1e-12 * scale.powi(3) {
            return None;
        }
        let inv_det = 1.0 / det;
        let c = |a: usize, b: usize, c: usize, d: usize| m[a][b] * m[c][d] - m[a][d] * m[c][b];
        Some(Self::new([
            [c(1, 1, 2, 2) * inv_det, -c(0, 1, 2, 2) * inv_det, c(0, 1, 1, 2) * inv_det],
            [-c(1, 0, 2, 2) * inv_det, c(0, 0, 2, 2) * inv_det, -c(0, 0, 1, 2) * inv_det],
            [c(1, 0, 2, 1) * inv_det, -c(0, 0, 2, 1) * inv_det, c(0, 0, 1, 1) * inv_det],
        ]))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (self.m[i][j] - self.m[j][i]).abs() <= tol))
    }

    /// Eigenvalues of a symmetric matrix (closed-form trigonometric solution).
    pub fn symmetric_eigenvalues(&self) -> [f64; 3] {
        let a = &self.m;
        let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if p1 == 0.0 {
            let mut e = [a[0][0], a[1][1], a[2][2]];
            e.sort_by(f64::total_cmp);
            return e;
        }
        let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
        let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = *self;
        for i in 0..3 {
            for j in 0..3 {
                b.m[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
            }
        }
        let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut e = [e1, e2, e3];
        e.sort_by(f64::total_cmp);
        e
    }
}

impl<S: Scalar> Add for Mat3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] += o.m[i][j];
            }
        }
        out
    }
}

impl<S: Scalar> Mul<S> for Mat3<S> {
    type Output = Self;
    fn mul(self, s: S) -> Self {
        let mut out = self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }
}

impl Serialize for Mat3<f64> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        self.m.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat3<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[[f64; 3]; 3]>::deserialize(d).map(Mat3::new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamilton_product_matches_rotation_composition() {
        let a = Quat::from_axis_angle(Vec3::new(0.3, -1.0, 0.2), 0.7);
        let b = Quat::from_axis_angle(Vec3::new(1.0, 0.5, 0.0), -1.1);
        let v = Vec3::new(0.4, -0.2, 1.3);
        let lhs = a.mul(&b).rotate(&v);
        let rhs = a.rotate(&b.rotate(&v));
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn inverse_round_trip() {
        let a = Mat3::new([[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 2.0]]);
        let inv = a.try_inverse().unwrap();
        let p = a.mul_mat(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p.m[i][j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let a = Mat3::from_diagonal(Vec3::new(1.0, 1.0, 0.0));
        assert!(a.try_inverse().is_none());
    }

    #[test]
    fn symmetric_eigenvalues_of_known_matrix() {
        // eigenvalues 1, 2, 4 after rotation
        let r = Quat::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.9).to_rotation();
        let a = r.congruence(&Mat3::from_diagonal(Vec3::new(2.0, 4.0, 1.0)));
        let e = a.symmetric_eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12 && (e[2] - 4.0).abs() < 1e-12);
    }
}
