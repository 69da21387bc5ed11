//! Rigid transforms (SE(3)) and twists (se(3)).
//!
//! Rotations are stored as orthonormal matrices. Twists are ordered
//! `(omega, v)`: rotational part first, translational part second.

use core::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{invalid, Result};
use crate::math;

/// Below this rotation angle `exp` and `log` switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Within this distance of π, `log` recovers the axis from the symmetric part of R.
pub const NEAR_PI: f64 = 1e-3;
/// Orthonormality drift that triggers re-projection after composition.
pub const DRIFT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Isometry {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Tangent vector of SE(3), rotational part first.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

impl Twist {
    pub fn new(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { omega, v }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(Vector3::new(a[0], a[1], a[2]), Vector3::new(a[3], a[4], a[5]))
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.omega.x, self.omega.y, self.omega.z, self.v.x, self.v.y, self.v.z]
    }

    pub fn dot(&self, other: &Twist) -> f64 {
        self.omega.dot(&other.omega) + self.v.dot(&other.v)
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn scale(&self, s: f64) -> Twist {
        Twist::new(self.omega * s, self.v * s)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// 4×4 matrix embedding with `omega` as the skew block.
    pub fn hat(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&self.omega));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v);
        m
    }

    /// Inverse of [`Twist::hat`]; reads only the skew and translation blocks.
    pub fn vee(m: &Matrix4<f64>) -> Twist {
        Twist::new(
            Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]),
            Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]),
        )
    }
}

impl core::ops::Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.omega + rhs.omega, self.v + rhs.v)
    }
}

impl core::ops::Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist::new(self.omega - rhs.omega, self.v - rhs.v)
    }
}

/// Coefficients `(A, B, C)` of `R = I + A ŵ + B ŵ²` and `V = I + B ŵ + C ŵ²`.
fn exp_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        let s = math::sin(theta);
        let half = math::sin(0.5 * theta);
        (s / theta, 2.0 * half * half / t2, (theta - s) / (t2 * theta))
    }
}

impl Isometry {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let omega = axis * (angle / n);
        exp_rotation(&omega)
    }

    /// Builds a transform from the upper 3×4 block of a homogeneous matrix,
    /// projecting the rotation block onto SO(3).
    pub fn from_matrix4(m: &Matrix4<f64>) -> Self {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into_owned();
        Self::new(project_to_rotation(&r), t)
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major upper 3×4 block.
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    /// Inverse of [`Isometry::to_row_major_3x4`]. The rotation block is used
    /// as given when it is orthonormal within [`DRIFT_TOLERANCE`] and
    /// projected onto SO(3) otherwise.
    pub fn from_row_major_3x4(a: &[f64; 12]) -> Self {
        let r = Matrix3::new(a[0], a[1], a[2], a[4], a[5], a[6], a[8], a[9], a[10]);
        let t = Vector3::new(a[3], a[7], a[11]);
        let mut iso = Self::new(r, t);
        iso.guard_drift();
        iso
    }

    /// Unit quaternion `(x, y, z, w)` of the rotation, with `w >= 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let m = &self.rotation;
        let trace = m.trace();
        let (x, y, z, w);
        if trace > 0.0 {
            let s = math::sqrt(trace + 1.0) * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = math::sqrt(1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]) * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = math::sqrt(1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]) * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = math::sqrt(1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]) * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        let n = math::sqrt(x * x + y * y + z * z + w * w);
        let sign = if w < 0.0 { -1.0 } else { 1.0 };
        [sign * x / n, sign * y / n, sign * z / n, sign * w / n]
    }

    /// Rotation from a quaternion `(x, y, z, w)`; the quaternion is normalized first.
    pub fn from_quaternion(q: [f64; 4], translation: Vector3<f64>) -> Result<Self> {
        let [x, y, z, w] = q;
        let n = math::sqrt(x * x + y * y + z * z + w * w);
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("quaternion must be finite and non-zero"));
        }
        let (x, y, z, w) = (x / n, y / n, z / n, w / n);
        let r = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        );
        Ok(Self::new(r, translation))
    }

    /// Exponential map of a twist (closed-form Rodrigues with a Taylor branch).
    pub fn exp(xi: &Twist) -> Result<Self> {
        if !xi.is_finite() {
            return Err(invalid("twist has non-finite components"));
        }
        Ok(Self::exp_unchecked(xi))
    }

    pub(crate) fn exp_unchecked(xi: &Twist) -> Self {
        let theta = xi.omega.norm();
        let (a, b, c) = exp_coefficients(theta);
        let w = skew(&xi.omega);
        let w2 = w * w;
        let rotation = Matrix3::identity() + w * a + w2 * b;
        let v = Matrix3::identity() + w * b + w2 * c;
        Self::new(rotation, v * xi.v)
    }

    /// Logarithm map; the rotation angle of the result lies in `[0, π]`.
    pub fn log(&self) -> Twist {
        let r = &self.rotation;
        let skew_part = Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        ) * 0.5;
        let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        let sin_theta = skew_part.norm();
        let theta = math::atan2(sin_theta, cos_theta);

        let omega = if theta < SMALL_ANGLE {
            skew_part
        } else if core::f64::consts::PI - theta < NEAR_PI {
            // Symmetric part: (R + Rᵀ)/2 = cosθ I + (1 - cosθ) n nᵀ.
            let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
            let d = sym.diagonal();
            let k = if d.x >= d.y && d.x >= d.z {
                0
            } else if d.y >= d.z {
                1
            } else {
                2
            };
            let col: Vector3<f64> = sym.column(k).into_owned();
            let mut axis = col / col.norm();
            if axis.dot(&skew_part) < 0.0 {
                axis = -axis;
            }
            axis * theta
        } else {
            skew_part * (theta / sin_theta)
        };

        let w = skew(&omega);
        let w2 = w * w;
        let coeff = if theta < SMALL_ANGLE {
            1.0 / 12.0 + theta * theta / 720.0
        } else {
            let half = 0.5 * theta;
            (1.0 - half * math::cos(half) / math::sin(half)) / (theta * theta)
        };
        let v_inv = Matrix3::identity() - w * 0.5 + w2 * coeff;
        Twist::new(omega, v_inv * self.translation)
    }

    pub fn compose(&self, other: &Isometry) -> Isometry {
        let mut out = Isometry::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        );
        out.guard_drift();
        out
    }

    pub fn inverse(&self) -> Isometry {
        let rt = self.rotation.transpose();
        Isometry::new(rt, -(rt * self.translation))
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Right perturbation `self · exp(xi)`.
    pub fn retract(&self, xi: &Twist) -> Isometry {
        self.compose(&Isometry::exp_unchecked(xi))
    }

    /// Rotation angle from the trace, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        math::acos(((self.rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0))
    }

    pub fn translation_norm(&self) -> f64 {
        self.translation.norm()
    }

    /// Frobenius norm of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.iter().chain(self.translation.iter()).all(|x| x.is_finite())
    }

    fn guard_drift(&mut self) {
        if self.orthonormality_error() > DRIFT_TOLERANCE {
            self.rotation = project_to_rotation(&self.rotation);
        }
    }
}

impl Mul for Isometry {
    type Output = Isometry;
    fn mul(self, rhs: Isometry) -> Isometry {
        self.compose(&rhs)
    }
}

impl Default for Isometry {
    fn default() -> Self {
        Self::identity()
    }
}

fn exp_rotation(omega: &Vector3<f64>) -> Isometry {
    Isometry::exp_unchecked(&Twist::new(*omega, Vector3::zeros()))
}

/// Nearest rotation in Frobenius norm (polar factor with det = +1).
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix3::identity();
    };
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u_fixed = u;
        let mut col = u_fixed.column_mut(2);
        col.neg_mut();
        r = u_fixed * v_t;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) -> bool {
        (a - b).iter().all(|x| x.abs() <= tol)
    }

    /// Scaling-and-squaring Taylor series of the 4×4 matrix exponential.
    fn expm4(m: &Matrix4<f64>) -> Matrix4<f64> {
        let mut squarings = 0;
        let mut scaled = *m;
        while scaled.norm() > 0.05 {
            scaled /= 2.0;
            squarings += 1;
        }
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for k in 1..30 {
            term = term * scaled / k as f64;
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn exp_zero_is_identity() {
        let t = Isometry::exp(&Twist::zero()).unwrap();
        assert_eq!(t, Isometry::identity());
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let t = Isometry::exp(&Twist::from_array([0.0, 0.0, FRAC_PI_2, 0.0, 0.0, 0.0])).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(close(&t.rotation, &expected, 1e-15));
        assert_eq!(t.translation, Vector3::zeros());
    }

    #[test]
    fn exp_screw_matches_matrix_exponential() {
        let xi = Twist::from_array([0.0, 0.0, FRAC_PI_2, 1.0, 0.0, 0.0]);
        let t = Isometry::exp(&xi).unwrap();
        let oracle = expm4(&xi.hat());
        assert!((t.to_matrix4() - oracle).iter().all(|x| x.abs() < 1e-12));
        // Closed form for this screw: t = (sinθ/θ, (1 − cosθ)/θ, 0) with θ = π/2.
        assert!((t.translation.x - 2.0 / PI).abs() < 1e-14);
        assert!((t.translation.y - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn exp_rejects_non_finite() {
        let xi = Twist::from_array([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(Isometry::exp(&xi), Err(crate::Error::InvalidArgument(_))));
    }

    #[test]
    fn log_identity_is_zero() {
        assert_eq!(Isometry::identity().log(), Twist::zero());
    }

    #[test]
    fn log_half_turn_about_x() {
        let t = Isometry::from_axis_angle(&Vector3::x(), PI);
        let xi = t.log();
        assert!((xi.omega.x.abs() - PI).abs() < 1e-12);
        assert!(xi.omega.y.abs() < 1e-12 && xi.omega.z.abs() < 1e-12);
        let back = Isometry::exp(&xi).unwrap();
        assert!(close(&back.rotation, &t.rotation, 1e-12));
    }

    #[test]
    fn log_near_half_turn_round_trips() {
        for &angle in &[PI - 1e-7, PI - 5e-7, PI - 2e-6, PI - 5e-4, PI - 2e-3, PI] {
            let axis = Vector3::new(0.3, -0.5, 0.8);
            let mut t = Isometry::from_axis_angle(&axis, angle);
            t.translation = Vector3::new(0.4, -1.2, 2.0);
            let back = Isometry::exp(&t.log()).unwrap();
            assert!((back.to_matrix4() - t.to_matrix4()).iter().all(|x| x.abs() < 1e-9));
            assert!(t.log().omega.norm() <= PI + 1e-12);
        }
    }

    #[test]
    fn taylor_branch_is_continuous() {
        let dir = Vector3::new(0.6, -0.8, 0.0);
        let v = Vector3::new(1.0, 2.0, -3.0);
        let below = Isometry::exp(&Twist::new(dir * (SMALL_ANGLE * (1.0 - 1e-6)), v)).unwrap();
        let above = Isometry::exp(&Twist::new(dir * (SMALL_ANGLE * (1.0 + 1e-6)), v)).unwrap();
        assert!((below.to_matrix4() - above.to_matrix4()).iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn group_axioms() {
        let a = Isometry::exp(&Twist::from_array([0.3, -0.2, 1.1, 0.5, 2.0, -1.0])).unwrap();
        let p = Vector3::new(1.5, -0.25, 3.0);
        assert_eq!(Isometry::identity().apply(&p), p);
        assert!((a.inverse().apply(&a.apply(&p)) - p).norm() < 1e-12);
        let e = a.compose(&a.inverse());
        assert!((e.to_matrix4() - Matrix4::identity()).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn rotation_angle_and_translation_norm() {
        assert_eq!(Isometry::identity().rotation_angle(), 0.0);
        assert_eq!(Isometry::identity().translation_norm(), 0.0);
        let t = Isometry::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        assert!((t.rotation_angle() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(t.translation_norm(), 0.0);
    }

    #[test]
    fn drift_is_projected_away() {
        let mut r = Isometry::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.7).rotation;
        r[(0, 1)] += 1e-5;
        let a = Isometry::new(r, Vector3::zeros());
        let c = a.compose(&Isometry::identity());
        assert!(c.orthonormality_error() < 1e-12);
        assert!((c.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hat_vee_round_trip() {
        let xi = Twist::from_array([0.1, -0.2, 0.3, 4.0, -5.0, 6.0]);
        assert_eq!(Twist::vee(&xi.hat()), xi);
    }

    #[test]
    fn quaternion_round_trip_and_identity() {
        assert_eq!(Isometry::identity().quaternion(), [0.0, 0.0, 0.0, 1.0]);
        let t = Isometry::from_axis_angle(&Vector3::new(-0.2, 0.9, 0.4), 2.9);
        let q = t.quaternion();
        let back = Isometry::from_quaternion(q, Vector3::zeros()).unwrap();
        assert!(close(&back.rotation, &t.rotation, 1e-14));
    }
}
