//! 3-vectors, 3×3 matrices and attitude quaternions.
//!
//! Quaternions follow the Hamilton convention (scalar first, right-handed
//! product). An attitude quaternion `q` rotates body-frame vectors into the
//! inertial (NED) frame, so `q.to_rotation_matrix()` equals
//! `Rz(yaw) · Ry(pitch) · Rx(roll)` for the matching Z-Y-X Euler angles.
//! Euler angles only appear at I/O boundaries; everything inside the control
//! loop works on quaternions.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum MathError {
    #[error("gimbal singularity: pitch {pitch} rad is not inside (-pi/2, pi/2)")]
    GimbalSingularity { pitch: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]", bound(serialize = "T: Copy + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T> From<[T; 3]> for Vec3<T> {
    fn from([x, y, z]: [T; 3]) -> Self {
        Self { x, y, z }
    }
}

impl<T> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
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
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// Elementwise product.
    #[inline]
    pub fn component_mul(&self, o: &Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    #[inline]
    pub fn max_abs(&self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        self.into()
    }

    pub fn cast<U: Real>(&self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Real> Index<usize> for Vec3<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[T; 3]; 3]", into = "[[T; 3]; 3]", bound(serialize = "T: Copy + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T> From<[[T; 3]; 3]> for Mat3<T> {
    fn from(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }
}

impl<T> From<Mat3<T>> for [[T; 3]; 3] {
    fn from(m: Mat3<T>) -> Self {
        m.m
    }
}

impl<T: Real> Mat3<T> {
    pub fn zeros() -> Self {
        Self { m: [[T::zero(); 3]; 3] }
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one(), T::one())
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        Self { m: [[a, z, z], [z, b, z], [z, z, c]] }
    }

    pub fn from_rows(r0: [T; 3], r1: [T; 3], r2: [T; 3]) -> Self {
        Self { m: [r0, r1, r2] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.m[r][c]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = Self::zeros();
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] = (0..3).map(|k| self.m[r][k] * o.m[k][c]).sum();
            }
        }
        out
    }

    pub fn det(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by adjugate; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let m = &self.m;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let mut out = Self { m: adj };
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v /= d;
            }
        }
        Some(out)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..3).all(|r| (0..3).all(|c| (self.m[r][c] - self.m[c][r]).abs() <= tol))
    }

    /// Sylvester's criterion on the leading principal minors.
    pub fn is_positive_definite(&self) -> bool {
        let m = &self.m;
        let d1 = m[0][0];
        let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        d1 > T::zero() && d2 > T::zero() && self.det() > T::zero()
    }

    pub fn max_abs_diff(&self, o: &Self) -> T {
        let mut worst = T::zero();
        for r in 0..3 {
            for c in 0..3 {
                worst = worst.max((self.m[r][c] - o.m[r][c]).abs());
            }
        }
        worst
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        let mut out = Mat3::<U>::zeros();
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] = U::lit(self.m[r][c].to_f64_lossy());
            }
        }
        out
    }
}

/// Z-Y-X Tait-Bryan angles: yaw `kappa`, then pitch `omega`, then roll `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerZYX<T> {
    pub kappa: T,
    pub omega: T,
    pub phi: T,
}

impl<T: Real> EulerZYX<T> {
    pub fn new(yaw: T, pitch: T, roll: T) -> Self {
        Self { kappa: yaw, omega: pitch, phi: roll }
    }

    pub fn from_degrees(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self::new(
            T::lit(yaw.to_radians()),
            T::lit(pitch.to_radians()),
            T::lit(roll.to_radians()),
        )
    }

    fn check_pitch(&self) -> Result<(), MathError> {
        if self.omega.abs() < T::FRAC_PI_2() {
            Ok(())
        } else {
            Err(MathError::GimbalSingularity { pitch: self.omega.to_f64_lossy() })
        }
    }

    pub fn to_quaternion(&self) -> Result<Quaternion<T>, MathError> {
        self.check_pitch()?;
        let h = T::half();
        let (sy, cy) = (self.kappa * h).sin_cos();
        let (sp, cp) = (self.omega * h).sin_cos();
        let (sr, cr) = (self.phi * h).sin_cos();
        Ok(Quaternion::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        )
        .normalized())
    }
}

/// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`, the body-to-inertial rotation.
pub fn rotation_from_euler<T: Real>(e: &EulerZYX<T>) -> Result<Mat3<T>, MathError> {
    e.check_pitch()?;
    let (o, z) = (T::one(), T::zero());
    let (sk, ck) = e.kappa.sin_cos();
    let (sw, cw) = e.omega.sin_cos();
    let (sp, cp) = e.phi.sin_cos();
    let rz = Mat3::from_rows([ck, -sk, z], [sk, ck, z], [z, z, o]);
    let ry = Mat3::from_rows([cw, z, sw], [z, o, z], [-sw, z, cw]);
    let rx = Mat3::from_rows([o, z, z], [z, cp, -sp], [z, sp, cp]);
    Ok(rz.mul_mat(&ry).mul_mat(&rx))
}

/// Cross-product matrix: `skew(v) · w == v × w`.
pub fn skew<T: Real>(v: &Vec3<T>) -> Mat3<T> {
    let z = T::zero();
    Mat3::from_rows([z, -v.z, v.y], [v.z, z, -v.x], [-v.y, v.x, z])
}

/// Attitude quaternion `[eta, eps]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion<T> {
    pub eta: T,
    pub eps: Vec3<T>,
}

impl<T: Real> Default for Quaternion<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quaternion<T> {
    #[inline]
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { eta: w, eps: Vec3::new(x, y, z) }
    }

    #[inline]
    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Rotation by `angle` about `axis` (need not be unit length; zero axis gives identity).
    pub fn from_axis_angle(axis: &Vec3<T>, angle: T) -> Self {
        let n = axis.norm();
        if n == T::zero() {
            return Self::identity();
        }
        let (s, c) = (angle * T::half()).sin_cos();
        Self { eta: c, eps: *axis * (s / n) }
    }

    #[inline]
    pub fn conjugate(&self) -> Self {
        Self { eta: self.eta, eps: -self.eps }
    }

    #[inline]
    pub fn norm(&self) -> T {
        (self.eta * self.eta + self.eps.dot(&self.eps)).sqrt()
    }

    #[inline]
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { eta: self.eta / n, eps: self.eps / n }
    }

    #[inline]
    pub fn neg(&self) -> Self {
        Self { eta: -self.eta, eps: -self.eps }
    }

    /// Hamilton product without renormalization (used for pure quaternions).
    #[inline]
    pub fn mul_raw(&self, o: &Self) -> Self {
        Self {
            eta: self.eta * o.eta - self.eps.dot(&o.eps),
            eps: o.eps * self.eta + self.eps * o.eta + self.eps.cross(&o.eps),
        }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.eps.is_finite()
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.eta, self.eps.x, self.eps.y, self.eps.z]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Body-to-inertial rotation matrix.
    pub fn to_rotation_matrix(&self) -> Mat3<T> {
        let (w, x, y, z) = (self.eta, self.eps.x, self.eps.y, self.eps.z);
        let (o, t) = (T::one(), T::two());
        Mat3::from_rows(
            [o - t * (y * y + z * z), t * (x * y - w * z), t * (x * z + w * y)],
            [t * (x * y + w * z), o - t * (x * x + z * z), t * (y * z - w * x)],
            [t * (x * z - w * y), t * (y * z + w * x), o - t * (x * x + y * y)],
        )
    }

    /// Rotates a body vector into the inertial frame.
    pub fn rotate(&self, v: &Vec3<T>) -> Vec3<T> {
        self.to_rotation_matrix().mul_vec(v)
    }

    /// Z-Y-X Euler angles; pitch saturates at ±pi/2.
    pub fn to_euler(&self) -> EulerZYX<T> {
        let (w, x, y, z) = (self.eta, self.eps.x, self.eps.y, self.eps.z);
        let (o, t) = (T::one(), T::two());
        let roll = (t * (w * x + y * z)).atan2(o - t * (x * x + y * y));
        let pitch = (t * (w * y - z * x)).clamp_to(-o, o).asin();
        let yaw = (t * (w * z + x * y)).atan2(o - t * (y * y + z * z));
        EulerZYX::new(yaw, pitch, roll)
    }

    /// Rotation angle in `[0, pi]`, treating `q` and `-q` alike.
    pub fn angle(&self) -> T {
        T::two() * self.eps.norm().atan2(self.eta.abs())
    }

    pub fn cast<U: Real>(&self) -> Quaternion<U> {
        Quaternion { eta: U::lit(self.eta.to_f64_lossy()), eps: self.eps.cast() }
    }
}

/// Hamilton product `a ⊗ b`, renormalized.
pub fn quat_multiply<T: Real>(a: &Quaternion<T>, b: &Quaternion<T>) -> Quaternion<T> {
    a.mul_raw(b).normalized()
}

/// `reference* ⊗ actual`: the rotation taking `reference` onto `actual`,
/// expressed in the `reference` frame.
pub fn quat_error<T: Real>(reference: &Quaternion<T>, actual: &Quaternion<T>) -> Quaternion<T> {
    quat_multiply(&reference.conjugate(), actual)
}

impl<T: Real> Mul for Quaternion<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        quat_multiply(&self, &o)
    }
}
