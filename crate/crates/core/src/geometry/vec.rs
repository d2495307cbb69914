use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::real::Real;

/// 3-vector in scene units (meters). Generic so the SDF code can run on duals.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl Serialize for Vec3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[f64; 3]>::deserialize(d).map(Vec3::from)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub fn lift<R: Real>(self) -> Vec3<R> {
        Vec3::new(R::cst(self.x), R::cst(self.y), R::cst(self.z))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min_by_component(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_by_component(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    /// Any unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthonormal(self) -> Vec3 {
        let a = if self.x.abs() < 0.6 { Vec3::X } else { Vec3::Y };
        self.cross(a).normalized()
    }
}

impl<T: Real> Vec3<T> {
    pub fn splat(v: T) -> Self {
        Vec3::new(v, v, v)
    }
    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }
    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }
    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }
    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }
    pub fn normalized(self) -> Self {
        self / self.norm()
    }
    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }
    pub fn component_mul(self, o: Self) -> Self {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }
    pub fn component_div(self, o: Self) -> Self {
        Vec3::new(self.x / o.x, self.y / o.y, self.z / o.z)
    }
    pub fn value(self) -> Vec3 {
        Vec3::new(self.x.val(), self.y.val(), self.z.val())
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, k: T) -> Self {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, k: T) -> Self {
        Vec3::new(self.x / k, self.y / k, self.z / k)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T> Index<usize> for Vec3<T> {
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

impl std::iter::Sum for Vec3 {
    fn sum<I: Iterator<Item = Vec3>>(iter: I) -> Vec3 {
        iter.fold(Vec3::ZERO, |a, b| a + b)
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T = f64> {
    pub m: [[T; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn lift<R: Real>(&self) -> Mat3<R> {
        Mat3 {
            m: std::array::from_fn(|i| std::array::from_fn(|j| R::cst(self.m[i][j]))),
        }
    }

    pub fn from_cols(a: Vec3, b: Vec3, c: Vec3) -> Mat3 {
        Mat3 {
            m: [[a.x, b.x, c.x], [a.y, b.y, c.y], [a.z, b.z, c.z]],
        }
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let o = T::cst(0.0);
        let l = T::cst(1.0);
        Mat3 {
            m: [[l, o, o], [o, l, o], [o, o, l]],
        }
    }

    /// Skew-symmetric matrix with `skew(a) * b == a.cross(b)`.
    pub fn skew(a: Vec3<T>) -> Self {
        let o = T::cst(0.0);
        Mat3 {
            m: [[o, -a.z, a.y], [a.z, o, -a.x], [-a.y, a.x, o]],
        }
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `self^T * v`
    #[inline]
    pub fn tr_mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Self {
        Mat3 {
            m: std::array::from_fn(|i| std::array::from_fn(|j| self.m[j][i])),
        }
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        Mat3 {
            m: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j]
                })
            }),
        }
    }

    pub fn add_mat(&self, o: &Self) -> Self {
        Mat3 {
            m: std::array::from_fn(|i| std::array::from_fn(|j| self.m[i][j] + o.m[i][j])),
        }
    }

    pub fn scale(&self, k: T) -> Self {
        Mat3 {
            m: std::array::from_fn(|i| std::array::from_fn(|j| self.m[i][j] * k)),
        }
    }
}
