//! Scalar abstraction used by the SDF evaluators.
//!
//! Everything that has to be differentiated with respect to shape parameters
//! is written once, generic over [`Real`], and evaluated either with plain
//! `f64` or with forward-mode [`Dual`] numbers. Duals nest, so a `Dual` whose
//! components are themselves `Dual`s yields mixed second derivatives (used for
//! the derivative of a surface normal with respect to placement).

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(v: f64) -> Self;
    /// Primal value.
    fn val(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;

    fn abs(self) -> Self {
        if self.val() < 0.0 {
            -self
        } else {
            self
        }
    }
    fn max(self, other: Self) -> Self {
        if self.val() >= other.val() {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self.val() <= other.val() {
            self
        } else {
            other
        }
    }
    fn clamp(self, lo: f64, hi: f64) -> Self {
        if self.val() < lo {
            Self::cst(lo)
        } else if self.val() > hi {
            Self::cst(hi)
        } else {
            self
        }
    }
    fn sigmoid(self) -> Self {
        let one = Self::cst(1.0);
        if self.val() >= 0.0 {
            one / (one + (-self).exp())
        } else {
            let e = self.exp();
            e / (one + e)
        }
    }
    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Forward-mode dual number with `N` tangent directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T, const N: usize> {
    pub v: T,
    pub d: [T; N],
}

impl<T: Real, const N: usize> Dual<T, N> {
    pub fn constant(v: T) -> Self {
        Dual {
            v,
            d: [T::cst(0.0); N],
        }
    }

    /// A variable seeded along tangent direction `i`.
    pub fn var(v: T, i: usize) -> Self {
        let mut d = [T::cst(0.0); N];
        d[i] = T::cst(1.0);
        Dual { v, d }
    }

    #[inline]
    fn chain(self, v: T, dv: T) -> Self {
        Dual {
            v,
            d: std::array::from_fn(|i| self.d[i] * dv),
        }
    }
}

impl<T: Real, const N: usize> Add for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual {
            v: self.v + o.v,
            d: std::array::from_fn(|i| self.d[i] + o.d[i]),
        }
    }
}

impl<T: Real, const N: usize> Sub for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual {
            v: self.v - o.v,
            d: std::array::from_fn(|i| self.d[i] - o.d[i]),
        }
    }
}

impl<T: Real, const N: usize> Mul for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v * o.v,
            d: std::array::from_fn(|i| self.d[i] * o.v + self.v * o.d[i]),
        }
    }
}

impl<T: Real, const N: usize> Div for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::cst(1.0) / o.v;
        let v = self.v * inv;
        Dual {
            v,
            d: std::array::from_fn(|i| (self.d[i] - v * o.d[i]) * inv),
        }
    }
}

impl<T: Real, const N: usize> Neg for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual {
            v: -self.v,
            d: std::array::from_fn(|i| -self.d[i]),
        }
    }
}

impl<T: Real, const N: usize> AddAssign for Dual<T, N> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real, const N: usize> SubAssign for Dual<T, N> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real, const N: usize> MulAssign for Dual<T, N> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Real, const N: usize> Real for Dual<T, N> {
    fn cst(v: f64) -> Self {
        Dual::constant(T::cst(v))
    }
    fn val(self) -> f64 {
        self.v.val()
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, T::cst(0.5) / s)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), T::cst(1.0) / self.v)
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.chain(t, T::cst(1.0) - t * t)
    }
    fn scale(self, k: f64) -> Self {
        Dual {
            v: self.v.scale(k),
            d: std::array::from_fn(|i| self.d[i].scale(k)),
        }
    }
}
