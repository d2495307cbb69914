use serde::{Deserialize, Serialize};

use super::vec::{Mat3, Vec3};
use crate::real::Real;

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quat {
    fn from(a: [f64; 4]) -> Self {
        Quat {
            w: a[0],
            x: a[1],
            y: a[2],
            z: a[3],
        }
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes the input; panics on a zero quaternion.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Quat {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        assert!(n > 0.0, "zero quaternion");
        Quat {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        Quat::new(self.w, self.x, self.y, self.z)
    }

    pub fn from_axis_angle(w: Vec3) -> Quat {
        let theta = w.norm();
        if theta < 1e-12 {
            return Quat::new(1.0, 0.5 * w.x, 0.5 * w.y, 0.5 * w.z);
        }
        let (s, c) = (0.5 * theta).sin_cos();
        let a = w / theta * s;
        Quat {
            w: c,
            x: a.x,
            y: a.y,
            z: a.z,
        }
    }

    /// Axis-angle vector with angle in `[0, pi]`.
    pub fn to_axis_angle(&self) -> Vec3 {
        let q = if self.w < 0.0 {
            Quat {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            *self
        };
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(q.w);
        v / s * angle
    }

    pub fn conjugate(&self) -> Quat {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product: `(self * o).rotate(v) == self.rotate(o.rotate(v))`.
    pub fn mul(&self, o: &Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        self.to_mat().mul_vec(v)
    }

    pub fn to_mat(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3 {
            m: [
                [
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - w * z),
                    2.0 * (x * z + w * y),
                ],
                [
                    2.0 * (x * y + w * z),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - w * x),
                ],
                [
                    2.0 * (x * z - w * y),
                    2.0 * (y * z + w * x),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            ],
        }
    }

    /// Rotation matrix to quaternion (Shepperd's method).
    pub fn from_mat(r: &Mat3) -> Quat {
        let m = &r.m;
        let tr = m[0][0] + m[1][1] + m[2][2];
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Quat::new(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat::new(
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        }
    }

    /// Angle of the relative rotation between two quaternions, in `[0, pi]`.
    pub fn angle_to(&self, o: &Quat) -> f64 {
        let d = (self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z).abs();
        2.0 * d.min(1.0).acos()
    }
}

/// Rodrigues' formula, written so that it stays differentiable at zero angle.
pub fn axis_angle_matrix<R: Real>(w: Vec3<R>) -> Mat3<R> {
    let t2 = w.norm_squared();
    let (a, b) = if t2.val() < 1e-8 {
        // sin(t)/t and (1-cos t)/t^2 to fourth order
        (
            R::cst(1.0) - t2.scale(1.0 / 6.0) + t2 * t2.scale(1.0 / 120.0),
            R::cst(0.5) - t2.scale(1.0 / 24.0) + t2 * t2.scale(1.0 / 720.0),
        )
    } else {
        let t = t2.sqrt();
        (t.sin() / t, (R::cst(1.0) - t.cos()) / t2)
    };
    let k = Mat3::skew(w);
    let k2 = k.mul_mat(&k);
    Mat3::identity()
        .add_mat(&k.scale(a))
        .add_mat(&k2.scale(b))
}

/// Left Jacobian of SO(3): `exp(w + d) ~= exp(J_l(w) d) exp(w)` for small `d`.
pub fn left_jacobian(w: Vec3) -> Mat3 {
    let t2 = w.norm_squared();
    let (b, c) = if t2 < 1e-8 {
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t = t2.sqrt();
        ((1.0 - t.cos()) / t2, (t - t.sin()) / (t2 * t))
    };
    let k = Mat3::skew(w);
    let k2 = k.mul_mat(&k);
    Mat3::IDENTITY.add_mat(&k.scale(b)).add_mat(&k2.scale(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (a.m[i][j] - b.m[i][j]).abs() < tol))
    }

    #[test]
    fn quaternion_and_rodrigues_agree() {
        let w = Vec3::new(0.3, -0.7, 1.1);
        let a = Quat::from_axis_angle(w).to_mat();
        let b = axis_angle_matrix(w);
        assert!(mat_close(&a, &b, 1e-12));
        let back = Quat::from_mat(&a).to_axis_angle();
        assert!((back - w).norm() < 1e-10);
    }

    #[test]
    fn hamilton_product_composes_rotations() {
        let p = Quat::from_axis_angle(Vec3::new(0.2, 0.1, -0.4));
        let q = Quat::from_axis_angle(Vec3::new(-1.0, 0.5, 0.3));
        let v = Vec3::new(0.3, 2.0, -1.0);
        let lhs = p.mul(&q).rotate(v);
        let rhs = p.rotate(q.rotate(v));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn left_jacobian_matches_finite_differences() {
        let w = Vec3::new(0.4, -0.9, 0.6);
        let r0 = axis_angle_matrix(w);
        let jl = left_jacobian(w);
        let h = 1e-6;
        for k in 0..3 {
            let mut d = Vec3::ZERO;
            match k {
                0 => d.x = h,
                1 => d.y = h,
                _ => d.z = h,
            }
            let r1 = axis_angle_matrix(w + d);
            // r1 r0^T ~= I + skew(J d)
            let delta = r1.mul_mat(&r0.transpose());
            let omega = Vec3::new(delta.m[2][1], delta.m[0][2], delta.m[1][0]) / h;
            let expect = jl.mul_vec(Vec3::new(
                if k == 0 { 1.0 } else { 0.0 },
                if k == 1 { 1.0 } else { 0.0 },
                if k == 2 { 1.0 } else { 0.0 },
            ));
            assert!((omega - expect).norm() < 1e-5, "{omega:?} vs {expect:?}");
        }
    }

    #[test]
    fn small_angle_branch_is_continuous() {
        let w = Vec3::new(1e-5, 2e-5, -1e-5);
        let a = axis_angle_matrix(w);
        let b = Quat::from_axis_angle(w).to_mat();
        assert!(mat_close(&a, &b, 1e-14));
    }
}
