use serde::{Deserialize, Serialize};

use super::rotation::Quat;
use super::transform::Se3Scale;
use super::vec::{Mat3, Vec3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Ray {
        Ray {
            origin,
            direction: direction.normalized(),
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Pinhole camera. Camera frame is x right, y down, z forward; `pose` maps
/// camera coordinates to world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: Se3Scale,
}

impl Camera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize, pose: Se3Scale) -> Result<Camera> {
        let cam = Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            pose,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Invalid("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Invalid("image dimensions must be nonzero".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::Invalid(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        if (self.pose.scale - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("camera pose must have unit scale".into()));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, with `up` roughly the world up direction.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        fx: f64,
        fy: f64,
        width: usize,
        height: usize,
    ) -> Result<Camera> {
        let fwd = (target - eye).normalized();
        let right = fwd.cross(up);
        if right.norm() < 1e-9 {
            return Err(Error::Invalid("look_at: up is parallel to the view direction".into()));
        }
        let right = right.normalized();
        let down = fwd.cross(right);
        let rot = Quat::from_mat(&Mat3::from_cols(right, down, fwd));
        Camera::new(
            fx,
            fy,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            Se3Scale {
                rotation: rot,
                translation: eye,
                scale: 1.0,
            },
        )
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    /// Ray through continuous pixel coordinates `(px, py)`.
    pub fn camera_ray(&self, px: f64, py: f64) -> Result<Ray> {
        if !(px >= 0.0 && px < self.width as f64 && py >= 0.0 && py < self.height as f64) {
            return Err(Error::Domain(format!(
                "pixel ({px}, {py}) outside {}x{} image",
                self.width, self.height
            )));
        }
        let d_cam = Vec3::new((px - self.cx) / self.fx, (py - self.cy) / self.fy, 1.0);
        Ok(Ray::new(self.pose.translation, self.pose.rotate(d_cam)))
    }

    /// Ray through the center of pixel `(i, j)` (column, row).
    pub fn pixel_ray(&self, i: usize, j: usize) -> Ray {
        let d_cam = Vec3::new(
            (i as f64 + 0.5 - self.cx) / self.fx,
            (j as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        );
        Ray::new(self.pose.translation, self.pose.rotate(d_cam))
    }

    /// Projects a world point to continuous pixel coordinates; `None` behind the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let c = self.pose.rotation.conjugate().rotate(p - self.pose.translation);
        if c.z <= 1e-12 {
            return None;
        }
        Some((self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy))
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}
