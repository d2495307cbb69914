use serde::{Deserialize, Serialize};

use super::rotation::Quat;
use super::vec::Vec3;
use crate::error::{Error, Result};

/// Rigid motion with isotropic scale: `p -> R (s p) + T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Se3Scale {
    pub rotation: Quat,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for Se3Scale {
    fn default() -> Self {
        Se3Scale::IDENTITY
    }
}

impl Se3Scale {
    pub const IDENTITY: Se3Scale = Se3Scale {
        rotation: Quat::IDENTITY,
        translation: Vec3::ZERO,
        scale: 1.0,
    };

    pub fn new(rotation: Quat, translation: Vec3, scale: f64) -> Result<Self> {
        if (rotation.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "rotation quaternion has norm {}",
                rotation.norm()
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Invalid(format!("scale must be positive, got {scale}")));
        }
        if !translation.is_finite() {
            return Err(Error::Invalid("translation is not finite".into()));
        }
        Ok(Se3Scale {
            rotation,
            translation,
            scale,
        })
    }

    pub fn from_translation(t: Vec3) -> Self {
        Se3Scale {
            translation: t,
            ..Se3Scale::IDENTITY
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p * self.scale) + self.translation
    }

    pub fn apply_inverse(&self, p: Vec3) -> Vec3 {
        self.rotation.conjugate().rotate(p - self.translation) / self.scale
    }

    /// Rotates a direction (no scale, no translation).
    pub fn rotate(&self, d: Vec3) -> Vec3 {
        self.rotation.rotate(d)
    }
}
