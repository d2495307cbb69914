use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::emitter::EmitterModel;
use crate::error::{Error, Result};
use crate::geometry::{Quat, Se3Scale, Vec3};
use crate::sdf::SdfShape;

/// Where restarts draw their initial parameters. Unset ranges keep the
/// declared value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitBounds {
    pub translation_min: Option<[f64; 3]>,
    pub translation_max: Option<[f64; 3]>,
    /// Largest rotation away from the declared orientation (radians); `pi`
    /// or more samples SO(3) uniformly.
    pub rotation_max: f64,
    pub scale_min: Option<f64>,
    pub scale_max: Option<f64>,
    /// Standard deviation of the Gaussian added to the declared latent.
    pub latent_std: f64,
}

impl Default for InitBounds {
    fn default() -> Self {
        InitBounds {
            translation_min: None,
            translation_max: None,
            rotation_max: std::f64::consts::PI,
            scale_min: None,
            scale_max: None,
            latent_std: 1.0,
        }
    }
}

impl InitBounds {
    /// Every restart starts from the declared parameters.
    pub fn fixed() -> InitBounds {
        InitBounds {
            rotation_max: 0.0,
            latent_std: 0.0,
            ..InitBounds::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.translation_min, self.translation_max) {
            (None, None) => {}
            (Some(lo), Some(hi)) => {
                if (0..3).any(|k| !(lo[k] <= hi[k])) {
                    return Err(Error::Invalid("translation_min exceeds translation_max".into()));
                }
            }
            _ => return Err(Error::Invalid("translation_min and translation_max go together".into())),
        }
        match (self.scale_min, self.scale_max) {
            (None, None) => {}
            (Some(lo), Some(hi)) if lo > 0.0 && lo <= hi => {}
            _ => return Err(Error::Invalid("scale range must be 0 < scale_min <= scale_max".into())),
        }
        if !(self.rotation_max >= 0.0) || !(self.latent_std >= 0.0) {
            return Err(Error::Invalid("rotation_max and latent_std must be non-negative".into()));
        }
        Ok(())
    }

    fn placement<R: Rng>(&self, base: &Se3Scale, rng: &mut R) -> Result<Se3Scale> {
        self.validate()?;
        let translation = match (self.translation_min, self.translation_max) {
            (Some(lo), Some(hi)) => {
                let mut t = [0.0; 3];
                for k in 0..3 {
                    t[k] = if lo[k] < hi[k] { rng.random_range(lo[k]..=hi[k]) } else { lo[k] };
                }
                Vec3::new(t[0], t[1], t[2])
            }
            _ => base.translation,
        };
        let rotation = if self.rotation_max >= std::f64::consts::PI {
            let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            Quat::new(q[0], q[1], q[2], q[3]).normalized()
        } else if self.rotation_max > 0.0 {
            let axis = loop {
                let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                if v.norm() > 1e-6 {
                    break v.normalized();
                }
            };
            let angle = rng.random_range(0.0..=self.rotation_max);
            Quat::from_axis_angle(axis * angle).mul(&base.rotation).normalized()
        } else {
            base.rotation
        };
        let scale = match (self.scale_min, self.scale_max) {
            (Some(lo), Some(hi)) if lo < hi => rng.random_range(lo..=hi),
            (Some(lo), Some(_)) => lo,
            _ => base.scale,
        };
        Se3Scale::new(rotation, translation, scale)
    }

    fn latent<R: Rng>(&self, base: &[f64], rng: &mut R) -> Vec<f64> {
        base.iter()
            .map(|z| {
                let n: f64 = rng.sample(StandardNormal);
                z + self.latent_std * n
            })
            .collect()
    }
}

/// A restart's starting shape.
pub fn sample_shape<R: Rng>(base: &SdfShape, bounds: &InitBounds, rng: &mut R) -> Result<SdfShape> {
    let placement = bounds.placement(base.placement(), rng)?;
    let mut s = base.with_placement(placement);
    if bounds.latent_std > 0.0 {
        s.set_latent(bounds.latent(base.latent(), rng))?;
    }
    Ok(s)
}

/// A restart's starting emitter (unit scale is kept).
pub fn sample_emitter<R: Rng>(base: &EmitterModel, bounds: &InitBounds, rng: &mut R) -> Result<EmitterModel> {
    let mut placement = bounds.placement(base.placement(), rng)?;
    placement.scale = 1.0;
    let latent = if bounds.latent_std > 0.0 {
        bounds.latent(base.latent(), rng)
    } else {
        base.latent().to_vec()
    };
    EmitterModel::new(base.skeleton().clone(), latent, placement)
}
