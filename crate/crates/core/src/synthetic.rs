//! Ground-truth observations rendered from a known scene.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::optimize::ObjectObservation;
use crate::render::{render_depth_mask, render_reflection_hard, RenderConfig, SoftImage};
use crate::scene::Scene;

/// Renderer settings for ground truth: converged surface points and raw
/// normals.
pub fn truth_render_config(base: &RenderConfig) -> RenderConfig {
    RenderConfig {
        sphere_steps: base.max_march,
        smoothing: false,
        ..*base
    }
}

/// Depth and segmentation per object as a depth camera would see them:
/// Gaussian range noise and a random fraction of holes.
pub fn observe_objects<R: Rng>(
    scene: &Scene,
    cam: &Camera,
    cfg: &RenderConfig,
    noise_std: f64,
    hole_fraction: f64,
    rng: &mut R,
) -> Result<Vec<ObjectObservation>> {
    if !(0.0..=1.0).contains(&hole_fraction) || !(noise_std >= 0.0) {
        return Err(Error::Invalid("noise must be non-negative and holes a fraction".into()));
    }
    let dm = render_depth_mask(&scene.objects, cam, cfg)?;
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut depth = dm.depth.clone();
    for d in depth.iter_mut() {
        // draw for every pixel so the stream does not depend on the scene
        let n = noise.sample(rng);
        let hole = rng.random::<f64>() < hole_fraction;
        if d.is_finite() {
            *d = if hole { f64::INFINITY } else { *d + n };
        }
    }
    Ok((0..scene.objects.len())
        .map(|o| {
            let bits: Vec<bool> = dm.object.iter().map(|&v| v == Some(o)).collect();
            ObjectObservation {
                object: o,
                depth: depth.clone(),
                mask: SoftImage::from_binary(cam.width, cam.height, &bits),
            }
        })
        .collect())
}

/// Binary reflection silhouette of the emitter.
pub fn observe_silhouette(scene: &Scene, cam: &Camera, cfg: &RenderConfig) -> Result<SoftImage> {
    render_reflection_hard(scene, cam, &truth_render_config(cfg))
}
