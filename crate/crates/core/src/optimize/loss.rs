use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::render::{primary_sample, sigmoid, RenderConfig, SoftImage};
use crate::sdf::{DepthDerivative, SdfShape, PLACEMENT_PARAMS};

/// `1 - A/B` with `A = sum(R*O)` and `B = sum(R + O - R*O)` over the pixels
/// sampled in `rendered`. An empty union gives 1.
pub fn loss_silhouette(rendered: &SoftImage, observed: &SoftImage) -> Result<f64> {
    let (a, b) = overlap(rendered, observed)?;
    if b <= 0.0 {
        log::warn!("silhouette loss over an empty union");
        return Ok(1.0);
    }
    Ok(1.0 - a / b)
}

/// Loss and its derivative per pixel of `rendered` (zero where unsampled).
pub fn loss_silhouette_grad(rendered: &SoftImage, observed: &SoftImage) -> Result<(f64, Vec<f64>)> {
    let (a, b) = overlap(rendered, observed)?;
    let mut g = vec![0.0; rendered.values.len()];
    if b <= 0.0 {
        log::warn!("silhouette loss over an empty union");
        return Ok((1.0, g));
    }
    for k in 0..g.len() {
        if rendered.sampled[k] {
            let o = observed.values[k];
            g[k] = -(o * b - a * (1.0 - o)) / (b * b);
        }
    }
    Ok((1.0 - a / b, g))
}

fn overlap(rendered: &SoftImage, observed: &SoftImage) -> Result<(f64, f64)> {
    if rendered.width != observed.width || rendered.height != observed.height {
        return Err(Error::Invalid(format!(
            "rendered {}x{} against observed {}x{}",
            rendered.width, rendered.height, observed.width, observed.height
        )));
    }
    if !observed.is_binary() {
        return Err(Error::Invalid("observed silhouette must be binary".into()));
    }
    let (mut a, mut b) = (0.0, 0.0);
    for k in 0..rendered.values.len() {
        if rendered.sampled[k] {
            let (r, o) = (rendered.values[k], observed.values[k]);
            a += r * o;
            b += r + o - r * o;
        }
    }
    Ok((a, b))
}

/// What the depth camera saw of one object.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectObservation {
    /// Index of the object in the scene, used in diagnostics.
    pub object: usize,
    /// Range along each pixel ray; non-finite marks a hole.
    pub depth: Vec<f64>,
    /// Binary segmentation of this object.
    pub mask: SoftImage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectLoss {
    pub total: f64,
    pub depth: f64,
    pub mask: f64,
    pub prior: f64,
    pub valid_pixels: usize,
    /// Laid out like the shape's parameters.
    pub gradient: Option<Vec<f64>>,
}

impl ObjectLoss {
    pub fn terms(&self) -> Vec<f64> {
        vec![self.depth, self.mask, self.prior]
    }
}

struct PixelTerms {
    depth: Option<f64>,
    mask: f64,
    /// Sparse parameter derivatives of the pixel's mask and depth terms.
    d_mask: Vec<(usize, f64)>,
    d_depth: Vec<(usize, f64)>,
}

/// Mean absolute depth error over pixels that are observed, inside the
/// object's mask and hit by the current shape, plus the mean squared soft
/// mask error and `w_prior * |z|^2` (closed families only; grid values are
/// not penalized).
pub fn loss_object(
    shape: &SdfShape,
    cam: &Camera,
    obs: &ObjectObservation,
    cfg: &RenderConfig,
    w_prior: f64,
    grad: bool,
) -> Result<ObjectLoss> {
    let n = cam.pixel_count();
    if obs.depth.len() != n || obs.mask.values.len() != n {
        return Err(Error::Invalid(format!(
            "object {}: observation size does not match the {}x{} camera",
            obs.object, cam.width, cam.height
        )));
    }
    if !obs.mask.is_binary() {
        return Err(Error::Invalid(format!("object {}: mask must be binary", obs.object)));
    }
    let per: Vec<PixelTerms> = (0..n)
        .into_par_iter()
        .map(|k| {
            let ray = cam.pixel_ray(k % cam.width, k / cam.width);
            let s = primary_sample(shape, &ray, cfg);
            let m_obs = obs.mask.values[k];
            let r = s.mask - m_obs;
            let mut d_mask = Vec::new();
            if grad && s.hit.is_none() {
                let pg = shape.param_gradient(s.argmin);
                let sg = sigmoid(-s.g_min / cfg.sigma_mask);
                let c = 2.0 * r * sg * (1.0 - sg) * (-1.0 / cfg.sigma_mask);
                if c != 0.0 {
                    d_mask.extend(pg.placement.iter().enumerate().map(|(i, v)| (i, c * v)));
                    d_mask.extend(pg.latent.iter().map(|&(i, v)| (PLACEMENT_PARAMS + i, c * v)));
                }
            }
            let mut depth = None;
            let mut d_depth = Vec::new();
            if let Some(hit) = s.hit {
                let d_obs = obs.depth[k];
                if d_obs.is_finite() && m_obs >= 0.5 {
                    let diff = hit.depth - d_obs;
                    depth = Some(diff.abs());
                    if grad && diff != 0.0 {
                        if let Some(dd) = DepthDerivative::implicit(shape, &ray, &hit) {
                            let sign = diff.signum();
                            d_depth.extend(dd.placement.iter().enumerate().map(|(i, v)| (i, sign * v)));
                            d_depth.extend(dd.latent.iter().map(|&(i, v)| (PLACEMENT_PARAMS + i, sign * v)));
                        }
                    }
                }
            }
            PixelTerms {
                depth,
                mask: r * r,
                d_mask,
                d_depth,
            }
        })
        .collect();
    let count = per.iter().filter(|p| p.depth.is_some()).count();
    if count == 0 {
        return Err(Error::Domain(format!(
            "object {}: no valid depth pixels where the shape is hit",
            obs.object
        )));
    }
    let l_depth = per.iter().filter_map(|p| p.depth).sum::<f64>() / count as f64;
    let l_mask = per.iter().map(|p| p.mask).sum::<f64>() / n as f64;
    let z = shape.latent();
    let closed = shape.grid_spec().is_none();
    let l_prior = if closed { w_prior * z.iter().map(|v| v * v).sum::<f64>() } else { 0.0 };
    let gradient = grad.then(|| {
        let mut g = vec![0.0; shape.param_count()];
        for p in &per {
            for &(i, v) in &p.d_mask {
                g[i] += v / n as f64;
            }
            for &(i, v) in &p.d_depth {
                g[i] += v / count as f64;
            }
        }
        if closed {
            for (gi, zi) in g[PLACEMENT_PARAMS..].iter_mut().zip(z) {
                *gi += 2.0 * w_prior * zi;
            }
        }
        g
    });
    Ok(ObjectLoss {
        total: l_depth + l_mask + l_prior,
        depth: l_depth,
        mask: l_mask,
        prior: l_prior,
        valid_pixels: count,
        gradient,
    })
}
