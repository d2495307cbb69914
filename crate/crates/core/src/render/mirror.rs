use rayon::prelude::*;

use super::{reflect, sigmoid, RenderConfig, SoftImage};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Ray, Vec3};
use crate::sdf::{trace_iterates, SdfHit, SdfShape, SurfaceEstimate};

/// Pixel offsets (in units of the smoothing offset) of the 8 neighbor rays.
const NEIGHBORS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (1.0, 1.0),
    (1.0, -1.0),
    (-1.0, 1.0),
    (-1.0, -1.0),
];

/// Where a camera ray meets the mirrors and where it goes next.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorHit {
    pub object: usize,
    pub incoming: Ray,
    /// Marching steps of the surface estimate.
    pub steps: usize,
    pub depth: f64,
    pub point: Vec3,
    /// Unit normal used for the reflection (smoothed when enabled).
    pub normal: Vec3,
    /// Starts `eps` past the surface along the reflected direction.
    pub reflected: Ray,
    /// Smoothing neighbors that converged on the same object, with their
    /// estimate step counts.
    pub neighbors: Vec<(Ray, usize)>,
}

fn estimate(shape: &SdfShape, ray: &Ray, cfg: &RenderConfig) -> Option<SurfaceEstimate> {
    SurfaceEstimate::new(shape, ray, &cfg.trace_config(), cfg.coarse_tol, cfg.sphere_steps)
}

fn neighbor_rays(cam: &Camera, px: f64, py: f64, delta: f64) -> impl Iterator<Item = Ray> + '_ {
    NEIGHBORS
        .iter()
        .filter_map(move |(dx, dy)| cam.camera_ray(px + dx * delta, py + dy * delta).ok())
}

/// Average of the main normal and the normals of the converged neighbor rays
/// at offsets of `cfg.smoothing_offset` pixels, renormalized.
pub fn smoothed_normal(shape: &SdfShape, cam: &Camera, px: f64, py: f64, cfg: &RenderConfig) -> Result<Vec3> {
    let ray = cam.camera_ray(px, py)?;
    let main = estimate(shape, &ray, cfg)
        .ok_or_else(|| Error::Domain(format!("main ray at ({px}, {py}) misses the shape")))?;
    let (n, _) = smooth(shape, cam, px, py, cfg, main.normal);
    Ok(n)
}

fn smooth(
    shape: &SdfShape,
    cam: &Camera,
    px: f64,
    py: f64,
    cfg: &RenderConfig,
    main: Vec3,
) -> (Vec3, Vec<(Ray, usize)>) {
    let mut sum = main;
    let mut used = Vec::new();
    for r in neighbor_rays(cam, px, py, cfg.smoothing_offset) {
        if let Some(e) = estimate(shape, &r, cfg) {
            sum += e.normal;
            used.push((r, e.steps));
        }
    }
    let len = sum.norm();
    if used.is_empty() || !(len > 1e-12) {
        (main, Vec::new())
    } else {
        (sum / len, used)
    }
}

impl MirrorHit {
    /// Nearest converged object along the ray through `(px, py)`.
    pub fn trace(objects: &[SdfShape], cam: &Camera, px: f64, py: f64, cfg: &RenderConfig) -> Result<Option<MirrorHit>> {
        let ray = cam.camera_ray(px, py)?;
        let best = objects
            .iter()
            .enumerate()
            .filter_map(|(i, s)| estimate(s, &ray, cfg).map(|e| (i, e)))
            .min_by(|a, b| a.1.hit.depth.total_cmp(&b.1.hit.depth));
        let Some((object, est)) = best else {
            return Ok(None);
        };
        let (normal, neighbors) = if cfg.smoothing {
            smooth(&objects[object], cam, px, py, cfg, est.normal)
        } else {
            (est.normal, Vec::new())
        };
        let dir = reflect(ray.direction, normal)?;
        if cfg.debug_checks {
            let incidence = (-ray.direction.dot(normal)).clamp(-1.0, 1.0).acos();
            let outgoing = dir.dot(normal).clamp(-1.0, 1.0).acos();
            if (incidence - outgoing).abs() > 1e-9 {
                return Err(Error::Invalid(format!(
                    "law of reflection violated at ({px}, {py}): {incidence} vs {outgoing}"
                )));
            }
        }
        Ok(Some(MirrorHit {
            object,
            incoming: ray,
            steps: est.steps,
            depth: est.depth,
            point: est.point,
            normal,
            reflected: Ray {
                origin: est.point + dir * cfg.eps,
                direction: dir,
            },
            neighbors,
        }))
    }
}

/// Mirror hits of every pixel center, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorMap {
    pub width: usize,
    pub height: usize,
    pub hits: Vec<Option<MirrorHit>>,
}

impl MirrorMap {
    pub fn build(objects: &[SdfShape], cam: &Camera, cfg: &RenderConfig) -> Result<MirrorMap> {
        cfg.validate()?;
        let (w, h) = (cam.width, cam.height);
        let hits = (0..w * h)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % w, k / w);
                MirrorHit::trace(objects, cam, i as f64 + 0.5, j as f64 + 0.5, cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MirrorMap {
            width: w,
            height: h,
            hits,
        })
    }

    pub fn hit_count(&self) -> usize {
        self.hits.iter().filter(|h| h.is_some()).count()
    }
}

/// A primary ray against one object: the converged hit if any, and the
/// soft mask value from the smallest SDF value seen along the ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimarySample {
    pub hit: Option<SdfHit>,
    pub g_min: f64,
    /// Point where `g_min` was attained.
    pub argmin: Vec3,
    pub mask: f64,
}

pub fn primary_sample(shape: &SdfShape, ray: &Ray, cfg: &RenderConfig) -> PrimarySample {
    let tc = cfg.trace_config();
    let (iterates, converged) = trace_iterates(shape, ray, &tc);
    let hit = converged
        .then(|| crate::sdf::trace_with(shape, ray, &tc))
        .filter(|h| h.converged);
    let k = (0..iterates.len())
        .min_by(|&a, &b| iterates[a].1.total_cmp(&iterates[b].1))
        .expect("at least the start point");
    let (t_min, g_min) = if hit.is_some() {
        iterates[k]
    } else {
        // the march only samples the ray; polish the minimum so that
        // dG/dtheta at the argmin is the derivative of the minimum
        let lo = if k > 0 { iterates[k - 1].0 } else { iterates[k].0 };
        let hi = match iterates.get(k + 1) {
            Some(&(t, _)) => t,
            None => iterates[k].0 + iterates[k].1.abs().max(cfg.eps),
        };
        golden_min(|t| shape.eval(ray.at(t)), lo, hi.min(cfg.max_depth), iterates[k])
    };
    let mask = if hit.is_some() {
        1.0
    } else {
        sigmoid(-g_min / cfg.sigma_mask)
    };
    PrimarySample {
        hit,
        g_min,
        argmin: ray.at(t_min),
        mask,
    }
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`, never worse
/// than `best`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, best: (f64, f64)) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    if hi <= lo {
        return best;
    }
    let mut a = hi - R * (hi - lo);
    let mut b = lo + R * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..40 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - R * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + R * (hi - lo);
            fb = f(b);
        }
    }
    let cand = if fa < fb { (a, fa) } else { (b, fb) };
    if cand.1 < best.1 { cand } else { best }
}

/// Depth (meters, `+inf` where nothing converged), nearest-object identity
/// and one soft mask per object.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMask {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub object: Vec<Option<usize>>,
    pub masks: Vec<SoftImage>,
}

pub fn render_depth_mask(objects: &[SdfShape], cam: &Camera, cfg: &RenderConfig) -> Result<DepthMask> {
    cfg.validate()?;
    if objects.is_empty() {
        return Err(Error::Invalid("depth/mask render needs at least one object".into()));
    }
    let (w, h) = (cam.width, cam.height);
    let samples: Vec<Vec<PrimarySample>> = (0..w * h)
        .into_par_iter()
        .map(|k| {
            let ray = cam.pixel_ray(k % w, k / w);
            objects.iter().map(|s| primary_sample(s, &ray, cfg)).collect()
        })
        .collect();
    let mut out = DepthMask {
        width: w,
        height: h,
        depth: vec![f64::INFINITY; w * h],
        object: vec![None; w * h],
        masks: vec![SoftImage::zeros(w, h); objects.len()],
    };
    for (k, per_object) in samples.iter().enumerate() {
        for (o, s) in per_object.iter().enumerate() {
            out.masks[o].values[k] = s.mask;
            if let Some(hit) = s.hit {
                if hit.depth < out.depth[k] {
                    out.depth[k] = hit.depth;
                    out.object[k] = Some(o);
                }
            }
        }
    }
    Ok(out)
}
