//! Differentiable reflection rendering: camera ray -> mirror hit -> reflected
//! ray -> soft occupancy of the emitter mesh.

mod edge;
mod emit;
mod mirror;

pub use edge::{edge_pixels, edge_sample_rays, EdgeSampler};
pub use emit::{
    render_reflection, render_reflection_hard, EmitterGeometry, ReflectionPass, RayOccupancy,
};
pub use mirror::{
    primary_sample, render_depth_mask, smoothed_normal, DepthMask, MirrorHit, MirrorMap,
    PrimarySample,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::sdf::TraceConfig;

/// Occupancy terms with `|lambda d^2 / sigma|` beyond this are dropped
/// (their influence is below 1e-17).
pub const CULL_EXPONENT: f64 = 40.0;

/// Geometric decay of the softness `sigma` during fitting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SigmaSchedule {
    pub initial: f64,
    pub factor: f64,
    pub every: usize,
    pub floor: f64,
}

impl Default for SigmaSchedule {
    fn default() -> Self {
        SigmaSchedule {
            initial: 1e-2,
            factor: 0.5,
            every: 200,
            floor: 1e-4,
        }
    }
}

impl SigmaSchedule {
    pub fn at(&self, iteration: usize) -> f64 {
        let k = if self.every == 0 { 0 } else { iteration / self.every };
        (self.initial * self.factor.powi(k.min(i32::MAX as usize) as i32)).max(self.floor)
    }
}

/// Curriculum of the edge sampler: the uniform share decays linearly, the
/// Gaussian bandwidth around edges geometrically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeSchedule {
    pub uniform_floor: f64,
    pub uniform_horizon: f64,
    pub bandwidth: f64,
    pub bandwidth_decay: f64,
    pub bandwidth_floor: f64,
}

impl Default for EdgeSchedule {
    fn default() -> Self {
        EdgeSchedule {
            uniform_floor: 0.1,
            uniform_horizon: 500.0,
            bandwidth: 8.0,
            bandwidth_decay: 0.99,
            bandwidth_floor: 1.0,
        }
    }
}

impl EdgeSchedule {
    /// Probability of drawing a uniform pixel at `iteration`.
    pub fn uniform_weight(&self, iteration: usize) -> f64 {
        (1.0 - iteration as f64 / self.uniform_horizon).max(self.uniform_floor)
    }

    /// Kernel radius (pixels) around an edge pixel; the offset standard
    /// deviation is half of it.
    pub fn bandwidth_at(&self, iteration: usize) -> f64 {
        (self.bandwidth * self.bandwidth_decay.powf(iteration as f64)).max(self.bandwidth_floor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    /// Softness of the occupancy, in squared units of the emitter's rest
    /// bounding radius.
    pub sigma: f64,
    /// Marching steps taken after the first iterate within `coarse_tol`.
    pub sphere_steps: usize,
    pub coarse_tol: f64,
    pub eps: f64,
    /// Cap on marching steps for deciding hit or miss.
    pub max_march: usize,
    pub max_depth: f64,
    pub smoothing: bool,
    /// Neighbor-ray offset for normal smoothing, in pixels.
    pub smoothing_offset: f64,
    pub edge_sampling: bool,
    pub edge_schedule: EdgeSchedule,
    /// Rays per fitting iteration.
    pub ray_budget: usize,
    /// Softness of the primary-ray object mask (meters).
    pub sigma_mask: f64,
    /// Verify the law of reflection at every hit.
    pub debug_checks: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            sigma: 1e-2,
            sphere_steps: 3,
            coarse_tol: 1e-2,
            eps: 1e-4,
            max_march: 128,
            max_depth: 100.0,
            smoothing: true,
            smoothing_offset: 0.5,
            edge_sampling: true,
            edge_schedule: EdgeSchedule::default(),
            ray_budget: 4096,
            sigma_mask: 2e-3,
            debug_checks: false,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.sphere_steps < 1 {
            return Err(Error::Invalid("sphere_steps must be at least 1".into()));
        }
        if self.ray_budget < 1 {
            return Err(Error::Invalid("ray_budget must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.coarse_tol > 0.0 && self.sigma_mask > 0.0) {
            return Err(Error::Invalid("eps, coarse_tol and sigma_mask must be positive".into()));
        }
        if !(self.smoothing_offset >= 0.0) {
            return Err(Error::Invalid("smoothing_offset must be non-negative".into()));
        }
        Ok(())
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            max_steps: self.max_march,
            eps: self.eps,
            max_depth: self.max_depth,
        }
    }
}

/// Per-pixel values in [0, 1], defined where `sampled` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub sampled: Vec<bool>,
}

impl SoftImage {
    /// All pixels sampled, all zero.
    pub fn zeros(width: usize, height: usize) -> SoftImage {
        SoftImage {
            width,
            height,
            values: vec![0.0; width * height],
            sampled: vec![true; width * height],
        }
    }

    /// No pixel sampled yet.
    pub fn unsampled(width: usize, height: usize) -> SoftImage {
        SoftImage {
            width,
            height,
            values: vec![0.0; width * height],
            sampled: vec![false; width * height],
        }
    }

    pub fn from_binary(width: usize, height: usize, bits: &[bool]) -> SoftImage {
        SoftImage {
            width,
            height,
            values: bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            sampled: vec![true; width * height],
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.width * j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// `value >= threshold` per pixel (unsampled pixels are false).
    pub fn threshold(&self, threshold: f64) -> Vec<bool> {
        self.values
            .iter()
            .zip(&self.sampled)
            .map(|(&v, &s)| s && v >= threshold)
            .collect()
    }

    pub fn count_sampled(&self) -> usize {
        self.sampled.iter().filter(|&&s| s).count()
    }
}

/// Intersection over union of two binary masks; 1 when both are empty.
pub fn mask_iou(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Mirror reflection of the unit direction `r` about the normal `n`
/// (any nonzero length).
pub fn reflect(r: Vec3, n: Vec3) -> Result<Vec3> {
    let len = n.norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::Domain("reflection normal must be nonzero".into()));
    }
    let n = n / len;
    Ok(r - n * (2.0 * r.dot(n)))
}

/// Influence of one triangle on one ray: `sigmoid(lambda d^2 / sigma)`.
pub fn soft_influence(d: f64, lambda: i32, sigma: f64) -> f64 {
    sigmoid(lambda as f64 * d * d / sigma)
}

/// `1 - prod(1 - d_j)`.
pub fn aggregate_occupancy(influences: &[f64]) -> f64 {
    1.0 - influences.iter().fold(1.0, |acc, d| acc * (1.0 - d))
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
