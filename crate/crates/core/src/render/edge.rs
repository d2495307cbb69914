use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{EdgeSchedule, RenderConfig, SoftImage};
use crate::error::{Error, Result};

/// Pixels with at least one 4-neighbor of a different value.
pub fn edge_pixels(image: &SoftImage) -> Vec<usize> {
    let (w, h) = (image.width, image.height);
    let mut out = Vec::new();
    for j in 0..h {
        for i in 0..w {
            let v = image.get(i, j);
            let differs = (i > 0 && image.get(i - 1, j) != v)
                || (i + 1 < w && image.get(i + 1, j) != v)
                || (j > 0 && image.get(i, j - 1) != v)
                || (j + 1 < h && image.get(i, j + 1) != v);
            if differs {
                out.push(image.index(i, j));
            }
        }
    }
    out
}

/// Mixture of a uniform pixel distribution and Gaussians centered on edge
/// pixels.
#[derive(Clone, Debug)]
pub struct EdgeSampler {
    width: usize,
    height: usize,
    edges: Vec<usize>,
    uniform: f64,
    offset: Normal<f64>,
}

impl EdgeSampler {
    pub fn new(observed: &SoftImage, iteration: usize, schedule: &EdgeSchedule) -> Result<EdgeSampler> {
        if !observed.is_binary() {
            return Err(Error::Invalid("edge sampling needs a binary image".into()));
        }
        let b = schedule.bandwidth_at(iteration);
        Ok(EdgeSampler {
            width: observed.width,
            height: observed.height,
            edges: edge_pixels(observed),
            uniform: schedule.uniform_weight(iteration),
            offset: Normal::new(0.0, 0.5 * b).map_err(|e| Error::Invalid(format!("bandwidth {b}: {e}")))?,
        })
    }

    /// Sampler that only draws uniformly.
    pub fn uniform(width: usize, height: usize) -> EdgeSampler {
        EdgeSampler {
            width,
            height,
            edges: Vec::new(),
            uniform: 1.0,
            offset: Normal::new(0.0, 1.0).expect("unit normal"),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let n = self.width * self.height;
        if self.edges.is_empty() || rng.random::<f64>() < self.uniform {
            return rng.random_range(0..n);
        }
        let e = self.edges[rng.random_range(0..self.edges.len())];
        let (ei, ej) = ((e % self.width) as f64, (e / self.width) as f64);
        let mut last = (ei, ej);
        for _ in 0..8 {
            let i = (ei + self.offset.sample(rng)).round();
            let j = (ej + self.offset.sample(rng)).round();
            last = (i, j);
            if i >= 0.0 && j >= 0.0 && i < self.width as f64 && j < self.height as f64 {
                break;
            }
        }
        let i = last.0.clamp(0.0, (self.width - 1) as f64) as usize;
        let j = last.1.clamp(0.0, (self.height - 1) as f64) as usize;
        i + self.width * j
    }
}

/// `cfg.ray_budget` draws (deduplicated, sorted) from the edge curriculum at
/// `iteration`, or uniformly when edge sampling is off or there are no edges.
pub fn edge_sample_rays<R: Rng>(
    observed: &SoftImage,
    iteration: usize,
    cfg: &RenderConfig,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let sampler = if cfg.edge_sampling {
        EdgeSampler::new(observed, iteration, &cfg.edge_schedule)?
    } else {
        EdgeSampler::uniform(observed.width, observed.height)
    };
    let mut px: Vec<usize> = (0..cfg.ray_budget).map(|_| sampler.draw(rng)).collect();
    px.sort_unstable();
    px.dedup();
    Ok(px)
}
