use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Joint error of a reconstruction against ground truth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub label: String,
    /// Euclidean distance per joint (meters).
    pub per_joint: Vec<f64>,
    /// Bounding-box diagonal of the truth joints; every distance is divided
    /// by it.
    pub normalization: f64,
    pub mean_normalized: f64,
    /// Silhouette IoU of the reconstruction, when measured.
    pub iou: Option<f64>,
}

impl MetricReport {
    pub fn normalized(&self) -> Vec<f64> {
        self.per_joint.iter().map(|d| d / self.normalization).collect()
    }
}

/// Mean per-joint distance divided by the truth skeleton's axis-aligned
/// bounding-box diagonal.
pub fn keypoint_metric(label: &str, predicted: &[Vec3], truth: &[Vec3]) -> Result<MetricReport> {
    if predicted.len() != truth.len() {
        return Err(Error::Invalid(format!(
            "{} predicted joints for {} truth joints",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::Invalid("need at least two truth joints".into()));
    }
    let (mut lo, mut hi) = (truth[0], truth[0]);
    for p in truth {
        lo = lo.min_by_component(*p);
        hi = hi.max_by_component(*p);
    }
    let normalization = (hi - lo).norm();
    if !(normalization > 0.0) {
        return Err(Error::Domain("truth joints are coincident".into()));
    }
    let per_joint: Vec<f64> = predicted.iter().zip(truth).map(|(p, q)| (*p - *q).norm()).collect();
    if per_joint.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("predicted joints".into()));
    }
    let mean_normalized = per_joint.iter().sum::<f64>() / per_joint.len() as f64 / normalization;
    Ok(MetricReport {
        label: label.to_string(),
        per_joint,
        normalization,
        mean_normalized,
        iou: None,
    })
}
