//! Named parameter vectors and the finite-difference gradient auditor.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scene::Scene;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Flat real vector split into named, contiguous segments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    segments: Vec<Segment>,
}

impl ParamVector {
    pub fn new() -> ParamVector {
        ParamVector::default()
    }

    /// Appends a segment; names must be unique.
    pub fn push(&mut self, name: &str, values: &[f64]) -> Result<()> {
        if self.segments.iter().any(|s| s.name == name) {
            return Err(Error::Invalid(format!("duplicate parameter segment {name}")));
        }
        self.segments.push(Segment {
            name: name.to_string(),
            start: self.values.len(),
            len: values.len(),
        });
        self.values.extend_from_slice(values);
        Ok(())
    }

    pub fn with(mut self, name: &str, values: &[f64]) -> Result<ParamVector> {
        self.push(name, values)?;
        Ok(self)
    }

    /// Segment layout of `self` with every value replaced by `values`.
    pub fn with_values(&self, values: Vec<f64>) -> Result<ParamVector> {
        if values.len() != self.values.len() {
            return Err(Error::Invalid(format!(
                "{} values for a parameter vector of length {}",
                values.len(),
                self.values.len()
            )));
        }
        Ok(ParamVector {
            values,
            segments: self.segments.clone(),
        })
    }

    pub fn zeros_like(&self) -> ParamVector {
        ParamVector {
            values: vec![0.0; self.values.len()],
            segments: self.segments.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        let s = self.segments.iter().find(|s| s.name == name)?;
        Some(&self.values[s.start..s.start + s.len])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let s = self.segments.iter().find(|s| s.name == name)?;
        Some(&mut self.values[s.start..s.start + s.len])
    }

    /// `segment[offset]` for flat index `k`, e.g. `emitter.placement[2]`.
    pub fn label(&self, k: usize) -> String {
        match self.segments.iter().find(|s| k >= s.start && k < s.start + s.len) {
            Some(s) => format!("{}[{}]", s.name, k - s.start),
            None => format!("[{k}]"),
        }
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.segments == other.segments
    }

    /// Label of the first non-finite entry.
    pub fn first_non_finite(&self) -> Option<String> {
        self.values.iter().position(|v| !v.is_finite()).map(|k| self.label(k))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Zero step over every scene parameter: `object{i}.placement` (7),
    /// `object{i}.latent`, `emitter.placement` (6), `emitter.latent`.
    pub fn scene_step(scene: &Scene) -> ParamVector {
        let mut p = ParamVector::new();
        for (i, o) in scene.objects.iter().enumerate() {
            p.push(&format!("object{i}.placement"), &[0.0; 7]).expect("unique");
            p.push(&format!("object{i}.latent"), &vec![0.0; o.latent().len()])
                .expect("unique");
        }
        p.push("emitter.placement", &[0.0; 6]).expect("unique");
        p.push("emitter.latent", &vec![0.0; scene.emitter.latent().len()])
            .expect("unique");
        p
    }

    /// Emitter-only zero step.
    pub fn emitter_step(scene: &Scene) -> ParamVector {
        ParamVector::new()
            .with("emitter.placement", &[0.0; 6])
            .and_then(|p| p.with("emitter.latent", &vec![0.0; scene.emitter.latent().len()]))
            .expect("unique")
    }
}

/// `scene` moved by a step laid out like [`ParamVector::scene_step`] or a
/// subset of its segments.
pub fn apply_scene_step(scene: &Scene, step: &ParamVector) -> Result<Scene> {
    if let Some(label) = step.first_non_finite() {
        return Err(Error::NonFinite(format!("parameter step at {label}")));
    }
    let mut out = scene.clone();
    for (i, o) in out.objects.iter_mut().enumerate() {
        let pl = step.segment(&format!("object{i}.placement"));
        let lt = step.segment(&format!("object{i}.latent"));
        if pl.is_none() && lt.is_none() {
            continue;
        }
        let mut full = vec![0.0; o.param_count()];
        if let Some(pl) = pl {
            full[..7].copy_from_slice(pl);
        }
        if let Some(lt) = lt {
            full[7..].copy_from_slice(lt);
        }
        o.apply_step(&full)?;
    }
    let pl = step.segment("emitter.placement");
    let lt = step.segment("emitter.latent");
    if pl.is_some() || lt.is_some() {
        let mut full = vec![0.0; out.emitter.param_count()];
        if let Some(pl) = pl {
            full[..6].copy_from_slice(pl);
        }
        if let Some(lt) = lt {
            full[6..].copy_from_slice(lt);
        }
        out.emitter.apply_step(&full)?;
    }
    Ok(out)
}

/// A scalar loss with an analytic gradient.
pub trait Objective: Sync {
    fn value(&self, x: &ParamVector) -> Result<f64>;
    /// Value and gradient, laid out like `x`.
    fn gradient(&self, x: &ParamVector) -> Result<(f64, Vec<f64>)>;
}

/// Objective from a pair of closures.
pub struct FnObjective<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V, G> Objective for FnObjective<V, G>
where
    V: Fn(&ParamVector) -> Result<f64> + Sync,
    G: Fn(&ParamVector) -> Result<(f64, Vec<f64>)> + Sync,
{
    fn value(&self, x: &ParamVector) -> Result<f64> {
        (self.value)(x)
    }
    fn gradient(&self, x: &ParamVector) -> Result<(f64, Vec<f64>)> {
        (self.gradient)(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub labels: Vec<String>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `|a_k - f_k| / max(||f||, 1e-12)` per coordinate.
    pub coord_error: Vec<f64>,
    /// `||a - f|| / max(||f||, 1e-12)`.
    pub rel_error: f64,
    pub tol: f64,
    /// Coordinates whose `coord_error` exceeds `tol`.
    pub failing: Vec<usize>,
}

impl GradReport {
    pub fn from_parts(labels: Vec<String>, analytic: Vec<f64>, numeric: Vec<f64>, tol: f64) -> GradReport {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = norm(&numeric).max(1e-12);
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, f)| a - f).collect();
        let coord_error: Vec<f64> = diff.iter().map(|d| d.abs() / scale).collect();
        let failing = (0..coord_error.len()).filter(|&k| !(coord_error[k] <= tol)).collect();
        GradReport {
            labels,
            rel_error: norm(&diff) / scale,
            analytic,
            numeric,
            coord_error,
            tol,
            failing,
        }
    }

    pub fn passed(&self) -> bool {
        self.rel_error <= self.tol && self.failing.is_empty()
    }

    /// Plain-text table, one row per coordinate.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<28} {:>16} {:>16} {:>10}\n",
            "parameter", "analytic", "numeric", "error"
        );
        for k in 0..self.labels.len() {
            let flag = if self.failing.contains(&k) { "  FAIL" } else { "" };
            s.push_str(&format!(
                "{:<28} {:>16.9e} {:>16.9e} {:>10.3e}{flag}\n",
                self.labels[k], self.analytic[k], self.numeric[k], self.coord_error[k]
            ));
        }
        s.push_str(&format!(
            "relative error {:.3e} (tol {:.1e}): {}\n",
            self.rel_error,
            self.tol,
            if self.passed() { "pass" } else { "fail" }
        ));
        s
    }
}

/// Central differences on every coordinate of `at`, compared against the
/// objective's analytic gradient.
pub fn gradcheck(loss: &dyn Objective, at: &ParamVector, h: f64, tol: f64) -> Result<GradReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("finite-difference step {h}")));
    }
    let (f0, analytic) = loss.gradient(at)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite("loss at the base point".into()));
    }
    if analytic.len() != at.len() {
        return Err(Error::Invalid(format!(
            "gradient of length {} for {} parameters",
            analytic.len(),
            at.len()
        )));
    }
    if let Some(k) = analytic.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("analytic gradient at {}", at.label(k))));
    }
    let numeric: Vec<f64> = (0..at.len())
        .into_par_iter()
        .map(|k| {
            let eval = |sign: f64| -> Result<f64> {
                let mut x = at.clone();
                x.values[k] += sign * h;
                let v = loss.value(&x)?;
                if !v.is_finite() {
                    let side = if sign > 0.0 { "+h" } else { "-h" };
                    return Err(Error::NonFinite(format!("loss at {} {side}", at.label(k))));
                }
                Ok(v)
            };
            Ok((eval(1.0)? - eval(-1.0)?) / (2.0 * h))
        })
        .collect::<Result<_>>()?;
    let labels = (0..at.len()).map(|k| at.label(k)).collect();
    Ok(GradReport::from_parts(labels, analytic, numeric, tol))
}
