//! Two-stage fitting: mirror objects from depth and masks, then the emitter
//! from the reflection silhouette.

mod human;
mod init;
mod loss;
mod object;

pub use human::{fit_human, silhouette_objective, HumanObjective};
pub use init::{InitBounds, sample_emitter, sample_shape};
pub use loss::{loss_object, loss_silhouette, loss_silhouette_grad, ObjectLoss, ObjectObservation};
pub use object::fit_object;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diff::ParamVector;
use crate::error::{Error, Result};
use crate::render::SigmaSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Adam step size at the first iteration, decayed geometrically to
    /// `lr_final` at the last.
    pub lr: f64,
    pub lr_final: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Defaults to 5 for objects and 8 for the emitter.
    pub restarts: Option<usize>,
    pub w_prior_obj: f64,
    pub w_prior_h: f64,
    pub sigma: SigmaSchedule,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lr: 1e-2,
            lr_final: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 300,
            restarts: None,
            w_prior_obj: 1e-3,
            w_prior_h: 1e-3,
            sigma: SigmaSchedule::default(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lr_final > 0.0 && self.lr_final.is_finite()) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.restarts == Some(0) {
            return bad("restarts must be at least 1");
        }
        if self.w_prior_obj < 0.0 || self.w_prior_h < 0.0 {
            return bad("prior weights must be non-negative");
        }
        if !(self.sigma.initial > 0.0 && self.sigma.floor > 0.0 && self.sigma.factor > 0.0) {
            return bad("sigma schedule must be positive");
        }
        Ok(())
    }

    pub fn lr_at(&self, iteration: usize) -> f64 {
        if self.max_iters <= 1 {
            return self.lr;
        }
        let f = iteration as f64 / (self.max_iters - 1) as f64;
        self.lr * (self.lr_final / self.lr).powf(f.min(1.0))
    }

    fn restart_seed(&self, restart: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(restart as u64)
    }
}

/// Adam moments for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Adam {
        Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn from_config(n: usize, cfg: &FitConfig) -> Adam {
        Adam::new(n, cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon)
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }
}

/// One bias-corrected Adam update of `params` in place; returns the applied
/// increment.
pub fn adam_step(state: &mut Adam, params: &mut ParamVector, grads: &ParamVector) -> Result<Vec<f64>> {
    if state.m.len() != params.len() || !params.same_layout(grads) {
        return Err(Error::Invalid(format!(
            "optimizer state for {} parameters, got {} parameters and {} gradients",
            state.m.len(),
            params.len(),
            grads.len()
        )));
    }
    if let Some(label) = grads.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient at {label}")));
    }
    state.t += 1;
    let c1 = 1.0 - state.beta1.powi(state.t);
    let c2 = 1.0 - state.beta2.powi(state.t);
    let mut delta = vec![0.0; params.len()];
    for (k, &g) in grads.values().iter().enumerate() {
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
        let mh = state.m[k] / c1;
        let vh = state.v[k] / c2;
        delta[k] = -state.lr * mh / (vh.sqrt() + state.epsilon);
    }
    for (p, d) in params.values_mut().iter_mut().zip(&delta) {
        *p += d;
    }
    Ok(delta)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub restart: usize,
    pub iteration: usize,
    pub sigma: f64,
    pub total: f64,
    pub terms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    /// Absolute parameters of the winning restart.
    pub best: ParamVector,
    pub term_names: Vec<String>,
    /// Final loss of the winner, total then per term.
    pub final_total: f64,
    pub final_terms: Vec<f64>,
    /// Final total per restart; `None` for aborted restarts.
    pub restart_losses: Vec<Option<f64>>,
    pub best_restart: usize,
    pub trace: Vec<TraceRow>,
    pub seconds: f64,
}

impl FitResult {
    /// CSV loss trace: `restart,iteration,sigma,total,<terms>`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("restart,iteration,sigma,total");
        for n in &self.term_names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for r in &self.trace {
            let _ = write!(s, "{},{},{:e},{:e}", r.restart, r.iteration, r.sigma, r.total);
            for t in &r.terms {
                let _ = write!(s, ",{t:e}");
            }
            s.push('\n');
        }
        s
    }

    /// Plain-text summary.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "best restart: {}", self.best_restart);
        let _ = writeln!(s, "final loss: {:.6e}", self.final_total);
        for (n, v) in self.term_names.iter().zip(&self.final_terms) {
            let _ = writeln!(s, "  {n}: {v:.6e}");
        }
        for (k, l) in self.restart_losses.iter().enumerate() {
            match l {
                Some(l) => {
                    let _ = writeln!(s, "restart {k}: {l:.6e}");
                }
                None => {
                    let _ = writeln!(s, "restart {k}: aborted");
                }
            }
        }
        for seg in self.best.segments() {
            let vals = self.best.segment(&seg.name).unwrap_or(&[]);
            let joined: Vec<String> = vals.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "{} = [{}]", seg.name, joined.join(", "));
        }
        let _ = writeln!(s, "seconds: {:.2}", self.seconds);
        s
    }
}

/// Picks the restart with the smallest final loss.
fn pick_best<T>(runs: Vec<Option<(T, f64, Vec<f64>)>>) -> Result<(usize, T, f64, Vec<f64>, Vec<Option<f64>>)> {
    let losses: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().map(|r| r.1)).collect();
    let best = (0..runs.len())
        .filter(|&k| losses[k].is_some())
        .min_by(|&a, &b| losses[a].unwrap().total_cmp(&losses[b].unwrap()))
        .ok_or_else(|| Error::NonFinite("every restart diverged".into()))?;
    let (model, total, terms) = runs.into_iter().nth(best).flatten().expect("chosen restart exists");
    Ok((best, model, total, terms, losses))
}
