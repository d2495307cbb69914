use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, loss_silhouette_grad, pick_best, sample_emitter, Adam, FitConfig, FitResult, InitBounds, TraceRow};
use crate::diff::{Objective, ParamVector};
use crate::emitter::{pose_prior, EmitterModel};
use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::render::{edge_sample_rays, EmitterGeometry, MirrorMap, ReflectionPass, RenderConfig, SoftImage};
use crate::scene::Scene;

/// Silhouette loss of the emitter against an observation, with the mirrors
/// traced once and frozen.
pub struct HumanObjective {
    pub map: MirrorMap,
    pub observed: SoftImage,
    pub cfg: RenderConfig,
    pub segments: usize,
    pub w_prior: f64,
    /// Emitter the parameter steps of [`Objective`] are applied to.
    pub base: EmitterModel,
}

/// Loss value, its terms and the emitter gradient.
pub struct HumanLoss {
    pub total: f64,
    pub silhouette: f64,
    pub prior: f64,
    pub gradient: Option<Vec<f64>>,
}

impl HumanObjective {
    pub fn new(
        scene: &Scene,
        cam: &Camera,
        observed: &SoftImage,
        cfg: &RenderConfig,
        w_prior: f64,
    ) -> Result<HumanObjective> {
        cfg.validate()?;
        if observed.width != cam.width || observed.height != cam.height {
            return Err(Error::Invalid("observed silhouette does not match the camera".into()));
        }
        if !observed.is_binary() {
            return Err(Error::Invalid("observed silhouette must be binary".into()));
        }
        Ok(HumanObjective {
            map: MirrorMap::build(&scene.objects, cam, cfg)?,
            observed: observed.clone(),
            cfg: *cfg,
            segments: scene.segments,
            w_prior,
            base: scene.emitter.clone(),
        })
    }

    /// Loss over `pixels` (every pixel when `None`) at softness `sigma`.
    pub fn eval(&self, model: &EmitterModel, sigma: f64, pixels: Option<&[usize]>, grad: bool) -> Result<HumanLoss> {
        let geom = EmitterGeometry::new(model, self.segments, sigma)?;
        let all: Vec<usize>;
        let pixels = match pixels {
            Some(p) => p,
            None => {
                all = (0..self.map.hits.len()).collect();
                &all
            }
        };
        let pass = ReflectionPass::forward(&self.map, &geom, pixels, grad)?;
        let (sil, dimg) = loss_silhouette_grad(&pass.image, &self.observed)?;
        let prior = self.w_prior * pose_prior(model);
        let gradient = grad.then(|| {
            let dl: Vec<f64> = pixels.iter().map(|&p| dimg[p]).collect();
            let mut g = pass.emitter_gradient(&geom, model, &dl);
            for (gi, z) in g[6..].iter_mut().zip(model.latent()) {
                *gi += 2.0 * self.w_prior * z;
            }
            g
        });
        Ok(HumanLoss {
            total: sil + prior,
            silhouette: sil,
            prior,
            gradient,
        })
    }

    fn stepped(&self, x: &ParamVector) -> Result<EmitterModel> {
        let mut m = self.base.clone();
        m.apply_step(x.values())?;
        Ok(m)
    }

    /// Zero step over the emitter parameters.
    pub fn origin(&self) -> ParamVector {
        ParamVector::new()
            .with("emitter.placement", &[0.0; 6])
            .and_then(|p| p.with("emitter.latent", &vec![0.0; self.base.latent().len()]))
            .expect("unique segment names")
    }
}

/// Full-image loss at `cfg.sigma` as a function of an emitter step.
impl Objective for HumanObjective {
    fn value(&self, x: &ParamVector) -> Result<f64> {
        Ok(self.eval(&self.stepped(x)?, self.cfg.sigma, None, false)?.total)
    }

    fn gradient(&self, x: &ParamVector) -> Result<(f64, Vec<f64>)> {
        let l = self.eval(&self.stepped(x)?, self.cfg.sigma, None, true)?;
        Ok((l.total, l.gradient.expect("requested")))
    }
}

pub fn silhouette_objective(
    scene: &Scene,
    cam: &Camera,
    observed: &SoftImage,
    cfg: &RenderConfig,
    w_prior: f64,
) -> Result<HumanObjective> {
    HumanObjective::new(scene, cam, observed, cfg, w_prior)
}

/// Absolute emitter parameters: translation, axis-angle, latent.
pub(crate) fn emitter_params(model: &EmitterModel) -> ParamVector {
    let pl = model.placement();
    ParamVector::new()
        .with("translation", &pl.translation.to_array())
        .and_then(|p| p.with("rotation", &pl.rotation.to_axis_angle().to_array()))
        .and_then(|p| p.with("latent", model.latent()))
        .expect("unique segment names")
}

/// Multi-restart fit of the emitter to the observed reflection silhouette
/// with the mirror objects held fixed.
pub fn fit_human(
    scene: &Scene,
    bounds: &InitBounds,
    cam: &Camera,
    observed: &SoftImage,
    rcfg: &RenderConfig,
    cfg: &FitConfig,
) -> Result<(EmitterModel, FitResult)> {
    cfg.validate()?;
    bounds.validate()?;
    if !observed.values.iter().any(|&v| v > 0.5) {
        return Err(Error::Invalid("observed silhouette is empty, nothing to fit".into()));
    }
    let start = Instant::now();
    let objective = HumanObjective::new(scene, cam, observed, rcfg, cfg.w_prior_h)?;
    let final_sigma = cfg.sigma.at(cfg.max_iters.saturating_sub(1));
    let restarts = cfg.restarts.unwrap_or(8);
    let mut trace = Vec::new();
    let mut runs = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.restart_seed(r));
        let run = (|| -> Result<(EmitterModel, f64, Vec<f64>)> {
            let mut model = sample_emitter(&scene.emitter, bounds, &mut rng)?;
            let layout = objective.origin();
            let mut params = layout.clone();
            let mut adam = Adam::from_config(layout.len(), cfg);
            for it in 0..cfg.max_iters {
                let sigma = cfg.sigma.at(it);
                let pixels = edge_sample_rays(observed, it, rcfg, &mut rng)?;
                let loss = objective.eval(&model, sigma, Some(&pixels), true)?;
                trace.push(TraceRow {
                    restart: r,
                    iteration: it,
                    sigma,
                    total: loss.total,
                    terms: vec![loss.silhouette, loss.prior],
                });
                adam.lr = cfg.lr_at(it);
                let g = layout.with_values(loss.gradient.expect("requested"))?;
                let step = adam_step(&mut adam, &mut params, &g)?;
                model.apply_step(&step)?;
            }
            let last = objective.eval(&model, final_sigma, None, false)?;
            Ok((model, last.total, vec![last.silhouette, last.prior]))
        })();
        match run {
            Ok(v) if v.1.is_finite() => runs.push(Some(v)),
            Ok(_) => {
                log::warn!("emitter restart {r}: non-finite loss, restart aborted");
                runs.push(None);
            }
            Err(e) => {
                log::warn!("emitter restart {r} aborted: {e}");
                runs.push(None);
            }
        }
    }
    let (best_restart, model, total, terms, restart_losses) = pick_best(runs)?;
    let result = FitResult {
        best: emitter_params(&model),
        term_names: vec!["silhouette".into(), "prior".into()],
        final_total: total,
        final_terms: terms,
        restart_losses,
        best_restart,
        trace,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((model, result))
}
