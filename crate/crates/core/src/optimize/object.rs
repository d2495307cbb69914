use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, loss_object, pick_best, sample_shape, Adam, FitConfig, FitResult, InitBounds, ObjectObservation, TraceRow};
use crate::diff::ParamVector;
use crate::error::Result;
use crate::geometry::Camera;
use crate::render::RenderConfig;
use crate::sdf::{SdfShape, PLACEMENT_PARAMS};

/// Absolute parameters of a shape: translation, axis-angle, scale, latent.
pub(crate) fn shape_params(shape: &SdfShape) -> ParamVector {
    let pl = shape.placement();
    ParamVector::new()
        .with("translation", &pl.translation.to_array())
        .and_then(|p| p.with("rotation", &pl.rotation.to_axis_angle().to_array()))
        .and_then(|p| p.with("scale", &[pl.scale]))
        .and_then(|p| p.with("latent", shape.latent()))
        .expect("unique segment names")
}

/// Multi-restart fit of one object's placement, scale and latent to its
/// depth and mask. Scale is optimized in log space.
pub fn fit_object(
    base: &SdfShape,
    bounds: &InitBounds,
    cam: &Camera,
    obs: &ObjectObservation,
    rcfg: &RenderConfig,
    cfg: &FitConfig,
) -> Result<(SdfShape, FitResult)> {
    cfg.validate()?;
    rcfg.validate()?;
    bounds.validate()?;
    let start = Instant::now();
    let restarts = cfg.restarts.unwrap_or(5);
    let mut trace = Vec::new();
    let mut runs = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.restart_seed(r));
        let run = (|| -> Result<(SdfShape, f64, Vec<f64>)> {
            let mut shape = sample_shape(base, bounds, &mut rng)?;
            let layout = ParamVector::new()
                .with("placement", &[0.0; PLACEMENT_PARAMS])?
                .with("latent", &vec![0.0; shape.latent().len()])?;
            let mut params = layout.clone();
            let mut adam = Adam::from_config(layout.len(), cfg);
            for it in 0..cfg.max_iters {
                let loss = loss_object(&shape, cam, obs, rcfg, cfg.w_prior_obj, true)?;
                trace.push(TraceRow {
                    restart: r,
                    iteration: it,
                    sigma: rcfg.sigma_mask,
                    total: loss.total,
                    terms: loss.terms(),
                });
                let mut g = loss.gradient.expect("requested");
                let s = shape.placement().scale;
                g[6] *= s;
                adam.lr = cfg.lr_at(it);
                let mut step = adam_step(&mut adam, &mut params, &layout.with_values(g)?)?;
                step[6] = s * step[6].exp_m1();
                shape.apply_step(&step)?;
            }
            let last = loss_object(&shape, cam, obs, rcfg, cfg.w_prior_obj, false)?;
            Ok((shape, last.total, last.terms()))
        })();
        match run {
            Ok(v) if v.1.is_finite() => runs.push(Some(v)),
            Ok(_) => {
                log::warn!("object {} restart {r}: non-finite loss, restart aborted", obs.object);
                runs.push(None);
            }
            Err(e) => {
                log::warn!("object {} restart {r} aborted: {e}", obs.object);
                runs.push(None);
            }
        }
    }
    let (best_restart, shape, total, terms, restart_losses) = pick_best(runs)?;
    let result = FitResult {
        best: shape_params(&shape),
        term_names: vec!["depth".into(), "mask".into(), "prior".into()],
        final_total: total,
        final_terms: terms,
        restart_losses,
        best_restart,
        trace,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((shape, result))
}
