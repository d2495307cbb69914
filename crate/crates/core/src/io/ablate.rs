use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optimize::fit_human;
use crate::geometry::Camera;
use crate::render::{mask_iou, render_reflection_hard, RenderConfig, SoftImage};
use crate::scene::Scene;

use super::metric::{keypoint_metric, MetricReport};
use super::scene_file::LoadedScene;

/// Renderer degradations compared against the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Full,
    NoEdgeSampling,
    /// Single sphere-tracing step after the coarse hit instead of refining.
    SphereSteps1,
    NoSmoothing,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoEdgeSampling,
        Variant::SphereSteps1,
        Variant::NoSmoothing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoEdgeSampling => "no-edge-sampling",
            Variant::SphereSteps1 => "sphere-steps-1",
            Variant::NoSmoothing => "no-smoothing",
        }
    }

    pub fn apply(self, cfg: &RenderConfig) -> RenderConfig {
        match self {
            Variant::Full => *cfg,
            Variant::NoEdgeSampling => RenderConfig {
                edge_sampling: false,
                ..*cfg
            },
            Variant::SphereSteps1 => RenderConfig { sphere_steps: 1, ..*cfg },
            Variant::NoSmoothing => RenderConfig {
                smoothing: false,
                ..*cfg
            },
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
            Error::Invalid(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: Variant,
    pub outcome: std::result::Result<(MetricReport, f64), String>,
}

#[derive(Clone, Debug)]
pub struct AblationTable {
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn error_of(&self, v: Variant) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == v)
            .and_then(|r| r.outcome.as_ref().ok())
            .map(|(m, _)| m.mean_normalized)
    }

    /// One row per variant: `variant,seed,mean_normalized_error,normalization,iou,final_loss,error`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format(format!("writing CSV: {e}"));
        w.write_record(["variant", "seed", "mean_normalized_error", "normalization", "iou", "final_loss", "error"])
            .map_err(csv_err)?;
        for r in &self.rows {
            let seed = self.seed.to_string();
            let rec: Vec<String> = match &r.outcome {
                Ok((m, loss)) => vec![
                    r.variant.name().into(),
                    seed,
                    format!("{:.6}", m.mean_normalized),
                    format!("{:.6}", m.normalization),
                    m.iou.map(|v| format!("{v:.6}")).unwrap_or_default(),
                    format!("{loss:.6e}"),
                    String::new(),
                ],
                Err(e) => vec![
                    r.variant.name().into(),
                    seed,
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ],
            };
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(format!("writing CSV: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// IoU of the hard reflection silhouette of `scene` against `observed`.
/// Marching runs to convergence; normal smoothing follows `base`, so every
/// ablation variant is scored through the same mirror model.
pub fn reflection_iou(scene: &Scene, cam: &Camera, observed: &SoftImage, base: &RenderConfig) -> Result<f64> {
    let cfg = RenderConfig {
        sphere_steps: base.max_march,
        ..*base
    };
    let hard = render_reflection_hard(scene, cam, &cfg)?;
    Ok(mask_iou(&hard.threshold(0.5), &observed.threshold(0.5)))
}

/// Fits the emitter once per variant with the scene's seed and budgets and
/// scores each fit against the truth joints. A failing variant is recorded
/// in its row and does not stop the others.
pub fn ablate_run(loaded: &LoadedScene, variants: &[Variant]) -> Result<AblationTable> {
    let truth = loaded.file.truth_joints()?;
    let observed = loaded.silhouette()?;
    let file = &loaded.file;
    let rows = variants
        .iter()
        .map(|&variant| {
            let outcome = (|| -> Result<(MetricReport, f64)> {
                let rcfg = variant.apply(&file.render);
                let (model, fit) = fit_human(
                    &loaded.scene,
                    &loaded.emitter_init,
                    &loaded.camera,
                    observed,
                    &rcfg,
                    &file.fit_human,
                )?;
                let mut report = keypoint_metric(variant.name(), &model.joint_positions(), &truth)?;
                let mut scene = loaded.scene.clone();
                scene.emitter = model;
                report.iou = Some(reflection_iou(&scene, &loaded.camera, observed, &file.render)?);
                Ok((report, fit.final_total))
            })();
            if let Err(e) = &outcome {
                log::warn!("variant {variant} failed: {e}");
            }
            AblationRow {
                variant,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(AblationTable { seed: file.seed, rows })
}
