//! Ground-truth scenes written to disk with their observations, for tests
//! and demos.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::emitter::{EmitterModel, Skeleton};
use crate::error::{Error, Result};
use crate::geometry::{Quat, Se3Scale, Vec3};
use crate::optimize::{FitConfig, InitBounds};
use crate::render::{RenderConfig, SigmaSchedule};
use crate::scene::Scene;
use crate::sdf::{write_grid, FamilyKind, SdfShape};
use crate::synthetic::{observe_objects, observe_silhouette};

use super::image::{write_pfm, write_pgm};
use super::scene_file::{
    parse_scene, CameraDecl, EmitterDecl, ObjectDecl, ObservationDecl, SceneFile, ShapeTruth, TruthDecl,
    SCENE_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// A bowl mirror reflecting a posed 17-joint emitter; observation is the
    /// reflection silhouette.
    Human,
    /// A single bowl seen by a depth camera, with noise and holes.
    Bowl,
    /// A single rounded box seen by a depth camera, with noise and holes.
    RoundedBox,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [SyntheticKind::Human, SyntheticKind::Bowl, SyntheticKind::RoundedBox];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Human => "human",
            SyntheticKind::Bowl => "bowl",
            SyntheticKind::RoundedBox => "rounded-box",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SyntheticKind> {
        SyntheticKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Invalid(format!("unknown synthetic scene {s:?}; expected human, bowl or rounded-box"))
        })
    }
}

/// Range noise (meters) and hole fraction of the synthetic depth camera.
pub const DEPTH_NOISE: f64 = 2e-3;
pub const HOLE_FRACTION: f64 = 0.3;

/// Grid spacing of the stand-in mirror in the emitter scene (meters).
const MIRROR_CELL: f64 = 0.004;

/// Writes `scene.toml` and its observation files into `dir` and returns the
/// scene path. `seed` drives the sensor noise and is the scene's fit seed.
pub fn make_synthetic(kind: SyntheticKind, seed: u64, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = match kind {
        SyntheticKind::Human => human(seed, dir)?,
        SyntheticKind::Bowl => object(FamilyKind::Bowl, vec![0.3, -0.2, 0.1], seed, dir)?,
        SyntheticKind::RoundedBox => object(FamilyKind::RoundedBox, vec![0.2, -0.1, -0.1, 0.0], seed, dir)?,
    };
    // normalize so the file on disk is already the fixed point
    let text = parse_scene(&file.to_toml()?)?.to_toml()?;
    let path = dir.join("scene.toml");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Rounds away float noise so the scene file stays readable.
fn tidy(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn arr(v: Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn base_file(seed: u64, camera: CameraDecl, emitter: EmitterDecl) -> SceneFile {
    SceneFile {
        version: SCENE_VERSION,
        seed,
        camera,
        emitter,
        objects: Vec::new(),
        observations: ObservationDecl::default(),
        render: RenderConfig::default(),
        fit_object: FitConfig::default(),
        fit_human: FitConfig::default(),
        truth: None,
    }
}

fn object(kind: FamilyKind, latent: Vec<f64>, seed: u64, dir: &Path) -> Result<SceneFile> {
    let rotation = Vec3::new(0.3, 0.5, 0.1);
    let translation = Vec3::new(0.05, -0.02, 0.8);
    let scale = 0.15;
    let truth = SdfShape::closed(
        kind,
        latent.clone(),
        Se3Scale::new(Quat::from_axis_angle(rotation), translation, scale)?,
    )?;
    let camera = CameraDecl {
        width: 64,
        height: 64,
        fx: 80.0,
        fy: 80.0,
        cx: Some(32.0),
        cy: Some(32.0),
        eye: None,
        target: None,
        up: None,
        translation: Some([0.0; 3]),
        rotation: Some([0.0; 3]),
    };
    // the emitter plays no part in object fitting; park it behind the camera
    let emitter = EmitterDecl {
        skeleton: "default17".into(),
        joints: Vec::new(),
        translation: [0.0, 0.0, -3.0],
        rotation: [0.0; 3],
        latent: Vec::new(),
        segments: 8,
        init: InitBounds::fixed(),
    };
    let mut file = base_file(seed, camera, emitter);
    file.objects.push(ObjectDecl {
        family: toml::Spanned::new(0..0, kind.name().to_string()),
        latent: vec![0.0; latent.len()],
        grid: None,
        translation: [0.025, -0.02, 0.8],
        rotation: arr(rotation),
        scale,
        init: InitBounds {
            translation_min: Some([-0.05, -0.07, 0.75]),
            translation_max: Some([0.1, 0.03, 0.85]),
            rotation_max: 0.5,
            scale_min: Some(0.13),
            scale_max: Some(0.17),
            latent_std: 0.3,
        },
    });
    file.truth = Some(TruthDecl {
        joints: Vec::new(),
        objects: vec![ShapeTruth {
            latent,
            translation: arr(translation),
            rotation: arr(rotation),
            scale,
        }],
    });
    let cam = file.camera()?;
    let scene = Scene::new(vec![truth], file.emitter_model()?, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = observe_objects(&scene, &cam, &file.render, DEPTH_NOISE, HOLE_FRACTION, &mut rng)?;
    write_pfm(&dir.join("depth.pfm"), cam.width, cam.height, &obs[0].depth)?;
    write_pgm(&dir.join("mask0.pgm"), &obs[0].mask)?;
    file.observations = ObservationDecl {
        depth: Some("depth.pfm".into()),
        masks: vec!["mask0.pgm".into()],
        silhouette: None,
    };
    Ok(file)
}

/// Pose of the emitter in the human scene: a raised arm and bent knee.
fn human_truth() -> Result<EmitterModel> {
    let mut z = vec![0.0; 48];
    z[1] = 0.1;
    z[14] = 0.4;
    z[24] = 0.5;
    z[30] = 0.2;
    EmitterModel::new(
        Skeleton::default17(),
        z,
        Se3Scale::new(
            Quat::from_axis_angle(Vec3::new(0.0, 0.15, 0.0)),
            Vec3::new(0.5, -0.1, -1.6),
            1.0,
        )?,
    )
}

fn human(seed: u64, dir: &Path) -> Result<SceneFile> {
    let truth = human_truth()?;
    let t = truth.placement().translation;
    let bowl = SdfShape::closed(
        FamilyKind::Bowl,
        vec![0.0, 1.0, 0.0],
        Se3Scale::from_translation(Vec3::new(0.0, 0.0, 1.0)),
    )?;
    let camera = CameraDecl {
        width: 128,
        height: 128,
        fx: 380.0,
        fy: 380.0,
        cx: None,
        cy: None,
        eye: Some([0.0, 0.0, -1.0]),
        target: Some([0.08, -0.01, 0.0]),
        up: Some([0.0, 1.0, 0.0]),
        translation: None,
        rotation: None,
    };
    let lo = [tidy(t.x - 0.12), tidy(t.y - 0.16), tidy(t.z - 0.14)];
    let hi = [tidy(t.x + 0.18), tidy(t.y + 0.14), tidy(t.z + 0.16)];
    let emitter = EmitterDecl {
        skeleton: "default17".into(),
        joints: Vec::new(),
        translation: std::array::from_fn(|k| tidy((lo[k] + hi[k]) / 2.0)),
        rotation: [0.0; 3],
        latent: Vec::new(),
        segments: 8,
        init: InitBounds {
            translation_min: Some(lo),
            translation_max: Some(hi),
            rotation_max: 0.3,
            scale_min: None,
            scale_max: None,
            latent_std: 0.0,
        },
    };
    let mut file = base_file(seed, camera, emitter);
    file.render.ray_budget = 2048;
    file.fit_human = FitConfig {
        max_iters: 400,
        restarts: Some(8),
        sigma: SigmaSchedule {
            initial: 1e-3,
            factor: 0.5,
            every: 40,
            floor: 1e-6,
        },
        ..FitConfig::default()
    };

    // the fit sees the mirror as a sampled grid, as a depth fit would hand it over
    let min = Vec3::new(-0.16, -0.2, -1.1);
    let max = Vec3::new(0.32, 0.2, -0.84);
    let dims = [
        ((max.x - min.x) / MIRROR_CELL).round() as usize + 1,
        ((max.y - min.y) / MIRROR_CELL).round() as usize + 1,
        ((max.z - min.z) / MIRROR_CELL).round() as usize + 1,
    ];
    let grid = SdfShape::sample_grid(&bowl, dims, min, max)?;
    write_grid(&dir.join("mirror.sdfgrid"), grid.grid_spec().expect("grid"), grid.latent())?;
    file.objects.push(ObjectDecl {
        family: toml::Spanned::new(0..0, "grid".to_string()),
        latent: Vec::new(),
        grid: Some("mirror.sdfgrid".into()),
        translation: arr(bowl.placement().translation),
        rotation: [0.0; 3],
        scale: 1.0,
        init: InitBounds::fixed(),
    });

    let cam = file.camera()?;
    let scene = Scene::new(vec![bowl], truth.clone(), 8)?;
    let sil = observe_silhouette(&scene, &cam, &file.render)?;
    write_pgm(&dir.join("silhouette.pgm"), &sil)?;
    file.observations = ObservationDecl {
        depth: None,
        masks: Vec::new(),
        silhouette: Some("silhouette.pgm".into()),
    };
    file.truth = Some(TruthDecl {
        joints: truth.joint_positions().into_iter().map(arr).collect(),
        objects: Vec::new(),
    });
    Ok(file)
}
