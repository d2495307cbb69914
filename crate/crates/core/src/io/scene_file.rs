//! The scene file: a TOML document declaring the camera, mirror objects,
//! emitter, observation files, restart bounds and configs. Unknown keys are
//! rejected; defaults are filled in by `parse_scene` and written back by
//! `to_toml`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::emitter::{EmitterModel, Joint, Skeleton};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Quat, Se3Scale, Vec3};
use crate::optimize::{FitConfig, InitBounds, ObjectObservation};
use crate::render::{RenderConfig, SoftImage};
use crate::scene::Scene;
use crate::sdf::{read_grid, FamilyKind, SdfShape};

use super::image::{read_pfm, read_pgm};

pub const SCENE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub version: u32,
    /// Seeds every fit; copied into `fit_object.seed` and `fit_human.seed`.
    #[serde(default)]
    pub seed: u64,
    pub camera: CameraDecl,
    pub emitter: EmitterDecl,
    #[serde(default)]
    pub objects: Vec<ObjectDecl>,
    #[serde(default)]
    pub observations: ObservationDecl,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub fit_object: FitConfig,
    #[serde(default)]
    pub fit_human: FitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthDecl>,
}

/// Intrinsics plus a pose given either as `eye`/`target`/`up` or as a
/// camera-to-world `translation` and axis-angle `rotation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDecl {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDecl {
    pub family: Spanned<String>,
    /// Closed families only; zeros when omitted.
    #[serde(default)]
    pub latent: Vec<f64>,
    /// SDFGRID file, relative to the scene file (grid family only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub init: InitBounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterDecl {
    /// `default17`, or `custom` with `joints`.
    #[serde(default = "default_skeleton")]
    pub skeleton: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<JointDecl>,
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
    /// Axis-angle per non-root joint; zeros when omitted.
    #[serde(default)]
    pub latent: Vec<f64>,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default)]
    pub init: InitBounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDecl {
    pub name: String,
    /// Omitted for the root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub offset: [f64; 3],
    pub radius: f64,
}

/// Paths relative to the scene file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationDecl {
    /// Range per pixel (PFM).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    /// One PGM segmentation per object, in object order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masks: Vec<String>,
    /// Reflection silhouette (PGM).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub silhouette: Option<String>,
}

/// Ground truth of synthetic scenes, for evaluation only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthDecl {
    /// World-space emitter joints.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<ShapeTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeTruth {
    pub latent: Vec<f64>,
    pub translation: [f64; 3],
    pub rotation: [f64; 3],
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

fn default_skeleton() -> String {
    "default17".into()
}

fn default_segments() -> usize {
    8
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn supported_families() -> String {
    FamilyKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
}

/// Parses, validates and normalizes a scene document (defaults filled in,
/// fit seeds synchronized).
pub fn parse_scene(text: &str) -> Result<SceneFile> {
    let mut file: SceneFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
        let msg = e.message().trim().to_string();
        let msg = if msg.contains("missing field `emitter`") {
            "missing [emitter] block (exactly one emitter is required)".to_string()
        } else {
            msg
        };
        Error::Parse { line, msg }
    })?;
    if file.version != SCENE_VERSION {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unsupported version {}, expected {SCENE_VERSION}", file.version),
        });
    }
    for (i, o) in file.objects.iter_mut().enumerate() {
        let line = line_of(text, o.family.span().start);
        let kind = FamilyKind::parse(o.family.get_ref()).ok_or_else(|| Error::Parse {
            line,
            msg: format!(
                "objects[{i}]: unknown family {:?}; supported families: {}",
                o.family.get_ref(),
                supported_families()
            ),
        })?;
        match kind.latent_len() {
            Some(n) => {
                if o.grid.is_some() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("objects[{i}]: `grid` is only valid for the grid family"),
                    });
                }
                if o.latent.is_empty() {
                    o.latent = vec![0.0; n];
                } else if o.latent.len() != n {
                    return Err(Error::Parse {
                        line,
                        msg: format!("objects[{i}]: {kind} latent needs {n} values, got {}", o.latent.len()),
                    });
                }
            }
            None => {
                if o.grid.is_none() || !o.latent.is_empty() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("objects[{i}]: grid objects need a `grid` file and no `latent`"),
                    });
                }
            }
        }
    }
    let latent_len = file.skeleton()?.latent_len();
    if file.emitter.latent.is_empty() {
        file.emitter.latent = vec![0.0; latent_len];
    }
    let cam = &mut file.camera;
    cam.cx.get_or_insert(cam.width as f64 / 2.0);
    cam.cy.get_or_insert(cam.height as f64 / 2.0);
    if cam.eye.is_some() {
        cam.up.get_or_insert([0.0, 1.0, 0.0]);
    }
    file.fit_object.restarts.get_or_insert(5);
    file.fit_human.restarts.get_or_insert(8);
    file.set_seed(file.seed);
    Ok(file)
}

impl SceneFile {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("serializing scene: {e}")))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.fit_object.seed = seed;
        self.fit_human.seed = seed;
    }

    pub fn camera(&self) -> Result<Camera> {
        let c = &self.camera;
        let mut cam = match (c.eye, c.target, c.translation) {
            (Some(eye), Some(target), None) => Camera::look_at(
                v3(eye),
                v3(target),
                v3(c.up.unwrap_or([0.0, 1.0, 0.0])),
                c.fx,
                c.fy,
                c.width,
                c.height,
            )?,
            (None, None, Some(t)) => {
                let pose = Se3Scale::new(rot(c.rotation.unwrap_or_default()), v3(t), 1.0)?;
                Camera::new(c.fx, c.fy, c.width as f64 / 2.0, c.height as f64 / 2.0, c.width, c.height, pose)?
            }
            _ => {
                return Err(Error::Invalid(
                    "camera pose needs either eye and target, or translation (and rotation)".into(),
                ))
            }
        };
        if c.translation.is_none() && c.rotation.is_some() {
            return Err(Error::Invalid("camera rotation goes with translation, not eye/target".into()));
        }
        cam.cx = c.cx.unwrap_or(cam.cx);
        cam.cy = c.cy.unwrap_or(cam.cy);
        cam.validate()?;
        Ok(cam)
    }

    pub fn skeleton(&self) -> Result<Skeleton> {
        let e = &self.emitter;
        match e.skeleton.as_str() {
            "default17" if e.joints.is_empty() => Ok(Skeleton::default17()),
            "default17" => Err(Error::Invalid("emitter: `joints` requires skeleton = \"custom\"".into())),
            "custom" => {
                let mut joints = Vec::with_capacity(e.joints.len());
                for (i, j) in e.joints.iter().enumerate() {
                    let parent = match &j.parent {
                        None => None,
                        Some(p) => Some(e.joints[..i].iter().position(|q| &q.name == p).ok_or_else(|| {
                            Error::Invalid(format!("emitter joint {}: parent {p:?} not declared before it", j.name))
                        })?),
                    };
                    joints.push(Joint {
                        name: j.name.clone(),
                        parent,
                        offset: v3(j.offset),
                        radius: j.radius,
                    });
                }
                Skeleton::new(joints)
            }
            s => Err(Error::Invalid(format!(
                "emitter: unknown skeleton {s:?}; expected default17 or custom"
            ))),
        }
    }

    pub fn emitter_model(&self) -> Result<EmitterModel> {
        let e = &self.emitter;
        let skeleton = self.skeleton()?;
        let latent = if e.latent.is_empty() { vec![0.0; skeleton.latent_len()] } else { e.latent.clone() };
        EmitterModel::new(skeleton, latent, Se3Scale::new(rot(e.rotation), v3(e.translation), 1.0)?)
    }

    /// Truth joints, or an error if the scene carries none.
    pub fn truth_joints(&self) -> Result<Vec<Vec3>> {
        match &self.truth {
            Some(t) if !t.joints.is_empty() => Ok(t.joints.iter().map(|&p| v3(p)).collect()),
            _ => Err(Error::Invalid("scene has no [truth] joints".into())),
        }
    }

    /// Truth shapes with the declared families.
    pub fn truth_objects(&self) -> Result<Vec<SdfShape>> {
        let t = self
            .truth
            .as_ref()
            .filter(|t| t.objects.len() == self.objects.len())
            .ok_or_else(|| Error::Invalid("scene has no [[truth.objects]] matching [[objects]]".into()))?;
        self.objects
            .iter()
            .zip(&t.objects)
            .map(|(o, s)| {
                let kind = FamilyKind::parse(o.family.get_ref()).expect("validated");
                SdfShape::closed(kind, s.latent.clone(), Se3Scale::new(rot(s.rotation), v3(s.translation), s.scale)?)
            })
            .collect()
    }
}

pub(crate) fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub(crate) fn rot(a: [f64; 3]) -> Quat {
    Quat::from_axis_angle(v3(a))
}

/// A scene file resolved against its directory: built geometry, restart
/// bounds and decoded observations.
#[derive(Clone, Debug)]
pub struct LoadedScene {
    pub file: SceneFile,
    pub dir: PathBuf,
    pub scene: Scene,
    pub camera: Camera,
    pub object_init: Vec<InitBounds>,
    pub emitter_init: InitBounds,
    /// Range image shared by all objects.
    pub depth: Option<Vec<f64>>,
    pub masks: Vec<SoftImage>,
    pub silhouette: Option<SoftImage>,
}

pub fn load_scene(path: &Path) -> Result<LoadedScene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = parse_scene(&text)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    LoadedScene::build(file, dir)
}

impl LoadedScene {
    /// Resolves `file` against `dir`; every referenced file must exist.
    pub fn build(file: SceneFile, dir: PathBuf) -> Result<LoadedScene> {
        let camera = file.camera()?;
        file.render.validate()?;
        file.fit_object.validate()?;
        file.fit_human.validate()?;
        let resolve = |rel: &str| -> Result<PathBuf> {
            let p = dir.join(rel);
            if p.is_file() {
                Ok(p)
            } else {
                Err(Error::Invalid(format!("referenced file {} does not exist", p.display())))
            }
        };
        let mut objects = Vec::with_capacity(file.objects.len());
        for o in &file.objects {
            o.init.validate()?;
            let placement = Se3Scale::new(rot(o.rotation), v3(o.translation), o.scale)?;
            let kind = FamilyKind::parse(o.family.get_ref()).expect("validated");
            objects.push(match &o.grid {
                Some(g) => {
                    let (spec, values) = read_grid(&resolve(g)?)?;
                    SdfShape::grid(spec, values, placement)?
                }
                None => SdfShape::closed(kind, o.latent.clone(), placement)?,
            });
        }
        file.emitter.init.validate()?;
        let scene = Scene::new(objects, file.emitter_model()?, file.emitter.segments)?;
        let size_check = |what: &str, w: usize, h: usize| -> Result<()> {
            if (w, h) != (camera.width, camera.height) {
                return Err(Error::Invalid(format!(
                    "{what} is {w}x{h} but the camera is {}x{}",
                    camera.width, camera.height
                )));
            }
            Ok(())
        };
        let obs = &file.observations;
        let depth = match &obs.depth {
            Some(p) => {
                let (w, h, d) = read_pfm(&resolve(p)?)?;
                size_check(p, w, h)?;
                Some(d)
            }
            None => None,
        };
        if !obs.masks.is_empty() && obs.masks.len() != file.objects.len() {
            return Err(Error::Invalid(format!(
                "{} masks declared for {} objects",
                obs.masks.len(),
                file.objects.len()
            )));
        }
        let mut masks = Vec::with_capacity(obs.masks.len());
        for p in &obs.masks {
            let m = read_pgm(&resolve(p)?)?;
            size_check(p, m.width, m.height)?;
            masks.push(m);
        }
        let silhouette = match &obs.silhouette {
            Some(p) => {
                let s = read_pgm(&resolve(p)?)?;
                size_check(p, s.width, s.height)?;
                Some(s)
            }
            None => None,
        };
        Ok(LoadedScene {
            object_init: file.objects.iter().map(|o| o.init.clone()).collect(),
            emitter_init: file.emitter.init.clone(),
            file,
            dir,
            scene,
            camera,
            depth,
            masks,
            silhouette,
        })
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.file.set_seed(seed);
    }

    /// Depth plus mask of every object, for fitting the mirrors.
    pub fn object_observations(&self) -> Result<Vec<ObjectObservation>> {
        let depth = self
            .depth
            .as_ref()
            .ok_or_else(|| Error::Invalid("observations.depth is required to fit objects".into()))?;
        if self.masks.len() != self.scene.objects.len() {
            return Err(Error::Invalid("observations.masks needs one mask per object".into()));
        }
        Ok(self
            .masks
            .iter()
            .enumerate()
            .map(|(o, m)| ObjectObservation {
                object: o,
                depth: depth.clone(),
                mask: m.clone(),
            })
            .collect())
    }

    pub fn silhouette(&self) -> Result<&SoftImage> {
        self.silhouette
            .as_ref()
            .ok_or_else(|| Error::Invalid("observations.silhouette is required to fit the emitter".into()))
    }
}
