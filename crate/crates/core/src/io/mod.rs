//! Files in and out: the scene format, masks and depth images, meshes,
//! evaluation metrics and the ablation harness.

mod ablate;
mod image;
mod metric;
mod scene_file;
mod synth;

pub use ablate::{ablate_run, reflection_iou, AblationRow, AblationTable, Variant};
pub use image::{
    decode_pfm, decode_pgm, encode_pfm, encode_pgm, read_pfm, read_pgm, write_pfm, write_pgm, DEPTH_SENTINEL,
};
pub use metric::{keypoint_metric, MetricReport};
pub use scene_file::{
    load_scene, parse_scene, CameraDecl, EmitterDecl, JointDecl, LoadedScene, ObjectDecl, ObservationDecl,
    SceneFile, ShapeTruth, TruthDecl, SCENE_VERSION,
};
pub use synth::{make_synthetic, SyntheticKind, DEPTH_NOISE, HOLE_FRACTION};

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::TriMesh;

/// ASCII OBJ with `v` and `f` records only.
pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    std::fs::write(path, mesh.to_obj_string()).map_err(|e| Error::io(path, e))
}

/// Writes `header` then `rows` as CSV.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref())).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
