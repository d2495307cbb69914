//! Python access to scene loading, rendering and both fitting stages.
//! Scenes are passed by path; images come back as flat row-major lists.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use thermirror::geometry::Vec3;
use thermirror::io::{keypoint_metric as metric, load_scene, make_synthetic as synth, reflection_iou, LoadedScene};
use thermirror::optimize;
use thermirror::render::{reflect as reflect_dir, render_reflection};

fn err(e: thermirror::Error) -> PyErr {
    match e {
        thermirror::Error::Io { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn open(scene: &str, seed: Option<u64>) -> PyResult<LoadedScene> {
    let mut l = load_scene(Path::new(scene)).map_err(err)?;
    if let Some(s) = seed {
        l.set_seed(s);
    }
    Ok(l)
}

fn v3(p: [f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

/// Writes a ground-truth scene ("human", "bowl" or "rounded-box") into
/// `out` and returns the scene file path.
#[pyfunction]
#[pyo3(signature = (kind, out, seed=0))]
fn make_synthetic(kind: &str, out: &str, seed: u64) -> PyResult<String> {
    let kind = kind.parse().map_err(err)?;
    let path = synth(kind, seed, Path::new(out)).map_err(err)?;
    Ok(path.to_string_lossy().into_owned())
}

/// Mirror direction `r` about the normal `n` (normalized internally).
#[pyfunction]
fn reflect(r: [f64; 3], n: [f64; 3]) -> PyResult<[f64; 3]> {
    let o = reflect_dir(v3(r), v3(n)).map_err(err)?;
    Ok([o.x, o.y, o.z])
}

/// Soft reflection image of the declared scene: `(width, height, values)`.
#[pyfunction]
fn render(scene: &str) -> PyResult<(usize, usize, Vec<f64>)> {
    let l = open(scene, None)?;
    let img = render_reflection(&l.scene, &l.camera, &l.file.render).map_err(err)?;
    Ok((img.width, img.height, img.values))
}

/// Mean joint distance over the bounding-box diagonal of `truth`.
#[pyfunction]
fn keypoint_metric(predicted: Vec<[f64; 3]>, truth: Vec<[f64; 3]>) -> PyResult<f64> {
    let p: Vec<Vec3> = predicted.into_iter().map(v3).collect();
    let t: Vec<Vec3> = truth.into_iter().map(v3).collect();
    Ok(metric("python", &p, &t).map_err(err)?.mean_normalized)
}

/// Stage 1: one dict per object with the fitted placement and latent.
#[pyfunction]
#[pyo3(signature = (scene, seed=None))]
fn fit_object<'py>(py: Python<'py>, scene: &str, seed: Option<u64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let l = open(scene, seed)?;
    let obs = l.object_observations().map_err(err)?;
    let mut out = Vec::new();
    for (i, base) in l.scene.objects.iter().enumerate() {
        let (shape, res) =
            optimize::fit_object(base, &l.object_init[i], &l.camera, &obs[i], &l.file.render, &l.file.fit_object)
                .map_err(err)?;
        let pl = shape.placement();
        let r = pl.rotation.to_axis_angle();
        let d = PyDict::new(py);
        d.set_item("family", shape.kind().to_string())?;
        d.set_item("translation", pl.translation.to_array())?;
        d.set_item("rotation", r.to_array())?;
        d.set_item("scale", pl.scale)?;
        d.set_item("latent", shape.latent().to_vec())?;
        d.set_item("final_loss", res.final_total)?;
        out.push(d);
    }
    Ok(out)
}

/// Stage 2: fitted joints, silhouette IoU and, when the scene carries
/// ground truth, the normalized joint error.
#[pyfunction]
#[pyo3(signature = (scene, seed=None))]
fn fit_human<'py>(py: Python<'py>, scene: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let l = open(scene, seed)?;
    let observed = l.silhouette().map_err(err)?;
    let (model, res) =
        optimize::fit_human(&l.scene, &l.emitter_init, &l.camera, observed, &l.file.render, &l.file.fit_human)
            .map_err(err)?;
    let joints = model.joint_positions();
    let mut fitted = l.scene.clone();
    fitted.emitter = model;
    let d = PyDict::new(py);
    d.set_item("joints", joints.iter().map(|p| p.to_array()).collect::<Vec<_>>())?;
    d.set_item("iou", reflection_iou(&fitted, &l.camera, observed, &l.file.render).map_err(err)?)?;
    d.set_item("final_loss", res.final_total)?;
    if let Ok(truth) = l.file.truth_joints() {
        d.set_item("metric", metric("fit", &joints, &truth).map_err(err)?.mean_normalized)?;
    }
    Ok(d)
}

#[pymodule]
fn thermirror_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(make_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(reflect, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(keypoint_metric, m)?)?;
    m.add_function(wrap_pyfunction!(fit_object, m)?)?;
    m.add_function(wrap_pyfunction!(fit_human, m)?)?;
    Ok(())
}
