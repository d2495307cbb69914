use std::path::Path;
use std::process::{Command, Output};

fn thermirror(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermirror")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn render_and_export_write_expected_files() {
    let d = tempfile::tempdir().unwrap();
    let scene = d.path().join("bowl");
    assert!(thermirror(&["make-synthetic", "--kind", "bowl", "--out", &s(&scene), "--seed", "2"]).status.success());
    let scene = s(&scene.join("scene.toml"));
    let out = d.path().join("render");
    assert!(thermirror(&["render", "--scene", &scene, "--out", &s(&out), "--threads", "1"]).status.success());
    for f in ["reflection.pgm", "depth.pfm", "mask0.pgm", "render.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("render.csv")).unwrap();
    assert!(csv.starts_with("width,height,"));
    assert!(std::fs::read(out.join("reflection.pgm")).unwrap().starts_with(b"P5"));

    let mesh = d.path().join("mesh");
    assert!(thermirror(&["export-mesh", "--scene", &scene, "--out", &s(&mesh), "--resolution", "20"]).status.success());
    for f in ["object0.obj", "emitter.obj"] {
        let text = std::fs::read_to_string(mesh.join(f)).unwrap();
        assert!(text.lines().count() > 10);
        assert!(text.lines().all(|l| l.starts_with("v ") || l.starts_with("f ")), "{f}");
    }
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let d = tempfile::tempdir().unwrap();
    let o = thermirror(&["render", "--scene", &s(&d.path().join("absent.toml")), "--out", &s(d.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.toml"));

    let o = thermirror(&["make-synthetic", "--kind", "teapot", "--out", &s(d.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("rounded-box"));

    let scene = d.path().join("h");
    assert!(thermirror(&["make-synthetic", "--kind", "human", "--out", &s(&scene)]).status.success());
    let o = thermirror(&[
        "ablate",
        "--scene",
        &s(&scene.join("scene.toml")),
        "--out",
        &s(d.path()),
        "--variant",
        "no-mirrors",
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sphere-steps-1"));

    // --variant belongs to ablate only
    let o = thermirror(&["render", "--scene", "x", "--out", "y", "--variant", "full"]);
    assert!(!o.status.success());
}

#[test]
fn gradcheck_passes_on_a_synthetic_object() {
    let d = tempfile::tempdir().unwrap();
    let scene = d.path().join("box");
    assert!(thermirror(&["make-synthetic", "--kind", "rounded-box", "--out", &s(&scene)]).status.success());
    let out = d.path().join("g");
    let o = thermirror(&["gradcheck", "--scene", &s(&scene.join("scene.toml")), "--out", &s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("gradcheck_object0.csv")).unwrap();
    assert!(csv.starts_with("parameter,analytic,numeric,error"));
}
