use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermirror::geometry::Vec3;
use thermirror::io::*;
use thermirror::render::SoftImage;
use thermirror::Error;

const MINIMAL: &str = r#"
version = 1
seed = 7

[camera]
width = 32
height = 24
fx = 40.0
fy = 40.0
translation = [0.0, 0.0, 0.0]

[[objects]]
family = "sphere"
latent = [0.5]
translation = [0.0, 0.0, 2.0]
scale = 0.3

[objects.init]
translation_min = [-0.1, -0.1, 1.9]
translation_max = [0.1, 0.1, 2.1]

[emitter]
translation = [0.0, 0.0, -2.0]

[fit_human]
max_iters = 10
"#;

fn parse_err(text: &str) -> (usize, String) {
    match parse_scene(text) {
        Err(Error::Parse { line, msg }) => (line, msg),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn scene_defaults_are_filled_and_echoed() {
    let f = parse_scene(MINIMAL).unwrap();
    assert_eq!(f.camera.cx, Some(16.0));
    assert_eq!(f.camera.cy, Some(12.0));
    assert_eq!(f.objects[0].rotation, [0.0; 3]);
    assert_eq!(f.emitter.skeleton, "default17");
    assert_eq!(f.emitter.latent.len(), 48);
    assert_eq!(f.fit_object.restarts, Some(5));
    assert_eq!(f.fit_human.restarts, Some(8));
    assert_eq!((f.fit_object.seed, f.fit_human.seed), (7, 7));
    let text = f.to_toml().unwrap();
    assert!(text.contains("restarts = 8"), "{text}");
    assert!(text.contains("cx = 16.0"), "{text}");
}

#[test]
fn scene_round_trip_is_a_fixed_point() {
    let once = parse_scene(MINIMAL).unwrap().to_toml().unwrap();
    let twice = parse_scene(&once).unwrap().to_toml().unwrap();
    assert_eq!(once, twice);
    assert_eq!(parse_scene(&once).unwrap(), parse_scene(MINIMAL).unwrap());
}

#[test]
fn missing_emitter_names_the_block() {
    let text = MINIMAL.replace("[emitter]\ntranslation = [0.0, 0.0, -2.0]\n", "");
    let (_, msg) = parse_err(&text);
    assert!(msg.contains("emitter"), "{msg}");
}

#[test]
fn unsupported_family_lists_supported_ones() {
    let text = MINIMAL.replace("\"sphere\"", "\"torus\"");
    let (line, msg) = parse_err(&text);
    assert_eq!(line, 13, "{msg}");
    assert!(msg.contains("torus"), "{msg}");
    for fam in ["sphere", "ellipsoid", "rounded-box", "bowl", "plane", "grid"] {
        assert!(msg.contains(fam), "{fam} missing from: {msg}");
    }
}

#[test]
fn malformed_number_reports_its_line() {
    let text = MINIMAL.replace("fx = 40.0", "fx = 4x0");
    let (line, _) = parse_err(&text);
    assert_eq!(line, 8);
}

#[test]
fn missing_required_field_is_a_parse_error() {
    let text = MINIMAL.replace("fy = 40.0\n", "");
    let (line, msg) = parse_err(&text);
    assert!(msg.contains("fy"), "{msg}");
    assert!(line >= 1);
}

#[test]
fn unknown_keys_are_rejected() {
    let text = MINIMAL.replace("scale = 0.3", "scale = 0.3\ncolour = 1");
    let (line, msg) = parse_err(&text);
    assert_eq!(line, 17);
    assert!(msg.contains("colour"), "{msg}");
}

#[test]
fn wrong_version_and_latent_length_are_rejected() {
    assert!(parse_scene(&MINIMAL.replace("version = 1", "version = 2")).is_err());
    let (line, msg) = parse_err(&MINIMAL.replace("latent = [0.5]", "latent = [0.5, 0.1]"));
    assert_eq!(line, 13);
    assert!(msg.contains("latent"), "{msg}");
}

#[test]
fn load_requires_referenced_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.toml");
    let text = MINIMAL.replace("[fit_human]", "[observations]\nsilhouette = \"nowhere.pgm\"\n\n[fit_human]");
    std::fs::write(&path, text).unwrap();
    let err = load_scene(&path).unwrap_err();
    assert!(err.to_string().contains("nowhere.pgm"), "{err}");
}

#[test]
fn load_builds_the_scene() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.toml");
    std::fs::write(&path, MINIMAL).unwrap();
    let l = load_scene(&path).unwrap();
    assert_eq!(l.scene.objects.len(), 1);
    assert_eq!((l.camera.width, l.camera.height), (32, 24));
    assert_eq!(l.scene.emitter.placement().translation, Vec3::new(0.0, 0.0, -2.0));
    assert_eq!(l.object_init[0].translation_max, Some([0.1, 0.1, 2.1]));
    assert!(l.object_observations().is_err());
    assert!(l.silhouette().is_err());
}

fn random_mask(w: usize, h: usize, seed: u64) -> SoftImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<bool> = (0..w * h).map(|_| rng.random::<bool>()).collect();
    SoftImage::from_binary(w, h, &bits)
}

#[test]
fn pgm_round_trip() {
    let m = random_mask(37, 11, 1);
    let back = decode_pgm(&encode_pgm(&m)).unwrap();
    assert_eq!(back, m);
}

#[test]
fn pgm_threshold_and_comments() {
    let mut bytes = b"P5\n# made by hand\n3 1\n255\n".to_vec();
    bytes.extend([127u8, 128, 255]);
    let m = decode_pgm(&bytes).unwrap();
    assert_eq!(m.values, vec![0.0, 1.0, 1.0]);
}

#[test]
fn pgm_format_errors() {
    let good = encode_pgm(&random_mask(4, 4, 2));
    let mut bad_magic = good.clone();
    bad_magic[1] = b'2';
    assert!(matches!(decode_pgm(&bad_magic), Err(Error::Format(_))));
    assert!(matches!(decode_pgm(&good[..good.len() - 1]), Err(Error::Format(_))));
    let mut v = b"P5\n4 4\n65535\n".to_vec();
    v.extend([0u8; 32]);
    assert!(matches!(decode_pgm(&v), Err(Error::Format(_))));
}

#[test]
fn pfm_round_trip_with_sentinel() {
    let (w, h) = (5, 3);
    let mut depth: Vec<f64> = (0..w * h).map(|k| 0.5 + k as f64 * 0.25).collect();
    depth[4] = f64::INFINITY;
    depth[7] = f64::NAN;
    let bytes = encode_pfm(w, h, &depth).unwrap();
    // bottom row first, little-endian
    let first = f32::from_le_bytes(bytes[bytes.len() - 4 * w * h..][..4].try_into().unwrap());
    assert_eq!(first as f64, depth[(h - 1) * w]);
    let (w2, h2, back) = decode_pfm(&bytes).unwrap();
    assert_eq!((w2, h2), (w, h));
    for k in 0..w * h {
        if depth[k].is_finite() {
            assert_eq!(back[k], depth[k] as f32 as f64);
        } else {
            assert_eq!(back[k], f64::INFINITY);
        }
    }
}

#[test]
fn pfm_format_errors() {
    let mut big = b"Pf\n2 1\n1.0\n".to_vec();
    big.extend([0u8; 8]);
    let err = decode_pfm(&big).unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err}");
    let good = encode_pfm(2, 2, &[1.0; 4]).unwrap();
    assert!(matches!(decode_pfm(&good[..good.len() - 2]), Err(Error::Format(_))));
    let mut color = good.clone();
    color[1] = b'F';
    assert!(matches!(decode_pfm(&color), Err(Error::Format(_))));
    assert!(encode_pfm(3, 3, &[1.0; 4]).is_err());
}

fn joints(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

#[test]
fn keypoint_metric_examples() {
    let truth = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0), Vec3::new(0.0, 4.0, 0.0), Vec3::new(1.0, 1.0, 0.0)];
    let r = keypoint_metric("same", &truth, &truth).unwrap();
    assert_eq!(r.mean_normalized, 0.0);
    assert_eq!(r.normalization, 5.0);

    let mut pred = truth.clone();
    pred[3] = pred[3] + Vec3::new(0.0, 0.0, 2.5);
    let r = keypoint_metric("one", &pred, &truth).unwrap();
    assert!((r.mean_normalized - 0.5 / 4.0).abs() < 1e-15);
    let mean: f64 = r.normalized().iter().sum::<f64>() / 4.0;
    assert!((mean - r.mean_normalized).abs() < 1e-15);

    assert!(keypoint_metric("short", &pred[..3], &truth).is_err());
    assert!(keypoint_metric("tiny", &truth[..1], &truth[..1]).is_err());
}

#[test]
fn keypoint_metric_ignores_consistent_reordering() {
    let truth = joints(17, 3);
    let pred = joints(17, 4);
    let a = keypoint_metric("a", &pred, &truth).unwrap().mean_normalized;
    let perm: Vec<usize> = (0..17).map(|k| (k * 5 + 3) % 17).collect();
    let pt: Vec<Vec3> = perm.iter().map(|&k| truth[k]).collect();
    let pp: Vec<Vec3> = perm.iter().map(|&k| pred[k]).collect();
    let b = keypoint_metric("b", &pp, &pt).unwrap().mean_normalized;
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn variant_names_parse() {
    for v in Variant::ALL {
        assert_eq!(v.name().parse::<Variant>().unwrap(), v);
    }
    assert!("no-sphere".parse::<Variant>().is_err());
}

#[test]
fn synthetic_object_scene_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = make_synthetic(SyntheticKind::Bowl, 3, dir.path()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(parse_scene(&text).unwrap().to_toml().unwrap(), text);
    let l = load_scene(&path).unwrap();
    let obs = l.object_observations().unwrap();
    assert_eq!(obs.len(), 1);
    let seen = obs[0].mask.values.iter().filter(|&&v| v > 0.5).count();
    let holes = obs[0]
        .depth
        .iter()
        .zip(&obs[0].mask.values)
        .filter(|(d, &m)| m > 0.5 && !d.is_finite())
        .count();
    assert!(seen > 100, "{seen}");
    let frac = holes as f64 / seen as f64;
    assert!((frac - HOLE_FRACTION).abs() < 0.1, "{frac}");
    assert_eq!(l.file.truth_objects().unwrap().len(), 1);
}

#[test]
fn ablation_single_variant_is_one_deterministic_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = make_synthetic(SyntheticKind::Human, 0, dir.path()).unwrap();
    let mut l = load_scene(&path).unwrap();
    l.file.fit_human.max_iters = 3;
    l.file.fit_human.restarts = Some(1);
    let a = ablate_run(&l, &[Variant::Full]).unwrap();
    let b = ablate_run(&l, &[Variant::Full]).unwrap();
    assert_eq!(a.rows.len(), 1);
    let csv = a.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(csv.starts_with("variant,seed,mean_normalized_error"));
    assert_eq!(csv, b.to_csv().unwrap());
}

#[test]
fn ablation_failure_is_recorded_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = make_synthetic(SyntheticKind::Human, 0, dir.path()).unwrap();
    let mut l = load_scene(&path).unwrap();
    l.file.fit_human.max_iters = 2;
    l.file.fit_human.restarts = Some(1);
    // an empty observation makes every fit fail, but the table is complete
    let s = l.silhouette.as_mut().unwrap();
    s.values.iter_mut().for_each(|v| *v = 0.0);
    let t = ablate_run(&l, &[Variant::Full, Variant::NoSmoothing]).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows.iter().all(|r| r.outcome.is_err()));
    assert!(t.to_csv().unwrap().contains("empty"));
}

#[test]
fn obj_and_csv_writers() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = thermirror::geometry::TriMesh::new(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let p = dir.path().join("m.obj");
    write_obj(&p, &mesh).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.lines().all(|l| l.starts_with("v ") || l.starts_with("f ")), "{text}");
    assert!(text.contains("f 1 2 3"));
    let c = dir.path().join("t.csv");
    write_csv(&c, &["a", "b"], &[vec!["1", "x,y"]]).unwrap();
    assert_eq!(std::fs::read_to_string(&c).unwrap(), "a,b\n1,\"x,y\"\n");
}
