use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermirror::emitter::{EmitterModel, Joint, Skeleton};
use thermirror::geometry::{ray_triangle_intersect, Camera, Quat, Ray, Se3Scale, TriMesh, Vec3};
use thermirror::render::*;
use thermirror::scene::Scene;
use thermirror::sdf::{FamilyKind, SdfShape};

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n < 1.0 {
            return v / n;
        }
    }
}

fn ball_skeleton() -> Skeleton {
    Skeleton::new(vec![
        Joint { name: "a".into(), parent: None, offset: Vec3::ZERO, radius: 0.2 },
        Joint { name: "b".into(), parent: Some(0), offset: Vec3::new(0.0, 0.02, 0.0), radius: 0.2 },
    ])
    .unwrap()
}

fn plane() -> SdfShape {
    SdfShape::closed(FamilyKind::Plane, vec![], Se3Scale::IDENTITY).unwrap()
}

fn plane_camera(size: usize, target: Vec3) -> Camera {
    Camera::look_at(Vec3::new(0.0, 1.0, -2.0), target, Vec3::Y, 150.0, 150.0, size, size).unwrap()
}

/// Direct pinhole render of the emitter mirrored across y = 0.
fn virtual_image(cam: &Camera, mesh: &TriMesh) -> Vec<bool> {
    let mirrored: Vec<Vec3> = mesh.vertices.iter().map(|v| Vec3::new(v.x, -v.y, v.z)).collect();
    let virt = TriMesh::new(mirrored, mesh.triangles.clone()).unwrap();
    let mut out = Vec::with_capacity(cam.pixel_count());
    for j in 0..cam.height {
        for i in 0..cam.width {
            let ray = cam.pixel_ray(i, j);
            let through_mirror = ray.direction.y < 0.0;
            out.push(
                through_mirror
                    && (0..virt.triangles.len()).any(|k| ray_triangle_intersect(&ray, &virt.triangle(k)).is_some()),
            );
        }
    }
    out
}

#[test]
fn reflect_examples_and_law() {
    let r = reflect(Vec3::Z, Vec3::new(0.0, 0.0, -1.0)).unwrap();
    assert!((r - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = reflect(Vec3::new(s, 0.0, s), Vec3::new(0.0, 0.0, -3.0)).unwrap();
    assert!((r - Vec3::new(s, 0.0, -s)).norm() < 1e-15);
    assert!(matches!(reflect(Vec3::Z, Vec3::ZERO), Err(thermirror::Error::Domain(_))));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let d = random_unit(&mut rng);
        let n = random_unit(&mut rng) * rng.random_range(0.1..10.0);
        let out = reflect(d, n).unwrap();
        let nh = n.normalized();
        let incidence = (-d).dot(nh).clamp(-1.0, 1.0).acos();
        let reflection = out.dot(nh).clamp(-1.0, 1.0).acos();
        assert!((incidence - reflection).abs() < 1e-9);
        assert!((out.norm() - 1.0).abs() < 1e-12);
        assert!((reflect(out, n).unwrap() - d).norm() < 1e-12);
    }
}

#[test]
fn occupancy_algebra() {
    assert_eq!(soft_influence(0.0, 1, 0.3), 0.5);
    assert_eq!(soft_influence(0.0, -1, 0.3), 0.5);
    let sigma: f64 = 0.04;
    assert!((soft_influence(sigma.sqrt(), -1, sigma) - 0.268_941_421_369_995_1).abs() < 1e-15);
    assert!(soft_influence(1e3, -1, sigma) < 1e-300);
    assert_eq!(soft_influence(1e3, 1, sigma), 1.0);
    assert_eq!(aggregate_occupancy(&[]), 0.0);
    assert_eq!(aggregate_occupancy(&[0.5, 0.5]), 0.75);
    assert_eq!(aggregate_occupancy(&[0.3, 1.0, 0.2]), 1.0);
}

#[test]
fn empty_cases_render_zero() {
    let cam = plane_camera(32, Vec3::new(0.0, -1.0, -4.0));
    // emitter far away from anything the mirror reflects
    let far = EmitterModel::rest(ball_skeleton(), Se3Scale::from_translation(Vec3::new(0.0, 50.0, 40.0))).unwrap();
    let scene = Scene::new(vec![plane()], far, 8).unwrap();
    let img = render_reflection(&scene, &cam, &RenderConfig::default()).unwrap();
    assert!(img.values.iter().all(|&v| v == 0.0));

    // camera looking up: every ray misses the mirror
    let up = Camera::look_at(Vec3::new(0.0, 1.0, -2.0), Vec3::new(0.0, 3.0, -2.5), Vec3::Z, 40.0, 40.0, 32, 32).unwrap();
    let near = EmitterModel::rest(ball_skeleton(), Se3Scale::from_translation(Vec3::new(0.0, 1.0, -4.0))).unwrap();
    let scene = Scene::new(vec![plane()], near, 8).unwrap();
    let img = render_reflection(&scene, &up, &RenderConfig::default()).unwrap();
    assert!(img.values.iter().all(|&v| v == 0.0));
}

#[test]
fn plane_mirror_matches_virtual_image() {
    let cam = plane_camera(64, Vec3::new(0.0, -1.0, -4.0));
    let emitter = EmitterModel::rest(ball_skeleton(), Se3Scale::from_translation(Vec3::new(0.0, 1.0, -4.0))).unwrap();
    let scene = Scene::new(vec![plane()], emitter.clone(), 12).unwrap();
    let cfg = RenderConfig { debug_checks: true, ..RenderConfig::default() };
    let hard = render_reflection_hard(&scene, &cam, &cfg).unwrap();
    let oracle = virtual_image(&cam, &emitter.build_mesh(12).unwrap().mesh);
    let iou = mask_iou(&hard.threshold(0.5), &oracle);
    assert!(oracle.iter().filter(|&&b| b).count() > 50);
    assert!(iou >= 0.98, "iou {iou}");
}

#[test]
fn rendered_values_are_bounded_and_zero_off_mirror() {
    let cam = Camera::look_at(Vec3::new(0.0, 1.0, -2.0), Vec3::new(0.0, 0.0, -4.0), Vec3::Y, 40.0, 40.0, 48, 48).unwrap();
    let emitter = EmitterModel::rest(ball_skeleton(), Se3Scale::from_translation(Vec3::new(0.0, 1.0, -4.0))).unwrap();
    let scene = Scene::new(vec![plane()], emitter, 8).unwrap();
    let cfg = RenderConfig { sigma: 0.05, ..RenderConfig::default() };
    let img = render_reflection(&scene, &cam, &cfg).unwrap();
    let map = MirrorMap::build(&scene.objects, &cam, &cfg).unwrap();
    assert!(map.hit_count() > 0 && map.hit_count() < cam.pixel_count());
    for (v, h) in img.values.iter().zip(&map.hits) {
        assert!((0.0..=1.0).contains(v));
        if h.is_none() {
            assert_eq!(*v, 0.0);
        }
    }
    assert!(img.values.iter().any(|&v| v > 0.5));
}

#[test]
fn shrinking_sigma_sharpens() {
    let cam = plane_camera(48, Vec3::new(0.0, -1.0, -4.0));
    let emitter = EmitterModel::new(
        Skeleton::default17(),
        vec![0.0; 48],
        Se3Scale::from_translation(Vec3::new(0.0, 1.5, -4.5)),
    )
    .unwrap();
    let scene = Scene::new(vec![plane()], emitter, 8).unwrap();
    let base = RenderConfig { smoothing: false, ..RenderConfig::default() };
    let hard = render_reflection_hard(&scene, &cam, &base).unwrap();
    let gap = |img: &SoftImage| -> f64 {
        img.values.iter().zip(&hard.values).map(|(v, h)| (v - h).abs()).sum::<f64>()
    };
    let mut prev = render_reflection(&scene, &cam, &RenderConfig { sigma: 1e-2, ..base }).unwrap();
    for sigma in [1e-3, 1e-4] {
        let next = render_reflection(&scene, &cam, &RenderConfig { sigma, ..base }).unwrap();
        for k in 0..cam.pixel_count() {
            if hard.values[k] == 1.0 {
                // crossing terms alone keep a hit at or above one half; the
                // non-crossing neighbors fade with sigma like everywhere else
                assert!(next.values[k] >= 0.5 && prev.values[k] >= 0.5);
            } else {
                assert!(next.values[k] <= prev.values[k] + 1e-12, "pixel {k} at sigma {sigma}");
            }
        }
        assert!(gap(&next) < gap(&prev));
        prev = next;
    }
    assert!(hard.values.iter().filter(|&&v| v == 1.0).count() > 20);
}

#[test]
fn smoothed_normal_cases() {
    let cfg = RenderConfig::default();
    let cam = plane_camera(32, Vec3::new(0.0, -1.0, -4.0));
    for delta in [0.1, 0.5, 2.0] {
        let c = RenderConfig { smoothing_offset: delta, ..cfg };
        let n = smoothed_normal(&plane(), &cam, 16.5, 20.5, &c).unwrap();
        assert!((n - Vec3::Y).norm() < 1e-12);
    }

    // sphere: explicit 9-ray average
    let sphere = SdfShape::closed(FamilyKind::Sphere, vec![0.0], Se3Scale::from_translation(Vec3::new(0.0, 0.0, 4.0))).unwrap();
    let cam = Camera::new(60.0, 60.0, 16.0, 16.0, 32, 32, Se3Scale::IDENTITY).unwrap();
    let (px, py) = (20.5, 13.5);
    let n = smoothed_normal(&sphere, &cam, px, py, &cfg).unwrap();
    let mut sum = Vec3::ZERO;
    for dx in [-0.5, 0.0, 0.5] {
        for dy in [-0.5, 0.0, 0.5] {
            let ray = cam.camera_ray(px + dx, py + dy).unwrap();
            // ray/sphere intersection in closed form
            let oc = ray.origin - sphere.placement().translation;
            let b = oc.dot(ray.direction);
            let t = -b - (b * b - oc.norm_squared() + 1.0).sqrt();
            sum += (ray.at(t) - sphere.placement().translation).normalized();
        }
    }
    assert!((n - sum.normalized()).norm() < 1e-4);
    let center = (cam.camera_ray(px, py).unwrap().at(3.0) - sphere.placement().translation).normalized();
    assert!(n.dot(center) > (0.5f64 / 60.0 * 4.0).cos());

    // all neighbors miss: a pixel-sized sphere seen from afar
    let tiny = SdfShape::closed(
        FamilyKind::Sphere,
        vec![(0.004f64).ln()],
        Se3Scale::from_translation(Vec3::new(0.0, 0.0, 4.0)),
    )
    .unwrap();
    let ray = cam.camera_ray(16.0, 16.0).unwrap();
    let main = thermirror::sdf::trace_with(&tiny, &ray, &Default::default());
    assert!(main.converged);
    let c = RenderConfig { smoothing_offset: 0.5, ..cfg };
    let n = smoothed_normal(&tiny, &cam, 16.0, 16.0, &c).unwrap();
    assert!((n - main.normal).norm() < 1e-6);
}

#[test]
fn depth_and_mask_examples() {
    let sphere = SdfShape::closed(FamilyKind::Sphere, vec![0.0], Se3Scale::from_translation(Vec3::new(0.0, 0.0, 3.0))).unwrap();
    let cam = Camera::new(20.0, 20.0, 16.0, 16.0, 32, 32, Se3Scale::IDENTITY).unwrap();
    let cfg = RenderConfig::default();
    let dm = render_depth_mask(&[sphere.clone()], &cam, &cfg).unwrap();
    // pixel (15, 15) has its center at (15.5, 15.5): use the exact center ray instead
    let ray = cam.camera_ray(16.0, 16.0).unwrap();
    let s = primary_sample(&sphere, &ray, &cfg);
    assert!((s.hit.unwrap().depth - 2.0).abs() < 1e-4);
    assert_eq!(s.mask, 1.0);
    let corner = cam.pixel_count() - 1;
    assert_eq!(dm.depth[corner], f64::INFINITY);
    assert!(dm.masks[0].values[corner] < 0.5);
    assert_eq!(dm.object[corner], None);
    let k = 15 + 32 * 15;
    assert!(dm.depth[k].is_finite() && dm.object[k] == Some(0));

    let hit = s.hit.unwrap();
    let g = thermirror::sdf::DepthDerivative::implicit(&sphere, &ray, &hit).unwrap();
    assert!((g.placement[2] - 1.0).abs() < 1e-3);
}

#[test]
fn edge_sampler_statistics() {
    let (w, h) = (64, 64);
    let blank = SoftImage::zeros(w, h);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = RenderConfig { ray_budget: 500, ..RenderConfig::default() };
    let px = edge_sample_rays(&blank, 1000, &cfg, &mut rng).unwrap();
    assert!(!px.is_empty() && px.iter().all(|&p| p < w * h));

    // a disk
    let bits: Vec<bool> = (0..w * h)
        .map(|k| {
            let (i, j) = ((k % w) as f64 - 30.0, (k / w) as f64 - 34.0);
            i * i + j * j < 15.0 * 15.0
        })
        .collect();
    let img = SoftImage::from_binary(w, h, &bits);
    let edges = edge_pixels(&img);
    assert!(!edges.is_empty());

    // iteration 0: uniform, chi-square over quadrants
    let s0 = EdgeSampler::new(&img, 0, &EdgeSchedule::default()).unwrap();
    let mut quad = [0usize; 4];
    let n = 100_000;
    for _ in 0..n {
        let p = s0.draw(&mut rng);
        let (i, j) = (p % w, p / w);
        quad[(i >= w / 2) as usize + 2 * (j >= h / 2) as usize] += 1;
    }
    let expect = n as f64 / 4.0;
    let chi2: f64 = quad.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    assert!(chi2 < 16.27, "chi2 {chi2}"); // p = 0.001, 3 dof
    assert!(quad.iter().all(|&c| (c as f64 - expect).abs() / expect < 0.05));

    // late iteration: concentrated within 2 px of an edge
    let late = EdgeSampler::new(&img, 5000, &EdgeSchedule::default()).unwrap();
    let dist = |p: usize| {
        let (i, j) = ((p % w) as f64, (p / w) as f64);
        edges
            .iter()
            .map(|&e| (((e % w) as f64 - i).powi(2) + ((e / w) as f64 - j).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let near = (0..10_000).filter(|_| dist(late.draw(&mut rng)) <= 2.0).count();
    assert!(near as f64 >= 0.9 * 10_000.0, "{near}");
}

fn mean_intensity(objects: &[SdfShape], emitter: &EmitterModel, cam: &Camera, cfg: &RenderConfig) -> f64 {
    let scene = Scene::new(objects.to_vec(), emitter.clone(), 8).unwrap();
    let img = render_reflection(&scene, cam, cfg).unwrap();
    img.values.iter().sum::<f64>() / img.values.len() as f64
}

fn sphere_mirror_setup() -> (Vec<SdfShape>, EmitterModel, Camera) {
    let mirror = SdfShape::closed(FamilyKind::Sphere, vec![0.0], Se3Scale::IDENTITY).unwrap();
    let cam = Camera::look_at(Vec3::new(0.0, 0.0, -3.0), Vec3::ZERO, Vec3::Y, 40.0, 40.0, 24, 24).unwrap();
    let emitter = EmitterModel::new(
        Skeleton::default17(),
        vec![0.0; 48],
        Se3Scale::new(Quat::from_axis_angle(Vec3::Y * 0.3), Vec3::new(0.9, -0.4, -2.6), 1.0).unwrap(),
    )
    .unwrap();
    (vec![mirror], emitter, cam)
}

#[test]
fn reflection_gradients_match_differences() {
    let (objects, emitter, cam) = sphere_mirror_setup();
    let cfg = RenderConfig { sigma: 2e-2, ..RenderConfig::default() };
    let map = MirrorMap::build(&objects, &cam, &cfg).unwrap();
    assert!(map.hit_count() > 100);
    let geom = EmitterGeometry::new(&emitter, 8, cfg.sigma).unwrap();
    let all: Vec<usize> = (0..cam.pixel_count()).collect();
    let pass = ReflectionPass::forward(&map, &geom, &all, true).unwrap();
    assert!(pass.image.values.iter().any(|&v| v > 0.5));
    let dl = vec![1.0 / all.len() as f64; all.len()];

    let h = 1e-5;
    let ge = pass.emitter_gradient(&geom, &emitter, &dl);
    for k in [0, 1, 2, 3, 4, 5, 6 + 3 * 5 + 2] {
        let fd = (mean_intensity(&objects, &emitter.nudged(k, h).unwrap(), &cam, &cfg)
            - mean_intensity(&objects, &emitter.nudged(k, -h).unwrap(), &cam, &cfg))
            / (2.0 * h);
        assert!((ge[k] - fd).abs() <= 1e-3 * fd.abs().max(1e-3), "emitter param {k}: {} vs {fd}", ge[k]);
    }

    let go = pass.object_gradients(&map, &objects, &cfg, &dl);
    for k in 0..objects[0].param_count() {
        let plus = [objects[0].nudged(k, h).unwrap()];
        let minus = [objects[0].nudged(k, -h).unwrap()];
        let fd = (mean_intensity(&plus, &emitter, &cam, &cfg) - mean_intensity(&minus, &emitter, &cam, &cfg)) / (2.0 * h);
        assert!((go[0][k] - fd).abs() <= 2e-2 * fd.abs().max(1e-3), "object param {k}: {} vs {fd}", go[0][k]);
    }
}
