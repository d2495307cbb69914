use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermirror::geometry::{Quat, Ray, Se3Scale, Vec3};
use thermirror::sdf::*;

fn unit_sphere() -> SdfShape {
    SdfShape::closed(FamilyKind::Sphere, vec![0.0], Se3Scale::IDENTITY).unwrap()
}

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

fn random_placement(rng: &mut ChaCha8Rng) -> Se3Scale {
    let axis = random_unit(rng) * rng.random_range(0.0..3.0);
    Se3Scale::new(
        Quat::from_axis_angle(axis),
        Vec3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        ),
        rng.random_range(0.3..2.0),
    )
    .unwrap()
}

fn random_shape(kind: FamilyKind, rng: &mut ChaCha8Rng) -> SdfShape {
    let n = kind.latent_len().unwrap();
    let latent = (0..n).map(|_| rng.random_range(-0.8..0.8)).collect();
    SdfShape::closed(kind, latent, random_placement(rng)).unwrap()
}

fn sphere_grid() -> SdfShape {
    SdfShape::sample_grid(&unit_sphere(), [12, 12, 12], Vec3::splat(-1.5), Vec3::splat(1.5)).unwrap()
}

#[test]
fn eval_examples() {
    assert_eq!(unit_sphere().eval(Vec3::new(0.0, 0.0, 2.0)), 1.0);
    let scaled = SdfShape::closed(
        FamilyKind::Sphere,
        vec![0.0],
        Se3Scale::new(Quat::IDENTITY, Vec3::ZERO, 2.0).unwrap(),
    )
    .unwrap();
    assert!((scaled.eval(Vec3::new(0.0, 0.0, 3.0)) - 1.0).abs() < 1e-15);

    let grid = sphere_grid();
    let spec = *grid.grid_spec().unwrap();
    for (i, j, k) in [(0, 0, 0), (3, 7, 2), (11, 11, 11), (5, 0, 9)] {
        let p = spec.node_position(i, j, k);
        assert_eq!(grid.eval(p), grid.latent()[spec.index(i, j, k)]);
    }
}

#[test]
fn gradient_examples() {
    let s = unit_sphere();
    let g = s.gradient(Vec3::new(0.0, 0.0, 2.0)).unwrap();
    assert!((g - Vec3::Z).norm() < 1e-12);
    let g = s.gradient(Vec3::new(0.0, 0.6, 0.8) * 5.0).unwrap();
    assert!((g.normalized() - Vec3::new(0.0, 0.6, 0.8)).norm() < 1e-12);
    let grid = sphere_grid();
    assert!(grid.gradient(Vec3::new(0.3, 0.2, 0.1)).is_ok());
    assert!(matches!(
        grid.gradient(Vec3::new(2.0, 0.0, 0.0)),
        Err(thermirror::Error::Domain(_))
    ));
}

/// Central differences of `eval`, or `None` where the field is not smooth at
/// that scale (two step sizes disagree).
fn fd_gradient(s: &SdfShape, p: Vec3, h: f64) -> Option<Vec3> {
    let d = |h: f64| {
        Vec3::new(
            (s.eval(p + Vec3::X * h) - s.eval(p - Vec3::X * h)) / (2.0 * h),
            (s.eval(p + Vec3::Y * h) - s.eval(p - Vec3::Y * h)) / (2.0 * h),
            (s.eval(p + Vec3::Z * h) - s.eval(p - Vec3::Z * h)) / (2.0 * h),
        )
    };
    let (a, b) = (d(h), d(2.0 * h));
    ((a - b).norm() < 1e-7).then_some(a)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = sphere_grid();
    for kind in FamilyKind::ALL {
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        while checked < 1000 {
            let s = if kind == FamilyKind::Grid {
                grid.clone()
            } else {
                random_shape(kind, &mut rng)
            };
            let p = s.placement().apply(random_unit(&mut rng) * rng.random_range(0.0..1.4));
            let Some(fd) = fd_gradient(&s, p, 1e-5) else {
                continue;
            };
            let g = s.gradient(p).unwrap();
            worst = worst.max((g - fd).norm());
            checked += 1;
        }
        assert!(worst <= 1e-5, "{kind}: worst gradient error {worst:e}");
    }
}

#[test]
fn exact_families_are_eikonal_outside() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for kind in [FamilyKind::Sphere, FamilyKind::RoundedBox, FamilyKind::Bowl] {
        let mut n = 0;
        while n < 1000 {
            let s = random_shape(kind, &mut rng);
            let p = s.placement().apply(random_unit(&mut rng) * rng.random_range(0.5..3.0));
            if s.eval(p) <= 0.0 {
                continue;
            }
            if kind == FamilyKind::Bowl {
                // skip the rounded blend between the wall and the flat foot
                let q = s.to_base(p);
                let b = BowlParams::from_latent(s.latent());
                let foot = -(q.y + b.foot_depth) * s.placement().scale;
                if (s.eval(p) - foot).abs() < 2.0 * BOWL_RIM {
                    continue;
                }
            }
            let g = s.gradient(p).unwrap().norm();
            assert!((g - 1.0).abs() <= 1e-6, "{kind} at {p:?}: |grad| = {g}");
            n += 1;
        }
    }
}

#[test]
fn placement_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for kind in FamilyKind::ALL {
        for _ in 0..200 {
            let placed = if kind == FamilyKind::Grid {
                sphere_grid().with_placement(random_placement(&mut rng))
            } else {
                random_shape(kind, &mut rng)
            };
            let at_identity = placed.with_placement(Se3Scale::IDENTITY);
            let p = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let pl = placed.placement();
            let lhs = placed.eval(p);
            let rhs = pl.scale * at_identity.eval(pl.apply_inverse(p));
            assert!((lhs - rhs).abs() <= 1e-9, "{kind}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn sphere_trace_examples() {
    let s = unit_sphere();
    let ray = Ray::new(Vec3::new(0.0, 0.0, -3.0), Vec3::Z);
    let hit = sphere_trace(&s, &ray, 64, 1e-4);
    assert!(hit.converged);
    assert_eq!(hit.steps, 1);
    assert_eq!(hit.depth, 2.0);
    assert_eq!(hit.point, Vec3::new(0.0, 0.0, -1.0));
    assert!((hit.normal - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);

    let miss = sphere_trace(&s, &Ray::new(Vec3::new(0.0, 2.0, -3.0), Vec3::Z), 64, 1e-4);
    assert!(!miss.converged);
}

/// Angle between the ray and the surface tangent plane at the hit.
fn attack_angle(ray: &Ray, hit: &SdfHit) -> f64 {
    (-ray.direction.dot(hit.normal)).asin()
}

#[test]
fn few_step_estimate_agrees_with_converged_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let s = unit_sphere();
    let mut n = 0;
    while n < 500 {
        let origin = random_unit(&mut rng) * 3.0;
        let target = random_unit(&mut rng) * 0.95;
        let ray = Ray::new(origin, target - origin);
        let full = sphere_trace(&s, &ray, 200, 1e-10);
        if !full.converged || attack_angle(&ray, &full) <= 20f64.to_radians() {
            continue;
        }
        let est = SurfaceEstimate::new(&s, &ray, &TraceConfig::default(), 1e-2, 3).unwrap();
        assert!((est.depth - full.depth).abs() <= 1e-2);
        n += 1;
    }
}

#[test]
fn sphere_trace_never_overshoots() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let cfg = TraceConfig::default();
    // trilinear grids overestimate inside cells, so only closed forms qualify
    for kind in FamilyKind::ALL.into_iter().filter(|&k| k != FamilyKind::Grid) {
        for _ in 0..300 {
            let s = random_shape(kind, &mut rng);
            let origin = s.placement().translation + random_unit(&mut rng) * 4.0;
            if s.eval(origin) <= 0.0 {
                continue;
            }
            let target = s.placement().apply(random_unit(&mut rng) * 0.7);
            let ray = Ray::new(origin, target - origin);
            let (iterates, _) = trace_iterates(&s, &ray, &cfg);
            for (t, g) in iterates {
                assert!(g >= -cfg.eps, "{kind}: G = {g} at t = {t}");
            }
        }
    }
}

#[test]
fn implicit_depth_gradient_matches_translation_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cfg = TraceConfig {
        eps: 1e-12,
        max_steps: 500,
        ..TraceConfig::default()
    };
    let h = 1e-5;
    let mut n = 0;
    let kinds = [FamilyKind::Sphere, FamilyKind::Ellipsoid, FamilyKind::RoundedBox, FamilyKind::Bowl];
    while n < 400 {
        let s = random_shape(kinds[n % 4], &mut rng);
        let origin = s.placement().translation + random_unit(&mut rng) * 5.0;
        let target = s.placement().apply(random_unit(&mut rng) * 0.6);
        let ray = Ray::new(origin, target - origin);
        let hit = trace_with(&s, &ray, &cfg);
        if !hit.converged || attack_angle(&ray, &hit) < 10f64.to_radians() {
            continue;
        }
        let grad = DepthDerivative::implicit(&s, &ray, &hit).unwrap();
        for k in 0..3 {
            let dp = trace_with(&s.nudged(k, h).unwrap(), &ray, &cfg);
            let dm = trace_with(&s.nudged(k, -h).unwrap(), &ray, &cfg);
            assert!(dp.converged && dm.converged);
            let fd = (dp.depth - dm.depth) / (2.0 * h);
            let rel = (grad.placement[k] - fd).abs() / fd.abs().max(1e-12);
            assert!(
                rel <= 1e-3 || (grad.placement[k] - fd).abs() < 1e-7,
                "{}: axis {k} analytic {} fd {fd}",
                s.kind(),
                grad.placement[k]
            );
        }
        n += 1;
    }
}

#[test]
fn param_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let h = 1e-6;
    for kind in FamilyKind::ALL {
        for _ in 0..50 {
            let s = if kind == FamilyKind::Grid {
                sphere_grid().with_placement(random_placement(&mut rng))
            } else {
                random_shape(kind, &mut rng)
            };
            let p = s.placement().apply(random_unit(&mut rng) * rng.random_range(0.2..1.3));
            let pg = s.param_gradient(p);
            assert!((pg.value - s.eval(p)).abs() < 1e-12);
            let mut analytic = vec![0.0; s.param_count()];
            analytic[..PLACEMENT_PARAMS].copy_from_slice(&pg.placement);
            for (i, g) in &pg.latent {
                analytic[PLACEMENT_PARAMS + i] = *g;
            }
            let coords: Vec<usize> = if kind == FamilyKind::Grid {
                (0..PLACEMENT_PARAMS)
                    .chain(pg.latent.iter().map(|(i, _)| PLACEMENT_PARAMS + i))
                    .collect()
            } else {
                (0..s.param_count()).collect()
            };
            for k in coords {
                let fd = (s.nudged(k, h).unwrap().eval(p) - s.nudged(k, -h).unwrap().eval(p)) / (2.0 * h);
                assert!(
                    (fd - analytic[k]).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "{kind} param {k}: {} vs {fd}",
                    analytic[k]
                );
            }
        }
    }
}

#[test]
fn marching_cubes_sphere_area_and_residual() {
    let s = unit_sphere();
    let res = 48;
    let mesh = marching_cubes(&s, Vec3::splat(-1.5), Vec3::splat(1.5), res).unwrap();
    let area = mesh.surface_area();
    let exact = 4.0 * std::f64::consts::PI;
    assert!((area - exact).abs() / exact < 0.02, "area {area}");
    let diag = (3.0f64).sqrt() * 3.0 / res as f64;
    for v in &mesh.vertices {
        assert!(s.eval(*v).abs() <= diag);
    }
    assert_eq!(mesh.boundary_edge_count(), 0);
    assert_eq!(mesh.component_euler_characteristics(), vec![2]);
    // outward winding: positive enclosed volume
    let volume: f64 = (0..mesh.triangles.len())
        .map(|k| {
            let t = mesh.triangle(k);
            t.a.dot(t.b.cross(t.c)) / 6.0
        })
        .sum();
    assert!((volume - 4.0 / 3.0 * std::f64::consts::PI).abs() < 0.05, "volume {volume}");
}

#[test]
fn marching_cubes_empty_field() {
    let s = SdfShape::closed(
        FamilyKind::Sphere,
        vec![0.0],
        Se3Scale::from_translation(Vec3::new(10.0, 0.0, 0.0)),
    )
    .unwrap();
    let mesh = marching_cubes(&s, Vec3::splat(-1.0), Vec3::splat(1.0), 16).unwrap();
    assert!(mesh.is_empty());
    assert!(marching_cubes(&s, Vec3::splat(-1.0), Vec3::splat(1.0), 4).is_err());
}

#[test]
fn grid_file_round_trip() {
    let grid = sphere_grid();
    let spec = *grid.grid_spec().unwrap();
    let bytes = encode_grid(&spec, grid.latent());
    let (spec2, values) = decode_grid(&bytes).unwrap();
    assert_eq!(spec, spec2);
    for (a, b) in grid.latent().iter().zip(&values) {
        assert_eq!(*a as f32 as f64, *b);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.sdfgrid");
    write_grid(&path, &spec, &values).unwrap();
    assert_eq!(read_grid(&path).unwrap(), (spec, values));

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_grid(&bad).is_err());
    assert!(decode_grid(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn family_invariants() {
    assert!(FamilyKind::parse("torus").is_none());
    assert!(SdfShape::closed(FamilyKind::Bowl, vec![0.0; 2], Se3Scale::IDENTITY).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..1000 {
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b = BowlParams::from_latent(&z);
        assert!(b.outer_radius() > b.inner_radius() && b.inner_radius() > 0.0);
    }
    let spec = GridSpec { dims: [4, 8, 8], min: Vec3::ZERO, max: Vec3::splat(1.0) };
    assert!(SdfShape::grid(spec, vec![0.0; 256], Se3Scale::IDENTITY).is_err());
}
