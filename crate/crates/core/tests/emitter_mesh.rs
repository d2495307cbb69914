use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermirror::emitter::*;
use thermirror::geometry::{Quat, Se3Scale, Vec3};

fn random_latent(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-amp..amp)).collect()
}

#[test]
fn rest_pose_counts_follow_tessellation_formula() {
    let sk = Skeleton::default17();
    assert_eq!(sk.len(), 17);
    let m = EmitterModel::rest(sk, Se3Scale::IDENTITY).unwrap();
    for seg in [6, 8, 12, 16] {
        let built = m.build_mesh(seg).unwrap();
        let bones = 16;
        assert_eq!(built.mesh.vertices.len(), bones * (2 * seg * (seg / 2) + 2));
        assert_eq!(built.mesh.triangles.len(), bones * 4 * seg * (seg / 2));
        assert_eq!(capsule_counts(seg), (2 * seg * (seg / 2) + 2, 4 * seg * (seg / 2)));
    }
    assert!(m.build_mesh(5).is_err());
    // deterministic
    assert_eq!(m.build_mesh(8).unwrap(), m.build_mesh(8).unwrap());
}

#[test]
fn translation_shifts_every_vertex() {
    let sk = Skeleton::default17();
    let a = EmitterModel::rest(sk.clone(), Se3Scale::IDENTITY).unwrap();
    let b = EmitterModel::rest(sk, Se3Scale::from_translation(Vec3::X)).unwrap();
    let (ma, mb) = (a.build_mesh(8).unwrap().mesh, b.build_mesh(8).unwrap().mesh);
    for (u, v) in ma.vertices.iter().zip(&mb.vertices) {
        assert!((*v - *u - Vec3::X).norm() < 1e-12);
    }
}

#[test]
fn elbow_rotation_moves_only_its_subtree() {
    let sk = Skeleton::default17();
    let elbow = 6;
    let mut z = vec![0.0; sk.latent_len()];
    z[3 * (elbow - 1) + 2] = std::f64::consts::FRAC_PI_2;
    let rest = EmitterModel::rest(sk.clone(), Se3Scale::IDENTITY).unwrap();
    let bent = EmitterModel::new(sk.clone(), z, Se3Scale::IDENTITY).unwrap();
    let (a, b) = (rest.build_mesh(8).unwrap(), bent.build_mesh(8).unwrap());
    // oracle: a bone's capsule hangs off its parent's frame, so it rotates
    // about the elbow exactly when its parent is the elbow or below it
    let pivot = rest.joint_positions()[elbow];
    let quarter = Quat::from_axis_angle(Vec3::Z * std::f64::consts::FRAC_PI_2);
    let mut moved = 0;
    for (k, &bone) in a.vertex_bone.iter().enumerate() {
        let parent = sk.joints()[bone].parent.unwrap();
        let v = a.mesh.vertices[k];
        let expect = if sk.in_subtree(parent, elbow) {
            moved += 1;
            pivot + quarter.rotate(v - pivot)
        } else {
            v
        };
        assert!((b.mesh.vertices[k] - expect).norm() < 1e-12, "vertex {k} of bone {bone}");
    }
    assert!(moved > 0);
    let (ja, jb) = (rest.joint_positions(), bent.joint_positions());
    for j in 0..sk.len() {
        let expect = sk.in_subtree(j, elbow) && j != elbow;
        assert_eq!((ja[j] - jb[j]).norm() > 1e-9, expect, "joint {j}");
    }
}

#[test]
fn pose_prior_examples() {
    let sk = Skeleton::default17();
    let n = sk.latent_len();
    let m = EmitterModel::rest(sk.clone(), Se3Scale::IDENTITY).unwrap();
    assert_eq!(pose_prior(&m), 0.0);
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    let m = EmitterModel::new(sk.clone(), z, Se3Scale::IDENTITY).unwrap();
    assert_eq!(pose_prior(&m), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = random_latent(&mut rng, n, 0.5);
    let z2: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
    let p1 = pose_prior(&EmitterModel::new(sk.clone(), z, Se3Scale::IDENTITY).unwrap());
    let p2 = pose_prior(&EmitterModel::new(sk, z2, Se3Scale::IDENTITY).unwrap());
    assert!((p2 - 4.0 * p1).abs() < 1e-12);
}

#[test]
fn vertex_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sk = Skeleton::default17();
    for _ in 0..5 {
        let placement = Se3Scale::new(
            Quat::from_axis_angle(Vec3::new(0.4, -1.1, 0.3)),
            Vec3::new(0.2, -0.1, 2.0),
            1.0,
        )
        .unwrap();
        let m = EmitterModel::new(sk.clone(), random_latent(&mut rng, sk.latent_len(), 1.0), placement)
            .unwrap();
        let built = m.build_mesh(6).unwrap();
        let w: Vec<Vec3> = (0..built.mesh.vertices.len())
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let loss = |m: &EmitterModel| -> f64 {
            let b = m.build_mesh(6).unwrap();
            b.mesh.vertices.iter().zip(&w).map(|(v, g)| v.dot(*g)).sum()
        };
        let analytic = m.backprop(&built, &w);
        let h = 1e-5;
        let fd: Vec<f64> = (0..m.param_count())
            .map(|k| (loss(&m.nudged(k, h).unwrap()) - loss(&m.nudged(k, -h).unwrap())) / (2.0 * h))
            .collect();
        let num: f64 = analytic.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|f| f * f).sum::<f64>().sqrt();
        assert!(num / den <= 1e-4, "relative error {}", num / den);
        // leaves carry no bone below them
        let head = 4;
        assert_eq!(&analytic[6 + 3 * (head - 1)..6 + 3 * head], &[0.0; 3]);
    }
}

#[test]
fn appending_identity_joints_keeps_the_mesh() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sk = Skeleton::default17();
    let z = random_latent(&mut rng, sk.latent_len(), 0.8);
    let m = EmitterModel::new(sk.clone(), z.clone(), Se3Scale::IDENTITY).unwrap();
    let mut joints = sk.joints().to_vec();
    joints.push(Joint {
        name: "l_toe".into(),
        parent: Some(13),
        offset: Vec3::new(0.0, -0.05, 0.12),
        radius: 0.03,
    });
    let padded_sk = Skeleton::new(joints).unwrap();
    let mut z2 = z;
    z2.extend([0.0; 3]);
    let padded = EmitterModel::new(padded_sk, z2, Se3Scale::IDENTITY).unwrap();
    let (a, b) = (m.build_mesh(8).unwrap(), padded.build_mesh(8).unwrap());
    assert_eq!(a.mesh.vertices[..], b.mesh.vertices[..a.mesh.vertices.len()]);
    assert_eq!(m.joint_positions()[..], padded.joint_positions()[..17]);
}

#[test]
fn capsules_are_closed_spheres() {
    let m = EmitterModel::rest(Skeleton::default17(), Se3Scale::IDENTITY).unwrap();
    for seg in [6, 9, 12] {
        let mesh = m.build_mesh(seg).unwrap().mesh;
        assert_eq!(mesh.boundary_edge_count(), 0);
        let chi = mesh.component_euler_characteristics();
        assert_eq!(chi.len(), 16);
        assert!(chi.iter().all(|&c| c == 2), "{chi:?}");
    }
}

#[test]
fn long_axis_angles_are_wrapped() {
    let sk = Skeleton::default17();
    let mut z = vec![0.0; sk.latent_len()];
    z[3 * 5] = 4.0;
    let m = EmitterModel::new(sk.clone(), z, Se3Scale::IDENTITY).unwrap();
    assert!(m.latent()[15].abs() <= std::f64::consts::PI);
    let mut z = vec![0.0; sk.latent_len()];
    z[3 * 5] = 4.0 - std::f64::consts::TAU;
    let same = EmitterModel::new(sk, z, Se3Scale::IDENTITY).unwrap();
    let (a, b) = (m.build_mesh(6).unwrap().mesh, same.build_mesh(6).unwrap().mesh);
    for (u, v) in a.vertices.iter().zip(&b.vertices) {
        assert!((*u - *v).norm() < 1e-12);
    }
}

#[test]
fn skeleton_validation() {
    let j = |parent, offset: [f64; 3], radius| Joint {
        name: "j".into(),
        parent,
        offset: offset.into(),
        radius,
    };
    assert!(Skeleton::new(vec![j(None, [0.0; 3], 0.1), j(Some(0), [0.0, 1.0, 0.0], 0.1)]).is_ok());
    assert!(Skeleton::new(vec![j(None, [0.0; 3], 0.1), j(Some(1), [0.0, 1.0, 0.0], 0.1)]).is_err());
    assert!(Skeleton::new(vec![j(None, [0.0; 3], 0.1), j(Some(0), [0.0, 1.0, 0.0], 0.0)]).is_err());
    assert!(Skeleton::new(vec![j(None, [0.0; 3], 0.1), j(Some(0), [0.0; 3], 0.1)]).is_err());
}
