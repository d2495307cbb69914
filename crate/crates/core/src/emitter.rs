//! Articulated capsule-skeleton heat emitter: pose latent -> joint frames ->
//! tessellated capsule mesh, with the adjoint back to the pose parameters.

use crate::error::{Error, Result};
use crate::geometry::{axis_angle_matrix, left_jacobian, Mat3, Quat, Se3Scale, TriMesh, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    /// `None` for the root.
    pub parent: Option<usize>,
    /// Rest offset from the parent joint, in the parent's frame (meters).
    pub offset: Vec3,
    /// Radius of the capsule drawn from the parent to this joint.
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
}

/// Names of the default 17-joint skeleton, in order.
pub const DEFAULT_JOINTS: [&str; 17] = [
    "pelvis",
    "spine",
    "chest",
    "neck",
    "head",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_hip",
    "r_knee",
    "r_ankle",
];

impl Skeleton {
    /// Validates topological order, a single root at index 0, positive radii
    /// and nonzero bone offsets.
    pub fn new(joints: Vec<Joint>) -> Result<Skeleton> {
        if joints.len() < 2 {
            return Err(Error::Invalid("skeleton needs at least two joints".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => {
                    return Err(Error::Invalid("joint 0 must be the root".into()));
                }
                (_, None) => {
                    return Err(Error::Invalid(format!("joint {i} ({}) has no parent", j.name)));
                }
                (_, Some(p)) if p >= i => {
                    return Err(Error::Invalid(format!(
                        "joint {i} ({}) has parent {p}; parents must precede children",
                        j.name
                    )));
                }
                _ => {
                    if !(j.offset.norm() > 1e-9) || !j.offset.is_finite() {
                        return Err(Error::Invalid(format!(
                            "joint {i} ({}) needs a nonzero offset",
                            j.name
                        )));
                    }
                }
            }
            if !(j.radius > 0.0) || !j.radius.is_finite() {
                return Err(Error::Invalid(format!(
                    "joint {i} ({}) radius must be positive",
                    j.name
                )));
            }
        }
        Ok(Skeleton { joints })
    }

    /// Standing figure, y up, facing +z, pelvis at the origin (about 1.7 m).
    pub fn default17() -> Skeleton {
        let spec: [(Option<usize>, [f64; 3], f64); 17] = [
            (None, [0.0, 0.0, 0.0], 0.12),
            (Some(0), [0.0, 0.2, 0.0], 0.12),
            (Some(1), [0.0, 0.2, 0.0], 0.13),
            (Some(2), [0.0, 0.15, 0.0], 0.06),
            (Some(3), [0.0, 0.15, 0.0], 0.1),
            (Some(2), [0.17, 0.08, 0.0], 0.06),
            (Some(5), [0.2, -0.2, 0.0], 0.05),
            (Some(6), [0.17, -0.17, 0.0], 0.04),
            (Some(2), [-0.17, 0.08, 0.0], 0.06),
            (Some(8), [-0.2, -0.2, 0.0], 0.05),
            (Some(9), [-0.17, -0.17, 0.0], 0.04),
            (Some(0), [0.1, -0.05, 0.0], 0.09),
            (Some(11), [0.0, -0.42, 0.0], 0.07),
            (Some(12), [0.0, -0.4, 0.0], 0.05),
            (Some(0), [-0.1, -0.05, 0.0], 0.09),
            (Some(14), [0.0, -0.42, 0.0], 0.07),
            (Some(15), [0.0, -0.4, 0.0], 0.05),
        ];
        let joints = spec
            .iter()
            .zip(DEFAULT_JOINTS)
            .map(|(&(parent, o, radius), name)| Joint {
                name: name.to_string(),
                parent,
                offset: o.into(),
                radius,
            })
            .collect();
        Skeleton::new(joints).expect("default skeleton is valid")
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Pose latent length: one axis-angle per non-root joint.
    pub fn latent_len(&self) -> usize {
        3 * (self.joints.len() - 1)
    }

    /// `true` if `j` lies in the subtree rooted at `root` (inclusive).
    pub fn in_subtree(&self, j: usize, root: usize) -> bool {
        let mut k = Some(j);
        while let Some(i) = k {
            if i == root {
                return true;
            }
            k = self.joints[i].parent;
        }
        false
    }

    /// Joint positions of the rest pose, root at the origin.
    pub fn rest_positions(&self) -> Vec<Vec3> {
        let mut p: Vec<Vec3> = Vec::with_capacity(self.joints.len());
        for j in &self.joints {
            let base = j.parent.map_or(Vec3::ZERO, |q| p[q]);
            p.push(base + j.offset);
        }
        p
    }

    /// Radius of a sphere around the rest-pose joint centroid enclosing every
    /// capsule; the distance unit of the soft occupancy.
    pub fn rest_bounding_radius(&self) -> f64 {
        let p = self.rest_positions();
        let c = p.iter().copied().sum::<Vec3>() / p.len() as f64;
        self.joints
            .iter()
            .zip(&p)
            .map(|(j, q)| (*q - c).norm() + j.radius)
            .fold(0.0, f64::max)
    }
}

/// Vertex and triangle counts of one capsule.
pub fn capsule_counts(segments: usize) -> (usize, usize) {
    let h = segments / 2;
    (2 * segments * h + 2, 4 * segments * h)
}

/// Capsule around the segment `[0, axis]`, in the frame of `axis`.
fn capsule(axis: Vec3, radius: f64, segments: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let h = segments / 2;
    let len = axis.norm();
    let a = axis / len;
    let e1 = a.any_orthonormal();
    let e2 = a.cross(e1);
    let mut v = Vec::with_capacity(2 * segments * h + 2);
    v.push(a * -radius);
    // rings from the bottom pole up to the bottom equator, then the top
    // equator up to the top pole
    let ring = |center: Vec3, polar: f64, v: &mut Vec<Vec3>, up: f64| {
        let (s, c) = polar.sin_cos();
        for k in 0..segments {
            let phi = std::f64::consts::TAU * k as f64 / segments as f64;
            let dir = e1 * phi.cos() + e2 * phi.sin();
            v.push(center + dir * (radius * s) + a * (up * radius * c));
        }
    };
    for i in 1..=h {
        let polar = std::f64::consts::FRAC_PI_2 * i as f64 / h as f64;
        ring(Vec3::ZERO, polar, &mut v, -1.0);
    }
    for i in (1..=h).rev() {
        let polar = std::f64::consts::FRAC_PI_2 * i as f64 / h as f64;
        ring(axis, polar, &mut v, 1.0);
    }
    v.push(axis + a * radius);
    let top = v.len() - 1;
    let rings = 2 * h;
    let at = |r: usize, k: usize| 1 + r * segments + k % segments;
    let mut t = Vec::with_capacity(4 * segments * h);
    for k in 0..segments {
        t.push([0, at(0, k + 1), at(0, k)]);
    }
    for r in 0..rings - 1 {
        for k in 0..segments {
            t.push([at(r, k), at(r, k + 1), at(r + 1, k + 1)]);
            t.push([at(r, k), at(r + 1, k + 1), at(r + 1, k)]);
        }
    }
    for k in 0..segments {
        t.push([top, at(rings - 1, k), at(rings - 1, k + 1)]);
    }
    (v, t)
}

/// Pose and placement of an emitter. Parameter order for gradients and
/// steps: `T_h` (3), a world-frame rotation increment (3), the pose latent.
#[derive(Clone, Debug, PartialEq)]
pub struct EmitterModel {
    skeleton: Skeleton,
    latent: Vec<f64>,
    placement: Se3Scale,
}

/// World-space mesh plus what the adjoint needs per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct EmitterMesh {
    pub mesh: TriMesh,
    /// Joint whose bone emitted each vertex.
    pub vertex_bone: Vec<usize>,
    /// Vertex positions before placement (body frame).
    pub body: Vec<Vec3>,
    /// Body-frame joint positions.
    pub joints: Vec<Vec3>,
    /// Body-frame joint orientations.
    pub frames: Vec<Mat3>,
}

impl EmitterModel {
    pub fn new(skeleton: Skeleton, latent: Vec<f64>, placement: Se3Scale) -> Result<EmitterModel> {
        if latent.len() != skeleton.latent_len() {
            return Err(Error::Invalid(format!(
                "pose latent needs {} values, got {}",
                skeleton.latent_len(),
                latent.len()
            )));
        }
        if latent.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pose latent".into()));
        }
        if (placement.scale - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("emitter placement scale is fixed to 1".into()));
        }
        let placement = Se3Scale::new(placement.rotation, placement.translation, 1.0)?;
        let mut m = EmitterModel {
            skeleton,
            latent,
            placement,
        };
        m.wrap_latent();
        Ok(m)
    }

    /// Rest pose at the given placement.
    pub fn rest(skeleton: Skeleton, placement: Se3Scale) -> Result<EmitterModel> {
        let n = skeleton.latent_len();
        EmitterModel::new(skeleton, vec![0.0; n], placement)
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn placement(&self) -> &Se3Scale {
        &self.placement
    }

    pub fn param_count(&self) -> usize {
        6 + self.latent.len()
    }

    /// Rewrites any axis-angle longer than pi as the equivalent shorter one.
    fn wrap_latent(&mut self) {
        for w in self.latent.chunks_exact_mut(3) {
            let v = Vec3::new(w[0], w[1], w[2]);
            let t = v.norm();
            if t > std::f64::consts::PI {
                let u = v * ((t - std::f64::consts::TAU) / t);
                w.copy_from_slice(&u.to_array());
            }
        }
    }

    pub fn apply_step(&mut self, step: &[f64]) -> Result<()> {
        if step.len() != self.param_count() {
            return Err(Error::Invalid(format!(
                "step of length {} for {} emitter parameters",
                step.len(),
                self.param_count()
            )));
        }
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("emitter parameter step".into()));
        }
        let pl = self.placement;
        let rotation = Quat::from_axis_angle(Vec3::new(step[3], step[4], step[5]))
            .mul(&pl.rotation)
            .normalized();
        let translation = pl.translation + Vec3::new(step[0], step[1], step[2]);
        self.placement = Se3Scale::new(rotation, translation, 1.0)?;
        for (z, d) in self.latent.iter_mut().zip(&step[6..]) {
            *z += d;
        }
        self.wrap_latent();
        Ok(())
    }

    /// Copy with parameter `k` moved by `delta`.
    pub fn nudged(&self, k: usize, delta: f64) -> Result<EmitterModel> {
        let mut step = vec![0.0; self.param_count()];
        step[k] = delta;
        let mut m = self.clone();
        m.apply_step(&step)?;
        Ok(m)
    }

    pub fn set_latent(&mut self, latent: Vec<f64>) -> Result<()> {
        *self = EmitterModel::new(self.skeleton.clone(), latent, self.placement)?;
        Ok(())
    }

    pub fn set_placement(&mut self, placement: Se3Scale) -> Result<()> {
        *self = EmitterModel::new(self.skeleton.clone(), self.latent.clone(), placement)?;
        Ok(())
    }

    /// Body-frame joint positions and orientations.
    pub fn forward_kinematics(&self) -> (Vec<Vec3>, Vec<Mat3>) {
        let n = self.skeleton.len();
        let mut pos = Vec::with_capacity(n);
        let mut rot: Vec<Mat3> = Vec::with_capacity(n);
        for (i, j) in self.skeleton.joints.iter().enumerate() {
            match j.parent {
                None => {
                    pos.push(Vec3::ZERO);
                    rot.push(Mat3::IDENTITY);
                }
                Some(p) => {
                    let z = &self.latent[3 * (i - 1)..3 * i];
                    let local = axis_angle_matrix(Vec3::new(z[0], z[1], z[2]));
                    pos.push(pos[p] + rot[p].mul_vec(j.offset));
                    rot.push(rot[p].mul_mat(&local));
                }
            }
        }
        (pos, rot)
    }

    /// World-space joint positions.
    pub fn joint_positions(&self) -> Vec<Vec3> {
        let (p, _) = self.forward_kinematics();
        p.into_iter().map(|q| self.placement.apply(q)).collect()
    }

    /// Tessellates one capsule per bone (parent -> joint) and places the
    /// result in the world.
    pub fn build_mesh(&self, segments: usize) -> Result<EmitterMesh> {
        if segments < 6 {
            return Err(Error::Domain(format!("segments {segments} below 6")));
        }
        let (joints, frames) = self.forward_kinematics();
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut vertex_bone = Vec::new();
        let mut body = Vec::new();
        for (i, j) in self.skeleton.joints.iter().enumerate() {
            let Some(p) = j.parent else { continue };
            let (v, t) = capsule(j.offset, j.radius, segments);
            let off = body.len();
            for u in v {
                let y = joints[p] + frames[p].mul_vec(u);
                body.push(y);
                vertices.push(self.placement.apply(y));
                vertex_bone.push(i);
            }
            triangles.extend(t.into_iter().map(|[a, b, c]| [a + off, b + off, c + off]));
        }
        let mesh = TriMesh::new(vertices, triangles)?;
        Ok(EmitterMesh {
            mesh,
            vertex_bone,
            body,
            joints,
            frames,
        })
    }

    /// Pulls per-vertex world gradients back to the parameters (same layout
    /// as [`apply_step`](Self::apply_step)).
    pub fn backprop(&self, built: &EmitterMesh, vertex_grads: &[Vec3]) -> Vec<f64> {
        let n = self.skeleton.len();
        let rot = self.placement.rotation.to_mat();
        let t = self.placement.translation;
        let mut out = vec![0.0; self.param_count()];
        let mut force = vec![Vec3::ZERO; n];
        let mut torque = vec![Vec3::ZERO; n];
        let mut g_t = Vec3::ZERO;
        let mut g_phi = Vec3::ZERO;
        for ((&bone, &g), (&y, &x)) in built
            .vertex_bone
            .iter()
            .zip(vertex_grads)
            .zip(built.body.iter().zip(&built.mesh.vertices))
        {
            g_t += g;
            g_phi += (x - t).cross(g);
            let gb = rot.tr_mul_vec(g);
            force[bone] += gb;
            torque[bone] += y.cross(gb);
        }
        out[..3].copy_from_slice(&g_t.to_array());
        out[3..6].copy_from_slice(&g_phi.to_array());
        // bone k moves rigidly with its parent's frame, so z_j acts on the
        // bones of strict descendants of j; accumulate them bottom-up
        let mut sub_force = vec![Vec3::ZERO; n];
        let mut sub_torque = vec![Vec3::ZERO; n];
        for k in (1..n).rev() {
            let p = self.skeleton.joints[k].parent.expect("non-root");
            let (f, m) = (force[k] + sub_force[k], torque[k] + sub_torque[k]);
            sub_force[p] += f;
            sub_torque[p] += m;
        }
        for j in 1..n {
            let p = self.skeleton.joints[j].parent.expect("non-root");
            let about = sub_torque[j] - built.joints[j].cross(sub_force[j]);
            let z = &self.latent[3 * (j - 1)..3 * j];
            let jl = left_jacobian(Vec3::new(z[0], z[1], z[2]));
            let g = jl.tr_mul_vec(built.frames[p].tr_mul_vec(about));
            out[6 + 3 * (j - 1)..6 + 3 * j].copy_from_slice(&g.to_array());
        }
        out
    }
}

/// `||z_h||^2`.
pub fn pose_prior(model: &EmitterModel) -> f64 {
    model.latent.iter().map(|v| v * v).sum()
}
