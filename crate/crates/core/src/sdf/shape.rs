use super::family::{closed_form_value, grid_value, FamilyKind, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::{axis_angle_matrix, Mat3, Quat, Se3Scale, Vec3};
use crate::real::{Dual, Real};

/// Width of the smooth blend between the bowl wall and its foot, in world
/// units (meters).
pub const BOWL_RIM: f64 = 5e-3;

/// Placement parameters: translation (3), rotation increment (3), scale (1).
pub const PLACEMENT_PARAMS: usize = 7;

/// Largest parameter count of a closed-form family (placement + latent).
pub const MAX_CLOSED_PARAMS: usize = PLACEMENT_PARAMS + 4;

/// A latent-parameterized SDF placed in the world by `p -> R (s p) + T`.
///
/// Parameter order used by every gradient routine: `T.x, T.y, T.z`, then a
/// world-frame rotation increment `phi` (the rotation becomes
/// `exp(phi) * R`), then the scale `s`, then the latent code.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfShape {
    kind: FamilyKind,
    grid: Option<GridSpec>,
    latent: Vec<f64>,
    placement: Se3Scale,
    rot: Mat3,
}

/// Generic stand-in for the shape parameters, so the same evaluator serves
/// plain values and every flavour of dual number.
#[derive(Clone, Debug)]
pub(crate) struct Theta<R> {
    pub t: Vec3<R>,
    pub phi: Vec3<R>,
    pub s: R,
    pub z: Vec<R>,
}

impl<R: Real> Theta<R> {
    pub fn map<S: Real>(&self, f: impl Fn(R) -> S) -> Theta<S> {
        Theta {
            t: Vec3::new(f(self.t.x), f(self.t.y), f(self.t.z)),
            phi: Vec3::new(f(self.phi.x), f(self.phi.y), f(self.phi.z)),
            s: f(self.s),
            z: self.z.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Derivatives of `G` at a point with respect to the shape parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub value: f64,
    /// `dG/d(T, phi, s)`.
    pub placement: [f64; PLACEMENT_PARAMS],
    /// Sparse `dG/dz` as `(latent index, derivative)`.
    pub latent: Vec<(usize, f64)>,
}

impl SdfShape {
    /// A closed-form family member.
    pub fn closed(kind: FamilyKind, latent: Vec<f64>, placement: Se3Scale) -> Result<SdfShape> {
        let Some(len) = kind.latent_len() else {
            return Err(Error::Invalid("grid shapes are built with SdfShape::grid".into()));
        };
        if latent.len() != len {
            return Err(Error::Invalid(format!(
                "{kind} latent needs {len} values, got {}",
                latent.len()
            )));
        }
        SdfShape::checked(kind, None, latent, placement)
    }

    /// A grid SDF whose node values (x fastest) form the latent.
    pub fn grid(spec: GridSpec, values: Vec<f64>, placement: Se3Scale) -> Result<SdfShape> {
        if spec.dims.iter().any(|&d| d < 8) {
            return Err(Error::Invalid(format!(
                "grid resolution {:?} below 8 per axis",
                spec.dims
            )));
        }
        let e = spec.max - spec.min;
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) || !e.is_finite() {
            return Err(Error::Invalid("grid bounding box needs positive extent".into()));
        }
        if values.len() != spec.node_count() {
            return Err(Error::Invalid(format!(
                "grid {:?} needs {} values, got {}",
                spec.dims,
                spec.node_count(),
                values.len()
            )));
        }
        SdfShape::checked(FamilyKind::Grid, Some(spec), values, placement)
    }

    /// Samples another shape onto a grid covering `[min, max]` in this
    /// shape's base frame.
    pub fn sample_grid(base: &SdfShape, dims: [usize; 3], min: Vec3, max: Vec3) -> Result<SdfShape> {
        let spec = GridSpec { dims, min, max };
        let id = base.with_placement(Se3Scale::IDENTITY);
        let mut values = Vec::with_capacity(spec.node_count());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(id.eval(spec.node_position(i, j, k)));
                }
            }
        }
        SdfShape::grid(spec, values, base.placement)
    }

    fn checked(
        kind: FamilyKind,
        grid: Option<GridSpec>,
        latent: Vec<f64>,
        placement: Se3Scale,
    ) -> Result<SdfShape> {
        if latent.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{kind} latent")));
        }
        let placement = Se3Scale::new(
            placement.rotation,
            placement.translation,
            placement.scale,
        )?;
        Ok(SdfShape {
            kind,
            grid,
            latent,
            rot: placement.rotation.to_mat(),
            placement,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn grid_spec(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn placement(&self) -> &Se3Scale {
        &self.placement
    }

    /// World-space box containing the surface; `None` for the unbounded plane.
    pub fn world_bounds(&self) -> Option<(Vec3, Vec3)> {
        let z = &self.latent;
        let spread = |z: &[f64]| {
            let m = (z[0] + z[1] + z[2]) / 3.0;
            z[..3].iter().map(|v| (v - m).exp()).fold(0.0, f64::max)
        };
        let corners: Vec<Vec3> = match self.kind {
            FamilyKind::Plane => return None,
            FamilyKind::Grid => {
                let g = self.grid.as_ref().expect("grid shapes carry a spec");
                (0..8)
                    .map(|c| {
                        Vec3::new(
                            if c & 1 == 0 { g.min.x } else { g.max.x },
                            if c & 2 == 0 { g.min.y } else { g.max.y },
                            if c & 4 == 0 { g.min.z } else { g.max.z },
                        )
                    })
                    .collect()
            }
            kind => {
                let r = match kind {
                    FamilyKind::Sphere => z[0].exp(),
                    FamilyKind::Ellipsoid => spread(z),
                    FamilyKind::RoundedBox => spread(z) * 3f64.sqrt(),
                    _ => 1.0,
                };
                return Some((
                    self.placement.translation - Vec3::splat(r * self.placement.scale),
                    self.placement.translation + Vec3::splat(r * self.placement.scale),
                ));
            }
        };
        let world: Vec<Vec3> = corners.iter().map(|&c| self.placement.apply(c)).collect();
        let (mut lo, mut hi) = (world[0], world[0]);
        for p in &world {
            lo = lo.min_by_component(*p);
            hi = hi.max_by_component(*p);
        }
        Some((lo, hi))
    }

    /// Number of differentiable parameters (placement + latent).
    pub fn param_count(&self) -> usize {
        PLACEMENT_PARAMS + self.latent.len()
    }

    pub fn with_placement(&self, placement: Se3Scale) -> SdfShape {
        let mut s = self.clone();
        s.set_placement(placement);
        s
    }

    pub fn set_placement(&mut self, placement: Se3Scale) {
        self.rot = placement.rotation.to_mat();
        self.placement = placement;
    }

    pub fn set_latent(&mut self, latent: Vec<f64>) -> Result<()> {
        if latent.len() != self.latent.len() {
            return Err(Error::Invalid(format!(
                "latent length {} != {}",
                latent.len(),
                self.latent.len()
            )));
        }
        if latent.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} latent", self.kind)));
        }
        self.latent = latent;
        Ok(())
    }

    /// Adds `step` (laid out in parameter order) to the parameters; the
    /// rotation part is composed on the left as `exp(step[3..6])`.
    pub fn apply_step(&mut self, step: &[f64]) -> Result<()> {
        if step.len() != self.param_count() {
            return Err(Error::Invalid(format!(
                "step of length {} for {} parameters",
                step.len(),
                self.param_count()
            )));
        }
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} parameter step", self.kind)));
        }
        let pl = self.placement;
        let rotation = Quat::from_axis_angle(Vec3::new(step[3], step[4], step[5]))
            .mul(&pl.rotation)
            .normalized();
        let translation = pl.translation + Vec3::new(step[0], step[1], step[2]);
        let placement = Se3Scale::new(rotation, translation, pl.scale + step[6])?;
        for (z, d) in self.latent.iter_mut().zip(&step[PLACEMENT_PARAMS..]) {
            *z += d;
        }
        self.set_placement(placement);
        Ok(())
    }

    /// Copy with parameter `k` moved by `delta`.
    pub fn nudged(&self, k: usize, delta: f64) -> Result<SdfShape> {
        let mut step = vec![0.0; self.param_count()];
        step[k] = delta;
        let mut s = self.clone();
        s.apply_step(&step)?;
        Ok(s)
    }

    /// Point in the shape's base (unscaled, unrotated) frame.
    pub fn to_base(&self, p: Vec3) -> Vec3 {
        self.rot.tr_mul_vec(p - self.placement.translation) / self.placement.scale
    }

    #[inline]
    fn base_value<R: Real>(&self, z: &[R], q: Vec3<R>, rim: R) -> R {
        match &self.grid {
            Some(spec) => grid_value(spec, &self.latent, q),
            None => closed_form_value(self.kind, z, q, rim),
        }
    }

    /// Signed distance in world units.
    pub fn eval(&self, p: Vec3) -> f64 {
        let s = self.placement.scale;
        let q = self.to_base(p);
        s * self.base_value(&self.latent, q, BOWL_RIM / s)
    }

    /// `G` with every parameter supplied generically; `theta.phi` is an
    /// increment on top of the current rotation.
    pub(crate) fn eval_theta<R: Real>(&self, p: Vec3<R>, theta: &Theta<R>) -> R {
        let rot = axis_angle_matrix(theta.phi).mul_mat(&self.rot.lift());
        let q = rot.tr_mul_vec(p - theta.t) / theta.s;
        let rim = R::cst(BOWL_RIM) / theta.s;
        theta.s * self.base_value(&theta.z, q, rim)
    }

    /// Current parameters as seeded dual variables (placement first, then a
    /// closed-form latent; grid latents stay out of the dual vector).
    pub(crate) fn theta_dual<const N: usize>(&self) -> Theta<Dual<f64, N>> {
        let t = self.placement.translation;
        let v = |x: f64, i: usize| {
            if i < N {
                Dual::var(x, i)
            } else {
                Dual::constant(x)
            }
        };
        Theta {
            t: Vec3::new(v(t.x, 0), v(t.y, 1), v(t.z, 2)),
            phi: Vec3::new(v(0.0, 3), v(0.0, 4), v(0.0, 5)),
            s: v(self.placement.scale, 6),
            z: if self.grid.is_some() {
                Vec::new()
            } else {
                self.latent
                    .iter()
                    .enumerate()
                    .map(|(k, &x)| v(x, PLACEMENT_PARAMS + k))
                    .collect()
            },
        }
    }

    /// Number of parameters carried by [`theta_dual`](Self::theta_dual).
    pub(crate) fn dual_param_count(&self) -> usize {
        if self.grid.is_some() {
            PLACEMENT_PARAMS
        } else {
            self.param_count()
        }
    }

    /// `true` when `p` lies where the gradient is defined.
    pub fn gradient_defined(&self, p: Vec3) -> bool {
        match &self.grid {
            Some(spec) => spec.contains(self.to_base(p)),
            None => true,
        }
    }

    /// Unnormalized spatial gradient `dG/dp`.
    pub fn gradient(&self, p: Vec3) -> Result<Vec3> {
        if !self.gradient_defined(p) {
            return Err(Error::Domain(format!(
                "grid gradient queried outside the grid box at {p:?}"
            )));
        }
        Ok(self.gradient_unchecked(p))
    }

    /// Spatial gradient without the grid-box check (outside the box it is the
    /// gradient of the clamped extension).
    pub(crate) fn gradient_unchecked(&self, p: Vec3) -> Vec3 {
        type D3 = Dual<f64, 3>;
        let q = self.to_base(p);
        let qd = Vec3::new(D3::var(q.x, 0), D3::var(q.y, 1), D3::var(q.z, 2));
        // grid values are read straight from `self.latent`
        let z: Vec<D3> = match self.grid {
            Some(_) => Vec::new(),
            None => self.latent.iter().map(|&v| D3::constant(v)).collect(),
        };
        let f = self.base_value(&z, qd, D3::constant(BOWL_RIM / self.placement.scale));
        self.rot.mul_vec(Vec3::new(f.d[0], f.d[1], f.d[2]))
    }

    /// Value and parameter derivatives of `G` at a fixed world point.
    pub fn param_gradient(&self, p: Vec3) -> ParamGradient {
        type D = Dual<f64, MAX_CLOSED_PARAMS>;
        let theta = self.theta_dual::<MAX_CLOSED_PARAMS>();
        let g: D = self.eval_theta(p.lift(), &theta);
        let mut placement = [0.0; PLACEMENT_PARAMS];
        placement.copy_from_slice(&g.d[..PLACEMENT_PARAMS]);
        let latent = match &self.grid {
            Some(spec) => self.grid_latent_weights(spec, p),
            None => (0..self.latent.len())
                .map(|k| (k, g.d[PLACEMENT_PARAMS + k]))
                .collect(),
        };
        ParamGradient {
            value: g.v,
            placement,
            latent,
        }
    }

    /// `dG/d(node value)`: the trilinear weights at the clamped point, times
    /// the scale.
    fn grid_latent_weights(&self, spec: &GridSpec, p: Vec3) -> Vec<(usize, f64)> {
        let q = self.to_base(p);
        let qc = q.max_by_component(spec.min).min_by_component(spec.max);
        let (idx, w) = spec.trilinear(qc);
        idx.iter()
            .zip(w)
            .map(|(&i, w)| (i, w * self.placement.scale))
            .collect()
    }
}
