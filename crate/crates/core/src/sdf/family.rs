//! Closed-form SDF families and the trilinear grid, in the shape's base frame.
//!
//! Latent codes are zero-centered: `z = 0` is the canonical member of each
//! family, and the overall size is carried by the placement scale, so scale
//! and latent do not trade off against each other (except for the sphere,
//! whose single latent is its log-radius).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Sphere,
    Ellipsoid,
    RoundedBox,
    Bowl,
    Plane,
    Grid,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::Sphere,
        FamilyKind::Ellipsoid,
        FamilyKind::RoundedBox,
        FamilyKind::Bowl,
        FamilyKind::Plane,
        FamilyKind::Grid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Sphere => "sphere",
            FamilyKind::Ellipsoid => "ellipsoid",
            FamilyKind::RoundedBox => "rounded-box",
            FamilyKind::Bowl => "bowl",
            FamilyKind::Plane => "plane",
            FamilyKind::Grid => "grid",
        }
    }

    pub fn parse(s: &str) -> Option<FamilyKind> {
        FamilyKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Latent length for the closed-form families; `None` for the grid.
    pub fn latent_len(self) -> Option<usize> {
        match self {
            FamilyKind::Sphere => Some(1),
            FamilyKind::Ellipsoid => Some(3),
            FamilyKind::RoundedBox => Some(4),
            FamilyKind::Bowl => Some(3),
            FamilyKind::Plane => Some(0),
            FamilyKind::Grid => None,
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Node layout of a grid SDF; values live in the shape's latent, x fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub min: Vec3,
    pub max: Vec3,
}

impl GridSpec {
    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let e = self.max - self.min;
        self.min
            + Vec3::new(
                e.x * i as f64 / (self.dims[0] - 1) as f64,
                e.y * j as f64 / (self.dims[1] - 1) as f64,
                e.z * k as f64 / (self.dims[2] - 1) as f64,
            )
    }

    pub fn contains(&self, q: Vec3) -> bool {
        q.x >= self.min.x
            && q.y >= self.min.y
            && q.z >= self.min.z
            && q.x <= self.max.x
            && q.y <= self.max.y
            && q.z <= self.max.z
    }

    pub fn cell_diagonal(&self) -> f64 {
        let e = self.max - self.min;
        Vec3::new(
            e.x / (self.dims[0] - 1) as f64,
            e.y / (self.dims[1] - 1) as f64,
            e.z / (self.dims[2] - 1) as f64,
        )
        .norm()
    }

    /// Cell origin indices and the 8 trilinear weights (corner order: x bit 0,
    /// y bit 1, z bit 2) at a point inside or on the box, plus the node indices.
    pub(crate) fn trilinear<R: Real>(&self, q: Vec3<R>) -> ([usize; 8], [R; 8]) {
        let e = self.max - self.min;
        let axis = |v: R, lo: f64, ext: f64, n: usize| -> (usize, R) {
            let mut g = (v - R::cst(lo)).scale((n - 1) as f64 / ext);
            // land exactly on nodes despite rounding in the affine map
            let snap = g.val().round() - g.val();
            if snap.abs() < 1e-9 {
                g += R::cst(snap);
            }
            let c = (g.val().floor().max(0.0) as usize).min(n - 2);
            (c, g - R::cst(c as f64))
        };
        let (i, fx) = axis(q.x, self.min.x, e.x, self.dims[0]);
        let (j, fy) = axis(q.y, self.min.y, e.y, self.dims[1]);
        let (k, fz) = axis(q.z, self.min.z, e.z, self.dims[2]);
        let one = R::cst(1.0);
        let wx = [one - fx, fx];
        let wy = [one - fy, fy];
        let wz = [one - fz, fz];
        let mut idx = [0usize; 8];
        let mut w = [R::cst(0.0); 8];
        for c in 0..8 {
            let (a, b, d) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            idx[c] = self.index(i + a, j + b, k + d);
            w[c] = wx[a] * wy[b] * wz[d];
        }
        (idx, w)
    }
}

/// Bowl geometry derived from its latent, in base units (outer radius 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BowlParams {
    /// Half wall thickness.
    pub half_thickness: f64,
    /// Radius of the wall's mid-surface.
    pub mid_radius: f64,
    /// Height of the rim plane above the center.
    pub rim_height: f64,
    /// Depth of the flat foot below the center.
    pub foot_depth: f64,
}

impl BowlParams {
    pub fn from_latent(z: &[f64]) -> BowlParams {
        let [tau, r, h, b] = bowl_params::<f64>(z);
        BowlParams {
            half_thickness: tau,
            mid_radius: r,
            rim_height: h,
            foot_depth: b,
        }
    }

    pub fn outer_radius(&self) -> f64 {
        self.mid_radius + self.half_thickness
    }

    pub fn inner_radius(&self) -> f64 {
        self.mid_radius - self.half_thickness
    }
}

fn bowl_params<R: Real>(z: &[R]) -> [R; 4] {
    let one = R::cst(1.0);
    let tau = (z[0] - R::cst(2.0)).sigmoid().scale(0.4);
    let r = one - tau;
    let h = r * z[1].tanh().scale(0.6);
    let b = one - tau * (one - z[2].tanh().scale(0.8));
    [tau, r, h, b]
}

/// Euclidean norm that stays differentiable (with zero tangent) at the origin.
fn safe_norm<R: Real>(v: Vec3<R>) -> R {
    let n2 = v.norm_squared();
    if n2.val() <= 0.0 {
        R::cst(0.0)
    } else {
        n2.sqrt()
    }
}

/// Polynomial smooth maximum; exactly `max(a, b)` once `|a - b| >= k`.
pub(crate) fn smooth_max<R: Real>(a: R, b: R, k: R) -> R {
    let h = (R::cst(0.5) + (a - b) / k.scale(2.0)).clamp(0.0, 1.0);
    b + (a - b) * h + k * h * (R::cst(1.0) - h)
}

fn mean3<R: Real>(z: &[R]) -> R {
    (z[0] + z[1] + z[2]).scale(1.0 / 3.0)
}

/// Base-frame signed distance of the closed-form families.
///
/// `rim` is the bowl's foot blending radius in base units.
pub(crate) fn closed_form_value<R: Real>(kind: FamilyKind, z: &[R], q: Vec3<R>, rim: R) -> R {
    match kind {
        FamilyKind::Sphere => safe_norm(q) - z[0].exp(),
        FamilyKind::Ellipsoid => {
            let m = mean3(z);
            let r = Vec3::new((z[0] - m).exp(), (z[1] - m).exp(), (z[2] - m).exp());
            let k = safe_norm(q.component_div(r));
            (k - R::cst(1.0)) * r.x.min(r.y).min(r.z)
        }
        FamilyKind::RoundedBox => {
            let m = mean3(z);
            let b = Vec3::new((z[0] - m).exp(), (z[1] - m).exp(), (z[2] - m).exp());
            let rho = z[3].sigmoid().scale(0.3);
            let d = q.map(|v| v.abs()) - b + Vec3::splat(rho);
            let zero = R::cst(0.0);
            let outside = safe_norm(d.map(|v| v.max(zero)));
            let inside = d.x.max(d.y).max(d.z).min(zero);
            outside + inside - rho
        }
        FamilyKind::Bowl => {
            let [tau, r, h, b] = bowl_params(z);
            let w = (r * r - h * h).sqrt();
            let rho2 = q.x * q.x + q.z * q.z;
            let rho = if rho2.val() <= 0.0 { R::cst(0.0) } else { rho2.sqrt() };
            // hollow spherical cap opening towards +y, rounded at the rim
            let cap = if h.val() * rho.val() < w.val() * q.y.val() {
                let dx = rho - w;
                let dy = q.y - h;
                (dx * dx + dy * dy).sqrt()
            } else {
                (safe_norm(q) - r).abs()
            } - tau;
            smooth_max(cap, -(q.y + b), rim)
        }
        FamilyKind::Plane => q.y,
        FamilyKind::Grid => unreachable!("grid values are evaluated through GridSpec"),
    }
}

/// Base-frame signed distance of a grid; outside the box the value at the
/// clamped point plus the distance to the box.
pub(crate) fn grid_value<R: Real>(spec: &GridSpec, values: &[f64], q: Vec3<R>) -> R {
    let clamp = |v: R, lo: f64, hi: f64| v.clamp(lo, hi);
    let qc = Vec3::new(
        clamp(q.x, spec.min.x, spec.max.x),
        clamp(q.y, spec.min.y, spec.max.y),
        clamp(q.z, spec.min.z, spec.max.z),
    );
    let (idx, w) = spec.trilinear(qc);
    let mut v = R::cst(0.0);
    for c in 0..8 {
        v += w[c].scale(values[idx[c]]);
    }
    let out = q - qc;
    if out.norm_squared().val() > 0.0 {
        v + out.norm()
    } else {
        v
    }
}
