use super::shape::{SdfShape, MAX_CLOSED_PARAMS, PLACEMENT_PARAMS};
use crate::geometry::{Ray, Vec3};
use crate::real::Dual;

/// Directional derivative of the SDF along the ray below which a hit is
/// treated as a tangential graze.
pub const GRAZE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceConfig {
    pub max_steps: usize,
    pub eps: f64,
    /// Rays are abandoned once `t` exceeds this.
    pub max_depth: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            max_steps: 128,
            eps: 1e-4,
            max_depth: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfHit {
    pub point: Vec3,
    pub depth: f64,
    /// Unit normal when converged; zero if the gradient vanished.
    pub normal: Vec3,
    pub converged: bool,
    pub residual: f64,
    /// Number of marching steps taken.
    pub steps: usize,
}

/// `t <- t + G(o + t d)` from `t = 0`; returns every `(t, G)` iterate (the
/// last one is the first reaching `|G| <= eps`, if any) and whether it did.
pub fn trace_iterates(shape: &SdfShape, ray: &Ray, cfg: &TraceConfig) -> (Vec<(f64, f64)>, bool) {
    let mut iterates = Vec::with_capacity(16);
    let mut t = 0.0;
    for k in 0..=cfg.max_steps {
        let g = shape.eval(ray.at(t));
        iterates.push((t, g));
        if g.abs() <= cfg.eps {
            return (iterates, true);
        }
        if k == cfg.max_steps || !g.is_finite() || (k == 0 && g < 0.0) {
            break;
        }
        t += g;
        if t > cfg.max_depth {
            break;
        }
    }
    (iterates, false)
}

fn finish(shape: &SdfShape, ray: &Ray, t: f64, g: f64, steps: usize, converged: bool) -> SdfHit {
    let point = ray.at(t);
    let grad = shape.gradient_unchecked(point);
    let norm = grad.norm();
    let normal = if norm > 0.0 { grad / norm } else { Vec3::ZERO };
    let grazing = norm == 0.0 || (grad.dot(ray.direction) / norm).abs() <= GRAZE_TOL;
    SdfHit {
        point,
        depth: t,
        normal,
        converged: converged && !grazing && shape.gradient_defined(point),
        residual: g.abs(),
        steps,
    }
}

/// Sphere traces a single shape from the ray origin.
pub fn sphere_trace(shape: &SdfShape, ray: &Ray, max_steps: usize, eps: f64) -> SdfHit {
    trace_with(
        shape,
        ray,
        &TraceConfig {
            max_steps,
            eps,
            ..TraceConfig::default()
        },
    )
}

pub fn trace_with(shape: &SdfShape, ray: &Ray, cfg: &TraceConfig) -> SdfHit {
    let (it, converged) = trace_iterates(shape, ray, cfg);
    let (t, g) = *it.last().expect("march records the start point");
    finish(shape, ray, t, g, it.len() - 1, converged)
}

/// Nearest converged hit over several shapes, with the index of the winner.
pub fn trace_scene(shapes: &[SdfShape], ray: &Ray, cfg: &TraceConfig) -> Option<(usize, SdfHit)> {
    shapes
        .iter()
        .enumerate()
        .map(|(i, s)| (i, trace_with(s, ray, cfg)))
        .filter(|(_, h)| h.converged)
        .min_by(|a, b| a.1.depth.total_cmp(&b.1.depth))
}

/// The point a renderer uses for a ray: a fixed number of marching steps past
/// the first iterate that came within `coarse_tol` of the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceEstimate {
    /// Fully converged trace; the estimate exists only when it converged.
    pub hit: SdfHit,
    /// Iteration count of the estimate (marching steps from the origin).
    pub steps: usize,
    pub depth: f64,
    pub point: Vec3,
    /// Unit normal at `point`.
    pub normal: Vec3,
    /// Unnormalized gradient at `point`.
    pub gradient: Vec3,
}

impl SurfaceEstimate {
    pub fn new(
        shape: &SdfShape,
        ray: &Ray,
        cfg: &TraceConfig,
        coarse_tol: f64,
        refine_steps: usize,
    ) -> Option<SurfaceEstimate> {
        let (it, converged) = trace_iterates(shape, ray, cfg);
        let (t, g) = *it.last()?;
        let hit = finish(shape, ray, t, g, it.len() - 1, converged);
        if !hit.converged {
            return None;
        }
        let first = it
            .iter()
            .position(|&(_, g)| g < coarse_tol)
            .unwrap_or(hit.steps);
        let steps = (first + refine_steps).min(hit.steps);
        let depth = it[steps].0;
        let point = ray.at(depth);
        let gradient = shape.gradient_unchecked(point);
        let norm = gradient.norm();
        if norm == 0.0 {
            return None;
        }
        Some(SurfaceEstimate {
            hit,
            steps,
            depth,
            point,
            normal: gradient / norm,
            gradient,
        })
    }
}

/// Derivative of a hit depth with respect to the shape parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthDerivative {
    pub placement: [f64; PLACEMENT_PARAMS],
    pub latent: Vec<(usize, f64)>,
}

impl DepthDerivative {
    /// Implicit differentiation of `G(o + t d, theta) = 0`:
    /// `dt/dtheta = -(dG/dtheta) / (grad G . d)`.
    pub fn implicit(shape: &SdfShape, ray: &Ray, hit: &SdfHit) -> Option<DepthDerivative> {
        let grad = shape.gradient_unchecked(hit.point);
        let denom = grad.dot(ray.direction);
        if denom.abs() <= GRAZE_TOL * grad.norm().max(1e-300) {
            return None;
        }
        let pg = shape.param_gradient(hit.point);
        let mut placement = pg.placement;
        for v in &mut placement {
            *v = -*v / denom;
        }
        Some(DepthDerivative {
            placement,
            latent: pg.latent.into_iter().map(|(i, g)| (i, -g / denom)).collect(),
        })
    }
}

/// Exact parameter derivatives of a finite-step surface estimate: the depth
/// after `steps` marching iterations, and the unnormalized gradient there.
///
/// Grid latents are not carried; only their placement derivatives are.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateDerivative {
    pub n_params: usize,
    /// `dt/dtheta`.
    pub depth: Vec<f64>,
    pub gradient: Vec3,
    /// `d(grad G)/dtheta` along the estimate (total derivative).
    pub d_gradient: Vec<Vec3>,
}

pub(crate) fn estimate_derivative(shape: &SdfShape, ray: &Ray, steps: usize) -> EstimateDerivative {
    type D = Dual<f64, MAX_CLOSED_PARAMS>;
    type DD = Dual<D, 3>;
    let n_params = shape.dual_param_count();
    let theta = shape.theta_dual::<MAX_CLOSED_PARAMS>();
    let o: Vec3<D> = ray.origin.lift();
    let d: Vec3<D> = ray.direction.lift();
    let mut t = D::constant(0.0);
    for _ in 0..steps {
        t += shape.eval_theta(o + d * t, &theta);
    }
    let x = o + d * t;
    let theta2 = theta.map(DD::constant);
    let p = Vec3::new(DD::var(x.x, 0), DD::var(x.y, 1), DD::var(x.z, 2));
    let g = shape.eval_theta(p, &theta2);
    let gradient = Vec3::new(g.d[0].v, g.d[1].v, g.d[2].v);
    let d_gradient = (0..n_params)
        .map(|k| Vec3::new(g.d[0].d[k], g.d[1].d[k], g.d[2].d[k]))
        .collect();
    EstimateDerivative {
        n_params,
        depth: t.d[..n_params].to_vec(),
        gradient,
        d_gradient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Quat, Se3Scale};
    use crate::sdf::{FamilyKind, GridSpec};

    fn placement() -> Se3Scale {
        Se3Scale::new(
            Quat::from_axis_angle(Vec3::new(0.3, -0.2, 0.5)),
            Vec3::new(0.1, -0.05, 0.2),
            0.7,
        )
        .unwrap()
    }

    fn check_estimate_derivative(shape: &SdfShape, ray: &Ray, steps: usize) {
        let ed = estimate_derivative(shape, ray, steps);
        let depth_at = |s: &SdfShape| {
            let (it, _) = trace_iterates(s, ray, &TraceConfig::default());
            it[steps].0
        };
        let h = 1e-6;
        for k in 0..ed.n_params {
            let (sp, sm) = (shape.nudged(k, h).unwrap(), shape.nudged(k, -h).unwrap());
            let fd = (depth_at(&sp) - depth_at(&sm)) / (2.0 * h);
            assert!(
                (fd - ed.depth[k]).abs() <= 1e-5 * (1.0 + fd.abs()),
                "{} param {k}: depth {} vs fd {fd}",
                shape.kind(),
                ed.depth[k]
            );
            let t = depth_at(shape);
            let gp = sp.gradient_unchecked(ray.at(depth_at(&sp)));
            let gm = sm.gradient_unchecked(ray.at(depth_at(&sm)));
            let fd_g = (gp - gm) / (2.0 * h);
            let err = (fd_g - ed.d_gradient[k]).norm();
            assert!(
                err <= 1e-4 * (1.0 + fd_g.norm()),
                "{} param {k}: d_gradient {:?} vs fd {fd_g:?} (t={t})",
                shape.kind(),
                ed.d_gradient[k]
            );
        }
    }

    #[test]
    fn finite_step_estimate_derivatives_match_differences() {
        let origin = Vec3::new(0.05, 0.9, -2.0);
        let ray = Ray::new(origin, placement().translation + Vec3::new(0.03, 0.1, 0.0) - origin);
        let shapes = [
            SdfShape::closed(FamilyKind::Sphere, vec![-0.1], placement()).unwrap(),
            SdfShape::closed(FamilyKind::RoundedBox, vec![0.2, -0.1, 0.0, 0.3], placement()).unwrap(),
            SdfShape::closed(FamilyKind::Bowl, vec![0.4, -0.2, 0.1], placement()).unwrap(),
            SdfShape::closed(FamilyKind::Ellipsoid, vec![0.2, 0.0, -0.3], placement()).unwrap(),
        ];
        for s in &shapes {
            let target = s.placement().apply(Vec3::new(0.2, -0.6, -0.4));
            let ray = Ray::new(origin, target - origin);
            let hit = trace_with(s, &ray, &TraceConfig::default());
            assert!(hit.converged, "{} missed", s.kind());
            for steps in [1, 2, 4, hit.steps].into_iter().filter(|&k| k <= hit.steps) {
                check_estimate_derivative(s, &ray, steps);
            }
        }
        let base = SdfShape::closed(FamilyKind::Sphere, vec![0.0], Se3Scale::IDENTITY).unwrap();
        let mut grid = SdfShape::sample_grid(
            &base,
            [16, 16, 16],
            Vec3::splat(-1.5),
            Vec3::splat(1.5),
        )
        .unwrap();
        grid.set_placement(placement());
        let hit = trace_with(&grid, &ray, &TraceConfig::default());
        assert!(hit.converged);
        check_estimate_derivative(&grid, &ray, 3);
        assert_eq!(GridSpec { dims: [16; 3], min: Vec3::splat(-1.5), max: Vec3::splat(1.5) }, *grid.grid_spec().unwrap());
    }
}
