use rayon::prelude::*;

use super::mirror::MirrorMap;
use super::{sigmoid, softplus, RenderConfig, SoftImage, CULL_EXPONENT};
use crate::emitter::{EmitterMesh, EmitterModel};
use crate::error::{Error, Result};
use crate::geometry::{
    ray_point_distance, ray_triangle_closest, ray_triangle_edge_closest, ray_triangle_intersect,
    Camera, Mat3, Ray, Triangle, Vec3,
};
use crate::scene::Scene;
use crate::sdf::{estimate_derivative, SdfShape};

#[derive(Clone, Debug, PartialEq)]
struct BoneSpan {
    start: usize,
    end: usize,
    center: Vec3,
    radius: f64,
}

/// Emitter mesh prepared for ray queries at a given softness.
#[derive(Clone, Debug, PartialEq)]
pub struct EmitterGeometry {
    pub built: EmitterMesh,
    triangles: Vec<Triangle>,
    bones: Vec<BoneSpan>,
    /// `1 / (sigma R^2)`, `R` the skeleton's rest bounding radius.
    pub inv_scale: f64,
}

impl EmitterGeometry {
    pub fn new(model: &EmitterModel, segments: usize, sigma: f64) -> Result<EmitterGeometry> {
        let built = model.build_mesh(segments)?;
        let r = model.skeleton().rest_bounding_radius();
        Ok(EmitterGeometry::from_mesh(built, sigma, r))
    }

    pub fn from_mesh(built: EmitterMesh, sigma: f64, unit: f64) -> EmitterGeometry {
        let mesh = &built.mesh;
        let triangles: Vec<Triangle> = (0..mesh.triangles.len()).map(|k| mesh.triangle(k)).collect();
        let mut bones: Vec<BoneSpan> = Vec::new();
        for (k, t) in mesh.triangles.iter().enumerate() {
            let bone = built.vertex_bone[t[0]];
            match bones.last_mut() {
                Some(b) if built.vertex_bone[mesh.triangles[b.start][0]] == bone => b.end = k + 1,
                _ => bones.push(BoneSpan {
                    start: k,
                    end: k + 1,
                    center: Vec3::ZERO,
                    radius: 0.0,
                }),
            }
        }
        for b in &mut bones {
            let idx = || mesh.triangles[b.start..b.end].iter().flatten();
            let n = idx().count() as f64;
            let c = idx().map(|&i| mesh.vertices[i]).sum::<Vec3>() / n;
            b.radius = idx()
                .map(|&i| (mesh.vertices[i] - c).norm())
                .fold(0.0, f64::max);
            b.center = c;
        }
        EmitterGeometry {
            built,
            triangles,
            bones,
            inv_scale: 1.0 / (sigma * unit * unit),
        }
    }

    /// Any triangle crossed by the ray.
    pub fn hard_hit(&self, ray: &Ray) -> bool {
        self.bones.iter().any(|b| {
            ray_point_distance(ray, b.center) <= b.radius
                && self.triangles[b.start..b.end]
                    .iter()
                    .any(|t| ray_triangle_intersect(ray, t).is_some())
        })
    }

    /// Soft occupancy of one ray and, with `grad`, its derivative terms.
    pub fn occupancy(&self, ray: &Ray, grad: bool) -> RayOccupancy {
        let mut s = 0.0;
        let mut near: Vec<(u32, [f64; 3], Vec3, f64, f64)> = Vec::new();
        for b in &self.bones {
            let lb = (ray_point_distance(ray, b.center) - b.radius).max(0.0);
            if lb * lb * self.inv_scale > CULL_EXPONENT {
                continue;
            }
            for (k, tri) in self.triangles[b.start..b.end].iter().enumerate() {
                // crossing rays are measured to the triangle boundary with
                // lambda = +1, others to the closed triangle with lambda = -1
                let (c, lambda) = if ray_triangle_intersect(ray, tri).is_some() {
                    (ray_triangle_edge_closest(ray, tri), 1.0)
                } else {
                    (ray_triangle_closest(ray, tri), -1.0)
                };
                let x = lambda * c.distance * c.distance * self.inv_scale;
                if x < -CULL_EXPONENT {
                    continue;
                }
                s += softplus(x);
                if grad && c.distance > 0.0 {
                    near.push(((b.start + k) as u32, c.bary, c.delta * lambda, c.t, x));
                }
            }
        }
        let keep = (-s).exp();
        let mut out = RayOccupancy {
            value: -(-s).exp_m1(),
            terms: Vec::with_capacity(near.len()),
            d_origin: Vec3::ZERO,
            d_direction: Vec3::ZERO,
        };
        for (tri, bary, delta, t, x) in near {
            // dI/dd * delta / d, with dx/dd = 2 lambda d / (sigma R^2); the
            // sign of lambda is folded into delta
            let w = delta * (keep * sigmoid(x) * 2.0 * self.inv_scale);
            out.d_origin -= w;
            out.d_direction -= w * t;
            out.terms.push(Term { tri, bary, w });
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    tri: u32,
    bary: [f64; 3],
    /// Derivative of the ray value with respect to the triangle's closest
    /// point; vertex `k` receives `bary[k] * w`.
    w: Vec3,
}

/// Value of one reflected ray and the pieces of its derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct RayOccupancy {
    pub value: f64,
    terms: Vec<Term>,
    /// `dI/d(origin)`.
    pub d_origin: Vec3,
    /// `dI/d(direction)`.
    pub d_direction: Vec3,
}

/// Soft values of a set of pixels plus what the backward passes need.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionPass {
    pub image: SoftImage,
    pub pixels: Vec<usize>,
    /// Aligned with `pixels`; `None` where the camera ray missed every mirror.
    pub rays: Vec<Option<RayOccupancy>>,
}

impl ReflectionPass {
    pub fn forward(map: &MirrorMap, geom: &EmitterGeometry, pixels: &[usize], grad: bool) -> Result<ReflectionPass> {
        if pixels.is_empty() {
            return Err(Error::Domain("no pixels sampled".into()));
        }
        if let Some(&p) = pixels.iter().find(|&&p| p >= map.hits.len()) {
            return Err(Error::Domain(format!("pixel index {p} outside the image")));
        }
        let rays: Vec<Option<RayOccupancy>> = pixels
            .par_iter()
            .map(|&p| map.hits[p].as_ref().map(|h| geom.occupancy(&h.reflected, grad)))
            .collect();
        let mut image = SoftImage::unsampled(map.width, map.height);
        for (&p, r) in pixels.iter().zip(&rays) {
            image.sampled[p] = true;
            image.values[p] = r.as_ref().map_or(0.0, |r| r.value);
        }
        Ok(ReflectionPass {
            image,
            pixels: pixels.to_vec(),
            rays,
        })
    }

    /// `dL/dv` for every emitter mesh vertex given `dL/dI` per sampled pixel
    /// (aligned with `pixels`).
    pub fn vertex_gradients(&self, geom: &EmitterGeometry, dl: &[f64]) -> Vec<Vec3> {
        let mesh = &geom.built.mesh;
        let mut g = vec![Vec3::ZERO; mesh.vertices.len()];
        for (r, &dl) in self.rays.iter().zip(dl) {
            let Some(r) = r else { continue };
            if dl == 0.0 {
                continue;
            }
            for t in &r.terms {
                let tri = mesh.triangles[t.tri as usize];
                for k in 0..3 {
                    g[tri[k]] += t.w * (dl * t.bary[k]);
                }
            }
        }
        g
    }

    /// Gradient with respect to the emitter parameters (placement, pose).
    pub fn emitter_gradient(&self, geom: &EmitterGeometry, model: &EmitterModel, dl: &[f64]) -> Vec<f64> {
        model.backprop(&geom.built, &self.vertex_gradients(geom, dl))
    }

    /// Gradient with respect to each object's parameters through the mirror
    /// hit point and the reflected direction.
    pub fn object_gradients(
        &self,
        map: &MirrorMap,
        objects: &[SdfShape],
        cfg: &RenderConfig,
        dl: &[f64],
    ) -> Vec<Vec<f64>> {
        let per_pixel: Vec<Option<(usize, Vec<f64>)>> = self
            .pixels
            .par_iter()
            .zip(&self.rays)
            .zip(dl)
            .map(|((&p, r), &dl)| {
                let (r, hit) = (r.as_ref()?, map.hits[p].as_ref()?);
                if dl == 0.0 {
                    return None;
                }
                let shape = &objects[hit.object];
                let main = estimate_derivative(shape, &hit.incoming, hit.steps);
                let n_params = main.n_params;
                let unit_deriv = |g: Vec3, dg: &[Vec3]| -> (Vec3, Vec<Vec3>) {
                    let len = g.norm();
                    let n = g / len;
                    let proj = Mat3::IDENTITY.add_mat(&outer(n, n).scale(-1.0)).scale(1.0 / len);
                    (n, dg.iter().map(|d| proj.mul_vec(*d)).collect())
                };
                let (mut n, mut dn) = unit_deriv(main.gradient, &main.d_gradient);
                if !hit.neighbors.is_empty() {
                    let mut m = n;
                    let mut dm = dn.clone();
                    for (ray, steps) in &hit.neighbors {
                        let e = estimate_derivative(shape, ray, *steps);
                        let (nk, dnk) = unit_deriv(e.gradient, &e.d_gradient);
                        m += nk;
                        for (a, b) in dm.iter_mut().zip(dnk) {
                            *a += b;
                        }
                    }
                    let (ns, dns) = unit_deriv(m, &dm);
                    n = ns;
                    dn = dns;
                }
                let rin = hit.incoming.direction;
                let mut out = vec![0.0; shape.param_count()];
                for k in 0..n_params {
                    let dr = (n * rin.dot(dn[k]) + dn[k] * rin.dot(n)) * -2.0;
                    let dx = rin * main.depth[k];
                    out[k] = dl * (r.d_origin.dot(dx + dr * cfg.eps) + r.d_direction.dot(dr));
                }
                Some((hit.object, out))
            })
            .collect();
        let mut grads: Vec<Vec<f64>> = objects.iter().map(|s| vec![0.0; s.param_count()]).collect();
        for (o, g) in per_pixel.into_iter().flatten() {
            for (a, b) in grads[o].iter_mut().zip(g) {
                *a += b;
            }
        }
        grads
    }
}

fn outer(a: Vec3, b: Vec3) -> Mat3 {
    Mat3::from_cols(a * b.x, a * b.y, a * b.z)
}

/// Soft reflection image over every pixel.
pub fn render_reflection(scene: &Scene, cam: &Camera, cfg: &RenderConfig) -> Result<SoftImage> {
    let map = MirrorMap::build(&scene.objects, cam, cfg)?;
    let geom = EmitterGeometry::new(&scene.emitter, scene.segments, cfg.sigma)?;
    let all: Vec<usize> = (0..map.hits.len()).collect();
    Ok(ReflectionPass::forward(&map, &geom, &all, false)?.image)
}

/// The `sigma -> 0` limit thresholded at 0.5: a pixel is 1 exactly when its
/// reflected ray crosses the emitter mesh.
pub fn render_reflection_hard(scene: &Scene, cam: &Camera, cfg: &RenderConfig) -> Result<SoftImage> {
    let map = MirrorMap::build(&scene.objects, cam, cfg)?;
    let geom = EmitterGeometry::new(&scene.emitter, scene.segments, cfg.sigma)?;
    Ok(hard_image(&map, &geom))
}

pub(crate) fn hard_image(map: &MirrorMap, geom: &EmitterGeometry) -> SoftImage {
    let bits: Vec<bool> = map
        .hits
        .par_iter()
        .map(|h| h.as_ref().is_some_and(|h| geom.hard_hit(&h.reflected)))
        .collect();
    SoftImage::from_binary(map.width, map.height, &bits)
}
