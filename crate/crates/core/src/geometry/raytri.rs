//! Ray/triangle kernels: closed-triangle intersection and the minimum
//! distance between a semi-infinite ray and a triangle, with gradients.

use super::camera::Ray;
use super::vec::Vec3;

/// Barycentric slack admitted by the closed-triangle hit test.
const BARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub a: Vec3,
    pub b: Vec3,
    pub c: Vec3,
}

impl Triangle {
    pub fn new(a: Vec3, b: Vec3, c: Vec3) -> Triangle {
        Triangle { a, b, c }
    }

    pub fn vertex(&self, k: usize) -> Vec3 {
        match k {
            0 => self.a,
            1 => self.b,
            _ => self.c,
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.b - self.a).cross(self.c - self.a).norm()
    }

    pub fn point(&self, bary: [f64; 3]) -> Vec3 {
        self.a * bary[0] + self.b * bary[1] + self.c * bary[2]
    }
}

/// Which part of the triangle holds the closest point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    Face,
    Edge(u8),
    Vertex(u8),
}

impl Feature {
    fn from_bary(b: [f64; 3]) -> Feature {
        let zero: Vec<usize> = (0..3).filter(|&k| b[k] == 0.0).collect();
        match zero.len() {
            0 => Feature::Face,
            1 => Feature::Edge(zero[0] as u8),
            _ => Feature::Vertex((0..3).find(|&k| b[k] != 0.0).unwrap_or(0) as u8),
        }
    }
}

/// Closest pair between a ray and a triangle.
#[derive(Clone, Copy, Debug)]
pub struct RayTriangleClosest {
    pub distance: f64,
    /// Ray parameter of the closest ray point (the hit parameter when `hit`).
    pub t: f64,
    /// Barycentric coordinates of the closest triangle point.
    pub bary: [f64; 3],
    pub hit: bool,
    /// `triangle point - ray point`
    pub delta: Vec3,
}

impl RayTriangleClosest {
    pub fn feature(&self) -> Feature {
        Feature::from_bary(self.bary)
    }

    /// `d distance / d vertex_k` for k = 0..3. Zero when the ray hits.
    ///
    /// With the minimizing pair held fixed (envelope theorem), the distance
    /// moves only through the triangle point `sum_k bary_k v_k`.
    pub fn vertex_gradients(&self) -> [Vec3; 3] {
        if self.hit || self.distance <= 0.0 {
            return [Vec3::ZERO; 3];
        }
        let u = self.delta / self.distance;
        [u * self.bary[0], u * self.bary[1], u * self.bary[2]]
    }

    /// `d distance / d ray.origin`
    pub fn origin_gradient(&self) -> Vec3 {
        if self.hit || self.distance <= 0.0 {
            return Vec3::ZERO;
        }
        -(self.delta / self.distance)
    }

    /// `d distance / d ray.direction`, treating the direction as a free vector.
    pub fn direction_gradient(&self) -> Vec3 {
        self.origin_gradient() * self.t
    }
}

/// Möller–Trumbore with closed bounds. Returns `(t, u, v)`; `None` if the ray is
/// parallel to the triangle plane or misses.
fn moller_trumbore(ray: &Ray, tri: &Triangle) -> Option<(f64, f64, f64)> {
    let e1 = tri.b - tri.a;
    let e2 = tri.c - tri.a;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri.a;
    let u = s.dot(p) * inv;
    if u < -BARY_TOL || u > 1.0 + BARY_TOL {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv;
    if v < -BARY_TOL || u + v > 1.0 + BARY_TOL {
        return None;
    }
    let t = e2.dot(q) * inv;
    if t < -BARY_TOL {
        return None;
    }
    Some((t.max(0.0), u.max(0.0), v.max(0.0)))
}

/// Closest point on a triangle to `p`, as barycentric coordinates (Ericson).
fn closest_point_barycentric(p: Vec3, tri: &Triangle) -> [f64; 3] {
    let (a, b, c) = (tri.a, tri.b, tri.c);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Closest points between the ray (t >= 0, unit direction) and segment
/// `p0 + s (p1 - p0)`, s in [0, 1]. Returns `(t, s)`.
fn ray_segment_closest(ray: &Ray, p0: Vec3, p1: Vec3) -> (f64, f64) {
    let d = ray.direction;
    let e = p1 - p0;
    let w0 = ray.origin - p0;
    let ee = e.dot(e);
    let b = d.dot(e);
    let c = d.dot(w0);
    let f = e.dot(w0);
    let denom = ee - b * b;
    let mut s = if denom > 1e-14 * ee {
        ((f - c * b) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = s * b - c;
    if t < 0.0 {
        t = 0.0;
        s = (f / ee).clamp(0.0, 1.0);
    }
    (t, s)
}

/// Minimum-distance pair between the ray and the closed triangle.
pub fn ray_triangle_closest(ray: &Ray, tri: &Triangle) -> RayTriangleClosest {
    if let Some((t, u, v)) = moller_trumbore(ray, tri) {
        return RayTriangleClosest {
            distance: 0.0,
            t,
            bary: [1.0 - u - v, u, v],
            hit: true,
            delta: Vec3::ZERO,
        };
    }
    // No crossing: the minimum sits at the ray origin or on a triangle edge.
    let bary = closest_point_barycentric(ray.origin, tri);
    let delta = tri.point(bary) - ray.origin;
    let mut best = RayTriangleClosest {
        distance: delta.norm(),
        t: 0.0,
        bary,
        hit: false,
        delta,
    };
    closest_on_edges(ray, tri, &mut best);
    if best.distance <= BARY_TOL {
        // coplanar ray crossing an edge
        best.hit = true;
        best.distance = 0.0;
        best.delta = Vec3::ZERO;
    }
    best
}

/// Minimum-distance pair between the ray and the triangle's boundary (its
/// three edges); `hit` reports whether the ray crosses the closed triangle.
pub fn ray_triangle_edge_closest(ray: &Ray, tri: &Triangle) -> RayTriangleClosest {
    let mut best = RayTriangleClosest {
        distance: f64::INFINITY,
        t: 0.0,
        bary: [1.0, 0.0, 0.0],
        hit: false,
        delta: Vec3::ZERO,
    };
    closest_on_edges(ray, tri, &mut best);
    best.hit = ray_triangle_intersect(ray, tri).is_some();
    best
}

fn closest_on_edges(ray: &Ray, tri: &Triangle, best: &mut RayTriangleClosest) {
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let (p0, p1) = (tri.vertex(i), tri.vertex(j));
        let (t, s) = ray_segment_closest(ray, p0, p1);
        let q = p0 + (p1 - p0) * s;
        let delta = q - ray.at(t);
        let dist = delta.norm();
        if dist < best.distance {
            let mut bary = [0.0; 3];
            bary[i] = 1.0 - s;
            bary[j] = s;
            *best = RayTriangleClosest {
                distance: dist,
                t,
                bary,
                hit: false,
                delta,
            };
        }
    }
}

/// Closed-triangle hit test; returns the hit parameter.
pub fn ray_triangle_intersect(ray: &Ray, tri: &Triangle) -> Option<f64> {
    if let Some((t, _, _)) = moller_trumbore(ray, tri) {
        return Some(t);
    }
    let c = ray_triangle_closest(ray, tri);
    c.hit.then_some(c.t)
}

pub fn ray_triangle_distance(ray: &Ray, tri: &Triangle) -> f64 {
    ray_triangle_closest(ray, tri).distance
}

/// Distance from the ray (t >= 0) to a point.
pub fn ray_point_distance(ray: &Ray, p: Vec3) -> f64 {
    let t = (p - ray.origin).dot(ray.direction).max(0.0);
    (p - ray.at(t)).norm()
}
