use std::collections::HashMap;
use std::io::Write;

use super::raytri::Triangle;
use super::vec::Vec3;
use crate::error::{Error, Result};

/// Triangles whose area falls below this are dropped at construction.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Validates indices and drops degenerate triangles.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<TriMesh> {
        let n = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.into_iter().enumerate() {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Invalid(format!(
                    "triangle {k} references vertex beyond {n}"
                )));
            }
            let tri = Triangle::new(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if tri.area() >= MIN_TRIANGLE_AREA {
                kept.push(t);
            }
        }
        Ok(TriMesh {
            vertices,
            triangles: kept,
        })
    }

    pub fn empty() -> TriMesh {
        TriMesh::default()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, k: usize) -> Triangle {
        let [a, b, c] = self.triangles[k];
        Triangle::new(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.triangle(k).area()).sum()
    }

    /// Axis-aligned bounds `(min, max)`; `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), &v| {
            (lo.min_by_component(v), hi.max_by_component(v))
        }))
    }

    /// Appends another mesh, offsetting its indices.
    pub fn append(&mut self, other: &TriMesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
    }

    /// Number of undirected edges not shared by exactly two triangles.
    pub fn boundary_edge_count(&self) -> usize {
        self.edge_use().values().filter(|&&c| c != 2).count()
    }

    fn edge_use(&self) -> HashMap<(usize, usize), usize> {
        let mut uses = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        uses
    }

    /// Euler characteristic `V - E + F` of each connected component
    /// (components are formed by triangle connectivity; unused vertices ignored).
    pub fn component_euler_characteristics(&self) -> Vec<i64> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for t in &self.triangles {
            let r0 = find(&mut parent, t[0]);
            for &v in &t[1..] {
                let r = find(&mut parent, v);
                parent[r] = r0;
            }
        }
        let mut comps: HashMap<usize, (i64, i64, i64)> = HashMap::new();
        let mut used = vec![false; n];
        for t in &self.triangles {
            let r = find(&mut parent, t[0]);
            comps.entry(r).or_default().2 += 1;
            for &v in t {
                used[v] = true;
            }
        }
        for v in 0..n {
            if used[v] {
                let r = find(&mut parent, v);
                comps.entry(r).or_default().0 += 1;
            }
        }
        for (a, b) in self.edge_use().keys() {
            let _ = b;
            let r = find(&mut parent, *a);
            comps.entry(r).or_default().1 += 1;
        }
        let mut keys: Vec<_> = comps.keys().copied().collect();
        keys.sort_unstable();
        keys.iter()
            .map(|k| {
                let (v, e, f) = comps[k];
                v - e + f
            })
            .collect()
    }

    /// ASCII OBJ with `v` and `f` records only (1-based indices).
    pub fn write_obj<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {:.9} {:.9} {:.9}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn to_obj_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_obj(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("OBJ output is ASCII")
    }

    /// Reads the `v`/`f` subset written by [`TriMesh::write_obj`].
    pub fn parse_obj(text: &str) -> Result<TriMesh> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let bad = |msg: &str| Error::Parse {
                line: ln + 1,
                msg: msg.to_string(),
            };
            match it.next() {
                Some("v") => {
                    let c: Vec<f64> = it
                        .map(|s| s.parse::<f64>().map_err(|_| bad("malformed vertex coordinate")))
                        .collect::<Result<_>>()?;
                    if c.len() != 3 {
                        return Err(bad("vertex needs three coordinates"));
                    }
                    vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let c: Vec<usize> = it
                        .map(|s| {
                            s.split('/')
                                .next()
                                .unwrap_or("")
                                .parse::<usize>()
                                .ok()
                                .filter(|&i| i >= 1)
                                .ok_or_else(|| bad("malformed face index"))
                        })
                        .collect::<Result<_>>()?;
                    if c.len() != 3 {
                        return Err(bad("only triangular faces are supported"));
                    }
                    triangles.push([c[0] - 1, c[1] - 1, c[2] - 1]);
                }
                _ => {}
            }
        }
        TriMesh::new(vertices, triangles)
    }
}
