//! Triangulations of the unit square.

use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Node coordinates, counter-clockwise triangles and boundary flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub nodes: Vec<[T; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
}

/// Nodes per side of the boundary: `ceil(sqrt(k))`.
pub fn boundary_resolution(k: usize) -> usize {
    ((k as f64).sqrt().ceil() as usize).max(1)
}

/// `4 m` equally spaced nodes on the boundary of the unit square, corners
/// included, walked counter-clockwise from the origin.
pub fn boundary_nodes<T: Scalar>(m: usize) -> Vec<[T; 2]> {
    let mf = T::from_count(m);
    let t = |i: usize| T::from_count(i) / mf;
    let mut out = Vec::with_capacity(4 * m);
    out.extend((0..m).map(|i| [t(i), T::zero()]));
    out.extend((0..m).map(|i| [T::one(), t(i)]));
    out.extend((0..m).map(|i| [T::one() - t(i), T::one()]));
    out.extend((0..m).map(|i| [T::zero(), T::one() - t(i)]));
    out
}

fn on_boundary<T: Scalar>(p: &[T; 2]) -> bool {
    p.iter().any(|c| *c == T::zero() || *c == T::one())
}

impl<T: Scalar> Mesh<T> {
    /// Wraps explicit data, orienting every triangle counter-clockwise.
    pub fn from_parts(nodes: Vec<[T; 2]>, mut triangles: Vec<[usize; 3]>, boundary: Vec<bool>) -> Result<Self> {
        if boundary.len() != nodes.len() {
            return Err(Error::DimensionMismatch { expected: nodes.len(), found: boundary.len() });
        }
        for t in triangles.iter_mut() {
            if t.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::Geometry(format!("triangle {t:?} references a missing node")));
            }
            let a = signed_area(&nodes, *t);
            if a == T::zero() {
                return Err(Error::Geometry(format!("degenerate triangle {t:?}")));
            }
            if a < T::zero() {
                t.swap(1, 2);
            }
        }
        Ok(Self { nodes, triangles, boundary })
    }

    /// Uniform `n x n` lattice, every square split along its `y = x` diagonal.
    pub fn structured(n: usize) -> Self {
        let nf = T::from_count(n);
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        let mut boundary = Vec::with_capacity(nodes.capacity());
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([T::from_count(i) / nf, T::from_count(j) / nf]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        Self { nodes, triangles, boundary }
    }

    pub fn area(&self, t: usize) -> T {
        signed_area(&self.nodes, self.triangles[t])
    }

    pub fn total_area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: [T; 2]) -> [T; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [T::one() - l1 - l2, l1, l2]
    }

    /// Triangle containing `p` and its barycentric coordinates. Among
    /// candidates (points on shared edges) the most interior one wins.
    pub fn locate(&self, p: [T; 2]) -> Option<(usize, [T; 3])> {
        let tol = T::lit(-1e-10);
        let mut best: Option<(usize, [T; 3], T)> = None;
        for t in 0..self.triangles.len() {
            let l = self.barycentric(t, p);
            let m = l[0].min(l[1]).min(l[2]);
            if m >= tol && best.as_ref().map_or(true, |b| m > b.2) {
                best = Some((t, l, m));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    /// Number of distinct edges.
    pub fn n_edges(&self) -> usize {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e.len()
    }
}

fn signed_area<T: Scalar>(nodes: &[[T; 2]], t: [usize; 3]) -> T {
    let [a, b, c] = t.map(|i| nodes[i]);
    T::lit(0.5) * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn triangulate(points: &[[f64; 2]]) -> Result<Option<Vec<[usize; 3]>>> {
    let mut dt: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    for p in points {
        dt.insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::Geometry(format!("cannot insert ({}, {}): {e:?}", p[0], p[1])))?;
    }
    if dt.num_vertices() != points.len() {
        return Ok(None);
    }
    Ok(Some(
        dt.inner_faces()
            .map(|f| f.vertices().map(|v| v.fix().index()))
            .collect(),
    ))
}

/// Delaunay triangulation of interior `generators` plus `4 m` boundary
/// nodes. Coincident generators are separated by a `1e-12` jitter (once).
pub fn build_mesh<T: Scalar>(generators: &[[T; 2]], m: usize) -> Result<Mesh<T>> {
    if let Some(g) = generators.iter().find(|g| !g.iter().all(|c| *c > T::zero() && *c < T::one())) {
        return Err(Error::Geometry(format!("generator {g:?} outside the open unit square")));
    }
    let bnd: Vec<[T; 2]> = boundary_nodes(m);
    let mut nodes: Vec<[T; 2]> = generators.iter().copied().chain(bnd).collect();
    let as_f64 = |n: &[[T; 2]]| n.iter().map(|p| [p[0].as_f64(), p[1].as_f64()]).collect::<Vec<_>>();
    let tris = match triangulate(&as_f64(&nodes))? {
        Some(t) => t,
        None => {
            let eps = 1e-12;
            for (i, g) in nodes.iter_mut().take(generators.len()).enumerate() {
                // deterministic spread of distinct offsets
                let ang = i as f64 * 2.399_963_229_728_653;
                g[0] = T::lit((g[0].as_f64() + eps * ang.cos()).clamp(eps, 1.0 - eps));
                g[1] = T::lit((g[1].as_f64() + eps * ang.sin()).clamp(eps, 1.0 - eps));
            }
            triangulate(&as_f64(&nodes))?
                .ok_or_else(|| Error::Geometry("coincident mesh nodes persist after jitter".into()))?
        }
    };
    let boundary = nodes.iter().map(on_boundary).collect();
    Mesh::from_parts(nodes, tris, boundary)
}
