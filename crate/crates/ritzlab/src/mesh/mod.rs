//! Conforming, quasi-uniform triangulations of convex polygons.
//!
//! Meshes are built by fan-triangulating a convex polygon from its area
//! centroid and refined uniformly by red (edge-midpoint) refinement, which
//! splits every triangle into four similar children. All children of
//! triangle `t` occupy indices `4t..4t+4` in the refined mesh, so the
//! descendants of a triangle after `r` refinements form the contiguous
//! block `t·4^r..(t+1)·4^r`; the Green's function machinery relies on this.
//!
//! A `Mesh` is immutable after construction and safe to share across
//! threads for read-only queries.

mod io;

pub use io::{read_mesh, write_mesh};

use crate::geometry::{
    point_segment_distance, polygon_area, polygon_centroid, signed_area_x2, Point2,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("polygon must have at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not convex: negative turn at vertex {vertex}")]
    NonConvex { vertex: usize },
    #[error("polygon is degenerate (collinear or zero area)")]
    DegeneratePolygon,
    #[error("h_target must be positive, got {0}")]
    InvalidHTarget(f64),
    #[error("triangle {triangle} has non-positive signed area {area}")]
    NonPositiveArea { triangle: usize, area: f64 },
    #[error("triangle {triangle} references vertex {vertex} out of range (nv = {nv})")]
    VertexIndexOutOfRange {
        triangle: usize,
        vertex: usize,
        nv: usize,
    },
    #[error("mesh is not conforming: edge ({v0}, {v1}) is shared by {count} triangles")]
    NonConforming { v0: usize, v1: usize, count: usize },
    #[error("point ({x}, {y}) lies outside the triangulated domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A unique mesh edge with its adjacent triangles.
#[derive(Clone, Copy, Debug)]
pub struct Edge {
    /// Endpoint vertex indices, `v[0] < v[1]`.
    pub v: [usize; 2],
    /// First adjacent triangle (always present).
    pub t0: usize,
    /// Second adjacent triangle; `None` on the boundary.
    pub t1: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.t1.is_none()
    }
}

/// Mesh quality summary.
#[derive(Clone, Copy, Debug)]
pub struct MeshQuality {
    pub h_max: f64,
    pub h_min: f64,
    pub quasi_uniformity_ratio: f64,
    /// Smallest interior angle over all triangles, in radians.
    pub min_angle: f64,
}

/// Uniform bin grid over triangle bounding boxes used by `locate_point`.
#[derive(Clone, Debug)]
struct BinGrid {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<u32>>,
}

impl BinGrid {
    fn build(vertices: &[Point2], triangles: &[[usize; 3]], h_max: f64) -> BinGrid {
        let mut min = vertices[0];
        let mut max = vertices[0];
        for v in vertices {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        let cell = (2.0 * h_max).max(1e-300);
        let nx = (((max.x - min.x) / cell).ceil() as usize).max(1);
        let ny = (((max.y - min.y) / cell).ceil() as usize).max(1);
        let mut bins = vec![Vec::new(); nx * ny];
        let pad = 1e-12 * h_max;
        for (t, tri) in triangles.iter().enumerate() {
            let (mut lo, mut hi) = (vertices[tri[0]], vertices[tri[0]]);
            for &v in &tri[1..] {
                lo.x = lo.x.min(vertices[v].x);
                lo.y = lo.y.min(vertices[v].y);
                hi.x = hi.x.max(vertices[v].x);
                hi.y = hi.y.max(vertices[v].y);
            }
            let i0 = (((lo.x - pad - min.x) / cell).floor().max(0.0) as usize).min(nx - 1);
            let i1 = (((hi.x + pad - min.x) / cell).floor().max(0.0) as usize).min(nx - 1);
            let j0 = (((lo.y - pad - min.y) / cell).floor().max(0.0) as usize).min(ny - 1);
            let j1 = (((hi.y + pad - min.y) / cell).floor().max(0.0) as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(t as u32);
                }
            }
        }
        BinGrid {
            origin: min,
            cell,
            nx,
            ny,
            bins,
        }
    }

    fn candidates(&self, p: Point2) -> &[u32] {
        let i = (((p.x - self.origin.x) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((p.y - self.origin.y) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        &self.bins[j * self.nx + i]
    }
}

/// A conforming triangulation with counterclockwise triangles.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    edges: Vec<Edge>,
    /// Per-triangle edge indices, ordered (v0,v1), (v1,v2), (v2,v0).
    tri_edges: Vec<[usize; 3]>,
    h_max: f64,
    h_min: f64,
    total_area: f64,
    grid: BinGrid,
}

/// Barycentric containment tolerance used by `locate_point`.
const BARY_TOL: f64 = 1e-10;

impl Mesh {
    /// Builds a mesh from raw vertex and triangle arrays, deriving the edge
    /// table and boundary flags. Rejects non-conforming connectivity and
    /// triangles that are not strictly counterclockwise.
    pub fn from_raw(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Mesh, MeshError> {
        let nv = vertices.len();
        let mut h_max: f64 = 0.0;
        let mut h_min = f64::INFINITY;
        let mut total_area = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::VertexIndexOutOfRange {
                        triangle: t,
                        vertex: v,
                        nv,
                    });
                }
            }
            let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let area2 = signed_area_x2(a, b, c);
            if area2 <= 0.0 {
                return Err(MeshError::NonPositiveArea {
                    triangle: t,
                    area: 0.5 * area2,
                });
            }
            total_area += 0.5 * area2;
            for (p, q) in [(a, b), (b, c), (c, a)] {
                let len = p.dist(q);
                h_max = h_max.max(len);
                h_min = h_min.min(len);
            }
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for (slot, (i, j)) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
                .into_iter()
                .enumerate()
            {
                let key = (i.min(j), i.max(j));
                match edge_index.get(&key) {
                    None => {
                        edge_index.insert(key, edges.len());
                        tri_edges[t][slot] = edges.len();
                        edges.push(Edge {
                            v: [key.0, key.1],
                            t0: t,
                            t1: None,
                        });
                    }
                    Some(&e) => {
                        if edges[e].t1.is_some() {
                            return Err(MeshError::NonConforming {
                                v0: key.0,
                                v1: key.1,
                                count: 3,
                            });
                        }
                        edges[e].t1 = Some(t);
                        tri_edges[t][slot] = e;
                    }
                }
            }
        }

        let mut boundary_vertex = vec![false; nv];
        for e in &edges {
            if e.is_boundary() {
                boundary_vertex[e.v[0]] = true;
                boundary_vertex[e.v[1]] = true;
            }
        }

        let grid = BinGrid::build(&vertices, &triangles, h_max);
        Ok(Mesh {
            vertices,
            triangles,
            boundary_vertex,
            edges,
            tri_edges,
            h_max,
            h_min,
            total_area,
            grid,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn is_boundary_vertex(&self, i: usize) -> bool {
        self.boundary_vertex[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices of triangle `t`, ordered (v0,v1), (v1,v2), (v2,v0).
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    /// Sum of all triangle areas.
    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * signed_area_x2(a, b, c)
    }

    pub fn triangle_centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.triangle_vertices(t);
        (a + b + c) / 3.0
    }

    /// Longest edge of triangle `t`.
    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    /// Distance from `p` to the mesh boundary.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        let mut d = f64::INFINITY;
        for e in &self.edges {
            if e.is_boundary() {
                d = d.min(point_segment_distance(
                    p,
                    self.vertices[e.v[0]],
                    self.vertices[e.v[1]],
                ));
            }
        }
        d
    }

    /// Exact h_max / h_min / quasi-uniformity / minimum-angle metrics.
    pub fn quality_metrics(&self) -> MeshQuality {
        let mut min_angle = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_vertices(t);
            for (p, q, r) in [(a, b, c), (b, c, a), (c, a, b)] {
                let u = q - p;
                let v = r - p;
                let angle = u.cross(v).atan2(u.dot(v));
                min_angle = min_angle.min(angle.abs());
            }
        }
        MeshQuality {
            h_max: self.h_max,
            h_min: self.h_min,
            quasi_uniformity_ratio: self.h_max / self.h_min,
            min_angle,
        }
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`
    /// (unclamped; may be negative outside).
    pub fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let [a, b, c] = self.triangle_vertices(t);
        let area2 = signed_area_x2(a, b, c);
        [
            signed_area_x2(p, b, c) / area2,
            signed_area_x2(a, p, c) / area2,
            signed_area_x2(a, b, p) / area2,
        ]
    }

    /// Finds a triangle containing `x` together with clamped barycentric
    /// coordinates in `[0,1]` summing to 1. Points on shared edges resolve
    /// to the lowest-index containing triangle.
    pub fn locate_point(&self, x: Point2) -> Result<(usize, [f64; 3]), MeshError> {
        let mut cands: Vec<u32> = self.grid.candidates(x).to_vec();
        cands.sort_unstable();
        for &t in &cands {
            let t = t as usize;
            let lambda = self.barycentric(t, x);
            if lambda.iter().all(|&l| l >= -BARY_TOL) {
                let mut clamped = lambda.map(|l| l.max(0.0));
                let sum: f64 = clamped.iter().sum();
                for l in &mut clamped {
                    *l /= sum;
                }
                return Ok((t, clamped));
            }
        }
        Err(MeshError::OutsideDomain { x: x.x, y: x.y })
    }

    /// Red refinement: every triangle splits into four similar children via
    /// edge midpoints. Children of triangle `t` occupy indices `4t..4t+4`.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.edges.len());
        for e in &self.edges {
            let mid = (self.vertices[e.v[0]] + self.vertices[e.v[1]]) * 0.5;
            vertices.push(mid);
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            let [e_ab, e_bc, e_ca] = self.tri_edges[t];
            let m_ab = nv + e_ab;
            let m_bc = nv + e_bc;
            let m_ca = nv + e_ca;
            triangles.push([a, m_ab, m_ca]);
            triangles.push([m_ab, b, m_bc]);
            triangles.push([m_ca, m_bc, c]);
            triangles.push([m_ab, m_bc, m_ca]);
        }
        Mesh::from_raw(vertices, triangles).expect("red refinement preserves mesh validity")
    }

    /// Audits conformity: every edge adjacent to one or two triangles, and
    /// interior edges traversed in opposite directions by their triangles.
    /// `from_raw` enforces this; the audit re-checks from scratch for tests.
    pub fn conformity_audit(&self) -> Result<(), MeshError> {
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for (i, j) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                *counts.entry((i.min(j), i.max(j))).or_insert(0) += 1;
            }
        }
        for (&(v0, v1), &count) in &counts {
            if count > 2 {
                return Err(MeshError::NonConforming { v0, v1, count });
            }
        }
        Ok(())
    }
}

/// Validates convexity of a counterclockwise polygon. Zero cross products
/// (collinear vertices) are allowed; a negative turn is rejected with the
/// index of the offending corner.
fn check_convex(polygon: &[Point2]) -> Result<(), MeshError> {
    let n = polygon.len();
    if n < 3 {
        return Err(MeshError::TooFewVertices(n));
    }
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let c = polygon[(i + 2) % n];
        if (b - a).cross(c - b) < 0.0 {
            return Err(MeshError::NonConvex {
                vertex: (i + 1) % n,
            });
        }
    }
    Ok(())
}

/// Fan-triangulates a convex polygon from its area centroid and refines
/// uniformly until `h_max <= h_target`.
pub fn triangulate_convex_polygon(
    polygon_vertices: &[Point2],
    h_target: f64,
) -> Result<Mesh, MeshError> {
    check_convex(polygon_vertices)?;
    if !(h_target > 0.0) {
        return Err(MeshError::InvalidHTarget(h_target));
    }
    let n = polygon_vertices.len();
    let area = polygon_area(polygon_vertices);
    let mut scale: f64 = 0.0;
    for i in 0..n {
        let len = polygon_vertices[i].dist(polygon_vertices[(i + 1) % n]);
        if len == 0.0 {
            return Err(MeshError::DegeneratePolygon);
        }
        scale = scale.max(len);
    }
    if area <= 1e-14 * scale * scale {
        return Err(MeshError::DegeneratePolygon);
    }

    let centroid = polygon_centroid(polygon_vertices);
    let mut vertices = polygon_vertices.to_vec();
    vertices.push(centroid);
    let triangles: Vec<[usize; 3]> = (0..n).map(|i| [i, (i + 1) % n, n]).collect();
    let mut mesh = Mesh::from_raw(vertices, triangles)?;
    while mesh.h_max() > h_target {
        mesh = mesh.refine_uniform();
    }
    Ok(mesh)
}
