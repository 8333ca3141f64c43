//! Conforming triangular meshes of axis-aligned rectangles.
//!
//! Meshes are stored as index arrays. Edge connectivity and a point-location
//! grid are derived on demand and cached inside the mesh.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("degenerate range [{lo}, {hi}] along {axis}")]
    DegenerateRange { axis: char, lo: f64, hi: f64 },
    #[error("mesh needs at least one cell per direction (got nx={nx}, ny={ny})")]
    TooFewCells { nx: usize, ny: usize },
    #[error("point ({0}, {1}) lies outside the mesh")]
    PointOutside(f64, f64),
}

/// Side of the bounding rectangle an edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMarker {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub marker: BoundaryMarker,
}

/// Edge connectivity derived from the triangle list.
#[derive(Debug, Clone)]
pub struct EdgeTable {
    /// Global edges as (lower, higher) vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle, the global index of local edges (v0,v1), (v1,v2), (v2,v0).
    pub tri_edges: Vec<[usize; 3]>,
    /// Triangles adjacent to each edge; the second slot is `None` on the boundary.
    pub edge_tris: Vec<[Option<usize>; 2]>,
}

#[derive(Debug, Clone)]
struct Locator {
    origin: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    h_max: f64,
    bbox: [[f64; 2]; 2],
    edges: OnceLock<EdgeTable>,
    locator: OnceLock<Locator>,
}

impl TriMesh {
    /// Structured mesh of `[x0,x1] x [y0,y1]` with `nx * ny` cells, each cut
    /// along the lower-left to upper-right diagonal.
    pub fn rect(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<TriMesh, MeshError> {
        for (axis, (lo, hi)) in [('x', x_range), ('y', y_range)] {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(MeshError::DegenerateRange { axis, lo, hi });
            }
        }
        if nx == 0 || ny == 0 {
            return Err(MeshError::TooFewCells { nx, ny });
        }
        let (x0, x1) = x_range;
        let (y0, y1) = y_range;
        let coord = |lo: f64, hi: f64, i: usize, n: usize| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * (i as f64) / (n as f64)
            }
        };
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([coord(x0, x1, i, nx), coord(y0, y1, j, ny)]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary_edges.push(BoundaryEdge { vertices: [vid(i, 0), vid(i + 1, 0)], marker: BoundaryMarker::Bottom });
            boundary_edges.push(BoundaryEdge { vertices: [vid(i + 1, ny), vid(i, ny)], marker: BoundaryMarker::Top });
        }
        for j in 0..ny {
            boundary_edges.push(BoundaryEdge { vertices: [vid(nx, j), vid(nx, j + 1)], marker: BoundaryMarker::Right });
            boundary_edges.push(BoundaryEdge { vertices: [vid(0, j + 1), vid(0, j)], marker: BoundaryMarker::Left });
        }
        Ok(TriMesh::from_parts(vertices, triangles, boundary_edges))
    }

    fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, boundary_edges: Vec<BoundaryEdge>) -> TriMesh {
        let mut bbox = [[f64::INFINITY; 2], [f64::NEG_INFINITY; 2]];
        for v in &vertices {
            for d in 0..2 {
                bbox[0][d] = bbox[0][d].min(v[d]);
                bbox[1][d] = bbox[1][d].max(v[d]);
            }
        }
        let mut mesh = TriMesh {
            vertices,
            triangles,
            boundary_edges,
            h_max: 0.0,
            bbox,
            edges: OnceLock::new(),
            locator: OnceLock::new(),
        };
        mesh.h_max = (0..mesh.triangles.len()).map(|t| mesh.diameter(t)).fold(0.0, f64::max);
        mesh
    }

    /// Splits every triangle into four through its edge midpoints.
    pub fn refine_uniform(&self) -> TriMesh {
        let table = self.edge_table();
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(table.edges.iter().map(|&[a, b]| {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        }));
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let [e_ab, e_bc, e_ca] = table.tri_edges[t];
            let (m_ab, m_bc, m_ca) = (nv + e_ab, nv + e_bc, nv + e_ca);
            triangles.push([a, m_ab, m_ca]);
            triangles.push([m_ab, b, m_bc]);
            triangles.push([m_ca, m_bc, c]);
            triangles.push([m_ab, m_bc, m_ca]);
        }
        let lookup: HashMap<[usize; 2], usize> = table.edges.iter().enumerate().map(|(e, &pair)| (pair, e)).collect();
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for be in &self.boundary_edges {
            let [a, b] = be.vertices;
            let m = nv + lookup[&sorted_pair(a, b)];
            boundary_edges.push(BoundaryEdge { vertices: [a, m], marker: be.marker });
            boundary_edges.push(BoundaryEdge { vertices: [m, b], marker: be.marker });
        }
        TriMesh::from_parts(vertices, triangles, boundary_edges)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Maximum element diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Lower-left and upper-right corners of the bounding box.
    pub fn bbox(&self) -> [[f64; 2]; 2] {
        self.bbox
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.corners(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.corners(t);
        (0..3)
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % 3]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn diameter_of_domain(&self) -> f64 {
        (self.bbox[1][0] - self.bbox[0][0]).hypot(self.bbox[1][1] - self.bbox[0][1])
    }

    pub fn edge_table(&self) -> &EdgeTable {
        self.edges.get_or_init(|| {
            let mut index: HashMap<[usize; 2], usize> = HashMap::with_capacity(3 * self.triangles.len() / 2 + 8);
            let mut edges = Vec::new();
            let mut edge_tris: Vec<[Option<usize>; 2]> = Vec::new();
            let mut tri_edges = Vec::with_capacity(self.triangles.len());
            for (t, tri) in self.triangles.iter().enumerate() {
                let mut local = [0usize; 3];
                for (k, slot) in local.iter_mut().enumerate() {
                    let key = sorted_pair(tri[k], tri[(k + 1) % 3]);
                    let e = *index.entry(key).or_insert_with(|| {
                        edges.push(key);
                        edge_tris.push([None, None]);
                        edges.len() - 1
                    });
                    if edge_tris[e][0].is_none() {
                        edge_tris[e][0] = Some(t);
                    } else {
                        edge_tris[e][1] = Some(t);
                    }
                    *slot = e;
                }
                tri_edges.push(local);
            }
            EdgeTable { edges, tri_edges, edge_tris }
        })
    }

    /// Finds a triangle containing `p` together with the barycentric
    /// coordinates of `p` in it.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 3]), MeshError> {
        let loc = self.locator.get_or_init(|| self.build_locator());
        let tol = 1e-10;
        let cell = |d: usize| {
            let s = ((p[d] - loc.origin[d]) / loc.cell[d]).floor();
            if s < -0.5 || s > loc.dims[d] as f64 + 0.5 {
                None
            } else {
                Some((s.max(0.0) as usize).min(loc.dims[d] - 1))
            }
        };
        let (Some(i), Some(j)) = (cell(0), cell(1)) else {
            return Err(MeshError::PointOutside(p[0], p[1]));
        };
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &loc.buckets[j * loc.dims[0] + i] {
            let lam = self.barycentric(t, p);
            let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -tol && best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, lam, worst));
            }
        }
        best.map(|(t, lam, _)| (t, lam)).ok_or(MeshError::PointOutside(p[0], p[1]))
    }

    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [p0, p1, p2] = self.corners(t);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let l1 = ((p[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p[1] - p0[1])) / det;
        let l2 = ((p1[0] - p0[0]) * (p[1] - p0[1]) - (p[0] - p0[0]) * (p1[1] - p0[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    fn build_locator(&self) -> Locator {
        let n = self.triangles.len().max(1);
        let side = ((n as f64).sqrt().ceil() as usize).max(1);
        let width = self.bbox[1][0] - self.bbox[0][0];
        let height = self.bbox[1][1] - self.bbox[0][1];
        let aspect = (width / height).max(1e-3);
        let nx = ((side as f64 * aspect.sqrt()).ceil() as usize).max(1);
        let ny = ((side as f64 / aspect.sqrt()).ceil() as usize).max(1);
        let cell = [width / nx as f64, height / ny as f64];
        let mut buckets = vec![Vec::new(); nx * ny];
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        for t in 0..self.triangles.len() {
            let c = self.corners(t);
            let lo = [0, 1].map(|d| c.iter().map(|q| q[d]).fold(f64::INFINITY, f64::min));
            let hi = [0, 1].map(|d| c.iter().map(|q| q[d]).fold(f64::NEG_INFINITY, f64::max));
            let i0 = clamp(((lo[0] - self.bbox[0][0]) / cell[0]).floor() - 1.0, nx);
            let i1 = clamp(((hi[0] - self.bbox[0][0]) / cell[0]).floor() + 1.0, nx);
            let j0 = clamp(((lo[1] - self.bbox[0][1]) / cell[1]).floor() - 1.0, ny);
            let j1 = clamp(((hi[1] - self.bbox[0][1]) / cell[1]).floor() + 1.0, ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Locator { origin: self.bbox[0], cell, dims: [nx, ny], buckets }
    }
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}
