use std::sync::{Arc, OnceLock};

use crate::linsolve::Pattern;
use crate::mesh::{BoundaryMarker, TriMesh};

use super::basis::{LagrangeElement, Tabulation, LOCAL_EDGES};
use super::quadrature::QuadratureRule;
use super::FemError;

/// Affine map data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    /// Inverse-transpose Jacobian, `grad_x = jinv_t * grad_ref`.
    pub jinv_t: [[f64; 2]; 2],
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
}

impl ElementGeometry {
    #[inline]
    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [self.jinv_t[0][0] * g[0] + self.jinv_t[0][1] * g[1], self.jinv_t[1][0] * g[0] + self.jinv_t[1][1] * g[1]]
    }

    /// Physical point for barycentric coordinates.
    #[inline]
    pub fn map(&self, lam: [f64; 3]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * lam[1] + self.jac[0][1] * lam[2],
            self.origin[1] + self.jac[1][0] * lam[1] + self.jac[1][1] * lam[2],
        ]
    }
}

/// Element-to-matrix scatter map for a pair of spaces on one mesh.
#[derive(Debug)]
pub struct ElementPattern {
    pub pattern: Arc<Pattern>,
    /// `positions[t * nr * nc + i * nc + j]` is the storage slot of
    /// `(row_dof(t, i), col_dof(t, j))`.
    pub positions: Vec<u32>,
    pub nr: usize,
    pub nc: usize,
}

impl ElementPattern {
    pub fn new(rows: &FeSpace, cols: &FeSpace) -> ElementPattern {
        let (nr, nc) = (rows.dofs_per_element(), cols.dofs_per_element());
        let mut lists = vec![Vec::new(); rows.num_dofs()];
        for t in 0..rows.mesh().num_triangles() {
            let cd = cols.element_dofs(t);
            for &r in rows.element_dofs(t) {
                lists[r].extend_from_slice(cd);
            }
        }
        let pattern = Arc::new(Pattern::from_rows(cols.num_dofs(), lists));
        let ntri = rows.mesh().num_triangles();
        let mut positions = Vec::with_capacity(ntri * nr * nc);
        for t in 0..ntri {
            let cd = cols.element_dofs(t);
            for &r in rows.element_dofs(t) {
                for &c in cd {
                    positions.push(pattern.position(r, c).expect("pattern covers element") as u32);
                }
            }
        }
        ElementPattern { pattern, positions, nr, nc }
    }

    #[inline]
    pub fn element_slots(&self, t: usize) -> &[u32] {
        let s = self.nr * self.nc;
        &self.positions[t * s..(t + 1) * s]
    }
}

/// Continuous scalar Lagrange space of degree 1-3 on a triangle mesh.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<TriMesh>,
    element: LagrangeElement,
    dof_coords: Vec<[f64; 2]>,
    elem_dofs: Vec<usize>,
    /// Bit set of boundary markers per dof (bit = marker as u8).
    dof_markers: Vec<u8>,
    geometry: Vec<ElementGeometry>,
    rule: QuadratureRule,
    tab: Tabulation,
    self_pattern: OnceLock<ElementPattern>,
}

fn marker_bit(m: BoundaryMarker) -> u8 {
    match m {
        BoundaryMarker::Left => 1,
        BoundaryMarker::Right => 2,
        BoundaryMarker::Bottom => 4,
        BoundaryMarker::Top => 8,
    }
}

impl FeSpace {
    pub fn new(mesh: Arc<TriMesh>, degree: usize) -> Result<Arc<FeSpace>, FemError> {
        let element = LagrangeElement::new(degree).ok_or(FemError::UnsupportedDegree(degree))?;
        let table = mesh.edge_table();
        let nv = mesh.num_vertices();
        let ne = table.edges.len();
        let per_edge = element.dofs_per_edge();
        let per_cell = element.interior_dofs();
        let ndofs = nv + ne * per_edge + mesh.num_triangles() * per_cell;
        let nloc = element.num_dofs();
        let ref_nodes = element.nodes();

        let mut dof_coords = vec![[0.0; 2]; ndofs];
        let mut elem_dofs = Vec::with_capacity(mesh.num_triangles() * nloc);
        let mut geometry = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let [p0, p1, p2] = mesh.corners(t);
            let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let jinv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
            let geo = ElementGeometry { area: 0.5 * det, jinv_t, origin: p0, jac };
            geometry.push(geo);

            let mut local = Vec::with_capacity(nloc);
            local.extend_from_slice(tri);
            for (le, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                let e = table.tri_edges[t][le];
                let forward = tri[a] < tri[b];
                for s in 0..per_edge {
                    let s_global = if forward { s } else { per_edge - 1 - s };
                    local.push(nv + e * per_edge + s_global);
                }
            }
            for s in 0..per_cell {
                local.push(nv + ne * per_edge + t * per_cell + s);
            }
            for (i, &d) in local.iter().enumerate() {
                dof_coords[d] = geo.map(ref_nodes[i]);
            }
            elem_dofs.extend_from_slice(&local);
        }

        let mut dof_markers = vec![0u8; ndofs];
        let lookup: std::collections::HashMap<[usize; 2], usize> =
            table.edges.iter().enumerate().map(|(e, &p)| (p, e)).collect();
        for be in mesh.boundary_edges() {
            let [a, b] = be.vertices;
            let bit = marker_bit(be.marker);
            dof_markers[a] |= bit;
            dof_markers[b] |= bit;
            let e = lookup[&if a < b { [a, b] } else { [b, a] }];
            for s in 0..per_edge {
                dof_markers[nv + e * per_edge + s] |= bit;
            }
        }

        let rule = QuadratureRule::for_order((2 * degree + 1).max(3 * degree - 1));
        let tab = Tabulation::new(&element, &rule.points);
        Ok(Arc::new(FeSpace {
            mesh,
            element,
            dof_coords,
            elem_dofs,
            dof_markers,
            geometry,
            rule,
            tab,
            self_pattern: OnceLock::new(),
        }))
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn element(&self) -> &LagrangeElement {
        &self.element
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn dofs_per_element(&self) -> usize {
        self.element.num_dofs()
    }

    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.dof_coords
    }

    #[inline]
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let n = self.element.num_dofs();
        &self.elem_dofs[t * n..(t + 1) * n]
    }

    #[inline]
    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    /// Default quadrature of the space, exact to degree max(2k+1, 3k-1).
    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn tabulation(&self) -> &Tabulation {
        &self.tab
    }

    pub fn is_boundary_dof(&self, d: usize) -> bool {
        self.dof_markers[d] != 0
    }

    pub fn dof_on_marker(&self, d: usize, m: BoundaryMarker) -> bool {
        self.dof_markers[d] & marker_bit(m) != 0
    }

    /// Dofs on any marked boundary, ascending.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        (0..self.num_dofs()).filter(|&d| self.is_boundary_dof(d)).collect()
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        self.dof_markers.iter().map(|&m| m != 0).collect()
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Scatter map of this space against itself (cached).
    pub fn element_pattern(&self) -> &ElementPattern {
        self.self_pattern.get_or_init(|| ElementPattern::new(self, self))
    }

    /// Physical quadrature points of triangle `t` under the default rule.
    pub fn quadrature_points(&self, t: usize) -> impl Iterator<Item = [f64; 2]> + '_ {
        let g = self.geometry[t];
        self.rule.points.iter().map(move |&l| g.map(l))
    }
}
