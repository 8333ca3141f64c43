//! Lagrange shape functions of degree 1-3 written in barycentric coordinates.
//!
//! Local numbering: the three vertices, then `k-1` nodes on each of the edges
//! (v0,v1), (v1,v2), (v2,v0) ordered from the first vertex of the edge to the
//! second, then interior nodes.

/// Local edges as pairs of local vertex indices.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

const GRAD_LAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagrangeElement {
    degree: usize,
}

impl LagrangeElement {
    pub fn new(degree: usize) -> Option<LagrangeElement> {
        (1..=3).contains(&degree).then_some(LagrangeElement { degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_dofs(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    pub fn dofs_per_edge(&self) -> usize {
        self.degree - 1
    }

    pub fn interior_dofs(&self) -> usize {
        match self.degree {
            3 => 1,
            _ => 0,
        }
    }

    /// Barycentric coordinates of the local nodes.
    pub fn nodes(&self) -> Vec<[f64; 3]> {
        let k = self.degree as f64;
        let mut nodes = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for [a, b] in LOCAL_EDGES {
            for s in 1..self.degree {
                let mut lam = [0.0; 3];
                lam[b] = s as f64 / k;
                lam[a] = 1.0 - lam[b];
                nodes.push(lam);
            }
        }
        if self.degree == 3 {
            nodes.push([1.0 / 3.0; 3]);
        }
        nodes
    }

    /// Values of all shape functions at `lam`.
    pub fn values(&self, lam: [f64; 3], out: &mut [f64]) {
        let [l0, l1, l2] = lam;
        match self.degree {
            1 => out[..3].copy_from_slice(&lam),
            2 => {
                for i in 0..3 {
                    out[i] = lam[i] * (2.0 * lam[i] - 1.0);
                }
                for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                    out[3 + e] = 4.0 * lam[*a] * lam[*b];
                }
            }
            3 => {
                for i in 0..3 {
                    let l = lam[i];
                    out[i] = 0.5 * l * (3.0 * l - 1.0) * (3.0 * l - 2.0);
                }
                for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                    let (la, lb) = (lam[*a], lam[*b]);
                    out[3 + 2 * e] = 4.5 * la * lb * (3.0 * la - 1.0);
                    out[4 + 2 * e] = 4.5 * la * lb * (3.0 * lb - 1.0);
                }
                out[9] = 27.0 * l0 * l1 * l2;
            }
            _ => unreachable!(),
        }
    }

    /// Gradients with respect to the reference coordinates (xi, eta).
    pub fn ref_gradients(&self, lam: [f64; 3], out: &mut [[f64; 2]]) {
        let mut dl = [[0.0; 3]; 10];
        self.lambda_derivatives(lam, &mut dl);
        for (g, d) in out.iter_mut().zip(dl.iter()).take(self.num_dofs()) {
            *g = [0, 1].map(|c| (0..3).map(|k| d[k] * GRAD_LAMBDA[k][c]).sum());
        }
    }

    /// Partial derivatives of each shape function with respect to (l0, l1, l2).
    fn lambda_derivatives(&self, lam: [f64; 3], out: &mut [[f64; 3]]) {
        for d in out.iter_mut() {
            *d = [0.0; 3];
        }
        match self.degree {
            1 => {
                for i in 0..3 {
                    out[i][i] = 1.0;
                }
            }
            2 => {
                for i in 0..3 {
                    out[i][i] = 4.0 * lam[i] - 1.0;
                }
                for (e, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                    out[3 + e][a] = 4.0 * lam[b];
                    out[3 + e][b] = 4.0 * lam[a];
                }
            }
            3 => {
                for i in 0..3 {
                    let l = lam[i];
                    out[i][i] = 0.5 * (27.0 * l * l - 18.0 * l + 2.0);
                }
                for (e, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                    let (la, lb) = (lam[a], lam[b]);
                    out[3 + 2 * e][a] = 4.5 * lb * (6.0 * la - 1.0);
                    out[3 + 2 * e][b] = 4.5 * la * (3.0 * la - 1.0);
                    out[4 + 2 * e][a] = 4.5 * lb * (3.0 * lb - 1.0);
                    out[4 + 2 * e][b] = 4.5 * la * (6.0 * lb - 1.0);
                }
                out[9] = [27.0 * lam[1] * lam[2], 27.0 * lam[0] * lam[2], 27.0 * lam[0] * lam[1]];
            }
            _ => unreachable!(),
        }
    }
}

/// Shape-function values and reference gradients tabulated at quadrature points.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub num_dofs: usize,
    /// `values[q * num_dofs + i]`
    pub values: Vec<f64>,
    /// `ref_grads[q * num_dofs + i]`
    pub ref_grads: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn new(element: &LagrangeElement, points: &[[f64; 3]]) -> Tabulation {
        let n = element.num_dofs();
        let mut values = vec![0.0; points.len() * n];
        let mut ref_grads = vec![[0.0; 2]; points.len() * n];
        for (q, &lam) in points.iter().enumerate() {
            element.values(lam, &mut values[q * n..(q + 1) * n]);
            element.ref_gradients(lam, &mut ref_grads[q * n..(q + 1) * n]);
        }
        Tabulation { num_dofs: n, values, ref_grads }
    }

    #[inline]
    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.num_dofs..(q + 1) * self.num_dofs]
    }

    #[inline]
    pub fn grads_at(&self, q: usize) -> &[[f64; 2]] {
        &self.ref_grads[q * self.num_dofs..(q + 1) * self.num_dofs]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_property() {
        for k in 1..=3 {
            let el = LagrangeElement::new(k).unwrap();
            let nodes = el.nodes();
            assert_eq!(nodes.len(), el.num_dofs());
            let mut v = vec![0.0; el.num_dofs()];
            for (i, &lam) in nodes.iter().enumerate() {
                el.values(lam, &mut v);
                for (j, &vj) in v.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - want).abs() < 1e-14, "k={k} node {i} fn {j}: {vj}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let lam = [0.21, 0.37, 0.42];
        for k in 1..=3 {
            let el = LagrangeElement::new(k).unwrap();
            let n = el.num_dofs();
            let mut g = vec![[0.0; 2]; n];
            el.ref_gradients(lam, &mut g);
            let eval = |xi: f64, eta: f64| {
                let mut v = vec![0.0; n];
                el.values([1.0 - xi - eta, xi, eta], &mut v);
                v
            };
            let h = 1e-6;
            let (xi, eta) = (lam[1], lam[2]);
            let (px, mx) = (eval(xi + h, eta), eval(xi - h, eta));
            let (py, my) = (eval(xi, eta + h), eval(xi, eta - h));
            for i in 0..n {
                assert!((g[i][0] - (px[i] - mx[i]) / (2.0 * h)).abs() < 1e-7);
                assert!((g[i][1] - (py[i] - my[i]) / (2.0 * h)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for k in 1..=3 {
            let el = LagrangeElement::new(k).unwrap();
            let mut v = vec![0.0; el.num_dofs()];
            let mut g = vec![[0.0; 2]; el.num_dofs()];
            el.values([0.1, 0.3, 0.6], &mut v);
            el.ref_gradients([0.1, 0.3, 0.6], &mut g);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(g.iter().map(|d| d[0]).sum::<f64>().abs() < 1e-13);
        }
    }
}
