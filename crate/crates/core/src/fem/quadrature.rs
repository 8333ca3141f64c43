//! Quadrature on the reference triangle (0,0), (1,0), (0,1).
//!
//! Weights are normalized to sum to one, so an integral over a physical
//! triangle is `area * sum(w_q f(x_q))`.

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Barycentric coordinates of the points.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub order: usize,
}

impl QuadratureRule {
    /// Cheapest available rule that is exact up to total degree `order`.
    pub fn for_order(order: usize) -> QuadratureRule {
        match order {
            0 | 1 => QuadratureRule { points: vec![[1.0 / 3.0; 3]], weights: vec![1.0], order: 1 },
            2 => {
                let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                QuadratureRule { points: vec![[a, b, b], [b, a, b], [b, b, a]], weights: vec![1.0 / 3.0; 3], order: 2 }
            }
            3..=5 => radon7(),
            _ => collapsed_gauss(order),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Seven-point degree-5 rule of Radon.
fn radon7() -> QuadratureRule {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    let orbit = |a: f64| {
        let b = 1.0 - 2.0 * a;
        [[a, a, b], [a, b, a], [b, a, a]]
    };
    let mut points = vec![[1.0 / 3.0; 3]];
    let mut weights = vec![9.0 / 40.0];
    points.extend(orbit(a1));
    weights.extend([w1; 3]);
    points.extend(orbit(a2));
    weights.extend([w2; 3]);
    QuadratureRule { points, weights, order: 5 }
}

/// Tensor Gauss-Legendre rule mapped onto the triangle through the collapsed
/// (Duffy) map `(u, v) -> (u, (1-u) v)`.
fn collapsed_gauss(order: usize) -> QuadratureRule {
    // The Jacobian (1-u) adds one degree in u.
    let n = (order + 2).div_ceil(2);
    let (nodes, w) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (i, &u) in nodes.iter().enumerate() {
        for (j, &v) in nodes.iter().enumerate() {
            let xi = u;
            let eta = (1.0 - u) * v;
            points.push([1.0 - xi - eta, xi, eta]);
            weights.push(2.0 * w[i] * w[j] * (1.0 - u));
        }
    }
    QuadratureRule { points, weights, order: 2 * n - 2 }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
