//! Indicator and adaptive filter applied to a smooth field with grid-scale
//! noise, for van Cittert orders 0 to 3.
//!
//! `cargo run --release --example adaptive_filter -- [cells] [alpha]`

use std::sync::Arc;

use leray_fem::fem::{FeSpace, Field};
use leray_fem::filtering::{adaptive_filter, indicator, leray_alpha_filter, FilterContext, FilterOptions};
use leray_fem::linsolve::SolverOptions;
use leray_fem::mesh::TriMesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn divergence_norm(ctx: &FilterContext, u: &Field) -> f64 {
    ctx.div().mul_vec(u.coeffs()).iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cells: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(16);
    let alpha: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0 / cells as f64);
    let mesh = Arc::new(TriMesh::rect((0.0, 1.0), (0.0, 1.0), cells, cells).expect("valid box"));
    let vel = FeSpace::new(mesh.clone(), 2).expect("P2");
    let pres = FeSpace::new(mesh, 1).expect("P1");

    let pi = std::f64::consts::PI;
    let mut u = Field::interpolate_vector(&vel, |x, y| {
        let (s, c) = ((pi * x).sin(), (pi * y).sin());
        [s * s * (2.0 * pi * y).sin(), -c * c * (2.0 * pi * x).sin()]
    });
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (d, v) in u.coeffs_mut().iter_mut().enumerate() {
        if !vel.is_boundary_dof(d % vel.num_dofs()) {
            *v += 0.05 * rng.random_range(-1.0..1.0);
        }
    }
    println!("h = 1/{cells}, alpha = {alpha}, |u| = {:.4e}", u.l2_norm());

    for order in 0..=3 {
        let opts = FilterOptions { alpha, order, ..Default::default() };
        let ctx = FilterContext::new(vel.clone(), pres.clone(), opts, SolverOptions::default()).expect("filter set-up");
        let a = indicator(&ctx, &u, true).expect("indicator");
        let mean = a.samples.values.iter().sum::<f64>() / a.samples.values.len() as f64;
        let (ubar, _) = adaptive_filter(&ctx, &u, &a).expect("adaptive filter");
        println!(
            "N = {order}: indicator mean {mean:.3e}, max raw {:.3e}; |u_bar| = {:.4e}, |u - u_bar| = {:.3e}, |D u_bar| = {:.1e}",
            a.max_raw,
            ubar.l2_norm(),
            u.combine(1.0, &ubar, -1.0).l2_norm(),
            divergence_norm(&ctx, &ubar)
        );
    }

    let ctx = FilterContext::new(vel, pres, FilterOptions { alpha, ..Default::default() }, SolverOptions::default())
        .expect("filter set-up");
    let (ubar, _) = leray_alpha_filter(&ctx, &u).expect("Leray-alpha filter");
    println!(
        "Leray-alpha: |u_bar| = {:.4e}, |u - u_bar| = {:.3e}",
        ubar.l2_norm(),
        u.combine(1.0, &ubar, -1.0).l2_norm()
    );
}
