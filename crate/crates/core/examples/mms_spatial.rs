//! Spatial convergence on the manufactured solution.
//!
//! `cargo run --release --example mms_spatial -- [degree] [max_cells] [homogeneous|trace]`

use leray_fem::filtering::FilterBoundary;
use leray_fem::verification::{rates::NORM_NAMES, run_spatial_study, MmsProblem, MmsRunConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let degree: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(2);
    let max_cells: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let boundary = match args.get(2).map(String::as_str) {
        Some("homogeneous") => FilterBoundary::Homogeneous,
        _ => FilterBoundary::Trace,
    };
    let mut base = MmsRunConfig::spatial(degree);
    base.stepper.filter_boundary = boundary;
    let cells: Vec<usize> = std::iter::successors(Some(4), |n| Some(n * 2)).take_while(|&n| n <= max_cells).collect();
    println!("P{degree}, filter boundary {boundary:?}");
    println!("{:>8} {}", "h", NORM_NAMES.map(|n| format!("{n:>22}")).join(""));
    let mut prev: Option<[f64; 4]> = None;
    run_spatial_study(&MmsProblem::default(), &base, &cells, |row| {
        let e = row.errors();
        let cols: Vec<String> = (0..4)
            .map(|i| {
                let rate = prev.and_then(|p| leray_fem::verification::observed_rate(p[i], e[i]));
                format!("{:>12.4e} ({:>6})", e[i], rate.map_or("-".into(), |r| format!("{r:.3}")))
            })
            .collect();
        println!("{:>8.5} {}", row.resolution, cols.join(" "));
        if let Some(f) = &row.failure {
            println!("  failed: {f}");
        }
        prev = Some(e);
    });
}
