//! Large time steps on the manufactured solution: the per-step energy
//! inequality and the field norms.
//!
//! `cargo run --release --example energy_stability -- [cells] [model]`

use leray_fem::stepper::Model;
use leray_fem::verification::{run_stability_check, stability_horizon, STABILITY_DTS};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cells: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(8);
    let model: Model = args.get(1).map_or(Ok(Model::AdaptiveLeray), |s| s.parse()).unwrap_or_else(|e| panic!("{e}"));
    for dt in STABILITY_DTS {
        let t_end = stability_horizon(dt);
        match run_stability_check(dt, t_end, cells, model) {
            Ok(s) => println!(
                "dt {dt:>5}: {:>3} steps to t = {t_end}, finite {}, energy bound {} (max ratio {:.3e}), |u| {:.3e}, |T| {:.3e}",
                s.steps, s.finite, s.energy.all_hold, s.energy.max_ratio, s.u_norm, s.t_norm
            ),
            Err(e) => println!("dt {dt:>5}: failed: {e}"),
        }
    }
}
