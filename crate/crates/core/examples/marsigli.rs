//! Lock-exchange run with per-step diagnostics.
//!
//! `cargo run --release --example marsigli -- [nomodel|leray-alpha|adaptive] [coarse|fine] [alpha] [t_end] [out_dir]`

use leray_fem::stepper::Model;
use leray_fem::verification::{run_marsigli, MarsigliRun, MeshRole};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model: Model = args.first().map_or(Ok(Model::AdaptiveLeray), |s| s.parse()).unwrap_or_else(|e| panic!("{e}"));
    let role = match args.get(1).map(String::as_str) {
        Some("fine") => MeshRole::Fine,
        _ => MeshRole::Coarse,
    };
    let mut run = MarsigliRun::new(role, model);
    if let Some(a) = args.get(2).and_then(|s| s.parse().ok()) {
        run.alpha = a;
    }
    if let Some(t) = args.get(3).and_then(|s| s.parse().ok()) {
        run.t_end = t;
        run.snapshot_times.retain(|&s| s <= t);
    }
    run.out_dir = args.get(4).map(Into::into);
    println!(
        "{} on {:?} ({}x{} cells), alpha = {}, dt = {}",
        model.name(),
        role,
        run.cells.0,
        run.cells.1,
        run.alpha,
        run.dt
    );
    let every = (0.5 / run.dt).round() as usize;
    let out = run_marsigli(&run, |d| {
        if d.step % every == 0 {
            println!(
                "t = {:5.2}  T in [{:.4}, {:.4}]  outside {:6.4}  ke {:.4e}  top u_x {:+.4e}  drift {:.1e}  a_mean {}",
                d.time,
                d.temp_min,
                d.temp_max,
                d.out_of_range_fraction,
                d.kinetic_energy,
                d.top_mean_ux,
                d.temperature_drift,
                d.indicator_mean.map_or("-".into(), |a| format!("{a:.3e}")),
            );
        }
    })
    .expect("run set-up failed");
    if let Some(msg) = &out.aborted {
        println!("aborted: {msg}");
    }
    for s in &out.snapshots {
        println!("snapshot t = {}: outside fraction {:.4}", s.diagnostics.time, s.diagnostics.out_of_range_fraction);
    }
    println!("wall time {:.1} s", out.wall_seconds);
}
