//! Temporal convergence on the manufactured solution.
//!
//! `cargo run --release --example mms_temporal -- [cells] [fixed|label] [extrapolated|updated]`

use leray_fem::stepper::TemperatureWind;
use leray_fem::verification::{
    observed_rate, rates::NORM_NAMES, run_temporal_study, MmsProblem, MmsRunConfig, TemporalReading,
};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cells: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(32);
    let reading = match args.get(1).map(String::as_str) {
        Some("label") => TemporalReading::EndTimeIsLabel { steps: 4 },
        _ => TemporalReading::FixedEndTime { t_end: 1.0 },
    };
    let mut base = MmsRunConfig { cells, ..Default::default() };
    if args.get(2).map(String::as_str) == Some("updated") {
        base.stepper.temperature_wind = TemperatureWind::Updated;
    }
    println!("h = 1/{cells}, {reading:?}, temperature wind {:?}", base.stepper.temperature_wind);
    println!("{:>8} {}", "dt", NORM_NAMES.map(|n| format!("{n:>22}")).join(""));
    let mut prev: Option<[f64; 4]> = None;
    run_temporal_study(&MmsProblem::default(), &base, &[0.25, 0.125, 0.0625, 0.03125], reading, |row| {
        let e = row.errors();
        let cols: Vec<String> = (0..4)
            .map(|i| {
                let rate = prev.and_then(|p| observed_rate(p[i], e[i]));
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
