//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.
//!
//! The full run takes close to an hour on one core. `LERAY_ACCEPTANCE=1,4,5`
//! restricts it to the listed criteria.

mod oracle;

use std::process::ExitCode;
use std::time::Instant;

use leray_fem::stepper::Model;
use leray_fem::verification::rates::NORM_NAMES;
use leray_fem::verification::{
    run_marsigli, run_property_suite, run_spatial_study, run_stability_check, run_temporal_study, stability_horizon,
    MarsigliOutcome, MarsigliRun, MeshRole, MmsProblem, MmsRunConfig, PropertySuiteConfig, RateTable, TemporalReading,
    STABILITY_DTS,
};

const TEMPORAL_BAND: (f64, f64) = (1.8, 2.25);
const SPATIAL_P2_BAND: (f64, f64) = (1.9, 2.1);
const SPATIAL_P3_BAND: (f64, f64) = (2.7, 3.1);
const DRIFT_TOL: f64 = 1e-3;
const MARSIGLI_TIMES: [f64; 2] = [4.0, 8.0];

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn line(&mut self, ok: bool, label: &str, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("[{}] {label}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn in_band(r: Option<f64>, band: (f64, f64)) -> bool {
    r.is_some_and(|r| r >= band.0 && r <= band.1)
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("n/a".into(), |r| format!("{r:.3}"))
}

fn print_table(table: &RateTable) {
    let rates = table.rates();
    for (i, row) in table.rows.iter().enumerate() {
        let e = row.errors();
        let cols: Vec<String> = (0..4)
            .map(|j| {
                let r = if i == 0 { "-".to_string() } else { fmt_rate(rates[i][j]) };
                format!("{}={:.4e} ({r})", NORM_NAMES[j], e[j])
            })
            .collect();
        println!("    {:<9.6} {}", row.resolution, cols.join("  "));
        if let Some(f) = &row.failure {
            println!("    failed: {f}");
        }
    }
}

fn temporal(out: &mut Outcome) {
    let base = MmsRunConfig::default();
    let table = run_temporal_study(
        &MmsProblem::default(),
        &base,
        &[0.25, 0.125, 0.0625, 0.03125],
        TemporalReading::FixedEndTime { t_end: 1.0 },
        |_| {},
    );
    print_table(&table);
    let rates = table.rates();
    let last_two = rates.get(rates.len().saturating_sub(2).max(1)..).unwrap_or(&[]);
    let ok = last_two.len() == 2 && last_two.iter().all(|r| r.iter().all(|&x| in_band(x, TEMPORAL_BAND)));
    let detail = last_two
        .iter()
        .map(|r| r.iter().map(|&x| fmt_rate(x)).collect::<Vec<_>>().join("/"))
        .collect::<Vec<_>>()
        .join(", ");
    out.line(
        ok,
        "1 temporal convergence, h = 1/64",
        format!(
            "rates u_L2/u_21/T_L2/T_21 on last two refinements {detail}, band [{}, {}]",
            TEMPORAL_BAND.0, TEMPORAL_BAND.1
        ),
    );
}

fn spatial(out: &mut Outcome) {
    let cells = [4, 8, 16, 32, 64];
    for (k, band, all_pairs) in [(2, SPATIAL_P2_BAND, true), (3, SPATIAL_P3_BAND, false)] {
        let table = run_spatial_study(&MmsProblem::default(), &MmsRunConfig::spatial(k), &cells, |_| {});
        print_table(&table);
        // entry i compares rows i - 1 and i
        let rates = table.rates();
        let checked = if all_pairs {
            rates.get(1..).unwrap_or(&[])
        } else {
            rates.get(rates.len().saturating_sub(1).max(1)..).unwrap_or(&[])
        };
        // the (2,1) norms are columns 1 and 3
        let ok = !checked.is_empty() && checked.iter().all(|r| in_band(r[1], band) && in_band(r[3], band));
        let detail =
            checked.iter().map(|r| format!("{}/{}", fmt_rate(r[1]), fmt_rate(r[3]))).collect::<Vec<_>>().join(", ");
        let pairs = if all_pairs { "every pair" } else { "finest pair" };
        out.line(
            ok,
            &format!("2 spatial convergence P{k}"),
            format!("(2,1) rates u/T on {pairs} {detail}, band [{}, {}]", band.0, band.1),
        );
    }
}

fn stability(out: &mut Outcome) {
    let mut ok = true;
    let mut parts = Vec::new();
    for dt in STABILITY_DTS {
        match run_stability_check(dt, stability_horizon(dt), 8, Model::AdaptiveLeray) {
            Ok(s) => {
                ok &= s.passed();
                parts.push(format!(
                    "dt {dt}: {} steps, finite {}, energy bound holds {} (max ratio {:.3})",
                    s.steps, s.finite, s.energy.all_hold, s.energy.max_ratio
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("dt {dt}: {e}"));
            }
        }
    }
    out.line(ok, "3 unconditional stability", parts.join("; "));
}

fn properties(out: &mut Outcome) {
    let suite = match run_property_suite(&PropertySuiteConfig::default()) {
        Ok(s) => s,
        Err(e) => return out.line(false, "4 algebraic properties", e.to_string()),
    };
    for c in suite.checks.iter().filter(|c| !c.passed) {
        println!("    {} = {:e} > {:e}", c.name, c.value, c.tolerance);
    }
    let worst = suite.checks.iter().map(|c| c.value / c.tolerance).fold(0.0, f64::max);
    out.line(
        suite.passed(),
        "4 algebraic properties",
        format!("{} checks, worst value/tolerance {worst:.2e}", suite.checks.len()),
    );
}

fn dense_oracle(out: &mut Outcome) {
    let checks = oracle::all();
    let (name, worst) =
        checks.iter().fold(("", 0.0f64), |acc, (n, e)| if *e >= acc.1 { (n.as_str(), *e) } else { acc });
    for (n, e) in checks.iter().filter(|c| c.1 >= oracle::TOL) {
        println!("    {n}: {e:e}");
    }
    out.line(
        checks.iter().all(|c| c.1 < oracle::TOL),
        "5 dense-oracle equivalence",
        format!("{} comparisons, worst {name} {worst:.2e}, tolerance {:e}", checks.len(), oracle::TOL),
    );
}

fn marsigli(out: &mut Outcome) {
    let models = [Model::NoModel, Model::LerayAlpha, Model::AdaptiveLeray];
    let runs: Vec<(Model, Result<MarsigliOutcome, String>)> = models
        .iter()
        .map(|&m| (m, run_marsigli(&MarsigliRun::new(MeshRole::Coarse, m), |_| {}).map_err(|e| e.to_string())))
        .collect();
    let mut bounded = true;
    let mut drift_ok = true;
    let mut drifts = Vec::new();
    for (m, r) in &runs {
        match r {
            Ok(o) => {
                if let Some(a) = &o.aborted {
                    bounded = false;
                    println!("    {} aborted: {a}", m.name());
                }
                for t in MARSIGLI_TIMES {
                    match o.snapshot_at(t) {
                        Some(d) => {
                            bounded &= d.temp_min.is_finite() && d.temp_max.is_finite();
                            println!(
                                "    {:<12} t = {t}: outside {:.4}, T in [{:.3}, {:.3}], top mean u_x {:+.3e}, drift {:.2e}",
                                m.name(),
                                d.out_of_range_fraction,
                                d.temp_min,
                                d.temp_max,
                                d.top_mean_ux,
                                d.temperature_drift
                            );
                        }
                        None => bounded = false,
                    }
                }
                let worst = o.reports.iter().map(|d| d.temperature_drift).fold(0.0, f64::max);
                drift_ok &= worst <= DRIFT_TOL;
                drifts.push(format!("{} {worst:.2e}", m.name()));
                println!("    {:<12} wall {:.0} s", m.name(), o.wall_seconds);
            }
            Err(e) => {
                bounded = false;
                drift_ok = false;
                println!("    {} failed: {e}", m.name());
            }
        }
    }
    let frac = |i: usize, t: f64| runs[i].1.as_ref().map_or(1.0, |o| o.out_of_range_at(t));
    let mut ordered = true;
    let mut parts = Vec::new();
    for t in MARSIGLI_TIMES {
        let (n, l, a) = (frac(0, t), frac(1, t), frac(2, t));
        ordered &= a < n && a < l;
        parts.push(format!("t = {t}: adaptive {a:.4} vs nomodel {n:.4}, leray-alpha {l:.4}"));
    }
    out.line(
        ordered && bounded,
        "6 lock-exchange model ordering, coarse",
        format!("{}; all runs bounded {bounded}", parts.join("; ")),
    );
    out.line(
        drift_ok,
        "  temperature integral drift",
        format!("max over run {}, tolerance {DRIFT_TOL:e}", drifts.join(", ")),
    );
}

type Criterion = (u32, fn(&mut Outcome));

fn main() -> ExitCode {
    let selected: Option<Vec<u32>> =
        std::env::var("LERAY_ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let wanted = |i: u32| selected.as_ref().is_none_or(|s| s.contains(&i));
    let criteria: [Criterion; 6] =
        [(1, temporal), (2, spatial), (3, stability), (4, properties), (5, dense_oracle), (6, marsigli)];
    let mut out = Outcome { failures: 0 };
    for (i, f) in criteria {
        if wanted(i) {
            let start = Instant::now();
            f(&mut out);
            println!("    ({:.1} s)", start.elapsed().as_secs_f64());
        }
    }
    println!("acceptance: {} failing line(s)", out.failures);
    if out.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
