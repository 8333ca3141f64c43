//! Command-line driver: `leray <mms-time|mms-space|marsigli|verify> [flags]`.
//!
//! Every run writes `manifest.json` into the output directory before it
//! starts and again when it ends. Failures exit nonzero and print one JSON
//! object describing the error on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use leray_fem::io::config::Radius;
use leray_fem::io::{parse_config_with, write_rate_table, ConfigError, Experiment, RunConfig, RunManifest, Scale};
use leray_fem::stepper::Model;
use leray_fem::verification::marsigli::nominal_h;
use leray_fem::verification::{
    run_marsigli, run_property_suite, run_spatial_study, run_stability_check, run_temporal_study, stability_horizon,
    MarsigliRun, MarsigliScenario, MmsProblem, MmsRunConfig, PropertySuiteConfig, RateRow, RateTable, STABILITY_DTS,
};

#[derive(Debug, Parser)]
#[command(name = "leray", version, about = "Boussinesq flow with adaptive deconvolution-based Leray filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Temporal convergence study on the manufactured solution.
    MmsTime,
    /// Spatial convergence study on the manufactured solution.
    MmsSpace,
    /// Lock-exchange benchmark in an insulated box.
    Marsigli,
    /// Algebraic property suite and large-step stability audit.
    Verify,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; omitted keys take the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_model)]
    model: Option<Model>,
    /// Van Cittert order N of the indicator.
    #[arg(long, global = true)]
    deconv_order: Option<usize>,
    #[arg(long, global = true, value_parser = parse_scale)]
    scale: Option<Scale>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse()
}

fn parse_scale(s: &str) -> Result<Scale, String> {
    match s {
        "desk" => Ok(Scale::Desk),
        "paper" => Ok(Scale::Paper),
        other => Err(format!("unknown scale '{other}' (expected desk or paper)")),
    }
}

/// A failure with its exit code and JSON kind.
struct Failure {
    kind: &'static str,
    code: u8,
    message: String,
    violations: Vec<String>,
    detail: Option<Value>,
}

impl Failure {
    fn config(e: ConfigError) -> Failure {
        Failure { kind: "config", code: 2, message: e.to_string(), violations: e.violations, detail: None }
    }

    fn io(message: String) -> Failure {
        Failure { kind: "io", code: 3, message, violations: vec![], detail: None }
    }

    fn run(message: String, detail: Option<Value>) -> Failure {
        Failure { kind: "run", code: 1, message, violations: vec![], detail }
    }

    fn to_json(&self) -> Value {
        let mut v = json!({ "status": "error", "kind": self.kind, "message": self.message });
        if !self.violations.is_empty() {
            v["violations"] = json!(self.violations);
        }
        if let Some(d) = &self.detail {
            v["detail"] = d.clone();
        }
        v
    }
}

fn experiment_of(c: &Command) -> Experiment {
    match c {
        Command::MmsTime => Experiment::MmsTime,
        Command::MmsSpace => Experiment::MmsSpace,
        Command::Marsigli => Experiment::Marsigli,
        Command::Verify => Experiment::PropertySuite,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let experiment = experiment_of(&cli.command);
    let text = match &cli.common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = parse_config_with(&text, Some(experiment), cli.common.scale).map_err(Failure::config)?;
    if let Some(m) = cli.common.model {
        cfg.model.kind = m;
    }
    if let Some(n) = cli.common.deconv_order {
        cfg.model.order = n;
    }
    if let Some(o) = &cli.common.out {
        cfg.output.dir = o.to_string_lossy().into_owned();
    }
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

fn mms_base(cfg: &RunConfig) -> (MmsProblem, MmsRunConfig) {
    let f = &cfg.flow;
    let problem = MmsProblem { re: f.re, ri: f.ri, pr: f.pr };
    let base = MmsRunConfig {
        cells: cfg.mesh.cells_x,
        velocity_degree: cfg.mesh.velocity_degree,
        dt: f.dt,
        t_end: f.t_end,
        alpha: f.alpha.fixed(),
        order: cfg.model.order,
        model: cfg.model.kind,
        stepper: cfg.stepper_options(),
    };
    (problem, base)
}

fn print_row(row: &RateRow) {
    match &row.failure {
        Some(msg) => eprintln!("  {:>10.3e}  failed: {msg}", row.resolution),
        None => eprintln!(
            "  {:>10.3e}  u L2 {:.4e}  u (2,1) {:.4e}  T L2 {:.4e}  T (2,1) {:.4e}",
            row.resolution, row.err_u_l2, row.err_u_21, row.err_t_l2, row.err_t_21
        ),
    }
}

fn table_json(table: &RateTable) -> Value {
    json!({ "rows": table.rows, "rates": table.rates() })
}

fn write_table(table: &RateTable, dir: &Path, name: &str, outputs: &mut Vec<String>) -> Result<(), Failure> {
    let path = dir.join(name);
    write_rate_table(table, &path).map_err(|e| Failure::io(e.to_string()))?;
    outputs.push(path.to_string_lossy().into_owned());
    Ok(())
}

fn table_failures(table: &RateTable) -> Vec<String> {
    table.rows.iter().filter_map(|r| r.failure.as_ref().map(|m| format!("resolution {}: {m}", r.resolution))).collect()
}

fn run_mms_time(cfg: &RunConfig, dir: &Path, outputs: &mut Vec<String>) -> Result<Value, Failure> {
    let (problem, base) = mms_base(cfg);
    eprintln!("temporal study on {} cells per side, P{}", base.cells, base.velocity_degree);
    let table = run_temporal_study(&problem, &base, &cfg.study.dts, cfg.study.reading, print_row);
    write_table(&table, dir, "rates_temporal.csv", outputs)?;
    let summary = json!({ "temporal": table_json(&table) });
    let failed = table_failures(&table);
    if failed.is_empty() {
        Ok(summary)
    } else {
        Err(Failure::run(failed.join("; "), Some(summary)))
    }
}

fn run_mms_space(cfg: &RunConfig, dir: &Path, outputs: &mut Vec<String>) -> Result<Value, Failure> {
    let (problem, base) = mms_base(cfg);
    let mut summary = serde_json::Map::new();
    let mut failed = Vec::new();
    for &k in &cfg.study.degrees {
        eprintln!("spatial study, P{k}");
        let table =
            run_spatial_study(&problem, &MmsRunConfig { velocity_degree: k, ..base }, &cfg.study.cells, print_row);
        write_table(&table, dir, &format!("rates_spatial_p{k}.csv"), outputs)?;
        failed.extend(table_failures(&table));
        summary.insert(format!("p{k}"), table_json(&table));
    }
    let summary = Value::Object(summary);
    if failed.is_empty() {
        Ok(summary)
    } else {
        Err(Failure::run(failed.join("; "), Some(summary)))
    }
}

fn run_marsigli_cmd(cfg: &RunConfig, dir: &Path, outputs: &mut Vec<String>) -> Result<Value, Failure> {
    let f = &cfg.flow;
    let (nx, ny) = (cfg.mesh.cells_x, cfg.mesh.cells_y);
    let h = nominal_h(nx, ny);
    let alpha = match f.alpha {
        Radius::Fixed(a) => a,
        r => r.resolve(h),
    };
    let run = MarsigliRun {
        scenario: MarsigliScenario::default(),
        cells: (nx, ny),
        velocity_degree: cfg.mesh.velocity_degree,
        re: f.re,
        ri: f.ri,
        pr: f.pr,
        dt: f.dt,
        t_end: f.t_end,
        alpha,
        order: cfg.model.order,
        model: cfg.model.kind,
        stepper: cfg.stepper_options(),
        snapshot_times: cfg.output.snapshot_times.clone(),
        refine_vtk: cfg.output.refine_vtk,
        out_dir: Some(dir.to_path_buf()),
    };
    eprintln!("marsigli: {} on {nx}x{ny} cells, dt = {}, alpha = {alpha}", run.model.name(), run.dt);
    let every = ((0.5 / f.dt).round() as usize).max(1);
    let outcome = run_marsigli(&run, |d| {
        if d.step % every == 0 {
            eprintln!(
                "  t = {:6.2}  T in [{:.4}, {:.4}]  outside {:.4}  ke {:.4e}  drift {:.1e}",
                d.time, d.temp_min, d.temp_max, d.out_of_range_fraction, d.kinetic_energy, d.temperature_drift
            );
        }
    })
    .map_err(|e| Failure::run(e.to_string(), None))?;
    let model = run.model.name();
    outputs.push(dir.join(format!("diagnostics_{model}.jsonl")).to_string_lossy().into_owned());
    outputs.extend(outcome.snapshots.iter().filter_map(|s| s.vtk.as_ref()).map(|p| p.to_string_lossy().into_owned()));
    let summary = json!({
        "model": model,
        "alpha": alpha,
        "snapshots": outcome.snapshots.iter().map(|s| &s.diagnostics).collect::<Vec<_>>(),
        "final": outcome.reports.last(),
        "wall_seconds": outcome.wall_seconds,
    });
    match outcome.aborted {
        Some(msg) => Err(Failure::run(msg, Some(summary))),
        None => Ok(summary),
    }
}

fn run_verify(cfg: &RunConfig, dir: &Path, outputs: &mut Vec<String>) -> Result<Value, Failure> {
    let suite_cfg = PropertySuiteConfig { cells: cfg.mesh.cells_x, ..Default::default() };
    let suite = run_property_suite(&suite_cfg).map_err(|e| Failure::run(e.to_string(), None))?;
    for c in &suite.checks {
        eprintln!(
            "  {:<4} {:<48} {:.3e} (tol {:.0e})",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    let mut stability = Vec::new();
    for dt in STABILITY_DTS {
        let o = run_stability_check(dt, stability_horizon(dt), cfg.mesh.cells_x, cfg.model.kind)
            .map_err(|e| Failure::run(e.to_string(), None))?;
        eprintln!(
            "  {:<4} stability dt = {dt:<5} steps {:>4}  max lhs/rhs {:.3e}",
            if o.passed() { "ok" } else { "FAIL" },
            o.steps,
            o.energy.max_ratio
        );
        stability.push(o);
    }
    let summary = json!({ "properties": suite.checks, "stability": stability });
    let path = dir.join("properties.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    outputs.push(path.to_string_lossy().into_owned());
    let failed: Vec<String> = suite
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.clone())
        .chain(stability.iter().filter(|o| !o.passed()).map(|o| format!("stability dt = {}", o.dt)))
        .collect();
    if failed.is_empty() {
        Ok(summary)
    } else {
        Err(Failure::run(format!("failed checks: {}", failed.join(", ")), Some(summary)))
    }
}

fn execute(cli: &Cli) -> Result<Value, Failure> {
    let cfg = load_config(cli)?;
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    let mut manifest = RunManifest::begin(&cfg, std::env::args().collect());
    manifest.write(&dir).map_err(|e| Failure::io(e.to_string()))?;
    let mut outputs = Vec::new();
    let result = match cli.command {
        Command::MmsTime => run_mms_time(&cfg, &dir, &mut outputs),
        Command::MmsSpace => run_mms_space(&cfg, &dir, &mut outputs),
        Command::Marsigli => run_marsigli_cmd(&cfg, &dir, &mut outputs),
        Command::Verify => run_verify(&cfg, &dir, &mut outputs),
    };
    manifest.outputs = outputs;
    match &result {
        Ok(v) => manifest.finish(Ok(v.clone())),
        Err(f) => {
            manifest.finish(Err(f.message.clone()));
            manifest.summary = f.detail.clone();
        }
    }
    manifest.write(&dir).map_err(|e| Failure::io(e.to_string()))?;
    result.map(|v| json!({ "status": "ok", "experiment": cfg.experiment.name(), "out": dir, "summary": v }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure {
                kind: "usage",
                code: 2,
                message: e.to_string().trim().to_owned(),
                violations: vec![],
                detail: None,
            };
            eprintln!("{}", f.to_json());
            return ExitCode::from(f.code);
        }
    };
    match execute(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code)
        }
    }
}
