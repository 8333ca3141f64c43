//! TOML run configuration.
//!
//! A config names an experiment and overrides any of that experiment's
//! defaults. Unknown keys and invalid values are reported together.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::filtering::FilterBoundary;
use crate::linsolve::SolverOptions;
use crate::stepper::{IndicatorArgument, InitStrategy, Model, StepperOptions, TemperatureWind};
use crate::verification::marsigli::MeshRole;
use crate::verification::TemporalReading;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: {}", .violations.join("; "))]
pub struct ConfigError {
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MmsTime,
    MmsSpace,
    Marsigli,
    PropertySuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MmsTime => "mms-time",
            Experiment::MmsSpace => "mms-space",
            Experiment::Marsigli => "marsigli",
            Experiment::PropertySuite => "property-suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// h = 1/64 temporal study, coarse lock exchange.
    #[default]
    Desk,
    /// h = 1/128 temporal study, fine lock exchange.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshSizeTag {
    /// `alpha` equals the nominal mesh size.
    H,
}

/// Filter radius: a number, or `"h"` for the nominal mesh size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radius {
    Fixed(f64),
    MeshSize(MeshSizeTag),
}

impl Radius {
    pub fn resolve(self, h: f64) -> f64 {
        match self {
            Radius::Fixed(a) => a,
            Radius::MeshSize(_) => h,
        }
    }

    pub fn fixed(self) -> Option<f64> {
        match self {
            Radius::Fixed(a) => Some(a),
            Radius::MeshSize(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub re: f64,
    pub ri: f64,
    pub pr: f64,
    pub dt: f64,
    pub t_end: f64,
    pub alpha: Radius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub cells_x: usize,
    pub cells_y: usize,
    pub velocity_degree: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: Model,
    /// Van Cittert order N of the indicator.
    pub order: usize,
    pub normalize: bool,
    pub indicator_argument: IndicatorArgument,
    pub filter_boundary: FilterBoundary,
    pub constrained_filter: bool,
    pub temperature_wind: TemperatureWind,
    pub init: InitStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub dts: Vec<f64>,
    pub cells: Vec<usize>,
    pub degrees: Vec<usize>,
    pub reading: TemporalReading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub snapshot_times: Vec<f64>,
    pub refine_vtk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub scale: Scale,
    pub flow: FlowConfig,
    pub mesh: MeshConfig,
    pub model: ModelConfig,
    pub study: StudyConfig,
    pub output: OutputConfig,
    pub solver: SolverOptions,
}

impl RunConfig {
    pub fn defaults(experiment: Experiment, scale: Scale) -> RunConfig {
        let paper = scale == Scale::Paper;
        let mms_model = ModelConfig {
            kind: Model::AdaptiveLeray,
            order: 0,
            normalize: true,
            indicator_argument: IndicatorArgument::Extrapolated,
            filter_boundary: FilterBoundary::Trace,
            constrained_filter: true,
            temperature_wind: TemperatureWind::Extrapolated,
            init: InitStrategy::InterpolateExact,
        };
        let unit =
            FlowConfig { re: 1.0, ri: 1.0, pr: 1.0, dt: 0.25, t_end: 1.0, alpha: Radius::MeshSize(MeshSizeTag::H) };
        let study = StudyConfig { dts: vec![], cells: vec![], degrees: vec![2], reading: TemporalReading::default() };
        let output =
            OutputConfig { dir: format!("runs/{}", experiment.name()), snapshot_times: vec![], refine_vtk: true };
        let base = RunConfig {
            experiment,
            scale,
            flow: unit,
            mesh: MeshConfig { cells_x: 4, cells_y: 4, velocity_degree: 2 },
            model: mms_model,
            study,
            output,
            solver: SolverOptions::default(),
        };
        match experiment {
            Experiment::MmsTime => {
                let n = if paper { 128 } else { 64 };
                RunConfig {
                    mesh: MeshConfig { cells_x: n, cells_y: n, velocity_degree: 2 },
                    study: StudyConfig { dts: vec![0.25, 0.125, 0.0625, 0.03125], ..base.study.clone() },
                    ..base
                }
            }
            Experiment::MmsSpace => RunConfig {
                flow: FlowConfig { dt: 1e-4, t_end: 1e-3, ..unit },
                study: StudyConfig { cells: vec![4, 8, 16, 32, 64], degrees: vec![2, 3], ..base.study.clone() },
                ..base
            },
            Experiment::Marsigli => {
                let role = if paper { MeshRole::Fine } else { MeshRole::Coarse };
                let (nx, ny) = role.cells();
                RunConfig {
                    flow: FlowConfig {
                        re: 1000.0,
                        ri: 4.0,
                        pr: 1.0,
                        dt: role.dt(),
                        t_end: 8.0,
                        alpha: Radius::MeshSize(MeshSizeTag::H),
                    },
                    mesh: MeshConfig { cells_x: nx, cells_y: ny, velocity_degree: 2 },
                    model: ModelConfig { order: 1, init: InitStrategy::BackwardEulerBootstrap, ..mms_model },
                    output: OutputConfig { snapshot_times: vec![2.0, 4.0, 6.0, 8.0], ..base.output.clone() },
                    ..base
                }
            }
            Experiment::PropertySuite => base,
        }
    }

    pub fn stepper_options(&self) -> StepperOptions {
        let m = &self.model;
        StepperOptions {
            indicator_argument: m.indicator_argument,
            normalize_indicator: m.normalize,
            filter_boundary: m.filter_boundary,
            constrained_filter: m.constrained_filter,
            init: m.init,
            solver: self.solver,
            unit_indicator: false,
            temperature_wind: m.temperature_wind,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is representable in TOML")
    }

    /// Every violated constraint, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let f = &self.flow;
        for (name, x) in
            [("flow.re", f.re), ("flow.ri", f.ri), ("flow.pr", f.pr), ("flow.dt", f.dt), ("flow.t_end", f.t_end)]
        {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} must be positive, got {x}"));
            }
        }
        if let Some(a) = f.alpha.fixed() {
            if !(a.is_finite() && a > 0.0) {
                v.push(format!("flow.alpha must be positive or \"h\", got {a}"));
            }
        }
        let steps_ok = |dt: f64, t: f64| {
            let m = t / dt;
            m.is_finite() && m >= 1.0 && (m - m.round()).abs() < 1e-9 * m.max(1.0)
        };
        let uses_flow_dt = self.experiment != Experiment::MmsTime;
        if uses_flow_dt && f.dt > 0.0 && f.t_end > 0.0 && !steps_ok(f.dt, f.t_end) {
            v.push(format!("flow.t_end = {} is not a whole number of steps of {}", f.t_end, f.dt));
        }
        if !(2..=3).contains(&self.mesh.velocity_degree) {
            v.push(format!("mesh.velocity_degree must be 2 or 3, got {}", self.mesh.velocity_degree));
        }
        if self.mesh.cells_x == 0 || self.mesh.cells_y == 0 {
            v.push("mesh.cells_x and mesh.cells_y must be at least 1".into());
        }
        let mms = matches!(self.experiment, Experiment::MmsTime | Experiment::MmsSpace);
        if mms && self.mesh.cells_x != self.mesh.cells_y {
            v.push(format!(
                "manufactured-solution runs use a square mesh, got {}x{} cells",
                self.mesh.cells_x, self.mesh.cells_y
            ));
        }
        if self.model.order > 8 {
            v.push(format!("model.order must be at most 8, got {}", self.model.order));
        }
        if self.experiment == Experiment::Marsigli && self.model.init == InitStrategy::InterpolateExact {
            v.push("model.init = \"interpolate-exact\" needs an exact solution; marsigli has none".into());
        }
        match self.experiment {
            Experiment::MmsTime => {
                if self.study.dts.is_empty() {
                    v.push("study.dts must not be empty".into());
                }
                for &dt in &self.study.dts {
                    let ok = match self.study.reading {
                        TemporalReading::FixedEndTime { t_end } => dt > 0.0 && steps_ok(dt, t_end),
                        TemporalReading::EndTimeIsLabel { steps } => dt > 0.0 && steps > 0,
                    };
                    if !ok {
                        v.push(format!("study.dts entry {dt} is incompatible with {:?}", self.study.reading));
                    }
                }
            }
            Experiment::MmsSpace => {
                if self.study.cells.is_empty() || self.study.cells.contains(&0) {
                    v.push("study.cells must be a non-empty list of positive counts".into());
                }
                if self.study.degrees.is_empty() || self.study.degrees.iter().any(|d| !(2..=3).contains(d)) {
                    v.push("study.degrees must list degrees 2 and/or 3".into());
                }
            }
            _ => {}
        }
        for &t in &self.output.snapshot_times {
            if !(t > 0.0 && t <= f.t_end + 1e-12) {
                v.push(format!("output.snapshot_times entry {t} lies outside (0, {}]", f.t_end));
            }
        }
        if !(self.solver.tol > 0.0) {
            v.push(format!("solver.tol must be positive, got {}", self.solver.tol));
        }
        v
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations })
        }
    }
}

/// Tables that hold a tagged enum and are replaced whole rather than merged.
const TAGGED: [&str; 1] = ["study.reading"];

fn join(prefix: &str, k: &str) -> String {
    if prefix.is_empty() {
        k.to_owned()
    } else {
        format!("{prefix}.{k}")
    }
}

fn unknown_keys(user: &Table, known: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in user {
        let path = join(prefix, k);
        match known.get(k) {
            None => out.push(format!("unknown key `{path}`")),
            Some(Value::Table(kt)) => match v {
                Value::Table(ut) if !TAGGED.contains(&path.as_str()) => unknown_keys(ut, kt, &path, out),
                Value::Table(_) => {}
                _ => out.push(format!("`{path}` must be a table")),
            },
            Some(_) => {}
        }
    }
}

fn merge(base: &mut Table, user: &Table, prefix: &str) {
    for (k, v) in user {
        let path = join(prefix, k);
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(u)) if !TAGGED.contains(&path.as_str()) => merge(b, u, &path),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(v: &Value, key: &str, errs: &mut Vec<String>) -> Option<T> {
    match v.clone().try_into() {
        Ok(x) => Some(x),
        Err(e) => {
            errs.push(format!("`{key}`: {}", e.to_string().trim()));
            None
        }
    }
}

/// Parses a config; `experiment` is required unless `fallback` supplies it.
/// A given `scale` replaces the file's and selects the defaults.
pub fn parse_config_with(
    text: &str,
    fallback: Option<Experiment>,
    scale: Option<Scale>,
) -> Result<RunConfig, ConfigError> {
    let user: Table =
        text.parse().map_err(|e: toml::de::Error| ConfigError { violations: vec![e.to_string().trim().to_owned()] })?;
    let mut errs = Vec::new();
    let experiment = match user.get("experiment") {
        Some(v) => parse_enum::<Experiment>(v, "experiment", &mut errs),
        None if fallback.is_some() => fallback,
        None => {
            errs.push(
                "missing required key `experiment` (one of mms-time, mms-space, marsigli, property-suite)".into(),
            );
            None
        }
    };
    if let (Some(Value::String(_)), Some(fb), Some(ex)) = (user.get("experiment"), fallback, experiment) {
        if fb != ex {
            errs.push(format!("config is for `{}` but `{}` was requested", ex.name(), fb.name()));
        }
    }
    let file_scale = match user.get("scale") {
        Some(v) => parse_enum::<Scale>(v, "scale", &mut errs).unwrap_or_default(),
        None => Scale::Desk,
    };
    let scale = scale.unwrap_or(file_scale);
    let Some(experiment) = experiment else {
        return Err(ConfigError { violations: errs });
    };
    let defaults = RunConfig::defaults(experiment, scale);
    let mut table: Table = Table::try_from(&defaults).expect("defaults serialize");
    unknown_keys(&user, &table, "", &mut errs);
    if !errs.is_empty() {
        return Err(ConfigError { violations: errs });
    }
    merge(&mut table, &user, "");
    table.insert("scale".into(), Value::try_from(scale).expect("scale serializes"));
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError { violations: vec![e.to_string().trim().to_owned()] })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, None, None)
}
