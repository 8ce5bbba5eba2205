//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! ```text
//! # comment
//! model.type = two_qubit
//! model.c2 = 0.7071067811865476
//! integration.t_final = 1000
//! ```
//!
//! Every key has a default. Unknown or repeated keys are parse errors.

use std::fmt;
use std::str::FromStr;

use crate::chaos::{ClassifyOptions, EventOptions};
use crate::critical::{CriticalPointOptions, KWindow};
use crate::ensemble::{ColorplotSpec, EnsembleOptions, GridSpec, Region, Sampling};
use crate::error::{Error, Result};
use crate::model::{make_two_qubit, OscillatorFrequencies, SingleNodeModel, WavefunctionModel};
use crate::trajectory::IntegrationControls;

/// First and last lines of the provenance block written into output files.
pub const PROVENANCE_BEGIN: &str = "# config:";
pub const PROVENANCE_END: &str = "# end-config";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    SingleNode,
    TwoQubit,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::SingleNode => "single_node",
            ModelKind::TwoQubit => "two_qubit",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single_node" => Ok(ModelKind::SingleNode),
            "two_qubit" => Ok(ModelKind::TwoQubit),
            _ => Err(format!("expected single_node or two_qubit, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Binary,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Binary => "binary",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "binary" => Ok(OutputFormat::Binary),
            _ => Err(format!("expected csv or binary, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub c2: f64,
    pub a0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub omega_x: f64,
    pub omega_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub threshold_d: f64,
    pub min_gap: f64,
    pub k_window: i64,
    pub window_ratio: f64,
    pub chaotic_floor: f64,
    pub ordered_slope: f64,
    pub chaotic_slope: f64,
    /// Time at which `critical-points` lists N, X and Y points.
    pub t_critical: f64,
    pub escape_guard: f64,
    pub x_tol: f64,
    pub colorplot_min: f64,
    pub colorplot_max: f64,
    pub bin_size: f64,
    pub colorplot_dt: f64,
    pub snapshots: Vec<f64>,
    /// Number of periods integrated by `periodicity-check`.
    pub periods: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub random: bool,
    pub seed: u64,
    /// Empty means `[t_final]`.
    pub checkpoints: Vec<f64>,
    pub c2_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: String,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub integration: IntegrationControls,
    pub start: [f64; 2],
    pub analysis: AnalysisConfig,
    pub ensemble: EnsembleConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let classify = ClassifyOptions::default();
        let events = EventOptions::default();
        let crit = CriticalPointOptions::default();
        Self {
            model: ModelConfig {
                kind: ModelKind::TwoQubit,
                c2: s,
                a0: 2.5,
                a: 1.0,
                b: 1.0,
                c: s,
                omega_x: 1.0,
                omega_y: 3.0_f64.sqrt(),
            },
            integration: IntegrationControls::default(),
            start: [0.0, 3.0],
            analysis: AnalysisConfig {
                threshold_d: events.threshold,
                min_gap: events.min_gap,
                k_window: KWindow::default().max,
                window_ratio: classify.window_ratio,
                chaotic_floor: classify.chaotic_floor,
                ordered_slope: classify.ordered_slope,
                chaotic_slope: classify.chaotic_slope,
                t_critical: 1.5,
                escape_guard: crit.escape_guard,
                x_tol: crit.x_tol,
                colorplot_min: -6.0,
                colorplot_max: 6.0,
                bin_size: crate::ensemble::DEFAULT_BIN_SIZE,
                colorplot_dt: crate::ensemble::DEFAULT_COLORPLOT_DT,
                snapshots: Vec::new(),
                periods: 100,
            },
            ensemble: EnsembleConfig {
                x_min: -4.0,
                x_max: 4.0,
                y_min: -4.0,
                y_max: 4.0,
                n_x: 20,
                n_y: 20,
                random: false,
                seed: 0,
                checkpoints: Vec::new(),
                c2_list: vec![0.5, 0.6, s],
            },
            output: OutputConfig {
                directory: ".".into(),
                format: OutputFormat::Csv,
            },
        }
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| format!("cannot parse `{v}`: {e}"))
}

fn list(v: &str) -> std::result::Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(s.trim())).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Every accepted key, in serialization order.
pub const KEYS: &[&str] = &[
    "model.type",
    "model.c2",
    "model.a0",
    "model.a",
    "model.b",
    "model.c",
    "model.omega_x",
    "model.omega_y",
    "integration.atol",
    "integration.rtol",
    "integration.h_min",
    "integration.dt_sample",
    "integration.renorm_dt",
    "integration.t_final",
    "start.x",
    "start.y",
    "analysis.threshold_d",
    "analysis.min_gap",
    "analysis.k_window",
    "analysis.window_ratio",
    "analysis.chaotic_floor",
    "analysis.ordered_slope",
    "analysis.chaotic_slope",
    "analysis.t_critical",
    "analysis.escape_guard",
    "analysis.x_tol",
    "analysis.colorplot_min",
    "analysis.colorplot_max",
    "analysis.bin_size",
    "analysis.colorplot_dt",
    "analysis.snapshots",
    "analysis.periods",
    "ensemble.x_min",
    "ensemble.x_max",
    "ensemble.y_min",
    "ensemble.y_max",
    "ensemble.n_x",
    "ensemble.n_y",
    "ensemble.sampling",
    "ensemble.seed",
    "ensemble.checkpoints",
    "ensemble.c2_list",
    "output.directory",
    "output.format",
];

impl RunConfig {
    /// Sets one key from its textual value. The error is a message without location.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let (m, i, a, e) = (
            &mut self.model,
            &mut self.integration,
            &mut self.analysis,
            &mut self.ensemble,
        );
        match key {
            "model.type" => m.kind = v.parse()?,
            "model.c2" => m.c2 = num(v)?,
            "model.a0" => m.a0 = num(v)?,
            "model.a" => m.a = num(v)?,
            "model.b" => m.b = num(v)?,
            "model.c" => m.c = num(v)?,
            "model.omega_x" => m.omega_x = num(v)?,
            "model.omega_y" => m.omega_y = num(v)?,
            "integration.atol" => i.atol = num(v)?,
            "integration.rtol" => i.rtol = num(v)?,
            "integration.h_min" => i.h_min = num(v)?,
            "integration.dt_sample" => i.dt_sample = num(v)?,
            "integration.renorm_dt" => i.renorm_dt = num(v)?,
            "integration.t_final" => i.t_final = num(v)?,
            "start.x" => self.start[0] = num(v)?,
            "start.y" => self.start[1] = num(v)?,
            "analysis.threshold_d" => a.threshold_d = num(v)?,
            "analysis.min_gap" => a.min_gap = num(v)?,
            "analysis.k_window" => a.k_window = num(v)?,
            "analysis.window_ratio" => a.window_ratio = num(v)?,
            "analysis.chaotic_floor" => a.chaotic_floor = num(v)?,
            "analysis.ordered_slope" => a.ordered_slope = num(v)?,
            "analysis.chaotic_slope" => a.chaotic_slope = num(v)?,
            "analysis.t_critical" => a.t_critical = num(v)?,
            "analysis.escape_guard" => a.escape_guard = num(v)?,
            "analysis.x_tol" => a.x_tol = num(v)?,
            "analysis.colorplot_min" => a.colorplot_min = num(v)?,
            "analysis.colorplot_max" => a.colorplot_max = num(v)?,
            "analysis.bin_size" => a.bin_size = num(v)?,
            "analysis.colorplot_dt" => a.colorplot_dt = num(v)?,
            "analysis.snapshots" => a.snapshots = list(v)?,
            "analysis.periods" => a.periods = num(v)?,
            "ensemble.x_min" => e.x_min = num(v)?,
            "ensemble.x_max" => e.x_max = num(v)?,
            "ensemble.y_min" => e.y_min = num(v)?,
            "ensemble.y_max" => e.y_max = num(v)?,
            "ensemble.n_x" => e.n_x = num(v)?,
            "ensemble.n_y" => e.n_y = num(v)?,
            "ensemble.sampling" => {
                e.random = match v {
                    "grid" => false,
                    "random" => true,
                    _ => return Err(format!("expected grid or random, got `{v}`")),
                }
            }
            "ensemble.seed" => e.seed = num(v)?,
            "ensemble.checkpoints" => e.checkpoints = list(v)?,
            "ensemble.c2_list" => e.c2_list = list(v)?,
            "output.directory" => self.output.directory = v.to_string(),
            "output.format" => self.output.format = v.parse()?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Textual value of `key`; `None` for unknown keys.
    pub fn get(&self, key: &str) -> Option<String> {
        let (m, i, a, e) = (
            &self.model,
            &self.integration,
            &self.analysis,
            &self.ensemble,
        );
        let f = |x: f64| format!("{x:?}");
        Some(match key {
            "model.type" => m.kind.to_string(),
            "model.c2" => f(m.c2),
            "model.a0" => f(m.a0),
            "model.a" => f(m.a),
            "model.b" => f(m.b),
            "model.c" => f(m.c),
            "model.omega_x" => f(m.omega_x),
            "model.omega_y" => f(m.omega_y),
            "integration.atol" => f(i.atol),
            "integration.rtol" => f(i.rtol),
            "integration.h_min" => f(i.h_min),
            "integration.dt_sample" => f(i.dt_sample),
            "integration.renorm_dt" => f(i.renorm_dt),
            "integration.t_final" => f(i.t_final),
            "start.x" => f(self.start[0]),
            "start.y" => f(self.start[1]),
            "analysis.threshold_d" => f(a.threshold_d),
            "analysis.min_gap" => f(a.min_gap),
            "analysis.k_window" => a.k_window.to_string(),
            "analysis.window_ratio" => f(a.window_ratio),
            "analysis.chaotic_floor" => f(a.chaotic_floor),
            "analysis.ordered_slope" => f(a.ordered_slope),
            "analysis.chaotic_slope" => f(a.chaotic_slope),
            "analysis.t_critical" => f(a.t_critical),
            "analysis.escape_guard" => f(a.escape_guard),
            "analysis.x_tol" => f(a.x_tol),
            "analysis.colorplot_min" => f(a.colorplot_min),
            "analysis.colorplot_max" => f(a.colorplot_max),
            "analysis.bin_size" => f(a.bin_size),
            "analysis.colorplot_dt" => f(a.colorplot_dt),
            "analysis.snapshots" => fmt_list(&a.snapshots),
            "analysis.periods" => a.periods.to_string(),
            "ensemble.x_min" => f(e.x_min),
            "ensemble.x_max" => f(e.x_max),
            "ensemble.y_min" => f(e.y_min),
            "ensemble.y_max" => f(e.y_max),
            "ensemble.n_x" => e.n_x.to_string(),
            "ensemble.n_y" => e.n_y.to_string(),
            "ensemble.sampling" => (if e.random { "random" } else { "grid" }).to_string(),
            "ensemble.seed" => e.seed.to_string(),
            "ensemble.checkpoints" => fmt_list(&e.checkpoints),
            "ensemble.c2_list" => fmt_list(&e.c2_list),
            "output.directory" => self.output.directory.clone(),
            "output.format" => self.output.format.to_string(),
            _ => return None,
        })
    }

    /// One `key = value` line per key. Floats use the shortest round-trip form.
    pub fn serialize(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("listed key")))
            .collect()
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        let v = |msg: String| Err(Error::Validation(msg));
        let m = &self.model;
        match m.kind {
            ModelKind::TwoQubit => {
                if !(0.0..=1.0).contains(&m.c2) {
                    return v(format!("model.c2 = {} outside [0, 1]", m.c2));
                }
                if !(m.a0 > 0.0 && m.a0.is_finite()) {
                    return v(format!("model.a0 must be positive, got {}", m.a0));
                }
            }
            ModelKind::SingleNode => {
                if m.b == 0.0 || m.c == 0.0 {
                    return v("model.b and model.c must be non-zero".into());
                }
            }
        }
        if !(m.omega_x > 0.0 && m.omega_y > 0.0 && m.omega_x.is_finite() && m.omega_y.is_finite()) {
            return v("model.omega_x and model.omega_y must be positive".into());
        }
        self.integration.validate()?;
        if !(self.start[0].is_finite() && self.start[1].is_finite()) {
            return v("start must be finite".into());
        }
        let a = &self.analysis;
        if !(a.threshold_d > 0.0 && a.min_gap >= 0.0) {
            return v(
                "analysis.threshold_d must be positive and analysis.min_gap non-negative".into(),
            );
        }
        if a.k_window < 1 {
            return v("analysis.k_window must be at least 1".into());
        }
        if !(a.window_ratio > 1.0
            && a.chaotic_floor > 0.0
            && a.chaotic_slope > 0.0
            && a.ordered_slope < 0.0)
        {
            return v("classification window/floor/slopes out of range".into());
        }
        if !(a.escape_guard > 0.0 && a.x_tol > 0.0) {
            return v("analysis.escape_guard and analysis.x_tol must be positive".into());
        }
        if a.periods == 0 {
            return v("analysis.periods must be positive".into());
        }
        self.colorplot_spec()
            .and_then(|s| crate::ensemble::ColorplotGrid::new(s.region, s.bin_size))?;
        if a.snapshots.windows(2).any(|w| w[1] <= w[0]) {
            return v("analysis.snapshots must be strictly increasing".into());
        }
        self.grid().validate()?;
        let e = &self.ensemble;
        if e.checkpoints.windows(2).any(|w| w[1] <= w[0])
            || e.checkpoints.iter().any(|&c| !(c > 0.0))
        {
            return v("ensemble.checkpoints must be positive and strictly increasing".into());
        }
        if let Some(c) = e.c2_list.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return v(format!("c2 value {c} in ensemble.c2_list outside [0, 1]"));
        }
        if self.output.directory.is_empty() {
            return v("output.directory must not be empty".into());
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Result<OscillatorFrequencies> {
        OscillatorFrequencies::new(self.model.omega_x, self.model.omega_y)
    }

    pub fn build_model(&self) -> Result<WavefunctionModel> {
        let f = self.frequencies()?;
        let m = &self.model;
        Ok(match m.kind {
            ModelKind::TwoQubit => make_two_qubit(m.c2, m.a0, f)?.into(),
            ModelKind::SingleNode => SingleNodeModel::new(m.a, m.b, m.c, f)?.into(),
        })
    }

    /// Same model family with a different `c2`.
    pub fn with_c2(&self, c2: f64) -> Self {
        let mut c = self.clone();
        c.model.c2 = c2;
        c
    }

    pub fn event_options(&self) -> EventOptions {
        EventOptions {
            threshold: self.analysis.threshold_d,
            min_gap: self.analysis.min_gap,
        }
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        let a = &self.analysis;
        ClassifyOptions {
            window_ratio: a.window_ratio,
            ordered_slope: a.ordered_slope,
            chaotic_slope: a.chaotic_slope,
            chaotic_floor: a.chaotic_floor,
        }
    }

    pub fn critical_options(&self) -> CriticalPointOptions {
        CriticalPointOptions {
            escape_guard: self.analysis.escape_guard,
            x_tol: self.analysis.x_tol,
            ..CriticalPointOptions::default()
        }
    }

    pub fn k_window(&self) -> KWindow {
        KWindow::symmetric(self.analysis.k_window)
    }

    pub fn grid(&self) -> GridSpec {
        let e = &self.ensemble;
        GridSpec {
            x_range: [e.x_min, e.x_max],
            y_range: [e.y_min, e.y_max],
            n_x: e.n_x,
            n_y: e.n_y,
            sampling: if e.random {
                Sampling::Random { seed: e.seed }
            } else {
                Sampling::Grid
            },
        }
    }

    /// Checkpoint times; an empty list means just `t_final`.
    pub fn checkpoints(&self) -> Vec<f64> {
        if self.ensemble.checkpoints.is_empty() {
            vec![self.integration.t_final]
        } else {
            self.ensemble.checkpoints.clone()
        }
    }

    pub fn ensemble_options(&self, workers: Option<usize>) -> EnsembleOptions {
        EnsembleOptions {
            classify: self.classify_options(),
            workers,
        }
    }

    pub fn colorplot_spec(&self) -> Result<ColorplotSpec> {
        let a = &self.analysis;
        if !(a.colorplot_min < a.colorplot_max) {
            return Err(Error::Validation(
                "analysis.colorplot_min must be below analysis.colorplot_max".into(),
            ));
        }
        Ok(ColorplotSpec {
            region: Region::square(a.colorplot_min, a.colorplot_max),
            bin_size: a.bin_size,
            sample_dt: a.colorplot_dt,
        })
    }

    /// `# config:` block reproducing this configuration.
    pub fn provenance_header(&self) -> String {
        let mut s = String::from(PROVENANCE_BEGIN);
        s.push('\n');
        for line in self.serialize().lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s.push_str(PROVENANCE_END);
        s.push('\n');
        s
    }
}

/// Parses a configuration and validates it.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_with_overrides(text, &[])
}

/// Parses `text`, applies `key=value` overrides on top, then validates.
/// If `text` carries a provenance block (an output file), that block is used.
pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let body = extract_provenance(text).unwrap_or_else(|| text.to_string());
    let mut cfg = RunConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (n, raw) in body.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |key: &str, message: String| Error::Parse {
            line: n + 1,
            key: key.to_string(),
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err("", "expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(parse_err(key, "duplicate key".into()));
        }
        cfg.set(key, value).map_err(|m| parse_err(key, m))?;
    }
    for (key, value) in overrides {
        cfg.set(key.trim(), value.trim())
            .map_err(|message| Error::Parse {
                line: 0,
                key: key.clone(),
                message,
            })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Splits `key=value` as given on the command line.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Parse {
            line: 0,
            key: s.to_string(),
            message: "expected key=value".into(),
        })
}

/// Body of the `# config:` block with the comment markers stripped.
pub fn extract_provenance(text: &str) -> Option<String> {
    let mut lines = text
        .lines()
        .skip_while(|l| l.trim_end() != PROVENANCE_BEGIN);
    lines.next()?;
    let mut out = String::new();
    for l in lines {
        if l.trim_end() == PROVENANCE_END {
            return Some(out);
        }
        out.push_str(l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')));
        out.push('\n');
    }
    None
}
