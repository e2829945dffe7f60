//! Run configuration: one JSON document, defaults for every key, `--set` overrides.

use std::path::{Path, PathBuf};

use darkpot::optimizer::MeritKind;
use darkpot::{NoiseModel, OptimizationProblem, QuarticPotential, SystemParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub a: i8,
    pub b: i8,
    pub d0_over_d: f64,
}

impl Default for Candidate {
    fn default() -> Self {
        Self { a: -1, b: 1, d0_over_d: 0.06 }
    }
}

impl Candidate {
    pub fn potential(&self, params: &SystemParams) -> darkpot::Result<QuarticPotential> {
        QuarticPotential::new(self.a, self.b, self.d0_over_d * params.d_bar, params.d_bar, params.omega_ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub merit_kind: MeritKind,
    pub d0_range: [f64; 2],
    pub seeds: usize,
    pub local_tol: f64,
    pub max_iters: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let p = OptimizationProblem::new(MeritKind::CoherenceLength, NoiseModel::default(), SystemParams::wide());
        Self {
            merit_kind: p.merit_kind,
            d0_range: p.d0_range,
            seeds: p.seeds,
            local_tol: p.local_tol,
            max_iters: p.max_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    S1,
    S2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { axis: SweepAxis::S1, values: vec![1e-11, 1e-10, 1e-9, 1e-8, 1e-7] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QsimSection {
    pub n_points: usize,
    pub dt_bar: f64,
    /// Box margin beyond the orbit when no explicit bounds are given.
    pub margin: f64,
    pub x_min_bar: Option<f64>,
    pub x_max_bar: Option<f64>,
    /// Negativity samples per classical period.
    pub samples: usize,
    pub snapshots: bool,
}

impl Default for QsimSection {
    fn default() -> Self {
        Self {
            n_points: 2048,
            dt_bar: 0.1,
            margin: 12.0,
            x_min_bar: None,
            x_max_bar: None,
            samples: 100,
            snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    /// Replaces every per-check tolerance when set.
    pub tolerance: Option<f64>,
    /// Multiplies the dephasing rate fed to the solvers; 1 leaves them untouched.
    pub dephasing_scale: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { tolerance: None, dephasing_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: SystemParams,
    pub noise: NoiseModel,
    pub candidate: Candidate,
    pub optimize: OptimizeSection,
    pub sweep: SweepSection,
    pub qsim: QsimSection,
    pub oracle: OracleSection,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::wide(),
            noise: NoiseModel::default(),
            candidate: Candidate::default(),
            optimize: OptimizeSection::default(),
            sweep: SweepSection::default(),
            qsim: QsimSection::default(),
            oracle: OracleSection::default(),
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            rng_seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn problem(&self) -> OptimizationProblem {
        OptimizationProblem {
            merit_kind: self.optimize.merit_kind,
            noise: self.noise,
            params: self.params,
            d0_range: self.optimize.d0_range,
            seeds: self.optimize.seeds,
            local_tol: self.optimize.local_tol,
            max_iters: self.optimize.max_iters,
            rng_seed: self.rng_seed,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        self.noise.validate()?;
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(CliError::config("rel_tol and abs_tol must be positive"));
        }
        Ok(())
    }
}

/// Parses `path.to.key=value`. The value is read as JSON when possible, else as a string.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, Value), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{spec}` is not of the form key=value")))?;
    let keys: Vec<String> = path.split('.').map(str::to_owned).collect();
    if keys.iter().any(String::is_empty) {
        return Err(CliError::config(format!("override `{spec}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    Ok((keys, value))
}

pub fn apply_override(doc: &mut Value, keys: &[String], value: Value) -> Result<(), CliError> {
    let mut node = doc;
    for (depth, key) in keys.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::config(format!("`{}` is not an object", keys[..depth].join("."))))?;
        if depth + 1 == keys.len() {
            obj.insert(key.clone(), value);
            return Ok(());
        }
        node = obj.entry(key.clone()).or_insert(Value::Null);
    }
    Ok(())
}

/// Recursively overlays `top` onto `base`; non-object values replace.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults, overlaid by the document at `path`, overlaid by `overrides`.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut doc = serde_json::to_value(RunConfig::default())?;
    if let Some(p) = path {
        let text =
            std::fs::read_to_string(p).map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
        let file: Value =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
        if !file.is_object() {
            return Err(CliError::config(format!("{}: top level must be an object", p.display())));
        }
        merge(&mut doc, file);
    }
    for spec in overrides {
        let (keys, value) = parse_override(spec)?;
        apply_override(&mut doc, &keys, value)?;
    }
    let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
