//! Scenario configuration files.
//!
//! A config is a TOML document:
//!
//! ```toml
//! scenario = "spontaneous_emission"
//! seed = 7                 # optional
//!
//! [model]                  # physical parameters of the scenario
//! gamma = 1.0
//!
//! [numerics]               # step sizes, step counts, truncations, tolerances
//! dt_collision = 1e-3
//!
//! [outputs]
//! stride = 100             # keep every stride-th sample
//! columns = ["t", "p"]     # optional column subset
//! ```
//!
//! Validation collects every violation, each prefixed by its field path.

use std::collections::BTreeMap;
use std::fmt;

use crate::scenarios::{self, ScenarioDef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Simulate,
    Trajectories,
    Thermo,
    NonMarkov,
}

impl Family {
    /// Subcommand that runs scenarios of this family.
    pub fn command(self) -> &'static str {
        match self {
            Family::Simulate => "simulate",
            Family::Trajectories => "trajectories",
            Family::Thermo => "thermo",
            Family::NonMarkov => "nonmarkov",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.command())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    Positive,
    NonNegative,
    Finite,
    Probability,
    /// Integer no smaller than the bound.
    AtLeast(i64),
}

impl Range {
    fn is_integer(self) -> bool {
        matches!(self, Range::AtLeast(_))
    }

    fn check(self, x: f64) -> Option<String> {
        if !x.is_finite() {
            return Some("must be finite".into());
        }
        match self {
            Range::Positive if x <= 0.0 => Some("must be > 0".into()),
            Range::NonNegative if x < 0.0 => Some("must be >= 0".into()),
            Range::Probability if !(0.0..=1.0).contains(&x) => Some("must be in [0, 1]".into()),
            Range::AtLeast(lo) if x < lo as f64 => Some(format!("must be an integer >= {lo}")),
            _ => None,
        }
    }
}

/// A named parameter with its admissible range and optional default.
#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub range: Range,
    pub default: Option<f64>,
    pub doc: &'static str,
}

impl Param {
    pub const fn new(key: &'static str, range: Range, default: Option<f64>, doc: &'static str) -> Self {
        Self { key, range, default, doc }
    }
}

/// Every key accepted in `[numerics]`; scenarios pick a subset and set defaults.
pub static NUMERICS: &[Param] = &[
    Param::new("dt_collision", Range::Positive, None, "collision duration Δt"),
    Param::new("steps", Range::AtLeast(1), None, "number of collisions"),
    Param::new("dt", Range::Positive, None, "master-equation integration step"),
    Param::new("t_max", Range::Positive, None, "final time"),
    Param::new("n_traj", Range::AtLeast(2), None, "number of trajectories"),
    Param::new("truncation", Range::AtLeast(2), None, "oscillator truncation (levels)"),
    Param::new("truncation1", Range::AtLeast(2), None, "truncation of bath 1 (levels); derived from β₁ if absent"),
    Param::new("truncation2", Range::AtLeast(2), None, "truncation of bath 2 (levels); derived from β₂ if absent"),
    Param::new("samples", Range::AtLeast(1), None, "number of sampled rows"),
    Param::new("tolerance", Range::Positive, None, "tolerance of the scenario check"),
];

fn numeric_param(key: &str) -> Option<&'static Param> {
    NUMERICS.iter().find(|p| p.key == key)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, column: usize, message: String },
    Invalid(Vec<Violation>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Invalid(vs) => {
                let lines: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                f.write_str(&lines.join("\n"))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// A validated scenario configuration with defaults filled in.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub def: &'static ScenarioDef,
    pub model: BTreeMap<&'static str, f64>,
    pub numerics: BTreeMap<&'static str, f64>,
    pub stride: usize,
    pub columns: Option<Vec<String>>,
    /// Number of individual trajectories written (trajectory scenarios).
    pub trajectories: Option<usize>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn model(&self, key: &str) -> f64 {
        *self.model.get(key).unwrap_or_else(|| panic!("model.{key} not declared by {}", self.def.name))
    }

    pub fn numeric(&self, key: &str) -> f64 {
        self.numeric_opt(key).unwrap_or_else(|| panic!("numerics.{key} not set for {}", self.def.name))
    }

    pub fn numeric_opt(&self, key: &str) -> Option<f64> {
        self.numerics.get(key).copied()
    }

    pub fn count(&self, key: &str) -> usize {
        self.numeric(key) as usize
    }

    /// The resolved config (defaults included, seed excluded) as TOML text.
    pub fn canonical(&self) -> String {
        let mut root = toml::Table::new();
        root.insert("scenario".into(), self.def.name.into());
        let floats = |m: &BTreeMap<&'static str, f64>| {
            m.iter().map(|(k, v)| (k.to_string(), toml::Value::Float(*v))).collect::<toml::Table>()
        };
        root.insert("model".into(), floats(&self.model).into());
        root.insert("numerics".into(), floats(&self.numerics).into());
        let mut outputs = toml::Table::new();
        outputs.insert("stride".into(), (self.stride as i64).into());
        if let Some(cols) = &self.columns {
            outputs.insert("columns".into(), cols.clone().into());
        }
        if let Some(n) = self.trajectories {
            outputs.insert("trajectories".into(), (n as i64).into());
        }
        root.insert("outputs".into(), outputs.into());
        toml::to_string(&root).expect("plain tables serialize")
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

fn number(value: &toml::Value) -> Option<f64> {
    match value {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn check_value(path: &str, value: &toml::Value, range: Range, out: &mut Vec<Violation>) -> Option<f64> {
    if range.is_integer() {
        let Some(i) = value.as_integer() else {
            out.push(Violation::new(path, "must be an integer"));
            return None;
        };
        let x = i as f64;
        if let Some(msg) = range.check(x) {
            out.push(Violation::new(path, msg));
            return None;
        }
        return Some(x);
    }
    let Some(x) = number(value) else {
        out.push(Violation::new(path, "must be a number"));
        return None;
    };
    if let Some(msg) = range.check(x) {
        out.push(Violation::new(path, msg));
        return None;
    }
    Some(x)
}

fn section<'a>(root: &'a toml::Table, key: &str, out: &mut Vec<Violation>) -> Option<&'a toml::Table> {
    match root.get(key) {
        None => None,
        Some(toml::Value::Table(t)) => Some(t),
        Some(_) => {
            out.push(Violation::new(key, "must be a table"));
            None
        }
    }
}

fn table_has(root: &toml::Table, section: &str, key: &str) -> bool {
    root.get(section).and_then(|s| s.as_table()).is_some_and(|t| t.contains_key(key))
}

fn available() -> String {
    scenarios::SCENARIOS.iter().map(|s| s.name).collect::<Vec<_>>().join(", ")
}

/// Parses and validates a config, reporting every violation found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let root: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    let mut out = Vec::new();

    for key in root.keys() {
        if !["scenario", "seed", "model", "numerics", "outputs"].contains(&key.as_str()) {
            out.push(Violation::new(key.as_str(), "unknown key"));
        }
    }
    let def = match root.get("scenario") {
        None => {
            out.push(Violation::new("scenario", format!("missing; available scenarios: {}", available())));
            None
        }
        Some(toml::Value::String(name)) => {
            let def = scenarios::find(name);
            if def.is_none() {
                out.push(Violation::new(
                    "scenario",
                    format!("unknown scenario '{name}'; available scenarios: {}", available()),
                ));
            }
            def
        }
        Some(_) => {
            out.push(Violation::new("scenario", "must be a string"));
            None
        }
    };
    let seed = match root.get("seed") {
        None => None,
        Some(toml::Value::Integer(s)) if *s >= 0 => Some(*s as u64),
        Some(_) => {
            out.push(Violation::new("seed", "must be an integer >= 0"));
            None
        }
    };

    let mut numerics = BTreeMap::new();
    if let Some(table) = section(&root, "numerics", &mut out) {
        for (key, value) in table {
            let path = format!("numerics.{key}");
            let Some(param) = numeric_param(key) else {
                out.push(Violation::new(path, "unknown parameter"));
                continue;
            };
            if let Some(def) = def {
                if !def.numerics.iter().any(|(k, _)| k == key) {
                    out.push(Violation::new(path, format!("not used by scenario '{}'", def.name)));
                    continue;
                }
            }
            if let Some(x) = check_value(&path, value, param.range, &mut out) {
                numerics.insert(param.key, x);
            }
        }
    }

    let mut model = BTreeMap::new();
    let model_table = section(&root, "model", &mut out);
    if let Some(def) = def {
        let empty = toml::Table::new();
        let table = model_table.unwrap_or(&empty);
        for (key, value) in table {
            let path = format!("model.{key}");
            match def.model.iter().find(|p| p.key == key) {
                None => {
                    let expected: Vec<&str> = def.model.iter().map(|p| p.key).collect();
                    out.push(Violation::new(
                        path,
                        format!("unknown parameter for scenario '{}' (expected one of: {})", def.name, expected.join(", ")),
                    ));
                }
                Some(p) => {
                    if let Some(x) = check_value(&path, value, p.range, &mut out) {
                        model.insert(p.key, x);
                    }
                }
            }
        }
        for p in def.model {
            if !table.contains_key(p.key) {
                match p.default {
                    Some(x) => {
                        model.insert(p.key, x);
                    }
                    None => out.push(Violation::new(format!("model.{}", p.key), "missing")),
                }
            }
        }
        // numerics without a default are derived by the scenario when absent
        for (key, default) in def.numerics {
            if let (Some(x), false) = (default, table_has(&root, "numerics", key)) {
                numerics.insert(key, *x);
            }
        }
    }

    let mut stride = def.map_or(1, |d| d.default_stride);
    let mut columns = None;
    let mut trajectories = def.and_then(|d| d.default_trajectories);
    if let Some(table) = section(&root, "outputs", &mut out) {
        for (key, value) in table {
            let path = format!("outputs.{key}");
            match key.as_str() {
                "stride" => {
                    if let Some(x) = check_value(&path, value, Range::AtLeast(1), &mut out) {
                        stride = x as usize;
                    }
                }
                "trajectories" => {
                    if def.is_some_and(|d| d.default_trajectories.is_none()) {
                        out.push(Violation::new(path, "only used by trajectory scenarios"));
                    } else if let Some(x) = check_value(&path, value, Range::AtLeast(0), &mut out) {
                        trajectories = Some(x as usize);
                    }
                }
                "columns" => match value.as_array() {
                    Some(items) => {
                        let mut names = Vec::new();
                        for (i, item) in items.iter().enumerate() {
                            match item.as_str() {
                                Some(name) => {
                                    if let Some(d) = def.filter(|d| !d.has_column(name)) {
                                        out.push(Violation::new(
                                            format!("{path}[{i}]"),
                                            format!("unknown column '{name}' (available: {})", d.all_columns().join(", ")),
                                        ));
                                    }
                                    names.push(name.to_string());
                                }
                                None => out.push(Violation::new(format!("{path}[{i}]"), "must be a string")),
                            }
                        }
                        if names.is_empty() {
                            out.push(Violation::new(path, "must list at least one column"));
                        }
                        columns = Some(names);
                    }
                    None => out.push(Violation::new(path, "must be an array of column names")),
                },
                _ => out.push(Violation::new(path, "unknown key")),
            }
        }
    }

    let Some(def) = def else {
        return Err(ConfigError::Invalid(out));
    };
    if !out.is_empty() {
        return Err(ConfigError::Invalid(out));
    }
    let config = ScenarioConfig { def, model, numerics, stride, columns, trajectories, seed };
    let cross = (def.validate)(&config);
    if cross.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(cross))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_and_column_are_one_based() {
        assert_eq!(line_column("a\nbc\n", 3), (2, 2));
        assert_eq!(line_column("abc", 0), (1, 1));
    }

    #[test]
    fn ranges() {
        assert!(Range::Positive.check(0.0).is_some());
        assert!(Range::Positive.check(f64::INFINITY).is_some());
        assert!(Range::Probability.check(1.0).is_none());
        assert!(Range::AtLeast(2).check(1.0).is_some());
        assert!(Range::Finite.check(-3.0).is_none());
    }
}
