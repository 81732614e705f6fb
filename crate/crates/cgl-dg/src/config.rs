//! Plain-text configuration files.
//!
//! Both run configs and sweep specs use the same `key = value` syntax:
//! one assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys match the [`RunConfig`] field names (`method` is accepted as a
//! synonym for `variant`, `T` for `t_final`). Sweep specs allow
//! comma-separated value lists for `method`, `a`, `b`, `sigma`, and `n`.

use crate::assembly::IPVariant;
use crate::evolve::RunConfig;
use crate::linalg::SolveMethod;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("key `{key}`: value list is empty")]
    EmptyList { key: String },
    #[error("config invalid: field `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// One parsed `key = value` assignment with its 1-based line number.
fn assignments(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.split_once('#') {
            Some((head, _)) => head,
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| ConfigError::Malformed { line, text: stripped.to_string() })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Malformed { line, text: stripped.to_string() });
        }
        out.push((line, key, value));
    }
    Ok(out)
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        reason: format!("`{value}` is not a number ({e})"),
    })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        reason: format!("`{value}` is not a non-negative integer ({e})"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            line,
            key: key.to_string(),
            reason: format!("`{value}` is not a boolean"),
        }),
    }
}

fn parse_variant(line: usize, key: &str, value: &str) -> Result<IPVariant, ConfigError> {
    IPVariant::parse(value).ok_or_else(|| ConfigError::BadValue {
        line,
        key: key.to_string(),
        reason: format!("`{value}` is not one of sipg, nipg, iipg"),
    })
}

fn parse_solver(line: usize, key: &str, value: &str) -> Result<SolveMethod, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "direct" => Ok(SolveMethod::Direct),
        "iterative" | "bicgstab" => Ok(SolveMethod::default_iterative()),
        _ => Err(ConfigError::BadValue {
            line,
            key: key.to_string(),
            reason: format!("`{value}` is not one of direct, iterative"),
        }),
    }
}

/// Parses a run config, starting from defaults and applying each assignment.
pub fn parse_run_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    for (line, key, value) in assignments(text)? {
        match key.as_str() {
            "a" => config.a = parse_f64(line, &key, &value)?,
            "b" => config.b = parse_f64(line, &key, &value)?,
            "sigma" => config.sigma = parse_f64(line, &key, &value)?,
            "variant" | "method" => config.variant = parse_variant(line, &key, &value)?,
            "n" => config.n = parse_usize(line, &key, &value)?,
            "dt_factor" => config.dt_factor = parse_f64(line, &key, &value)?,
            "t_final" | "T" => config.t_final = parse_f64(line, &key, &value)?,
            "picard_tol" => config.picard_tol = parse_f64(line, &key, &value)?,
            "picard_max" => config.picard_max = parse_usize(line, &key, &value)?,
            "degree" => config.degree = parse_usize(line, &key, &value)?,
            "solver" => config.solver = parse_solver(line, &key, &value)?,
            "forcing" => config.forcing = parse_bool(line, &key, &value)?,
            _ => return Err(ConfigError::UnknownKey { line, key }),
        }
    }
    config
        .validate()
        .map_err(|e| ConfigError::Invalid { key: e.key, reason: e.reason })?;
    Ok(config)
}

/// Grid of runs: every combination of the listed values, sharing the scalar
/// time-stepping knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub methods: Vec<IPVariant>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma: Vec<f64>,
    pub n: Vec<usize>,
    pub dt_factor: f64,
    pub t_final: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let base = RunConfig::default();
        SweepSpec {
            methods: vec![base.variant],
            a: vec![base.a],
            b: vec![base.b],
            sigma: vec![base.sigma],
            n: vec![base.n],
            dt_factor: base.dt_factor,
            t_final: base.t_final,
        }
    }
}

impl SweepSpec {
    /// Expands the grid in deterministic spec order: method-major, then a,
    /// b, sigma, and n innermost.
    pub fn cells(&self) -> Vec<RunConfig> {
        let mut cells = Vec::new();
        for &variant in &self.methods {
            for &a in &self.a {
                for &b in &self.b {
                    for &sigma in &self.sigma {
                        for &n in &self.n {
                            let mut config = RunConfig::new(variant, a, b, sigma, n);
                            config.dt_factor = self.dt_factor;
                            config.t_final = self.t_final;
                            cells.push(config);
                        }
                    }
                }
            }
        }
        cells
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (key, empty) in [
            ("method", self.methods.is_empty()),
            ("a", self.a.is_empty()),
            ("b", self.b.is_empty()),
            ("sigma", self.sigma.is_empty()),
            ("n", self.n.is_empty()),
        ] {
            if empty {
                return Err(ConfigError::EmptyList { key: key.to_string() });
            }
        }
        for cell in self.cells() {
            cell.validate()
                .map_err(|e| ConfigError::Invalid { key: e.key, reason: e.reason })?;
        }
        Ok(())
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses a sweep spec; list-valued keys accept comma-separated values.
pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec, ConfigError> {
    let mut spec = SweepSpec::default();
    for (line, key, value) in assignments(text)? {
        match key.as_str() {
            "variant" | "method" => {
                spec.methods = split_list(&value)
                    .map(|v| parse_variant(line, &key, v))
                    .collect::<Result<_, _>>()?;
            }
            "a" => {
                spec.a = split_list(&value)
                    .map(|v| parse_f64(line, &key, v))
                    .collect::<Result<_, _>>()?;
            }
            "b" => {
                spec.b = split_list(&value)
                    .map(|v| parse_f64(line, &key, v))
                    .collect::<Result<_, _>>()?;
            }
            "sigma" => {
                spec.sigma = split_list(&value)
                    .map(|v| parse_f64(line, &key, v))
                    .collect::<Result<_, _>>()?;
            }
            "n" => {
                spec.n = split_list(&value)
                    .map(|v| parse_usize(line, &key, v))
                    .collect::<Result<_, _>>()?;
            }
            "dt_factor" => spec.dt_factor = parse_f64(line, &key, &value)?,
            "t_final" | "T" => spec.t_final = parse_f64(line, &key, &value)?,
            _ => return Err(ConfigError::UnknownKey { line, key }),
        }
    }
    spec.validate()?;
    Ok(spec)
}
