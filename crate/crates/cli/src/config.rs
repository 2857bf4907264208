//! Flat `key = value` run configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use tankstab::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    /// The tank operator with reflective walls.
    Source,
    /// The damped target operator.
    Target,
}

/// Everything a run depends on. Field order is the echo order in summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub length: f64,
    pub gamma: f64,
    pub mu: f64,
    pub nu: f64,
    pub n_modes: usize,
    pub grid_points: usize,
    pub ode_tol: f64,
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub format: Format,
    pub out_dir: String,
    /// spectrum: also write eigenfunction samples.
    pub eigenfunctions: bool,
    /// controllability: which operator's moments to tabulate.
    pub system: System,
    /// lyapunov: decay rate λ; μ/2 when unset.
    pub lambda: Option<f64>,
    /// lyapunov: points of the γₛ(λ) table on (0, μ).
    pub lambda_steps: usize,
    /// steer: target is amplitude·(f_m + f_{−m}).
    pub target_mode: i64,
    pub target_amplitude: f64,
    /// simulate: gain table written by `feedback`; computed inline when unset.
    pub feedback_table: Option<String>,
    /// finite-demo: dimension and closed-loop poles (−1, …, −n when unset).
    pub fd_dim: usize,
    pub fd_poles: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = Params::default();
        RunConfig {
            length: p.length,
            gamma: p.gamma,
            mu: p.mu,
            nu: p.nu,
            n_modes: p.n_modes,
            grid_points: p.grid_points,
            ode_tol: p.ode_tol,
            t_final: p.t_final,
            dt: p.dt,
            seed: 1,
            format: Format::Csv,
            out_dir: "out".into(),
            eigenfunctions: false,
            system: System::Source,
            lambda: None,
            lambda_steps: 20,
            target_mode: 1,
            target_amplitude: 1.0,
            feedback_table: None,
            fd_dim: 4,
            fd_poles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("key `{key}`: cannot parse `{value}`")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "length" => self.length = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "n_modes" => self.n_modes = parse(key, value)?,
            "grid_points" => self.grid_points = parse(key, value)?,
            "ode_tol" => self.ode_tol = parse(key, value)?,
            "t_final" => self.t_final = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "format" => {
                self.format = match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(ConfigError(format!("key `format`: expected csv or json, got `{value}`"))),
                }
            }
            "out_dir" => self.out_dir = value.to_string(),
            "eigenfunctions" => self.eigenfunctions = parse(key, value)?,
            "system" => {
                self.system = match value {
                    "source" => System::Source,
                    "target" => System::Target,
                    _ => return Err(ConfigError(format!("key `system`: expected source or target, got `{value}`"))),
                }
            }
            "lambda" => self.lambda = optional(key, value)?,
            "lambda_steps" => self.lambda_steps = parse(key, value)?,
            "target_mode" => self.target_mode = parse(key, value)?,
            "target_amplitude" => self.target_amplitude = parse(key, value)?,
            "feedback_table" => self.feedback_table = (!value.is_empty()).then(|| value.to_string()),
            "fd_dim" => self.fd_dim = parse(key, value)?,
            "fd_poles" => {
                self.fd_poles = if value.is_empty() {
                    None
                } else {
                    Some(value.split(',').map(|v| parse(key, v.trim())).collect::<Result<_, _>>()?)
                }
            }
            _ => return Err(ConfigError(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses file contents: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            let k = k.trim();
            if seen.contains(&k) {
                return Err(ConfigError(format!("{origin}:{}: duplicate key `{k}`", i + 1)));
            }
            seen.push(k);
            self.set(k, v.trim())
                .map_err(|e| ConfigError(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut c = RunConfig::default();
        c.apply_text(&text, &path.display().to_string())?;
        Ok(c)
    }

    /// Applies a `key=value` command-line override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override `{kv}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn params(&self) -> Params {
        Params {
            length: self.length,
            gamma: self.gamma,
            mu: self.mu,
            nu: self.nu,
            n_modes: self.n_modes,
            grid_points: self.grid_points,
            ode_tol: self.ode_tol,
            t_final: self.t_final,
            dt: self.dt,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let mut c = RunConfig::default();
        c.apply_text("# header\n\ngamma = 0.03  # trailing\nformat=json\nfd_poles = -1, -2.5\n", "t")
            .unwrap();
        assert_eq!(c.gamma, 0.03);
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.fd_poles, Some(vec![-1.0, -2.5]));
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let mut c = RunConfig::default();
        let e = c.apply_text("gama = 1\n", "t").unwrap_err();
        assert!(e.0.contains("`gama`"), "{e}");
        assert!(c.apply_text("mu = 1\nmu = 2\n", "t").is_err());
        assert!(c.apply_text("mu 1\n", "t").is_err());
        assert!(c.apply_text("n_modes = -3\n", "t").is_err());
        assert!(c.apply_override("lambda=none").is_ok() && c.lambda.is_none());
    }
}
