use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use smallball::laplace::{default_p_grid, ProblemSpec, Process};
use smallball::montecarlo::{Integrator, DEFAULT_MODES, DEFAULT_PATHS, DEFAULT_TIME_STEPS};

use crate::presets::Preset;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "default_modes")]
    pub n_modes: u64,
    #[serde(default = "default_steps")]
    pub n_time_steps: u64,
    #[serde(default = "default_paths")]
    pub n_paths: u64,
    #[serde(default)]
    pub integrator: IntegratorChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorChoice {
    #[default]
    Trapezoid,
    LeftPoint,
}

impl From<IntegratorChoice> for Integrator {
    fn from(c: IntegratorChoice) -> Self {
        match c {
            IntegratorChoice::Trapezoid => Integrator::Trapezoid,
            IntegratorChoice::LeftPoint => Integrator::LeftPoint,
        }
    }
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_modes: DEFAULT_MODES,
            n_time_steps: DEFAULT_TIME_STEPS,
            n_paths: DEFAULT_PATHS,
            integrator: IntegratorChoice::Trapezoid,
        }
    }
}

fn default_modes() -> u64 {
    DEFAULT_MODES
}

fn default_steps() -> u64 {
    DEFAULT_TIME_STEPS
}

fn default_paths() -> u64 {
    DEFAULT_PATHS
}

/// Operator data for the rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub d: u32,
    pub m: f64,
    pub r: f64,
    pub gammas: Vec<f64>,
}

/// One JSON run description. Every block is optional; a preset fills the
/// problem, grid and table blocks the document leaves out.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub problems: Vec<ProblemSpec>,
    /// Norm indices swept over every field problem; empty keeps each
    /// problem's own index.
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub p_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloConfig>,
    #[serde(default)]
    pub table: Option<TableConfig>,
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    #[serde(default)]
    pub tolerance_scale: Option<f64>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_SEED: u64 = 20240601;

impl RunConfig {
    pub fn empty() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = match serde_path_to_error::deserialize(de) {
            Ok(c) => c,
            Err(e) => {
                let path = e.path().to_string();
                let inner = e.into_inner();
                bail!("field `{path}`: {inner}");
            }
        };
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "field `schema_version`: unsupported version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            );
        }
        for (i, spec) in self.problems.iter().enumerate() {
            spec.validate_parameters()
                .map_err(|e| anyhow::anyhow!("field `problems[{i}]`: {e}"))?;
        }
        if let Some(grid) = &self.p_grid {
            if let Some(p) = grid.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
                bail!("field `p_grid`: entries must be finite and non-negative, got {p}");
            }
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            bail!("field `eps`: entries must be positive, got {e}");
        }
        if let Some(g) = self.gammas.iter().find(|g| !g.is_finite()) {
            bail!("field `gammas`: entries must be finite, got {g}");
        }
        if let Some(t) = self.rel_tol {
            if !(t > 0.0 && t < 1.0) {
                bail!("field `rel_tol`: must lie in (0, 1), got {t}");
            }
        }
        if let Some(s) = self.tolerance_scale {
            if !(s > 0.0 && s.is_finite()) {
                bail!("field `tolerance_scale`: must be positive, got {s}");
            }
        }
        if let Some(mc) = &self.monte_carlo {
            if mc.n_modes == 0 || mc.n_time_steps == 0 || mc.n_paths < 2 {
                bail!("field `monte_carlo`: need n_modes ≥ 1, n_time_steps ≥ 1, n_paths ≥ 2");
            }
        }
        Ok(())
    }

    /// Fill the blocks the document leaves out from its preset.
    pub fn resolved(mut self) -> Self {
        if let Some(preset) = self.preset {
            if self.problems.is_empty() {
                self.problems = preset.problems();
                if self.gammas.is_empty() {
                    self.gammas = preset.gammas();
                }
            }
            if self.table.is_none() {
                self.table = preset.table();
            }
        }
        self
    }

    /// Every problem paired with each swept index.
    pub fn expanded_problems(&self) -> Vec<ProblemSpec> {
        let mut out = Vec::new();
        for spec in &self.problems {
            let is_field = !matches!(spec.process, Process::FiniteDimOu { .. });
            if !is_field || self.gammas.is_empty() {
                out.push(spec.clone());
                continue;
            }
            for &gamma in &self.gammas {
                let mut s = spec.clone();
                match &mut s.process {
                    Process::Noise { field } | Process::Solution { field, .. } => field.gamma = gamma,
                    Process::FiniteDimOu { .. } => unreachable!(),
                }
                out.push(s);
            }
        }
        out
    }

    pub fn p_grid(&self) -> Vec<f64> {
        self.p_grid.clone().unwrap_or_else(default_p_grid)
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol.unwrap_or(DEFAULT_REL_TOL)
    }

    pub fn tolerance_scale(&self) -> f64 {
        self.tolerance_scale.unwrap_or(1.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Json)
    }

    pub fn monte_carlo(&self) -> MonteCarloConfig {
        self.monte_carlo.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_errors_name_the_path() {
        let text = r#"{"schema_version": 1, "problems": [{"process": {"kind": "noise", "spectrum": {"kind": "dirichlet_interval", "length": "pi"}, "gamma": 1.0}, "horizon": 1.0}]}"#;
        let msg = format!("{:#}", RunConfig::parse(text).unwrap_err());
        assert!(msg.contains("problems[0]"), "{msg}");
        let msg = format!(
            "{:#}",
            RunConfig::parse(r#"{"schema_version": 1, "bogus": 3}"#).unwrap_err()
        );
        assert!(msg.contains("bogus"), "{msg}");
        let msg = format!("{:#}", RunConfig::parse(r#"{"schema_version": 7}"#).unwrap_err());
        assert!(msg.contains("schema_version"), "{msg}");
    }

    #[test]
    fn invalid_problem_is_rejected() {
        let text = r#"{"schema_version": 1, "problems": [{"process": {"kind": "solution", "spectrum": {"kind": "harmonic_oscillator"}, "gamma": 1.0, "r": -1.0}, "horizon": 1.0}]}"#;
        let msg = format!("{:#}", RunConfig::parse(text).unwrap_err());
        assert!(
            msg.contains("problems[0]") && msg.contains("r must be positive"),
            "{msg}"
        );
    }

    #[test]
    fn preset_fills_missing_blocks() {
        let c = RunConfig::parse(r#"{"schema_version": 1, "preset": "harmonic-oscillator"}"#)
            .unwrap()
            .resolved();
        assert_eq!(c.expanded_problems().len(), 3);
        assert_eq!(c.table.unwrap().d, 2);
    }
}
