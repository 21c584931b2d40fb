//! Run configuration: a TOML file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tsm_core::sweep::SweepAxis;
use tsm_core::verify::VerifySpec;
use tsm_core::{MarketParams, PopulationSpec, Scenario, TwoSidedMode};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
}

/// Contents of a `--config` file. Every key is optional; unknown keys are errors.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub mode: Option<TwoSidedMode>,
    /// Only `csv` exists; deserializing is the whole check.
    #[allow(dead_code)]
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub scenarios: Option<Vec<Scenario>>,
    pub params: Option<ParamsConfig>,
    pub population: Option<PopulationSpec>,
    pub sweep: Option<SweepConfig>,
    pub verify: Option<VerifyConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub psi: Option<f64>,
    pub phi: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub f_c: Option<f64>,
    pub f_s: Option<f64>,
    pub p_s: Option<f64>,
}

impl ParamsConfig {
    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: ParamsConfig) -> ParamsConfig {
        ParamsConfig {
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            gamma: over.gamma.or(self.gamma),
            psi: over.psi.or(self.psi),
            phi: over.phi.or(self.phi),
            k1: over.k1.or(self.k1),
            k2: over.k2.or(self.k2),
            f_c: over.f_c.or(self.f_c),
            f_s: over.f_s.or(self.f_s),
            p_s: over.p_s.or(self.p_s),
        }
    }

    /// `psi`, `k2`, `f_s` and `p_s` fall back to the population defaults; the
    /// rest must be given.
    pub fn resolve(&self) -> Result<MarketParams, CliError> {
        let defaults = PopulationSpec::default();
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::invalid(format!("missing parameter `{name}`")))
        };
        let params = MarketParams {
            alpha: need(self.alpha, "alpha")?,
            beta: need(self.beta, "beta")?,
            gamma: need(self.gamma, "gamma")?,
            psi: self.psi.unwrap_or(tsm_core::params::DEFAULT_PSI),
            phi: need(self.phi, "phi")?,
            k1: need(self.k1, "k1")?,
            k2: self.k2.unwrap_or(defaults.k2),
            f_c: need(self.f_c, "f_c")?,
            f_s: self.f_s.unwrap_or(defaults.f_s),
            p_s: self.p_s.unwrap_or(defaults.p_s),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Option<SweepAxis>,
    pub grid: Option<Vec<f64>>,
    pub phi_levels: Option<Vec<f64>>,
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub draws: Option<usize>,
    pub max_attempts: Option<u64>,
    pub fixed_point_pairs: Option<usize>,
    pub grid_n: Option<usize>,
    pub skip_oracle: Option<bool>,
}

impl VerifyConfig {
    pub fn apply(&self, spec: &mut VerifySpec) {
        if let Some(v) = self.draws {
            spec.draws = v;
        }
        if let Some(v) = self.max_attempts {
            spec.max_attempts = v;
        }
        if let Some(v) = self.fixed_point_pairs {
            spec.fixed_point_pairs = v;
        }
        if let Some(v) = self.grid_n {
            spec.grid_n = v;
        }
        if let Some(v) = self.skip_oracle {
            spec.skip_oracle = v;
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))
}

pub fn parse(text: &str) -> Result<RunConfig, toml::de::Error> {
    toml::from_str(text)
}
