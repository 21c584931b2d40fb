//! Sensitivity sweeps over one model parameter.
//!
//! A sweep samples one population, then for every cell (axis value, phi level,
//! scenario) overrides the swept parameter on each provider, runs the scenario
//! and averages over feasible records. Cells are independent and evaluated in
//! parallel; each cell's aggregate is a sequential sum in provider order, so
//! results do not depend on the worker count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::params::MAX_EXTERNALITY_PRODUCT;
use crate::population::{sample_population, PopulationSpec, Provider};
use crate::scenarios::{run_scenario, Scenario, ScenarioRecord, TwoSidedMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    AlphaBetaProduct,
    Phi,
    Gamma,
    K1,
}

impl SweepAxis {
    pub fn tag(self) -> &'static str {
        match self {
            SweepAxis::AlphaBetaProduct => "alpha_beta_product",
            SweepAxis::Phi => "phi",
            SweepAxis::Gamma => "gamma",
            SweepAxis::K1 => "k1",
        }
    }

    /// Admissible closed range of axis values.
    pub fn range(self) -> (f64, f64) {
        match self {
            SweepAxis::AlphaBetaProduct => (0.1, 0.7),
            SweepAxis::Phi => (0.0, 5.0),
            SweepAxis::Gamma => (0.0, 0.35),
            SweepAxis::K1 => (0.1, 0.9),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SweepAxis {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "alpha_beta_product" => Ok(SweepAxis::AlphaBetaProduct),
            "phi" => Ok(SweepAxis::Phi),
            "gamma" => Ok(SweepAxis::Gamma),
            "k1" => Ok(SweepAxis::K1),
            other => Err(ModelError::InvalidSpec(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Subsidizing-factor levels overlaid on every non-phi sweep.
pub const DEFAULT_PHI_LEVELS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    /// Ignored for the phi axis, where the axis value is the level.
    pub phi_levels: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub mode: TwoSidedMode,
    pub population: PopulationSpec,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, grid: Vec<f64>) -> Self {
        SweepSpec {
            axis,
            grid,
            phi_levels: DEFAULT_PHI_LEVELS.to_vec(),
            scenarios: Scenario::ALL.to_vec(),
            mode: TwoSidedMode::default(),
            population: PopulationSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(ModelError::InvalidSpec("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::InvalidSpec(
                "sweep grid must be strictly increasing".into(),
            ));
        }
        let (lo, hi) = self.axis.range();
        // grids built by repeated addition may overshoot by an ulp or two
        let slack = 1e-9;
        if let Some(v) = self
            .grid
            .iter()
            .find(|&&v| !(v >= lo - slack && v <= hi + slack))
        {
            return Err(ModelError::InvalidSpec(format!(
                "{} value {v} outside [{lo}, {hi}]",
                self.axis
            )));
        }
        if self.axis != SweepAxis::Phi {
            if self.phi_levels.is_empty() {
                return Err(ModelError::InvalidSpec("no phi levels".into()));
            }
            if let Some(v) = self.phi_levels.iter().find(|&&v| !(0.0..=5.0).contains(&v)) {
                return Err(ModelError::InvalidSpec(format!(
                    "phi level {v} outside [0, 5]"
                )));
            }
        }
        if self.scenarios.is_empty() {
            return Err(ModelError::InvalidSpec("no scenarios requested".into()));
        }
        self.population.validate()
    }

    /// `(axis value, phi level)` pairs in output order.
    fn points(&self) -> Vec<(f64, f64)> {
        match self.axis {
            SweepAxis::Phi => self.grid.iter().map(|&v| (v, v)).collect(),
            _ => self
                .grid
                .iter()
                .flat_map(|&v| self.phi_levels.iter().map(move |&phi| (v, phi)))
                .collect(),
        }
    }
}

/// Aggregates for one sweep cell. Means are `None` when no record is feasible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub scenario: Scenario,
    pub phi_level: f64,
    pub mean_cloud_payoff: Option<f64>,
    pub mean_provider_payoff: Option<f64>,
    pub mean_demand: Option<f64>,
    pub mean_supply: Option<f64>,
    /// `None` also when the scenario carries no share.
    pub mean_share: Option<f64>,
    pub feasible_count: usize,
    pub n_providers: usize,
}

impl SweepSeries {
    pub fn is_empty(&self) -> bool {
        self.feasible_count == 0
    }
}

/// Applies an axis value and phi level to one provider.
pub fn apply_axis(provider: &Provider, axis: SweepAxis, value: f64, phi: f64) -> Provider {
    let mut out = *provider;
    let p = &mut out.params;
    p.phi = phi;
    match axis {
        SweepAxis::AlphaBetaProduct => {
            let product = value.min(MAX_EXTERNALITY_PRODUCT * (1.0 - 1e-12));
            p.beta = product / p.alpha;
        }
        SweepAxis::Phi => p.phi = value,
        SweepAxis::Gamma => p.gamma = value,
        SweepAxis::K1 => p.k1 = value,
    }
    out
}

/// Mean of a column over feasible records, summed in record order.
fn feasible_mean(records: &[ScenarioRecord], f: impl Fn(&ScenarioRecord) -> Option<f64>) -> Option<f64> {
    let (sum, n) = records
        .iter()
        .filter(|r| r.feasible)
        .filter_map(&f)
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(
    axis: SweepAxis,
    axis_value: f64,
    phi_level: f64,
    scenario: Scenario,
    records: &[ScenarioRecord],
) -> SweepSeries {
    SweepSeries {
        axis,
        axis_value,
        scenario,
        phi_level,
        mean_cloud_payoff: feasible_mean(records, |r| Some(r.cloud_payoff)),
        mean_provider_payoff: feasible_mean(records, |r| Some(r.provider_payoff)),
        mean_demand: feasible_mean(records, |r| Some(r.demand)),
        mean_supply: feasible_mean(records, |r| Some(r.supply)),
        mean_share: feasible_mean(records, |r| r.share),
        feasible_count: records.iter().filter(|r| r.feasible).count(),
        n_providers: records.len(),
    }
}

/// Runs one cell and returns its raw records.
pub fn run_cell(
    population: &[Provider],
    axis: SweepAxis,
    axis_value: f64,
    phi_level: f64,
    scenario: Scenario,
    mode: TwoSidedMode,
) -> Result<Vec<ScenarioRecord>> {
    let adjusted: Vec<Provider> = population
        .iter()
        .map(|p| apply_axis(p, axis, axis_value, phi_level))
        .collect();
    run_scenario(scenario, &adjusted, mode)
}

/// Runs a sweep on an already sampled population.
pub fn run_sweep_on(spec: &SweepSpec, population: &[Provider]) -> Result<Vec<SweepSeries>> {
    spec.validate()?;
    let cells: Vec<(f64, f64, Scenario)> = spec
        .points()
        .into_iter()
        .flat_map(|(v, phi)| spec.scenarios.iter().map(move |&s| (v, phi, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(value, phi, scenario)| {
            let records = run_cell(population, spec.axis, value, phi, scenario, spec.mode)?;
            Ok(aggregate(spec.axis, value, phi, scenario, &records))
        })
        .collect()
}

/// Samples the population described by `spec` and runs the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepSeries>> {
    spec.validate()?;
    let population = sample_population(&spec.population)?;
    run_sweep_on(spec, &population)
}

fn require_axis(spec: &SweepSpec, axis: SweepAxis) -> Result<()> {
    if spec.axis == axis {
        Ok(())
    } else {
        Err(ModelError::InvalidSpec(format!(
            "expected a {axis} sweep, got {}",
            spec.axis
        )))
    }
}

/// Externality sweep: `beta = value / alpha` for each provider's sampled alpha.
pub fn sweep_externalities(spec: &SweepSpec) -> Result<Vec<SweepSeries>> {
    require_axis(spec, SweepAxis::AlphaBetaProduct)?;
    run_sweep(spec)
}

pub fn sweep_phi(spec: &SweepSpec) -> Result<Vec<SweepSeries>> {
    require_axis(spec, SweepAxis::Phi)?;
    run_sweep(spec)
}

pub fn sweep_gamma(spec: &SweepSpec) -> Result<Vec<SweepSeries>> {
    require_axis(spec, SweepAxis::Gamma)?;
    run_sweep(spec)
}

pub fn sweep_k1(spec: &SweepSpec) -> Result<Vec<SweepSeries>> {
    require_axis(spec, SweepAxis::K1)?;
    run_sweep(spec)
}

/// `lo, lo + step, ...` up to and including `hi`, without accumulated drift.
pub fn linspace_step(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| {
            let v = lo + step * i as f64;
            // snap to the decimal grid so axis values print cleanly
            (v * 1e9).round() / 1e9
        })
        .collect()
}

/// Which aggregate columns a figure plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSet {
    pub cloud_payoff: bool,
    pub provider_payoff: bool,
    pub demand: bool,
    pub supply: bool,
    pub share: bool,
}

impl MetricSet {
    pub const ALL: MetricSet = MetricSet {
        cloud_payoff: true,
        provider_payoff: true,
        demand: true,
        supply: true,
        share: true,
    };
    const NONE: MetricSet = MetricSet {
        cloud_payoff: false,
        provider_payoff: false,
        demand: false,
        supply: false,
        share: false,
    };

    /// Blanks the columns not in the set.
    pub fn filter(&self, s: &SweepSeries) -> SweepSeries {
        SweepSeries {
            mean_cloud_payoff: s.mean_cloud_payoff.filter(|_| self.cloud_payoff),
            mean_provider_payoff: s.mean_provider_payoff.filter(|_| self.provider_payoff),
            mean_demand: s.mean_demand.filter(|_| self.demand),
            mean_supply: s.mean_supply.filter(|_| self.supply),
            mean_share: s.mean_share.filter(|_| self.share),
            ..*s
        }
    }
}

/// A named sweep reproducing one sensitivity figure.
#[derive(Debug, Clone, PartialEq)]
pub struct FigurePreset {
    pub name: &'static str,
    pub title: &'static str,
    pub spec: SweepSpec,
    pub metrics: MetricSet,
}

pub const FIGURE_PRESETS: [&str; 12] = [
    "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13", "fig14",
    "fig15",
];

pub fn externality_grid() -> Vec<f64> {
    linspace_step(0.1, 0.7, 0.05)
}

pub fn phi_grid() -> Vec<f64> {
    linspace_step(0.1, 5.0, 0.1)
}

pub fn gamma_grid() -> Vec<f64> {
    linspace_step(0.0, 0.35, 0.025)
}

pub fn k1_grid() -> Vec<f64> {
    linspace_step(0.1, 0.9, 0.1)
}

/// Mode used by the figure presets.
///
/// Over most of the simulated parameter ranges the closed-form best-response
/// conditions fail, so the figures use the providers' declared prices.
pub const PRESET_MODE: TwoSidedMode = TwoSidedMode::DeclaredPrice;

pub fn figure_preset(name: &str) -> Result<FigurePreset> {
    let only = |f: fn(&mut MetricSet)| {
        let mut m = MetricSet::NONE;
        f(&mut m);
        m
    };
    let (title, axis, grid, metrics, scenarios): (&'static str, _, _, _, Vec<Scenario>) =
        match name {
            "fig4" => (
                "cloud payoff over externalities",
                SweepAxis::AlphaBetaProduct,
                externality_grid(),
                only(|m| m.cloud_payoff = true),
                Scenario::ALL.to_vec(),
            ),
            "fig5" => (
                "provider payoff over externalities",
                SweepAxis::AlphaBetaProduct,
                externality_grid(),
                only(|m| m.provider_payoff = true),
                Scenario::ALL.to_vec(),
            ),
            "fig6" => (
                "consumer demand over externalities",
                SweepAxis::AlphaBetaProduct,
                externality_grid(),
                only(|m| m.demand = true),
                Scenario::ALL.to_vec(),
            ),
            "fig7" => (
                "cloud infrastructure over externalities",
                SweepAxis::AlphaBetaProduct,
                externality_grid(),
                only(|m| m.supply = true),
                Scenario::ALL.to_vec(),
            ),
            "fig8" => (
                "revenue share over externalities",
                SweepAxis::AlphaBetaProduct,
                externality_grid(),
                only(|m| m.share = true),
                vec![Scenario::TwoSided],
            ),
            "fig9" => (
                "cloud payoff over subsidizing factor",
                SweepAxis::Phi,
                phi_grid(),
                only(|m| m.cloud_payoff = true),
                Scenario::ALL.to_vec(),
            ),
            "fig10" => (
                "provider payoff over subsidizing factor",
                SweepAxis::Phi,
                phi_grid(),
                only(|m| m.provider_payoff = true),
                Scenario::ALL.to_vec(),
            ),
            "fig11" => (
                "consumer demand over subsidizing factor",
                SweepAxis::Phi,
                phi_grid(),
                only(|m| m.demand = true),
                Scenario::ALL.to_vec(),
            ),
            "fig12" => (
                "cloud payoff over demand elasticity",
                SweepAxis::Gamma,
                gamma_grid(),
                only(|m| m.cloud_payoff = true),
                Scenario::ALL.to_vec(),
            ),
            "fig13" => (
                "provider payoff over demand elasticity",
                SweepAxis::Gamma,
                gamma_grid(),
                only(|m| m.provider_payoff = true),
                Scenario::ALL.to_vec(),
            ),
            "fig14" => (
                "consumer demand over demand elasticity",
                SweepAxis::Gamma,
                gamma_grid(),
                only(|m| m.demand = true),
                Scenario::ALL.to_vec(),
            ),
            "fig15" => (
                "surpluses over demand multiplier",
                SweepAxis::K1,
                k1_grid(),
                only(|m| {
                    m.cloud_payoff = true;
                    m.provider_payoff = true;
                    m.demand = true;
                }),
                Scenario::ALL.to_vec(),
            ),
            other => {
                return Err(ModelError::InvalidSpec(format!(
                    "unknown preset `{other}`, expected one of {}",
                    FIGURE_PRESETS.join(", ")
                )))
            }
        };
    let mut spec = SweepSpec::new(axis, grid);
    spec.scenarios = scenarios;
    spec.mode = PRESET_MODE;
    Ok(FigurePreset {
        name: FIGURE_PRESETS.iter().find(|&&n| n == name).copied().unwrap_or("custom"),
        title,
        spec,
        metrics,
    })
}
