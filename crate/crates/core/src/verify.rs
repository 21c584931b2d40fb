//! Property checks of the equilibrium solver over random parameter draws.
//!
//! Draws come from a [`PopulationSpec`]; attempt `k` is provider `k` of that
//! spec, so a run is reproducible and independent of the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    first_order_check, oracle_equilibrium, second_order_check, stackelberg_solve,
    EquilibriumPoint,
};
use crate::error::{ModelError, Result};
use crate::market::{consumer_demand, demand_reduced, infrastructure_supply, supply_reduced};
use crate::params::MarketParams;
use crate::population::{sample_provider, PopulationSpec};

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const FOC_TOL: f64 = 1e-6;
pub const FIXED_POINT_TOL: f64 = 1e-9;
/// Allowed oracle disagreement, in grid steps.
pub const ORACLE_STEPS: f64 = 2.0;

/// Attempts are scanned in blocks of this size.
const ATTEMPT_BLOCK: u64 = 1 << 16;
/// Keeps the pair stream apart from the provider streams.
const PAIR_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

type ReducedFn = fn(f64, f64, &MarketParams) -> Result<f64>;

/// The demand and supply closed forms under test.
#[derive(Clone, Copy)]
pub struct ReducedForms {
    pub demand: ReducedFn,
    pub supply: ReducedFn,
}

impl ReducedForms {
    pub const STANDARD: ReducedForms = ReducedForms {
        demand: demand_reduced,
        supply: supply_reduced,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Feasible draws to collect.
    pub draws: usize,
    /// Attempts allowed while collecting them.
    pub max_attempts: u64,
    /// Random (price, share) pairs for the fixed-point property.
    pub fixed_point_pairs: usize,
    pub grid_n: usize,
    /// Skip the brute-force oracle, the slowest property.
    pub skip_oracle: bool,
    pub population: PopulationSpec,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            draws: 500,
            max_attempts: 20_000_000,
            fixed_point_pairs: 10_000,
            grid_n: 2000,
            skip_oracle: false,
            population: PopulationSpec::default(),
        }
    }
}

impl VerifySpec {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(ModelError::InvalidSpec("draws must be at least 1".into()));
        }
        if self.max_attempts == 0 {
            return Err(ModelError::InvalidSpec("max_attempts must be at least 1".into()));
        }
        if self.grid_n < 100 {
            return Err(ModelError::InvalidSpec(format!(
                "grid_n must be at least 100, got {}",
                self.grid_n
            )));
        }
        self.population.validate()
    }
}

/// Outcome of one named property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub checked: usize,
    pub failed: usize,
    /// Largest violation measure seen, in the property's own units.
    pub worst: f64,
    pub tolerance: f64,
}

impl PropertyOutcome {
    fn new(name: &'static str, tolerance: f64) -> Self {
        PropertyOutcome {
            name,
            checked: 0,
            failed: 0,
            worst: 0.0,
            tolerance,
        }
    }

    fn record(&mut self, measure: f64) {
        self.checked += 1;
        if !(measure <= self.tolerance) {
            self.failed += 1;
        }
        if measure > self.worst || measure.is_nan() {
            self.worst = measure;
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub attempts: u64,
    pub feasible_draws: usize,
    pub region_empty: bool,
    /// Random pairs skipped because a reduced quantity under- or overflowed.
    pub unrepresentable_pairs: usize,
    pub properties: Vec<PropertyOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.region_empty && self.properties.iter().all(PropertyOutcome::passed)
    }

    pub fn feasible_fraction(&self) -> f64 {
        self.feasible_draws as f64 / self.attempts.max(1) as f64
    }

    pub fn property(&self, name: &str) -> Option<&PropertyOutcome> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// A feasible draw and its solved equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleDraw {
    pub attempt: u64,
    pub params: MarketParams,
    pub point: EquilibriumPoint,
}

/// Scans attempts in order and keeps the first `spec.draws` with a solved
/// equilibrium. Returns the draws and the number of attempts consumed.
pub fn collect_feasible(spec: &VerifySpec) -> Result<(Vec<FeasibleDraw>, u64)> {
    spec.validate()?;
    let mut found = Vec::with_capacity(spec.draws);
    let mut start = 0u64;
    while start < spec.max_attempts && found.len() < spec.draws {
        let end = (start + ATTEMPT_BLOCK).min(spec.max_attempts);
        let block: Vec<FeasibleDraw> = (start..end)
            .into_par_iter()
            .map(|k| -> Result<Option<FeasibleDraw>> {
                let provider = sample_provider(&spec.population, k as usize)?;
                let res = stackelberg_solve(&provider.params)?;
                Ok(res.point.map(|point| FeasibleDraw {
                    attempt: k,
                    params: provider.params,
                    point,
                }))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let room = spec.draws - found.len();
        found.extend(block.into_iter().take(room));
        start = end;
    }
    let used = match found.len() == spec.draws {
        true => found.last().map_or(start, |d| d.attempt + 1),
        false => start,
    };
    Ok((found, used))
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Largest relative error with which reduced demand and supply reproduce
/// the primitive relations at `(price, share)`.
///
/// `None` when either reduced quantity is not a normal positive float, in
/// which case the primitives cannot be evaluated faithfully.
pub fn fixed_point_error(
    forms: &ReducedForms,
    price: f64,
    share: f64,
    p: &MarketParams,
) -> Result<Option<f64>> {
    let demand = (forms.demand)(price, share, p)?;
    let supply = (forms.supply)(price, share, p)?;
    if !(demand.is_normal() && supply.is_normal() && demand > 0.0 && supply > 0.0) {
        return Ok(None);
    }
    let demand_back = consumer_demand(price, supply, p)?;
    let supply_back = infrastructure_supply(share, price, demand, p)?;
    Ok(Some(rel_gap(demand_back, demand).max(rel_gap(supply_back, supply))))
}

/// Errors on the first `fixed_point_pairs` representable random pairs, plus
/// the number of candidates skipped as unrepresentable.
fn fixed_point_pairs(spec: &VerifySpec, forms: &ReducedForms) -> Result<(Vec<f64>, usize)> {
    let want = spec.fixed_point_pairs;
    let mut errors = Vec::with_capacity(want);
    let mut skipped = 0;
    let mut start = 0usize;
    // the cap only guards against a population where nothing is representable
    while errors.len() < want && start < want.saturating_mul(16).max(ATTEMPT_BLOCK as usize) {
        let end = start + (want - errors.len()).max(1024);
        let block: Vec<Option<f64>> = (start..end)
            .into_par_iter()
            .map(|k| {
                let provider = sample_provider(&spec.population, k)?;
                let mut rng = ChaCha8Rng::seed_from_u64(spec.population.seed ^ PAIR_SEED_SALT);
                rng.set_stream(k as u64);
                let price = rng.random_range(0.2..3.2);
                let share = rng.random_range(1e-6..1.0 - 1e-6);
                fixed_point_error(forms, price, share, &provider.params)
            })
            .collect::<Result<_>>()?;
        for e in block {
            if errors.len() == want {
                break;
            }
            match e {
                Some(e) => errors.push(e),
                None => skipped += 1,
            }
        }
        start = end;
    }
    Ok((errors, skipped))
}

struct DrawChecks {
    residual: f64,
    foc: f64,
    /// `None` when the analytic conditions do not both hold.
    soc_ok: Option<bool>,
    fixed_point: Option<f64>,
    oracle: Option<(f64, f64)>,
}

fn check_draw(d: &FeasibleDraw, spec: &VerifySpec, forms: &ReducedForms) -> Result<DrawChecks> {
    let state = d.point.state();
    let foc = first_order_check(&d.params, &state)?.max();
    let soc = second_order_check(&d.params, &state)?;
    let soc_ok = (soc.provider_analytic_max && soc.cloud_analytic_max)
        .then_some(soc.provider_numeric_max && soc.cloud_numeric_max);
    let fixed_point = fixed_point_error(forms, state.price, state.share, &d.params)?;
    let oracle = match spec.skip_oracle {
        true => None,
        false => {
            let o = oracle_equilibrium(&d.params, spec.grid_n)?;
            Some((
                (o.share - state.share).abs() / o.share_step,
                rel_gap(o.price, state.price) / o.price_rel_step,
            ))
        }
    };
    Ok(DrawChecks {
        residual: d.point.relative_residual,
        foc,
        soc_ok,
        fixed_point,
        oracle,
    })
}

pub fn run_verify(spec: &VerifySpec) -> Result<VerifyReport> {
    run_verify_with(spec, &ReducedForms::STANDARD)
}

/// [`run_verify`] with substitute closed forms; used to confirm that a broken
/// model is caught.
pub fn run_verify_with(spec: &VerifySpec, forms: &ReducedForms) -> Result<VerifyReport> {
    let (draws, attempts) = collect_feasible(spec)?;

    let mut fixed = PropertyOutcome::new("fixed_point", FIXED_POINT_TOL);
    let (pair_errors, unrepresentable_pairs) = fixed_point_pairs(spec, forms)?;
    for e in pair_errors {
        fixed.record(e);
    }
    let mut residual = PropertyOutcome::new("share_residual", RESIDUAL_TOL);
    let mut foc = PropertyOutcome::new("first_order", FOC_TOL);
    let mut soc = PropertyOutcome::new("second_order", 0.0);
    let mut share = PropertyOutcome::new("oracle_share", ORACLE_STEPS);
    let mut price = PropertyOutcome::new("oracle_price", ORACLE_STEPS);

    let checks: Vec<DrawChecks> = draws
        .par_iter()
        .map(|d| check_draw(d, spec, forms))
        .collect::<Result<_>>()?;
    for c in &checks {
        residual.record(c.residual);
        foc.record(c.foc);
        if let Some(ok) = c.soc_ok {
            soc.record(if ok { 0.0 } else { 1.0 });
        }
        if let Some(e) = c.fixed_point {
            fixed.record(e);
        }
        if let Some((ds, dp)) = c.oracle {
            share.record(ds);
            price.record(dp);
        }
    }

    let mut properties = vec![fixed, residual, foc, soc];
    if !spec.skip_oracle {
        properties.push(share);
        properties.push(price);
    }
    Ok(VerifyReport {
        attempts,
        feasible_draws: draws.len(),
        region_empty: draws.is_empty(),
        unrepresentable_pairs,
        properties,
    })
}
