//! The three business models run over a provider population.
//!
//! * two-sided: the platform chooses a revenue share, either through the
//!   backward-induction equilibrium or against the provider's declared price;
//! * fifty-fifty: share pinned at one half with unit subsidizing factor;
//! * pay-as-you-go: the provider rents infrastructure at a flat rate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{provider_best_price, stackelberg_solve, SHARE_EPS};
use crate::error::{ModelError, Result};
use crate::market::{
    cloud_payoff, consumer_demand, demand_reduced, provider_payoff, supply_reduced,
};
use crate::numeric::{golden_max, power_product};
use crate::params::MarketParams;
use crate::population::Provider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    TwoSided,
    FiftyFifty,
    PayAsYouGo,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::TwoSided, Scenario::FiftyFifty, Scenario::PayAsYouGo];

    pub fn tag(self) -> &'static str {
        match self {
            Scenario::TwoSided => "two_sided",
            Scenario::FiftyFifty => "fifty_fifty",
            Scenario::PayAsYouGo => "pay_as_you_go",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scenario {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "two_sided" => Ok(Scenario::TwoSided),
            "fifty_fifty" => Ok(Scenario::FiftyFifty),
            "pay_as_you_go" => Ok(Scenario::PayAsYouGo),
            other => Err(ModelError::InvalidSpec(format!("unknown scenario `{other}`"))),
        }
    }
}

/// How the two-sided scenario determines price and share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoSidedMode {
    /// Closed-form best responses solved by backward induction.
    #[default]
    Equilibrium,
    /// The provider's sampled price is kept; the platform maximizes its payoff over the share.
    DeclaredPrice,
}

impl FromStr for TwoSidedMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "equilibrium" => Ok(TwoSidedMode::Equilibrium),
            "declared-price" => Ok(TwoSidedMode::DeclaredPrice),
            other => Err(ModelError::InvalidSpec(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for TwoSidedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TwoSidedMode::Equilibrium => "equilibrium",
            TwoSidedMode::DeclaredPrice => "declared-price",
        })
    }
}

/// Outcome for one provider under one business model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub provider_id: usize,
    pub scenario: Scenario,
    /// Parameters the run actually used.
    pub params: MarketParams,
    pub price: f64,
    /// `None` under pay-as-you-go and for infeasible records.
    pub share: Option<f64>,
    pub demand: f64,
    pub supply: f64,
    pub provider_payoff: f64,
    pub cloud_payoff: f64,
    pub feasible: bool,
}

impl ScenarioRecord {
    fn infeasible(provider: &Provider, scenario: Scenario, params: MarketParams) -> Self {
        ScenarioRecord {
            provider_id: provider.id,
            scenario,
            params,
            price: provider.declared_price,
            share: None,
            demand: 0.0,
            supply: 0.0,
            provider_payoff: 0.0,
            cloud_payoff: 0.0,
            feasible: false,
        }
    }

    fn from_two_sided_state(
        provider: &Provider,
        scenario: Scenario,
        params: MarketParams,
        price: f64,
        share: f64,
    ) -> Result<Self> {
        Ok(ScenarioRecord {
            provider_id: provider.id,
            scenario,
            params,
            price,
            share: Some(share),
            demand: demand_reduced(price, share, &params)?,
            supply: supply_reduced(price, share, &params)?,
            provider_payoff: provider_payoff(price, share, &params)?,
            cloud_payoff: cloud_payoff(price, share, &params)?,
            feasible: true,
        })
    }
}

fn ensure_non_empty(population: &[Provider]) -> Result<()> {
    if population.is_empty() {
        Err(ModelError::InvalidSpec("population is empty".into()))
    } else {
        Ok(())
    }
}

/// Tolerance on the share in declared-price mode.
pub const DECLARED_SHARE_TOL: f64 = 1e-8;
const DECLARED_SCAN_POINTS: usize = 256;

/// Share maximizing the platform payoff at a fixed price.
///
/// A log-odds grid locates the best cell, then golden-section search on the
/// log-odds refines it, so shares near either end of `(0, 1)` are resolved as
/// finely as those in the middle.
pub fn best_share_at_price(price: f64, p: &MarketParams) -> Result<f64> {
    if !(price > 0.0 && price.is_finite()) {
        return Err(crate::error::domain(
            "best_share_at_price",
            format!("price must be positive and finite, got {price}"),
        ));
    }
    let lo = logit(SHARE_EPS);
    let hi = logit(1.0 - SHARE_EPS);
    let objective = |t: f64| cloud_payoff(price, logistic(t), p).unwrap_or(f64::NEG_INFINITY);
    let step = (hi - lo) / (DECLARED_SCAN_POINTS - 1) as f64;
    let (best_k, _) = (0..DECLARED_SCAN_POINTS)
        .map(|k| (k, objective(lo + step * k as f64)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let a = lo + step * best_k.saturating_sub(1) as f64;
    let b = (lo + step * (best_k + 1) as f64).min(hi);
    // |d share / d t| <= 1/4, so this keeps the share within tolerance.
    let t = golden_max(objective, a, b, DECLARED_SHARE_TOL);
    Ok(logistic(t))
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn two_sided_record(provider: &Provider, mode: TwoSidedMode) -> Result<ScenarioRecord> {
    let params = provider.params;
    match mode {
        TwoSidedMode::Equilibrium => {
            let result = stackelberg_solve(&params)?;
            match result.point {
                Some(pt) => Ok(ScenarioRecord {
                    provider_id: provider.id,
                    scenario: Scenario::TwoSided,
                    params,
                    price: pt.price_star,
                    share: Some(pt.share_star),
                    demand: pt.demand,
                    supply: pt.supply,
                    provider_payoff: pt.provider_payoff,
                    cloud_payoff: pt.cloud_payoff,
                    feasible: true,
                }),
                None => Ok(ScenarioRecord::infeasible(provider, Scenario::TwoSided, params)),
            }
        }
        TwoSidedMode::DeclaredPrice => {
            let price = provider.declared_price;
            let share = best_share_at_price(price, &params)?;
            ScenarioRecord::from_two_sided_state(provider, Scenario::TwoSided, params, price, share)
        }
    }
}

pub fn run_two_sided(population: &[Provider], mode: TwoSidedMode) -> Result<Vec<ScenarioRecord>> {
    ensure_non_empty(population)?;
    population
        .par_iter()
        .map(|provider| two_sided_record(provider, mode))
        .collect()
}

pub const FIFTY_FIFTY_SHARE: f64 = 0.5;

fn fifty_fifty_record(provider: &Provider) -> Result<ScenarioRecord> {
    let params = MarketParams {
        phi: 1.0,
        ..provider.params
    };
    match provider_best_price(FIFTY_FIFTY_SHARE, &params) {
        Ok(price) => ScenarioRecord::from_two_sided_state(
            provider,
            Scenario::FiftyFifty,
            params,
            price,
            FIFTY_FIFTY_SHARE,
        ),
        Err(ModelError::Infeasible(_)) => {
            Ok(ScenarioRecord::infeasible(provider, Scenario::FiftyFifty, params))
        }
        Err(e) => Err(e),
    }
}

pub fn run_fifty_fifty(population: &[Provider]) -> Result<Vec<ScenarioRecord>> {
    ensure_non_empty(population)?;
    population.par_iter().map(fifty_fifty_record).collect()
}

/// Infrastructure rented by a pay-as-you-go provider at a fixed price:
/// `(p_s / (alpha k1 (price - f_c) price^-gamma))^(1/(alpha - 1))`.
///
/// `None` when the provider's margin `price - f_c` is not positive.
pub fn rented_supply(price: f64, p: &MarketParams) -> Option<f64> {
    let margin = price - p.f_c;
    if !(margin > 0.0 && price > 0.0) {
        return None;
    }
    let inv = 1.0 / (p.alpha - 1.0);
    Some(power_product(
        1.0,
        &[
            (p.p_s, inv),
            (p.alpha, -inv),
            (p.k1, -inv),
            (margin, -inv),
            (price, p.gamma * inv),
        ],
    ))
}

/// Provider payoff when renting: `(price - f_c) * demand - p_s * supply`.
pub fn rental_provider_payoff(price: f64, supply: f64, p: &MarketParams) -> Result<f64> {
    let demand = consumer_demand(price, supply, p)?;
    Ok((price - p.f_c) * demand - p.p_s * supply)
}

fn pay_as_you_go_record(provider: &Provider) -> Result<ScenarioRecord> {
    let params = provider.params;
    let price = provider.declared_price;
    let Some(supply) = rented_supply(price, &params) else {
        return Ok(ScenarioRecord::infeasible(provider, Scenario::PayAsYouGo, params));
    };
    let demand = consumer_demand(price, supply, &params)?;
    Ok(ScenarioRecord {
        provider_id: provider.id,
        scenario: Scenario::PayAsYouGo,
        params,
        price,
        share: None,
        demand,
        supply,
        provider_payoff: (price - params.f_c) * demand - params.p_s * supply,
        cloud_payoff: (params.p_s - params.f_s) * supply,
        feasible: true,
    })
}

pub fn run_pay_as_you_go(population: &[Provider]) -> Result<Vec<ScenarioRecord>> {
    ensure_non_empty(population)?;
    population.par_iter().map(pay_as_you_go_record).collect()
}

/// Runs one scenario; `mode` only affects the two-sided model.
pub fn run_scenario(
    scenario: Scenario,
    population: &[Provider],
    mode: TwoSidedMode,
) -> Result<Vec<ScenarioRecord>> {
    match scenario {
        Scenario::TwoSided => run_two_sided(population, mode),
        Scenario::FiftyFifty => run_fifty_fifty(population),
        Scenario::PayAsYouGo => run_pay_as_you_go(population),
    }
}

/// Mean, median and total of one quantity over feasible records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub total: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let total: f64 = values.iter().sum();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        Some(Stats {
            n: values.len(),
            mean: total / values.len() as f64,
            median,
            total,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    pub n_records: usize,
    pub feasible: usize,
    pub feasible_fraction: f64,
    /// All `None` when no record is feasible.
    pub provider_payoff: Option<Stats>,
    pub cloud_payoff: Option<Stats>,
    pub demand: Option<Stats>,
    pub supply: Option<Stats>,
    /// Over feasible records that carry a share.
    pub share: Option<Stats>,
}

impl ScenarioSummary {
    fn from_records(scenario: Scenario, records: &[&ScenarioRecord]) -> Self {
        let feasible: Vec<&ScenarioRecord> =
            records.iter().copied().filter(|r| r.feasible).collect();
        let column = |f: fn(&ScenarioRecord) -> f64| {
            Stats::of(&feasible.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        let shares: Vec<f64> = feasible.iter().filter_map(|r| r.share).collect();
        ScenarioSummary {
            scenario,
            n_records: records.len(),
            feasible: feasible.len(),
            feasible_fraction: feasible.len() as f64 / records.len() as f64,
            provider_payoff: column(|r| r.provider_payoff),
            cloud_payoff: column(|r| r.cloud_payoff),
            demand: column(|r| r.demand),
            supply: column(|r| r.supply),
            share: Stats::of(&shares),
        }
    }

    /// Differences of means `self - other`, `None` where either side is empty.
    pub fn mean_differences(&self, other: &ScenarioSummary) -> [Option<f64>; 5] {
        let d = |a: Option<Stats>, b: Option<Stats>| Some(a?.mean - b?.mean);
        [
            d(self.provider_payoff, other.provider_payoff),
            d(self.cloud_payoff, other.cloud_payoff),
            d(self.demand, other.demand),
            d(self.supply, other.supply),
            d(self.share, other.share),
        ]
    }
}

/// Summarizes records per scenario; every scenario must cover the same provider ids.
pub fn compare_scenarios(records: &[ScenarioRecord]) -> Result<Vec<ScenarioSummary>> {
    let mut groups: BTreeMap<Scenario, Vec<&ScenarioRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.scenario).or_default().push(r);
    }
    let mut reference: Option<(Scenario, BTreeSet<usize>)> = None;
    for (scenario, group) in &groups {
        let ids: BTreeSet<usize> = group.iter().map(|r| r.provider_id).collect();
        if ids.len() != group.len() {
            return Err(ModelError::MismatchedPopulation(format!(
                "{scenario} lists a provider more than once"
            )));
        }
        match &reference {
            None => reference = Some((*scenario, ids)),
            Some((first, ref_ids)) if *ref_ids != ids => {
                return Err(ModelError::MismatchedPopulation(format!(
                    "{scenario} and {first} cover different providers"
                )))
            }
            Some(_) => {}
        }
    }
    Ok(groups
        .iter()
        .map(|(scenario, group)| ScenarioSummary::from_records(*scenario, group))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::central_diff;
    use crate::params::fixtures::{feasible, midpoint};

    fn provider(id: usize, price: f64, params: MarketParams) -> Provider {
        Provider {
            id,
            declared_price: price,
            params,
        }
    }

    #[test]
    fn two_sided_equilibrium_delegates_to_solver() {
        let p = feasible();
        let rec = run_two_sided(&[provider(0, 1.5, p)], TwoSidedMode::Equilibrium).unwrap();
        let pt = stackelberg_solve(&p).unwrap().point.unwrap();
        assert!(rec[0].feasible);
        assert_eq!(rec[0].price, pt.price_star);
        assert_eq!(rec[0].share, Some(pt.share_star));
        assert_eq!(rec[0].cloud_payoff, pt.cloud_payoff);
        assert_eq!(rec[0].provider_payoff, pt.provider_payoff);
    }

    #[test]
    fn infeasible_equilibrium_is_retained_with_zero_payoffs() {
        let p = midpoint();
        let rec = run_two_sided(&[provider(4, 1.7, p)], TwoSidedMode::Equilibrium).unwrap();
        assert!(!rec[0].feasible);
        assert_eq!(rec[0].provider_id, 4);
        assert_eq!(rec[0].cloud_payoff, 0.0);
        assert_eq!(rec[0].provider_payoff, 0.0);
    }

    #[test]
    fn declared_price_without_subsidy_elasticity_hits_upper_bound() {
        let p = MarketParams { phi: 0.0, ..midpoint() };
        let rec = run_two_sided(&[provider(0, 1.7, p)], TwoSidedMode::DeclaredPrice).unwrap();
        let share = rec[0].share.unwrap();
        assert!((share - (1.0 - SHARE_EPS)).abs() <= DECLARED_SHARE_TOL, "{share}");
    }

    #[test]
    fn declared_price_share_is_interior_maximum() {
        let p = MarketParams { phi: 5.0, ..midpoint() };
        let price = 1.7;
        let share = best_share_at_price(price, &p).unwrap();
        assert!(share > 0.01 && share < 0.99);
        let f = |x: f64| cloud_payoff(price, x, &p).unwrap();
        let v = f(share);
        assert!(v >= f(share * (1.0 + 1e-4)) && v >= f(share * (1.0 - 1e-4)));
        // closed-form stationary share of the fixed-price payoff
        let c = p.coefficients();
        let ratio = (c.a4 + c.a2) / (p.phi * p.f_s)
            * (p.k1 * p.k2.powf(p.alpha) / (p.k2 * p.k1.powf(p.beta))).powf(1.0 / c.a2)
            * price.powf((c.a2 - c.a1 - c.a3) / c.a2);
        let expected = ratio.powf(c.a2 / (p.phi - c.a4 - c.a2));
        assert!((share - expected).abs() < 1e-8, "{share} vs {expected}");
    }

    #[test]
    fn fifty_fifty_price_doubles_minimum_response() {
        let p = feasible();
        let rec = run_fifty_fifty(&[provider(0, 1.0, p)]).unwrap();
        let pinned = MarketParams { phi: 1.0, ..p };
        let c = pinned.coefficients();
        let expected = 2.0 * c.a1 * p.f_c / (c.a1 - c.a2);
        assert!((rec[0].price - expected).abs() < 1e-12 * expected);
        assert_eq!(rec[0].share, Some(0.5));
        assert_eq!(rec[0].params.phi, 1.0);
    }

    #[test]
    fn fifty_fifty_flags_violated_conditions() {
        let rec = run_fifty_fifty(&[provider(0, 1.7, midpoint())]).unwrap();
        assert!(!rec[0].feasible);
    }

    #[test]
    fn fifty_fifty_price_against_grid() {
        let p = MarketParams { phi: 1.0, ..feasible() };
        let rec = run_fifty_fifty(&[provider(0, 1.0, p)]).unwrap();
        let price = rec[0].price;
        let n = 100_000;
        let (lo, hi) = (p.f_c / 0.5, 40.0 * p.f_c / 0.5);
        let step = (hi - lo) / n as f64;
        let (grid_best, _) = (1..=n)
            .map(|k| lo + step * k as f64)
            .map(|x| (x, provider_payoff(x, 0.5, &p).unwrap()))
            .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        assert!((grid_best - price).abs() <= step, "{grid_best} vs {price}");
    }

    #[test]
    fn rented_supply_closed_case() {
        let p = MarketParams {
            alpha: 0.5,
            k1: 1.0,
            gamma: 0.0,
            f_c: 1.0,
            p_s: 1.0,
            ..midpoint()
        };
        assert_eq!(rented_supply(2.0, &p), Some(0.25));
    }

    #[test]
    fn rental_at_cost_gives_platform_nothing() {
        let p = MarketParams {
            p_s: 23.7,
            f_s: 23.7,
            ..midpoint()
        };
        let rec = run_pay_as_you_go(&[provider(0, 1.7, MarketParams { f_c: 1.122, ..p })]).unwrap();
        assert_eq!(rec[0].cloud_payoff, 0.0);
        assert!(rec[0].share.is_none());
    }

    #[test]
    fn rented_supply_is_stationary() {
        let p = midpoint();
        for &price in &[1.3, 1.7, 2.9] {
            let p = MarketParams { f_c: 0.66 * price, ..p };
            let s = rented_supply(price, &p).unwrap();
            let d = central_diff(|x| rental_provider_payoff(price, x, &p).unwrap(), s, 1e-6);
            assert!(d.abs() <= 1e-6 * p.p_s, "{d}");
        }
    }

    #[test]
    fn rented_supply_requires_margin() {
        let p = MarketParams { f_c: 2.0, ..midpoint() };
        assert_eq!(rented_supply(2.0, &p), None);
        let rec = run_pay_as_you_go(&[provider(0, 2.0, p)]).unwrap();
        assert!(!rec[0].feasible);
    }

    #[test]
    fn summaries_and_mismatch() {
        let pop: Vec<Provider> = (0..4).map(|i| provider(i, 1.0 + 0.3 * i as f64, feasible())).collect();
        let mut recs = run_pay_as_you_go(&pop).unwrap();
        recs.extend(run_fifty_fifty(&pop).unwrap());
        let s = compare_scenarios(&recs).unwrap();
        assert_eq!(s.len(), 2);
        let payg = s.iter().find(|x| x.scenario == Scenario::PayAsYouGo).unwrap();
        let total: f64 = recs
            .iter()
            .filter(|r| r.scenario == Scenario::PayAsYouGo)
            .map(|r| r.cloud_payoff)
            .sum();
        assert!((payg.cloud_payoff.unwrap().total - total).abs() <= 1e-9 * total.abs());
        assert!(payg.share.is_none());

        recs.pop();
        assert!(matches!(
            compare_scenarios(&recs),
            Err(ModelError::MismatchedPopulation(_))
        ));
    }

    #[test]
    fn self_comparison_has_zero_differences() {
        let pop: Vec<Provider> = (0..3).map(|i| provider(i, 1.5, feasible())).collect();
        let recs = run_fifty_fifty(&pop).unwrap();
        let s = compare_scenarios(&recs).unwrap();
        for d in s[0].mean_differences(&s[0]) {
            assert_eq!(d, Some(0.0));
        }
    }

    #[test]
    fn empty_feasible_set_has_no_aggregates() {
        let pop = vec![provider(0, 1.7, midpoint())];
        let s = compare_scenarios(&run_fifty_fifty(&pop).unwrap()).unwrap();
        assert_eq!(s[0].feasible, 0);
        assert!(s[0].cloud_payoff.is_none() && s[0].demand.is_none());
    }

    #[test]
    fn empty_population_rejected() {
        assert!(run_pay_as_you_go(&[]).is_err());
    }
}
