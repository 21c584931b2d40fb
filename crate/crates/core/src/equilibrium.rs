//! Backward-induction solution of the platform/provider game.
//!
//! The provider (follower) answers a revenue share with the price that
//! maximizes its payoff; the platform (leader) picks the share from the
//! stationarity condition of its own payoff with that price substituted in.
//! [`oracle_equilibrium`] recomputes both choices by brute-force grid search
//! and shares no closed form with [`stackelberg_solve`].

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ModelError, Result};
use crate::market::{
    check_feasibility, cloud_payoff, demand_reduced, provider_payoff, supply_reduced,
};
use crate::numeric::{bisect, central_diff, central_second_diff, power_product};
use crate::params::{FeasibilityReport, MarketParams, MarketState};

/// Open interval `(SHARE_EPS, 1 - SHARE_EPS)` searched for share roots.
pub const SHARE_EPS: f64 = 1e-9;
/// Number of scan brackets used to isolate share roots.
pub const SHARE_SCAN_BRACKETS: usize = 2048;
pub const SHARE_TOL: f64 = 1e-10;
pub const MAX_BISECTION_STEPS: usize = 200;

/// Relative steps for numerical derivatives.
pub const FIRST_DIFF_STEP: f64 = 1e-6;
pub const SECOND_DIFF_STEP: f64 = 1e-4;

/// Provider's payoff-maximizing price for a given share.
pub fn provider_best_price(share: f64, p: &MarketParams) -> Result<f64> {
    let report = check_feasibility(p);
    if !(report.f1_price_positive && report.f2_price_max) {
        return Err(ModelError::Infeasible(report));
    }
    if !(share > 0.0 && share < 1.0) {
        return Err(domain(
            "provider_best_price",
            format!("share must lie in (0, 1), got {share}"),
        ));
    }
    let c = p.coefficients();
    Ok(c.a1 * p.f_c / ((c.a1 - c.a2) * (1.0 - share)))
}

/// `share^exp_a * (1 - share)^exp_b = rhs`, the leader's stationarity
/// condition after the follower's price response is substituted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareEquation {
    pub exp_a: f64,
    pub exp_b: f64,
    pub rhs: f64,
}

impl ShareEquation {
    /// Left-hand side minus right-hand side.
    pub fn residual(&self, share: f64) -> f64 {
        power_product(1.0, &[(share, self.exp_a), (1.0 - share, self.exp_b)]) - self.rhs
    }

    /// Same sign as [`residual`](Self::residual) but evaluated on log scale.
    fn log_gap(&self, share: f64, ln_rhs: f64) -> f64 {
        self.exp_a * share.ln() + self.exp_b * (1.0 - share).ln() - ln_rhs
    }
}

pub fn build_share_equation(p: &MarketParams) -> Result<ShareEquation> {
    let report = check_feasibility(p);
    if !report.f1_price_positive {
        return Err(ModelError::Infeasible(report));
    }
    let c = p.coefficients();
    let multipliers = (p.k2 * p.k1.powf(p.beta)) / (p.k1 * p.k2.powf(p.alpha));
    let min_price = c.a1 * p.f_c / (c.a1 - c.a2);
    let rhs = p.f_s
        * (p.phi / (c.a4 + c.a2))
        * multipliers.powf(1.0 / c.a2)
        * min_price.powf(c.share_exp_b);
    Ok(ShareEquation {
        exp_a: c.share_exp_a,
        exp_b: c.share_exp_b,
        rhs,
    })
}

/// Roots of a [`ShareEquation`] and the one the leader picks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareSolution {
    pub share: f64,
    pub roots: Vec<f64>,
    /// `|lhs - rhs|` at `share`.
    pub residual: f64,
    /// `|lhs / rhs - 1|` at `share`.
    pub relative_residual: f64,
}

/// Scan points on `(eps, 1 - eps)`, log-spaced towards both endpoints, with
/// their logarithms and those of their complements.
struct ScanGrid {
    points: Vec<f64>,
    ln_x: Vec<f64>,
    ln_1mx: Vec<f64>,
}

fn scan_grid() -> &'static ScanGrid {
    static GRID: OnceLock<ScanGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let half = SHARE_SCAN_BRACKETS / 2;
        let ratio = (0.5 / SHARE_EPS).ln();
        let lower: Vec<f64> = (0..=half)
            .map(|k| SHARE_EPS * (ratio * k as f64 / half as f64).exp())
            .collect();
        let mut points = lower.clone();
        points.pop();
        points.push(0.5);
        points.extend(lower.iter().rev().skip(1).map(|x| 1.0 - x));
        ScanGrid {
            ln_x: points.iter().map(|x| x.ln()).collect(),
            ln_1mx: points.iter().map(|x| (1.0 - x).ln()).collect(),
            points,
        }
    })
}

/// Finds every root of the share equation and selects the one that maximizes
/// the platform payoff under the provider's price response.
pub fn solve_share(eq: &ShareEquation, p: &MarketParams) -> Result<ShareSolution> {
    if !(eq.rhs > 0.0 && eq.rhs.is_finite()) {
        return Err(ModelError::NoShareRoot);
    }
    let ln_rhs = eq.rhs.ln();
    let grid = scan_grid();
    let pts = &grid.points;
    let gaps: Vec<f64> = grid
        .ln_x
        .iter()
        .zip(&grid.ln_1mx)
        .map(|(lx, l1x)| eq.exp_a * lx + eq.exp_b * l1x - ln_rhs)
        .collect();

    let mut roots = Vec::new();
    for i in 0..pts.len() - 1 {
        let (g0, g1) = (gaps[i], gaps[i + 1]);
        if g0 == 0.0 {
            roots.push(pts[i]);
        } else if g1 != 0.0 && (g0 < 0.0) != (g1 < 0.0) {
            let root = bisect(
                |x| eq.log_gap(x, ln_rhs),
                pts[i],
                pts[i + 1],
                0.0,
                MAX_BISECTION_STEPS,
            )?;
            roots.push(root);
        }
    }
    if *gaps.last().unwrap() == 0.0 {
        roots.push(*pts.last().unwrap());
    }

    let share = match roots.len() {
        0 => return Err(ModelError::NoShareRoot),
        1 => roots[0],
        _ => {
            let value = |x: f64| {
                provider_best_price(x, p)
                    .and_then(|price| cloud_payoff(price, x, p))
                    .unwrap_or(f64::NEG_INFINITY)
            };
            roots
                .iter()
                .copied()
                .fold((f64::NAN, f64::NEG_INFINITY), |best, x| {
                    let v = value(x);
                    if v > best.1 || best.0.is_nan() {
                        (x, v)
                    } else {
                        best
                    }
                })
                .0
        }
    };
    let residual = eq.residual(share).abs();
    Ok(ShareSolution {
        share,
        residual,
        relative_residual: residual / eq.rhs,
        roots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    /// At least one best-response condition fails.
    ConditionsViolated,
    /// Conditions hold but the share equation has no root in `(0, 1)`.
    NoShareRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub price_star: f64,
    pub share_star: f64,
    pub demand: f64,
    pub supply: f64,
    pub provider_payoff: f64,
    pub cloud_payoff: f64,
    /// Absolute residual of the share equation at `share_star`.
    pub residual: f64,
    /// The same residual relative to the equation's right-hand side.
    pub relative_residual: f64,
}

impl EquilibriumPoint {
    pub fn state(&self) -> MarketState {
        MarketState {
            price: self.price_star,
            share: self.share_star,
            demand: self.demand,
            supply: self.supply,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub status: SolveStatus,
    pub feasibility: FeasibilityReport,
    pub share_roots_found: usize,
    pub point: Option<EquilibriumPoint>,
}

impl EquilibriumResult {
    pub fn is_feasible(&self) -> bool {
        self.point.is_some()
    }

    fn infeasible(status: SolveStatus, feasibility: FeasibilityReport) -> Self {
        EquilibriumResult {
            status,
            feasibility,
            share_roots_found: 0,
            point: None,
        }
    }
}

/// Solves the game by backward induction.
///
/// Invalid parameters are an error; violated best-response conditions and a
/// rootless share equation are reported through [`SolveStatus`].
pub fn stackelberg_solve(p: &MarketParams) -> Result<EquilibriumResult> {
    p.validate()?;
    let feasibility = check_feasibility(p);
    if !feasibility.all_ok {
        return Ok(EquilibriumResult::infeasible(
            SolveStatus::ConditionsViolated,
            feasibility,
        ));
    }
    let eq = build_share_equation(p)?;
    let solution = match solve_share(&eq, p) {
        Ok(s) => s,
        Err(ModelError::NoShareRoot) => {
            return Ok(EquilibriumResult::infeasible(
                SolveStatus::NoShareRoot,
                feasibility,
            ))
        }
        Err(e) => return Err(e),
    };
    let share = solution.share;
    let price = provider_best_price(share, p)?;
    Ok(EquilibriumResult {
        status: SolveStatus::Solved,
        feasibility,
        share_roots_found: solution.roots.len(),
        point: Some(EquilibriumPoint {
            price_star: price,
            share_star: share,
            demand: demand_reduced(price, share, p)?,
            supply: supply_reduced(price, share, p)?,
            provider_payoff: provider_payoff(price, share, p)?,
            cloud_payoff: cloud_payoff(price, share, p)?,
            residual: solution.residual,
            relative_residual: solution.relative_residual,
        }),
    })
}

/// Approximate equilibrium found by nested grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEquilibrium {
    pub price: f64,
    pub share: f64,
    /// Spacing of the share grid.
    pub share_step: f64,
    /// Relative spacing of the fine price grid.
    pub price_rel_step: f64,
}

pub const ORACLE_SHARE_LO: f64 = 0.01;
pub const ORACLE_SHARE_HI: f64 = 0.99;
/// Coarse price scan covers `[floor, floor * 10^(COARSE_DECADES)]` at quarter decades.
const COARSE_DECADES: usize = 12;
const COARSE_PER_DECADE: usize = 4;

/// Provider's payoff-maximizing price at a fixed share by grid search.
///
/// Only prices with a positive margin are candidates; the search runs over a
/// quarter-decade coarse scan followed by a `grid_n` point log grid spanning
/// the two coarse cells around the coarse maximum.
pub fn grid_best_price(share: f64, p: &MarketParams, grid_n: usize) -> (f64, f64) {
    let c = p.coefficients();
    let slope = c.a1 / c.a2;
    let keep = 1.0 - share;
    // log of the provider payoff up to a share-only constant
    let objective = |price: f64| {
        let margin = price * keep - p.f_c;
        if margin <= 0.0 {
            f64::NEG_INFINITY
        } else {
            margin.ln() - slope * price.ln()
        }
    };
    let floor = (p.f_c / keep).max(1e-9);
    let coarse_n = COARSE_DECADES * COARSE_PER_DECADE;
    let cell = 10f64.powf(1.0 / COARSE_PER_DECADE as f64);
    let mut best_j = 0;
    let mut best_v = f64::NEG_INFINITY;
    for j in 0..=coarse_n {
        let v = objective(floor * cell.powi(j as i32));
        if v > best_v {
            best_v = v;
            best_j = j;
        }
    }
    let lo = floor * cell.powi(best_j.saturating_sub(1) as i32);
    let hi = floor * cell.powi((best_j + 1).min(coarse_n) as i32);
    let ratio = (hi / lo).powf(1.0 / (grid_n - 1) as f64);
    let mut best_price = lo;
    let mut best_v = f64::NEG_INFINITY;
    let mut price = lo;
    for _ in 0..grid_n {
        let v = objective(price);
        if v > best_v {
            best_v = v;
            best_price = price;
        }
        price *= ratio;
    }
    (best_price, ratio - 1.0)
}

/// Brute-force equilibrium: grid over shares, follower price by grid search,
/// leader share by grid argmax of its payoff under that response.
pub fn oracle_equilibrium(p: &MarketParams, grid_n: usize) -> Result<OracleEquilibrium> {
    p.validate()?;
    if grid_n < 100 {
        return Err(ModelError::InvalidSpec(format!(
            "oracle grid needs at least 100 points, got {grid_n}"
        )));
    }
    let step = (ORACLE_SHARE_HI - ORACLE_SHARE_LO) / (grid_n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, ORACLE_SHARE_LO, f64::NAN, 0.0);
    for i in 0..grid_n {
        let share = ORACLE_SHARE_LO + step * i as f64;
        let (price, rel_step) = grid_best_price(share, p, grid_n);
        let value = cloud_payoff(price, share, p)?;
        if value > best.0 {
            best = (value, share, price, rel_step);
        }
    }
    Ok(OracleEquilibrium {
        price: best.2,
        share: best.1,
        share_step: step,
        price_rel_step: best.3,
    })
}

/// Scale-free first-order residuals at a candidate optimum.
///
/// Each derivative is multiplied by the player's own choice and divided by
/// its gross revenue, so a payoff that nets two large terms to nearly zero
/// does not amplify rounding error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderReport {
    /// `|d pi_i / d P| * P / (P (1 - share) D_c)`
    pub provider_relative: f64,
    /// `|d pi / d share| * share / (P share D_c)`, price held fixed.
    pub cloud_relative: f64,
}

impl FirstOrderReport {
    pub fn max(&self) -> f64 {
        self.provider_relative.max(self.cloud_relative)
    }
}

pub fn first_order_check(p: &MarketParams, at: &MarketState) -> Result<FirstOrderReport> {
    let provider = |price: f64| provider_payoff(price, at.share, p).unwrap_or(f64::NAN);
    let cloud = |share: f64| cloud_payoff(at.price, share, p).unwrap_or(f64::NAN);
    let demand = demand_reduced(at.price, at.share, p)?;
    let provider_scale = at.price * (1.0 - at.share) * demand;
    let cloud_scale = at.price * at.share * demand;
    let provider_relative =
        (central_diff(provider, at.price, FIRST_DIFF_STEP) * at.price / provider_scale).abs();
    let cloud_relative =
        (central_diff(cloud, at.share, FIRST_DIFF_STEP) * at.share / cloud_scale).abs();
    if !(provider_relative.is_finite() && cloud_relative.is_finite()) {
        return Err(domain(
            "first_order_check",
            format!("state {at:?} is outside the payoff domain or has no revenue"),
        ));
    }
    Ok(FirstOrderReport {
        provider_relative,
        cloud_relative,
    })
}

/// Second-order diagnostics at a candidate optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderReport {
    /// Central second difference of the provider payoff in price.
    pub provider_curvature: f64,
    /// Central second difference of the platform payoff in share, price held fixed.
    pub cloud_curvature: f64,
    pub provider_numeric_max: bool,
    pub cloud_numeric_max: bool,
    /// `1 - a1/a2 < 0`
    pub provider_analytic_max: bool,
    /// `a4 + a2 - phi < 0`
    pub cloud_analytic_max: bool,
    /// Numeric and analytic signs coincide for both players.
    pub agreement: bool,
}

pub fn second_order_check(p: &MarketParams, at: &MarketState) -> Result<SecondOrderReport> {
    let c = p.coefficients();
    let provider_curvature = central_second_diff(
        |price| provider_payoff(price, at.share, p).unwrap_or(f64::NAN),
        at.price,
        SECOND_DIFF_STEP,
    );
    let cloud_curvature = central_second_diff(
        |share| cloud_payoff(at.price, share, p).unwrap_or(f64::NAN),
        at.share,
        SECOND_DIFF_STEP,
    );
    if !(provider_curvature.is_finite() && cloud_curvature.is_finite()) {
        return Err(domain(
            "second_order_check",
            format!("state {at:?} is outside the payoff domain"),
        ));
    }
    let provider_numeric_max = provider_curvature < 0.0;
    let cloud_numeric_max = cloud_curvature < 0.0;
    let provider_analytic_max = 1.0 - c.a1 / c.a2 < 0.0;
    let cloud_analytic_max = c.a4 + c.a2 - p.phi < 0.0;
    Ok(SecondOrderReport {
        provider_curvature,
        cloud_curvature,
        provider_numeric_max,
        cloud_numeric_max,
        provider_analytic_max,
        cloud_analytic_max,
        agreement: provider_numeric_max == provider_analytic_max
            && cloud_numeric_max == cloud_analytic_max,
    })
}
