//! Demand, supply and payoff relations of the two-sided market.
//!
//! All power laws are evaluated in log space; see [`power_product`].

use crate::error::{domain, Result};
use crate::numeric::power_product;
use crate::params::{FeasibilityReport, MarketParams};

fn check_positive(op: &'static str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(op, format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_share(op: &'static str, share: f64) -> Result<()> {
    if share > 0.0 && share < 1.0 {
        Ok(())
    } else {
        Err(domain(op, format!("share must lie in (0, 1), got {share}")))
    }
}

/// Consumer demand `k1 * price^-gamma * supply^alpha`.
pub fn consumer_demand(price: f64, supply: f64, p: &MarketParams) -> Result<f64> {
    const OP: &str = "consumer_demand";
    check_positive(OP, "price", price)?;
    check_positive(OP, "supply", supply)?;
    Ok(power_product(p.k1, &[(price, -p.gamma), (supply, p.alpha)]))
}

/// Infrastructure supply `k2 * share^phi * price^psi * demand^beta`.
pub fn infrastructure_supply(share: f64, price: f64, demand: f64, p: &MarketParams) -> Result<f64> {
    const OP: &str = "infrastructure_supply";
    check_share(OP, share)?;
    check_positive(OP, "price", price)?;
    check_positive(OP, "demand", demand)?;
    Ok(power_product(
        p.k2,
        &[(share, p.phi), (price, p.psi), (demand, p.beta)],
    ))
}

/// Demand once supply has been substituted out: a function of price and share only.
pub fn demand_reduced(price: f64, share: f64, p: &MarketParams) -> Result<f64> {
    const OP: &str = "demand_reduced";
    check_positive(OP, "price", price)?;
    check_share(OP, share)?;
    let c = p.coefficients();
    let inv = 1.0 / c.a2;
    Ok(power_product(
        1.0,
        &[
            (p.k1, inv),
            (p.k2, p.alpha * inv),
            (price, -c.a1 * inv),
            (share, c.a4 * inv),
        ],
    ))
}

/// Supply once demand has been substituted out: a function of price and share only.
pub fn supply_reduced(price: f64, share: f64, p: &MarketParams) -> Result<f64> {
    const OP: &str = "supply_reduced";
    check_positive(OP, "price", price)?;
    check_share(OP, share)?;
    let c = p.coefficients();
    let inv = 1.0 / c.a2;
    Ok(power_product(
        1.0,
        &[
            (p.k2, inv),
            (p.k1, p.beta * inv),
            (price, c.a3 * inv),
            (share, p.phi * inv),
        ],
    ))
}

/// Provider payoff `(price * (1 - share) - f_c) * demand`. Negative margins are kept.
pub fn provider_payoff(price: f64, share: f64, p: &MarketParams) -> Result<f64> {
    let demand = demand_reduced(price, share, p)?;
    Ok((price * (1.0 - share) - p.f_c) * demand)
}

/// Platform payoff `price * share * demand - f_s * supply`.
pub fn cloud_payoff(price: f64, share: f64, p: &MarketParams) -> Result<f64> {
    let demand = demand_reduced(price, share, p)?;
    let supply = supply_reduced(price, share, p)?;
    Ok(price * share * demand - p.f_s * supply)
}

/// Platform payoff written out as two monomials in price and share.
///
/// Algebraically identical to [`cloud_payoff`]; evaluated with plain `powf` so
/// that the two forms can be checked against each other.
pub fn cloud_payoff_expanded(price: f64, share: f64, p: &MarketParams) -> Result<f64> {
    const OP: &str = "cloud_payoff_expanded";
    check_positive(OP, "price", price)?;
    check_share(OP, share)?;
    let c = p.coefficients();
    let revenue = (p.k1 * p.k2.powf(p.alpha)).powf(1.0 / c.a2)
        * price.powf(1.0 - c.a1 / c.a2)
        * share.powf(c.a4 / c.a2 + 1.0);
    let cost = p.f_s
        * (p.k2 * p.k1.powf(p.beta)).powf(1.0 / c.a2)
        * price.powf(c.a3 / c.a2)
        * share.powf(p.phi / c.a2);
    Ok(revenue - cost)
}

/// Evaluates the three conditions under which the closed-form best responses are maxima.
pub fn check_feasibility(p: &MarketParams) -> FeasibilityReport {
    let c = p.coefficients();
    let denom = c.a1 - c.a2;
    let f1 = denom != 0.0 && c.a1 / denom > 0.0;
    let f2 = c.a1 / c.a2 > 1.0;
    let f3 = c.a4 + c.a2 - p.phi < 0.0;
    FeasibilityReport::new(f1, f2, f3)
}
