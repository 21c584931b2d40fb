//! Model parameters and the quantities derived from them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Upper bound on the cross-group externality product `alpha * beta`.
///
/// `1 / (1 - alpha * beta)` appears as an exponent in the reduced forms, so the
/// product is kept strictly away from one.
pub const MAX_EXTERNALITY_PRODUCT: f64 = 0.999;

/// Default price elasticity of infrastructure supply.
pub const DEFAULT_PSI: f64 = 0.1;

/// Full parameterization of one provider / platform pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Externality of supply on consumer demand.
    pub alpha: f64,
    /// Externality of consumer demand on supply.
    pub beta: f64,
    /// Price elasticity of consumer demand.
    pub gamma: f64,
    /// Price elasticity of infrastructure supply.
    pub psi: f64,
    /// Elasticity of supply with respect to the revenue share (subsidizing factor).
    pub phi: f64,
    /// Demand multiplier.
    pub k1: f64,
    /// Supply multiplier.
    pub k2: f64,
    /// Provider cost per consumer access, USD/hour.
    pub f_c: f64,
    /// Platform cost per infrastructure unit, USD/hour.
    pub f_s: f64,
    /// Pay-as-you-go rental rate, USD/hour.
    pub p_s: f64,
}

impl MarketParams {
    /// Checks every structural invariant and returns the params unchanged on success.
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("psi", self.psi),
            ("phi", self.phi),
            ("k1", self.k1),
            ("k2", self.k2),
            ("f_c", self.f_c),
            ("f_s", self.f_s),
            ("p_s", self.p_s),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(invalid(field, format!("must be finite, got {value}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.beta < 0.0 {
            return Err(invalid("beta", format!("must be non-negative, got {}", self.beta)));
        }
        let product = self.alpha * self.beta;
        if product >= MAX_EXTERNALITY_PRODUCT {
            return Err(invalid(
                "beta",
                format!("alpha*beta = {product} must stay below {MAX_EXTERNALITY_PRODUCT}"),
            ));
        }
        for (field, value) in [
            ("gamma", self.gamma),
            ("psi", self.psi),
            ("phi", self.phi),
            ("f_c", self.f_c),
            ("f_s", self.f_s),
        ] {
            if value < 0.0 {
                return Err(invalid(field, format!("must be non-negative, got {value}")));
            }
        }
        for (field, value) in [("k1", self.k1), ("k2", self.k2), ("p_s", self.p_s)] {
            if value <= 0.0 {
                return Err(invalid(field, format!("must be strictly positive, got {value}")));
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients::from_params(self)
    }
}

fn invalid(field: &'static str, reason: String) -> ModelError {
    ModelError::InvalidParams { field, reason }
}

/// Composite exponents shared by the reduced forms and the best responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    /// `gamma - alpha * psi`
    pub a1: f64,
    /// `1 - alpha * beta`
    pub a2: f64,
    /// `psi - gamma * beta`
    pub a3: f64,
    /// `alpha * phi`
    pub a4: f64,
    /// Exponent on the share in the leader's stationarity equation.
    pub share_exp_a: f64,
    /// Exponent on `1 - share` in the leader's stationarity equation.
    pub share_exp_b: f64,
}

impl Coefficients {
    pub fn from_params(p: &MarketParams) -> Self {
        let a1 = p.gamma - p.alpha * p.psi;
        let a2 = 1.0 - p.alpha * p.beta;
        let a3 = p.psi - p.gamma * p.beta;
        let a4 = p.alpha * p.phi;
        Coefficients {
            a1,
            a2,
            a3,
            a4,
            share_exp_a: (a4 - p.phi) / a2 + 1.0,
            share_exp_b: (a1 + a3) / a2 - 1.0,
        }
    }
}

/// A point in strategy space together with the induced volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub price: f64,
    pub share: f64,
    pub demand: f64,
    pub supply: f64,
}

/// Which of the best-response conditions hold for a parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `a1 / (a1 - a2) > 0`: the provider's best price is positive.
    pub f1_price_positive: bool,
    /// `a1 / a2 > 1`: the provider's stationary price is a maximum.
    pub f2_price_max: bool,
    /// `a4 + a2 - phi < 0`: the platform's stationary share is a maximum.
    pub f3_share_max: bool,
    pub all_ok: bool,
}

impl FeasibilityReport {
    pub fn new(f1: bool, f2: bool, f3: bool) -> Self {
        FeasibilityReport {
            f1_price_positive: f1,
            f2_price_max: f2,
            f3_share_max: f3,
            all_ok: f1 && f2 && f3,
        }
    }

    /// Names of the violated conditions.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.f1_price_positive {
            out.push("a1/(a1-a2) > 0");
        }
        if !self.f2_price_max {
            out.push("a1/a2 > 1");
        }
        if !self.f3_share_max {
            out.push("a4+a2-phi < 0");
        }
        out
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.all_ok {
            f.write_str("all conditions hold")
        } else {
            write!(f, "violated: {}", self.violations().join(", "))
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::MarketParams;

    /// Midpoint-style draw inside the simulation ranges.
    pub fn midpoint() -> MarketParams {
        MarketParams {
            alpha: 0.38,
            beta: 1.5,
            gamma: 0.2,
            psi: 0.05,
            phi: 1.5,
            k1: 0.5,
            k2: 1.0,
            f_c: 1.122,
            f_s: 23.7,
            p_s: 36.0,
        }
    }

    /// All three best-response conditions hold and the share equation has two roots.
    pub fn feasible() -> MarketParams {
        MarketParams {
            alpha: 0.5,
            beta: 1.8,
            gamma: 0.3,
            psi: 0.1,
            phi: 2.0,
            k1: 0.9,
            k2: 1.0,
            f_c: 0.1,
            f_s: 23.7,
            p_s: 36.0,
        }
    }
}
