//! Browser bindings: a single-game solver and two population curves.
//!
//! Each export takes plain numbers and returns a JSON string; the work is done
//! by ordinary Rust functions that the native tests call directly.

use serde::Serialize;
use tsm_core::sweep::{externality_grid, phi_grid, run_sweep, SweepAxis, SweepSeries, PRESET_MODE};
use tsm_core::{
    stackelberg_solve, EquilibriumResult, MarketParams, ModelError, PopulationSpec, Scenario,
    SweepSpec,
};
use wasm_bindgen::prelude::*;

/// Keeps a sweep responsive on the page's main thread.
pub const MAX_PROVIDERS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub share: Option<f64>,
    pub cloud_payoff: Option<f64>,
    pub provider_payoff: Option<f64>,
    pub demand: Option<f64>,
    pub pay_as_you_go_cloud_payoff: Option<f64>,
    pub feasible: usize,
}

/// Solves one game; `k2`, `f_s` and `p_s` take the population defaults.
#[allow(clippy::too_many_arguments)]
pub fn equilibrium(
    alpha: f64,
    beta: f64,
    gamma: f64,
    psi: f64,
    phi: f64,
    k1: f64,
    f_c: f64,
) -> Result<EquilibriumResult, ModelError> {
    let d = PopulationSpec::default();
    let params = MarketParams {
        alpha,
        beta,
        gamma,
        psi,
        phi,
        k1,
        k2: d.k2,
        f_c,
        f_s: d.f_s,
        p_s: d.p_s,
    };
    params.validate()?;
    stackelberg_solve(&params)
}

fn population(n_providers: usize, seed: u64) -> Result<PopulationSpec, ModelError> {
    if n_providers == 0 || n_providers > MAX_PROVIDERS {
        return Err(ModelError::InvalidSpec(format!(
            "n_providers must be in 1..={MAX_PROVIDERS}, got {n_providers}"
        )));
    }
    Ok(PopulationSpec {
        n_providers,
        seed,
        ..PopulationSpec::default()
    })
}

fn curve(spec: SweepSpec) -> Result<Vec<CurvePoint>, ModelError> {
    let rows = run_sweep(&spec)?;
    let two_sided = rows.iter().filter(|s| s.scenario == Scenario::TwoSided);
    Ok(two_sided
        .map(|s: &SweepSeries| {
            let rental = rows.iter().find(|r| {
                r.scenario == Scenario::PayAsYouGo
                    && r.axis_value == s.axis_value
                    && r.phi_level == s.phi_level
            });
            CurvePoint {
                x: s.axis_value,
                share: s.mean_share,
                cloud_payoff: s.mean_cloud_payoff,
                provider_payoff: s.mean_provider_payoff,
                demand: s.mean_demand,
                pay_as_you_go_cloud_payoff: rental.and_then(|r| r.mean_cloud_payoff),
                feasible: s.feasible_count,
            }
        })
        .collect())
}

/// Population means over the externality grid at one subsidizing factor.
pub fn externality_curve(n_providers: usize, seed: u64, phi: f64) -> Result<Vec<CurvePoint>, ModelError> {
    curve(SweepSpec {
        phi_levels: vec![phi],
        scenarios: vec![Scenario::TwoSided, Scenario::PayAsYouGo],
        mode: PRESET_MODE,
        population: population(n_providers, seed)?,
        ..SweepSpec::new(SweepAxis::AlphaBetaProduct, externality_grid())
    })
}

/// Population means over the subsidizing-factor grid.
pub fn phi_curve(n_providers: usize, seed: u64) -> Result<Vec<CurvePoint>, ModelError> {
    curve(SweepSpec {
        scenarios: vec![Scenario::TwoSided, Scenario::PayAsYouGo],
        mode: PRESET_MODE,
        population: population(n_providers, seed)?,
        ..SweepSpec::new(SweepAxis::Phi, phi_grid())
    })
}

fn json<T: Serialize>(r: Result<T, ModelError>) -> Result<String, String> {
    let v = r.map_err(|e| e.to_string())?;
    serde_json::to_string(&v).map_err(|e| e.to_string())
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = solveEquilibrium)]
pub fn solve_equilibrium_js(
    alpha: f64,
    beta: f64,
    gamma: f64,
    psi: f64,
    phi: f64,
    k1: f64,
    f_c: f64,
) -> Result<String, String> {
    json(equilibrium(alpha, beta, gamma, psi, phi, k1, f_c))
}

#[wasm_bindgen(js_name = externalityCurve)]
pub fn externality_curve_js(n_providers: usize, seed: u32, phi: f64) -> Result<String, String> {
    json(externality_curve(n_providers, seed as u64, phi))
}

#[wasm_bindgen(js_name = phiCurve)]
pub fn phi_curve_js(n_providers: usize, seed: u32) -> Result<String, String> {
    json(phi_curve(n_providers, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_the_feasible_fixture() {
        let res = equilibrium(0.5, 1.8, 0.3, 0.1, 2.0, 0.9, 0.1).unwrap();
        let pt = res.point.unwrap();
        assert!(pt.share_star > 0.0 && pt.share_star < 1.0);
        let text = solve_equilibrium_js(0.5, 1.8, 0.3, 0.1, 2.0, 0.9, 0.1).unwrap();
        assert!(text.contains("\"share_star\""));
    }

    #[test]
    fn infeasible_games_serialize_without_a_point() {
        let text = solve_equilibrium_js(0.5, 1.8, 0.1, 0.1, 2.0, 0.9, 0.1).unwrap();
        assert!(text.contains("\"point\":null"));
        assert!(solve_equilibrium_js(1.5, 0.1, 0.3, 0.1, 2.0, 0.9, 0.1).is_err());
    }

    #[test]
    fn externality_curve_follows_the_grid() {
        let pts = externality_curve(20, 7, 1.5).unwrap();
        assert_eq!(pts.len(), externality_grid().len());
        assert!(pts.iter().all(|p| p.pay_as_you_go_cloud_payoff.is_some()));
        let shares: Vec<f64> = pts.iter().filter_map(|p| p.share).collect();
        assert!(shares.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn phi_curve_covers_levels_and_is_deterministic() {
        let a = phi_curve(10, 3).unwrap();
        assert_eq!(a.len(), phi_grid().len());
        assert_eq!(a, phi_curve(10, 3).unwrap());
        assert!(phi_curve_js(0, 3).is_err());
        assert!(phi_curve_js(MAX_PROVIDERS + 1, 3).is_err());
    }
}
