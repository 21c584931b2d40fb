//! Stackelberg equilibria of a two-sided cloud data market.
//!
//! A cloud platform (leader) asks each data-service provider (follower) for a
//! share of its revenue; the provider answers with a consumer price. Demand
//! and infrastructure supply feed back on each other through cross-group
//! externalities. The crate solves that game, runs the two-sided, fifty-fifty
//! and pay-as-you-go business models over sampled provider populations, and
//! aggregates parameter sweeps.

// `!(x <= tol)` is used on purpose so NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod market;
pub mod numeric;
pub mod params;
pub mod population;
pub mod scenarios;
pub mod sweep;
pub mod verify;

pub use equilibrium::{
    build_share_equation, oracle_equilibrium, provider_best_price, second_order_check,
    solve_share, stackelberg_solve, EquilibriumPoint, EquilibriumResult, OracleEquilibrium,
    SecondOrderReport, ShareEquation, FirstOrderReport, first_order_check, ShareSolution, SolveStatus,
};
pub use error::{ModelError, Result};
pub use market::{
    check_feasibility, cloud_payoff, cloud_payoff_expanded, consumer_demand, demand_reduced,
    infrastructure_supply, provider_payoff, supply_reduced,
};
pub use params::{Coefficients, FeasibilityReport, MarketParams, MarketState};
pub use population::{sample_population, Dist, PopulationSpec, Provider};
pub use scenarios::{
    compare_scenarios, run_fifty_fifty, run_pay_as_you_go, run_scenario, run_two_sided, Scenario,
    ScenarioRecord, ScenarioSummary, TwoSidedMode,
};
pub use sweep::{
    figure_preset, run_sweep, sweep_externalities, sweep_gamma, sweep_k1, sweep_phi, SweepAxis,
    SweepSeries, SweepSpec,
};
pub use verify::{run_verify, PropertyOutcome, VerifyReport, VerifySpec};
