//! CSV serialization. Headers are fixed; floats use the shortest
//! representation that parses back to the same value.

use std::io::Write;

use tsm_core::{EquilibriumResult, MarketParams, ScenarioRecord, SweepSeries};

pub const SCENARIO_HEADER: [&str; 16] = [
    "provider_id",
    "scenario",
    "alpha",
    "beta",
    "gamma",
    "psi",
    "phi",
    "k1",
    "f_c",
    "price",
    "share",
    "demand",
    "supply",
    "provider_payoff",
    "cloud_payoff",
    "feasible",
];

pub const SWEEP_HEADER: [&str; 10] = [
    "axis",
    "axis_value",
    "scenario",
    "phi_level",
    "mean_cloud_payoff",
    "mean_provider_payoff",
    "mean_demand",
    "mean_supply",
    "mean_share",
    "feasible_count",
];

pub const EQUILIBRIUM_HEADER: [&str; 22] = [
    "status",
    "alpha",
    "beta",
    "gamma",
    "psi",
    "phi",
    "k1",
    "k2",
    "f_c",
    "f_s",
    "f1_price_positive",
    "f2_price_max",
    "f3_share_max",
    "share_roots_found",
    "price_star",
    "share_star",
    "demand",
    "supply",
    "provider_payoff",
    "cloud_payoff",
    "residual",
    "relative_residual",
];

/// Round-trip decimal; exponent notation only for very small or large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub fn write_scenarios<W: Write>(out: W, records: &[ScenarioRecord]) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(SCENARIO_HEADER)?;
    for r in records {
        let p = &r.params;
        w.write_record([
            r.provider_id.to_string(),
            r.scenario.tag().to_string(),
            num(p.alpha),
            num(p.beta),
            num(p.gamma),
            num(p.psi),
            num(p.phi),
            num(p.k1),
            num(p.f_c),
            num(r.price),
            opt(r.share),
            num(r.demand),
            num(r.supply),
            num(r.provider_payoff),
            num(r.cloud_payoff),
            r.feasible.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, series: &[SweepSeries]) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(SWEEP_HEADER)?;
    for s in series {
        w.write_record([
            s.axis.tag().to_string(),
            num(s.axis_value),
            s.scenario.tag().to_string(),
            num(s.phi_level),
            opt(s.mean_cloud_payoff),
            opt(s.mean_provider_payoff),
            opt(s.mean_demand),
            opt(s.mean_supply),
            opt(s.mean_share),
            s.feasible_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_equilibrium<W: Write>(
    out: W,
    p: &MarketParams,
    res: &EquilibriumResult,
) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(EQUILIBRIUM_HEADER)?;
    let status = match res.status {
        tsm_core::SolveStatus::Solved => "solved",
        tsm_core::SolveStatus::ConditionsViolated => "conditions_violated",
        tsm_core::SolveStatus::NoShareRoot => "no_share_root",
    };
    let pt = res.point;
    let f = res.feasibility;
    let mut row = vec![
        status.to_string(),
        num(p.alpha),
        num(p.beta),
        num(p.gamma),
        num(p.psi),
        num(p.phi),
        num(p.k1),
        num(p.k2),
        num(p.f_c),
        num(p.f_s),
        f.f1_price_positive.to_string(),
        f.f2_price_max.to_string(),
        f.f3_share_max.to_string(),
        res.share_roots_found.to_string(),
    ];
    row.extend(
        [
            pt.map(|x| x.price_star),
            pt.map(|x| x.share_star),
            pt.map(|x| x.demand),
            pt.map(|x| x.supply),
            pt.map(|x| x.provider_payoff),
            pt.map(|x| x.cloud_payoff),
            pt.map(|x| x.residual),
            pt.map(|x| x.relative_residual),
        ]
        .map(opt),
    );
    w.write_record(row)?;
    w.flush()?;
    Ok(())
}
