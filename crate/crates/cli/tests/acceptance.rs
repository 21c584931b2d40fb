//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria are evaluated as stated and reported, not asserted; the target
//! fails only if a criterion cannot be evaluated at all.

use std::process::Command;
use std::time::{Duration, Instant};

use tsm_core::equilibrium::FIRST_DIFF_STEP;
use tsm_core::numeric::central_diff;
use tsm_core::scenarios::{rental_provider_payoff, rented_supply};
use tsm_core::sweep::{
    externality_grid, k1_grid, phi_grid, run_sweep, SweepAxis, SweepSeries, SweepSpec,
    DEFAULT_PHI_LEVELS, FIGURE_PRESETS, PRESET_MODE,
};
use tsm_core::verify::{run_verify, VerifyReport, VerifySpec};
use tsm_core::{sample_population, MarketParams, PopulationSpec, Scenario};

const VERIFY_THREADS: usize = 4;
const RUNTIME_LIMIT: Duration = Duration::from_secs(60);
const FOC_TOL: f64 = 1e-6;
const SPEARMAN_MAX: f64 = -0.8;
const TREND_FROM: f64 = 0.3;
const SHARE_RISE_MIN: f64 = 0.15;
const PROVIDER_RISE_MAX: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, o: &Outcome, failures: &mut Vec<u32>) {
    println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    if !o.pass {
        failures.push(id);
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

fn sweep(axis: SweepAxis, grid: Vec<f64>, phi_levels: &[f64], scenarios: &[Scenario]) -> Vec<SweepSeries> {
    let spec = SweepSpec {
        phi_levels: phi_levels.to_vec(),
        scenarios: scenarios.to_vec(),
        mode: PRESET_MODE,
        ..SweepSpec::new(axis, grid)
    };
    run_sweep(&spec).expect("sweep runs")
}

/// `(axis value, metric)` for one scenario and level; `None` metrics become NaN.
fn series(
    rows: &[SweepSeries],
    scenario: Scenario,
    phi: f64,
    metric: fn(&SweepSeries) -> Option<f64>,
) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|s| s.scenario == scenario && s.phi_level == phi)
        .map(|s| (s.axis_value, metric(s).unwrap_or(f64::NAN)))
        .collect()
}

type Metric = (&'static str, fn(&SweepSeries) -> Option<f64>);

const SURPLUSES: [Metric; 3] = [
    ("cloud_payoff", |s| s.mean_cloud_payoff),
    ("provider_payoff", |s| s.mean_provider_payoff),
    ("demand", |s| s.mean_demand),
];

fn num(v: f64) -> String {
    format!("{v:.6e}")
}

fn oracle_equivalence(verify: &VerifyReport, elapsed: Duration) -> Outcome {
    let share = verify.property("oracle_share").expect("oracle_share");
    let price = verify.property("oracle_price").expect("oracle_price");
    let pass = share.passed() && price.passed() && elapsed <= RUNTIME_LIMIT && share.checked >= 500;
    Outcome {
        pass,
        detail: format!(
            "draws={} share mismatches={} (worst {} steps, tol {}), price mismatches={} (worst {} steps, tol {}), runtime={:.1}s at {VERIFY_THREADS} threads (limit {}s)",
            share.checked,
            share.failed,
            num(share.worst),
            share.tolerance,
            price.failed,
            num(price.worst),
            price.tolerance,
            elapsed.as_secs_f64(),
            RUNTIME_LIMIT.as_secs()
        ),
    }
}

fn foc_soc(verify: &VerifyReport) -> Outcome {
    let foc = verify.property("first_order").expect("first_order");
    let soc = verify.property("second_order").expect("second_order");
    Outcome {
        pass: foc.passed() && soc.passed() && foc.checked == verify.feasible_draws && foc.checked > 0,
        detail: format!(
            "equilibria={} foc failures={} worst relative={} (tol {}), soc failures={}",
            foc.checked,
            foc.failed,
            num(foc.worst),
            foc.tolerance,
            soc.failed
        ),
    }
}

fn fixed_point(verify: &VerifyReport) -> Outcome {
    let fp = verify.property("fixed_point").expect("fixed_point");
    Outcome {
        pass: fp.passed() && fp.checked >= 10_000 + verify.feasible_draws,
        detail: format!(
            "pairs checked={} (random plus equilibria) unrepresentable skipped={} failures={} worst relative={} (tol {})",
            fp.checked,
            verify.unrepresentable_pairs,
            fp.failed,
            num(fp.worst),
            fp.tolerance
        ),
    }
}

fn pay_as_you_go_foc() -> Outcome {
    let population = sample_population(&PopulationSpec {
        n_providers: 1000,
        ..PopulationSpec::default()
    })
    .expect("population");
    let mut checked = 0;
    let mut failed = 0;
    let mut worst = 0.0f64;
    for provider in &population {
        let p = provider.params;
        let price = provider.declared_price;
        let Some(supply) = rented_supply(price, &p) else {
            failed += 1;
            continue;
        };
        let payoff = |s: f64| rental_provider_payoff(price, s, &p).expect("payoff");
        let rel = (central_diff(payoff, supply, FIRST_DIFF_STEP) / p.p_s).abs();
        worst = worst.max(rel);
        checked += 1;
        if rel.is_nan() || rel > FOC_TOL {
            failed += 1;
        }
    }
    let closed = MarketParams {
        alpha: 0.5,
        beta: 0.0,
        gamma: 0.0,
        psi: 0.0,
        phi: 1.0,
        k1: 1.0,
        k2: 1.0,
        f_c: 1.0,
        f_s: 0.0,
        p_s: 1.0,
    };
    let closed_supply = rented_supply(2.0, &closed).expect("closed case");
    Outcome {
        pass: failed == 0 && checked == 1000 && closed_supply == 0.25,
        detail: format!(
            "draws={checked} failures={failed} worst relative={} (tol {FOC_TOL}), closed case supply={closed_supply} (want 0.25)",
            num(worst)
        ),
    }
}

fn externality_trend(rows: &[SweepSeries]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for &phi in &DEFAULT_PHI_LEVELS {
        for (name, metric) in SURPLUSES {
            let tail: Vec<_> = series(rows, Scenario::TwoSided, phi, metric)
                .into_iter()
                .filter(|(x, _)| *x >= TREND_FROM - 1e-9)
                .collect();
            let rho = if tail.iter().any(|(_, y)| y.is_nan()) {
                f64::NAN
            } else {
                let (x, y): (Vec<f64>, Vec<f64>) = tail.into_iter().unzip();
                spearman(&x, &y)
            };
            if rho.is_nan() || rho > worst {
                worst = if rho.is_nan() { f64::NAN } else { rho };
            }
            parts.push(format!("phi={phi} {name} rho={rho:.3}"));
        }
    }
    let pass = worst <= SPEARMAN_MAX;
    Outcome {
        pass,
        detail: format!("max spearman={worst:.3} (need <= {SPEARMAN_MAX}); {}", parts.join(", ")),
    }
}

fn phi_ordering(rows: &[SweepSeries]) -> Outcome {
    let at = |scenario: Scenario, phi: f64| {
        rows.iter()
            .find(|s| s.scenario == scenario && s.phi_level == phi && s.axis_value == 0.2)
            .and_then(|s| s.mean_cloud_payoff)
            .unwrap_or(f64::NAN)
    };
    let v5 = at(Scenario::TwoSided, 5.0);
    let v2 = at(Scenario::TwoSided, 2.0);
    let v15 = at(Scenario::TwoSided, 1.5);
    let payg = at(Scenario::PayAsYouGo, 1.5);
    Outcome {
        pass: v5 > v2 && v2 > v15 && v15 > payg,
        detail: format!(
            "mean cloud payoff at alpha*beta=0.2: phi=5 {}, phi=2 {}, phi=1.5 {}, pay-as-you-go {}",
            num(v5),
            num(v2),
            num(v15),
            num(payg)
        ),
    }
}

fn share_monotonicity(rows: &[SweepSeries]) -> Outcome {
    let s = series(rows, Scenario::TwoSided, 1.5, |s| s.mean_share);
    let strictly = s.windows(2).all(|w| w[1].1 > w[0].1);
    let at = |x: f64| s.iter().find(|(v, _)| *v == x).map(|p| p.1).unwrap_or(f64::NAN);
    let rise = at(0.6) - at(0.3);
    let values: Vec<_> = s.iter().map(|(x, y)| format!("{x}:{y:.4}")).collect();
    Outcome {
        pass: strictly && rise >= SHARE_RISE_MIN,
        detail: format!(
            "strictly increasing={strictly}, rise 0.3->0.6={rise:.4} (need >= {SHARE_RISE_MIN}); {}",
            values.join(" ")
        ),
    }
}

fn phi_shape() -> Outcome {
    let rows = sweep(SweepAxis::Phi, phi_grid(), &[], &[Scenario::TwoSided]);
    let pick = |m: fn(&SweepSeries) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().map(|s| (s.axis_value, m(s).unwrap_or(f64::NAN))).collect()
    };
    let provider = pick(|s| s.mean_provider_payoff);
    let cloud = pick(|s| s.mean_cloud_payoff);

    let low: Vec<_> = provider.iter().filter(|(x, _)| *x < 1.0).collect();
    let rising_low = low.windows(2).all(|w| w[1].1 > w[0].1);

    let high: Vec<_> = provider.iter().filter(|(x, _)| *x > 1.0).collect();
    let mut max_rise = f64::NEG_INFINITY;
    for (i, a) in high.iter().enumerate() {
        for b in &high[i + 1..] {
            max_rise = max_rise.max((b.1 - a.1) / a.1.abs());
        }
    }
    let flat_high = max_rise <= PROVIDER_RISE_MAX;

    let cloud_high: Vec<_> = cloud.iter().filter(|(x, _)| *x > 1.0).collect();
    let cloud_rising = cloud_high.windows(2).all(|w| w[1].1 > w[0].1);
    let first_drop = cloud_high.windows(2).find(|w| w[1].1 <= w[0].1).map(|w| w[1].0);

    Outcome {
        pass: rising_low && flat_high && cloud_rising,
        detail: format!(
            "provider rising on (0,1)={rising_low}, provider max relative rise on (1,5]={max_rise:.4} (limit {PROVIDER_RISE_MAX}), cloud rising on (1,5]={cloud_rising}{}",
            first_drop.map(|x| format!(" (first non-increase at phi={x})")).unwrap_or_default()
        ),
    }
}

fn k1_monotonicity() -> Outcome {
    let rows = sweep(SweepAxis::K1, k1_grid(), &DEFAULT_PHI_LEVELS, &[Scenario::TwoSided]);
    let mut broken = Vec::new();
    for &phi in &DEFAULT_PHI_LEVELS {
        for (name, metric) in SURPLUSES {
            let s = series(&rows, Scenario::TwoSided, phi, metric);
            if !s.windows(2).all(|w| w[1].1 >= w[0].1) {
                broken.push(format!("phi={phi} {name}"));
            }
        }
    }
    Outcome {
        pass: broken.is_empty(),
        detail: if broken.is_empty() {
            format!("all {} series non-decreasing", DEFAULT_PHI_LEVELS.len() * 3)
        } else {
            format!("decreasing somewhere: {}", broken.join(", "))
        },
    }
}

fn tsm_sweep(preset: &str, threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_tsm"))
        .args(["sweep", "--preset", preset, "--seed", "2020"])
        .env("TSM_THREADS", threads)
        .output()
        .expect("tsm runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    let mut bytes = 0;
    for preset in FIGURE_PRESETS {
        let a = tsm_sweep(preset, "1");
        let b = tsm_sweep(preset, "4");
        bytes += a.len();
        if a != b {
            differing.push(preset);
        }
    }
    Outcome {
        pass: differing.is_empty(),
        detail: format!(
            "{} presets, {bytes} bytes compared at TSM_THREADS=1 vs 4, differing: {}",
            FIGURE_PRESETS.len(),
            if differing.is_empty() { "none".to_string() } else { differing.join(",") }
        ),
    }
}

fn main() {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(VERIFY_THREADS)
        .build()
        .expect("thread pool");
    let start = Instant::now();
    let verify = pool.install(|| run_verify(&VerifySpec::default())).expect("verify runs");
    let elapsed = start.elapsed();

    let externality = sweep(
        SweepAxis::AlphaBetaProduct,
        externality_grid(),
        &DEFAULT_PHI_LEVELS,
        &Scenario::ALL,
    );

    let mut failures = Vec::new();
    report(1, "oracle equivalence", &oracle_equivalence(&verify, elapsed), &mut failures);
    report(2, "first/second-order conditions", &foc_soc(&verify), &mut failures);
    report(3, "fixed point", &fixed_point(&verify), &mut failures);
    report(4, "pay-as-you-go supply", &pay_as_you_go_foc(), &mut failures);
    report(5, "externality trend", &externality_trend(&externality), &mut failures);
    report(6, "phi ordering", &phi_ordering(&externality), &mut failures);
    report(7, "share monotonicity", &share_monotonicity(&externality), &mut failures);
    report(8, "phi shape", &phi_shape(), &mut failures);
    report(9, "k1 monotonicity", &k1_monotonicity(), &mut failures);
    report(10, "determinism", &determinism(), &mut failures);
    println!(
        "acceptance: {} of 10 criteria pass{}",
        10 - failures.len(),
        if failures.is_empty() {
            String::new()
        } else {
            format!("; failing: {failures:?}")
        }
    );
}
