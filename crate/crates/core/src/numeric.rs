//! Small numerical kernels shared by the model code.

use crate::error::{ModelError, Result};

/// `scale * prod(base_i ^ exp_i)` evaluated as `exp(ln scale + sum exp_i * ln base_i)`.
///
/// Every base must be strictly positive.
#[inline]
pub fn power_product(scale: f64, terms: &[(f64, f64)]) -> f64 {
    log_power_product(scale, terms).exp()
}

#[inline]
pub fn log_power_product(scale: f64, terms: &[(f64, f64)]) -> f64 {
    terms
        .iter()
        .fold(scale.ln(), |acc, &(base, exp)| acc + exp * base.ln())
}

/// Bisection on a bracket `[lo, hi]` whose endpoints have opposite signs.
///
/// Stops once the bracket is no wider than `tol` or the midpoint can no longer
/// be separated from an endpoint in floating point.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, max_steps: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    for _ in 0..max_steps {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(ModelError::NonConvergence { steps: max_steps })
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Central first difference with a step relative to `x`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, rel_step: f64) -> f64 {
    let h = rel_step * x.abs().max(f64::MIN_POSITIVE);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central second difference with a step relative to `x`.
pub fn central_second_diff<F: Fn(f64) -> f64>(f: F, x: f64, rel_step: f64) -> f64 {
    let h = rel_step * x.abs().max(f64::MIN_POSITIVE);
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_product_matches_powf() {
        let v = power_product(2.0, &[(3.0, 1.5), (0.25, -0.5)]);
        let direct = 2.0 * 3f64.powf(1.5) * 0.25f64.powf(-0.5);
        assert!((v - direct).abs() <= 1e-14 * direct);
    }

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_reports_non_convergence() {
        let r = bisect(|x| x - 0.3, 0.0, 1.0, 1e-12, 5);
        assert_eq!(r, Err(ModelError::NonConvergence { steps: 5 }));
    }

    #[test]
    fn golden_section_parabola() {
        let x = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn finite_differences_on_cubic() {
        let f = |x: f64| x * x * x;
        assert!((central_diff(f, 2.0, 1e-6) - 12.0).abs() < 1e-6);
        assert!((central_second_diff(f, 2.0, 1e-4) - 12.0).abs() < 1e-5);
    }
}
