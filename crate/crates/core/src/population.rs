//! Seeded sampling of provider populations.
//!
//! Every provider draws from its own ChaCha stream (`seed`, `stream = id`), so a
//! provider's parameters do not depend on how many providers precede it or on
//! the order in which they are generated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::params::{MarketParams, DEFAULT_PSI, MAX_EXTERNALITY_PRODUCT};

/// Rejection attempts allowed per sampled field.
pub const MAX_ATTEMPTS: u64 = 1_000_000;

/// A scalar distribution; normal draws are truncated by rejection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dist {
    Fixed { value: f64 },
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
}

impl Dist {
    pub fn fixed(value: f64) -> Self {
        Dist::Fixed { value }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Dist::Uniform { lo, hi }
    }

    pub fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        Dist::TruncatedNormal { mean, sd, lo, hi }
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        let ok = match *self {
            Dist::Fixed { value } => value.is_finite(),
            Dist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Dist::TruncatedNormal { mean, sd, lo, hi } => {
                mean.is_finite() && sd.is_finite() && sd > 0.0 && lo <= hi
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidSpec(format!(
                "distribution for `{field}` is malformed: {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, field: &'static str) -> Result<f64> {
        match *self {
            Dist::Fixed { value } => Ok(value),
            Dist::Uniform { lo, hi } if lo == hi => Ok(lo),
            Dist::Uniform { lo, hi } => Ok(rng.random_range(lo..hi)),
            Dist::TruncatedNormal { mean, sd, lo, hi } => {
                let normal = Normal::new(mean, sd).map_err(|e| {
                    ModelError::InvalidSpec(format!("`{field}` normal: {e}"))
                })?;
                for _ in 0..MAX_ATTEMPTS {
                    let x = normal.sample(rng);
                    if (lo..=hi).contains(&x) {
                        return Ok(x);
                    }
                }
                Err(ModelError::SamplingExhausted {
                    field,
                    attempts: MAX_ATTEMPTS,
                })
            }
        }
    }
}

/// Distributions and constants describing a provider population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub n_providers: usize,
    pub seed: u64,
    /// Declared consumer price, USD/hour.
    pub price: Dist,
    pub alpha: Dist,
    /// `beta` is uniform on `(0, 1/alpha)` with `alpha * beta` kept below this cap.
    pub max_externality_product: f64,
    pub gamma: Dist,
    pub psi: Dist,
    pub phi: Dist,
    pub k1: Dist,
    pub k2: f64,
    pub f_s: f64,
    pub p_s: f64,
    /// Provider cost per access as a fraction of its declared price.
    pub access_cost_ratio: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            n_providers: 300,
            seed: 2020,
            price: Dist::truncated_normal(1.7, 0.5, 0.2, 3.2),
            alpha: Dist::truncated_normal(0.38, 0.1, 0.1, 0.7),
            max_externality_product: MAX_EXTERNALITY_PRODUCT,
            gamma: Dist::uniform(0.1, 0.35),
            psi: Dist::fixed(DEFAULT_PSI),
            phi: Dist::uniform(0.0, 5.0),
            k1: Dist::uniform(0.1, 0.9),
            k2: 1.0,
            f_s: 23.7,
            p_s: 36.0,
            access_cost_ratio: 0.66,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_providers == 0 {
            return Err(ModelError::InvalidSpec("n_providers must be positive".into()));
        }
        self.price.validate("price")?;
        self.alpha.validate("alpha")?;
        self.gamma.validate("gamma")?;
        self.psi.validate("psi")?;
        self.phi.validate("phi")?;
        self.k1.validate("k1")?;
        if !(self.max_externality_product > 0.0
            && self.max_externality_product <= MAX_EXTERNALITY_PRODUCT)
        {
            return Err(ModelError::InvalidSpec(format!(
                "max_externality_product must lie in (0, {MAX_EXTERNALITY_PRODUCT}]"
            )));
        }
        if !(self.access_cost_ratio >= 0.0 && self.access_cost_ratio.is_finite()) {
            return Err(ModelError::InvalidSpec(
                "access_cost_ratio must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One sampled data-service provider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provider {
    pub id: usize,
    /// Price the provider would announce on its own, USD/hour.
    pub declared_price: f64,
    pub params: MarketParams,
}

/// Draws a single provider from its dedicated substream.
pub fn sample_provider(spec: &PopulationSpec, id: usize) -> Result<Provider> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(id as u64);

    let price = spec.price.sample(&mut rng, "price")?;
    let alpha = spec.alpha.sample(&mut rng, "alpha")?;
    let beta = sample_beta(&mut rng, alpha, spec.max_externality_product)?;
    let gamma = spec.gamma.sample(&mut rng, "gamma")?;
    let psi = spec.psi.sample(&mut rng, "psi")?;
    let phi = spec.phi.sample(&mut rng, "phi")?;
    let k1 = spec.k1.sample(&mut rng, "k1")?;

    let params = MarketParams {
        alpha,
        beta,
        gamma,
        psi,
        phi,
        k1,
        k2: spec.k2,
        f_c: spec.access_cost_ratio * price,
        f_s: spec.f_s,
        p_s: spec.p_s,
    }
    .validated()?;
    Ok(Provider {
        id,
        declared_price: price,
        params,
    })
}

fn sample_beta(rng: &mut ChaCha8Rng, alpha: f64, cap: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(ModelError::InvalidSpec(format!(
            "alpha must be positive to sample beta, got {alpha}"
        )));
    }
    let hi = 1.0 / alpha;
    for _ in 0..MAX_ATTEMPTS {
        let beta = rng.random_range(0.0..hi);
        if beta > 0.0 && alpha * beta < cap {
            return Ok(beta);
        }
    }
    Err(ModelError::SamplingExhausted {
        field: "beta",
        attempts: MAX_ATTEMPTS,
    })
}

/// Samples `spec.n_providers` providers with ids `0..n`.
pub fn sample_population(spec: &PopulationSpec) -> Result<Vec<Provider>> {
    spec.validate()?;
    (0..spec.n_providers)
        .into_par_iter()
        .map(|id| sample_provider(spec, id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> PopulationSpec {
        PopulationSpec {
            n_providers: n,
            seed,
            ..PopulationSpec::default()
        }
    }

    #[test]
    fn same_seed_same_population() {
        let a = sample_population(&small(50, 9)).unwrap();
        let b = sample_population(&small(50, 9)).unwrap();
        assert_eq!(a, b);
        let c = sample_population(&small(50, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn provider_draws_do_not_depend_on_population_size() {
        let a = sample_population(&small(10, 3)).unwrap();
        let b = sample_population(&small(40, 3)).unwrap();
        assert_eq!(a[..], b[..10]);
    }

    #[test]
    fn prices_stay_within_bounds() {
        let pop = sample_population(&small(2000, 1)).unwrap();
        for p in &pop {
            assert!((0.2..=3.2).contains(&p.declared_price));
            assert!((0.1..=0.7).contains(&p.params.alpha));
            assert!(p.params.alpha * p.params.beta < MAX_EXTERNALITY_PRODUCT);
            assert!((0.1..0.35).contains(&p.params.gamma));
            assert!((p.params.f_c - 0.66 * p.declared_price).abs() < 1e-15);
            assert!(p.params.validate().is_ok());
        }
    }

    #[test]
    fn price_mean_converges() {
        let pop = sample_population(&small(100_000, 42)).unwrap();
        let mean = pop.iter().map(|p| p.declared_price).sum::<f64>() / pop.len() as f64;
        assert!((mean - 1.7).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn unsatisfiable_truncation_exhausts() {
        let spec = PopulationSpec {
            price: Dist::truncated_normal(1.7, 0.01, 50.0, 51.0),
            ..small(1, 0)
        };
        assert_eq!(
            sample_population(&spec),
            Err(ModelError::SamplingExhausted {
                field: "price",
                attempts: MAX_ATTEMPTS
            })
        );
    }

    #[test]
    fn empty_population_is_rejected() {
        assert!(matches!(
            sample_population(&small(0, 0)),
            Err(ModelError::InvalidSpec(_))
        ));
    }
}
