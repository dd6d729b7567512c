//! Seeded endowment scenario generators.
//!
//! Path `k` draws from its own ChaCha8 stream `k` under the batch seed, so a
//! batch is identical whether generated serially or in parallel.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capm::CapmParams;
use crate::error::{NetError, Result};
use crate::factor::FactorModel;

/// Probability measure for CAPM draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Risk-neutral.
    #[default]
    Q,
    /// Physical, with market drift `mu_m`.
    P,
}

/// Which endowment vector a CAPM draw produces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapmVariant {
    /// The model portfolios with idiosyncratic noise.
    #[default]
    Actual,
    /// Comonotonic proxy with loading `sigma`.
    Lower,
    /// Market-conditional mean, loading `beta sigma_M`.
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedScenario {
    pub x: Vec<f64>,
    pub probability: f64,
}

/// Scenario generator description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    /// `x = f(q)` with `q` drawn from the model's factor law.
    ComonotonicFactor { model: FactorModel },
    /// `x_i = s_i q0 eta_T^i`.
    Capm {
        params: CapmParams,
        #[serde(default)]
        measure: Measure,
        #[serde(default)]
        variant: CapmVariant,
    },
    /// `x_i = exp(mu_i + sigma_i Y_i)` with `Y ~ N(0, correlation)`.
    GaussianCopulaLognormal { mu: Vec<f64>, sigma: Vec<f64>, correlation: Vec<Vec<f64>> },
    /// Finitely many endowment vectors with probabilities.
    FiniteSupport { scenarios: Vec<WeightedScenario> },
}

/// Endowment draws, one row per path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBatch {
    /// Generator of the draws; `None` for batches read back from CSV.
    #[serde(default)]
    pub spec: Option<ScenarioSpec>,
    pub seed: u64,
    pub x: Vec<Vec<f64>>,
    /// Factor value per path when the generator has one.
    #[serde(default)]
    pub factor: Option<Vec<f64>>,
    /// Path probabilities for exact enumeration; `None` means equal weights.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl ScenarioBatch {
    pub fn n_paths(&self) -> usize {
        self.x.len()
    }

    pub fn n_banks(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

impl ScenarioSpec {
    pub fn n(&self) -> usize {
        match self {
            ScenarioSpec::ComonotonicFactor { model } => model.n(),
            ScenarioSpec::Capm { params, .. } => params.n(),
            ScenarioSpec::GaussianCopulaLognormal { mu, .. } => mu.len(),
            ScenarioSpec::FiniteSupport { scenarios } => scenarios.first().map_or(0, |s| s.x.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioSpec::ComonotonicFactor { model } => model.validate(),
            ScenarioSpec::Capm { params, .. } => params.validate(),
            ScenarioSpec::GaussianCopulaLognormal { .. } => self.cholesky().map(|_| ()),
            ScenarioSpec::FiniteSupport { scenarios } => {
                if scenarios.is_empty() {
                    return Err(NetError::Model("finite-support spec has no scenarios".into()));
                }
                let n = scenarios[0].x.len();
                let mut total = 0.0;
                for s in scenarios {
                    if s.x.len() != n {
                        return Err(NetError::Shape("scenarios have different lengths".into()));
                    }
                    if s.x.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        return Err(NetError::Endowment("scenario endowments must be finite and nonnegative".into()));
                    }
                    if !(s.probability >= 0.0) {
                        return Err(NetError::Model("scenario probabilities must be nonnegative".into()));
                    }
                    total += s.probability;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(NetError::Model(format!("scenario probabilities sum to {total}")));
                }
                Ok(())
            }
        }
    }

    fn cholesky(&self) -> Result<DMatrix<f64>> {
        let ScenarioSpec::GaussianCopulaLognormal { mu, sigma, correlation } = self else {
            return Err(NetError::Internal("not a Gaussian copula spec".into()));
        };
        let n = mu.len();
        if sigma.len() != n || correlation.len() != n || correlation.iter().any(|r| r.len() != n) {
            return Err(NetError::Shape("copula mu, sigma and correlation sizes differ".into()));
        }
        if mu.iter().chain(sigma).any(|v| !v.is_finite()) || sigma.iter().any(|s| *s < 0.0) {
            return Err(NetError::Model("copula mu must be finite and sigma nonnegative".into()));
        }
        let c = DMatrix::from_fn(n, n, |i, j| correlation[i][j]);
        for i in 0..n {
            if (c[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(NetError::Model("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 || c[(i, j)].abs() > 1.0 {
                    return Err(NetError::Model("correlation must be symmetric with entries in [-1, 1]".into()));
                }
            }
        }
        c.cholesky()
            .map(|ch| ch.l())
            .ok_or_else(|| NetError::Model("correlation matrix is not positive definite".into()))
    }
}

/// `n_paths` draws from `spec`, reproducible from `seed`.
pub fn simulate(spec: &ScenarioSpec, n_paths: usize, seed: u64) -> Result<ScenarioBatch> {
    spec.validate()?;
    let chol = match spec {
        ScenarioSpec::GaussianCopulaLognormal { .. } => Some(spec.cholesky()?),
        _ => None,
    };
    let draws: Vec<(Vec<f64>, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            draw(spec, chol.as_ref(), &mut rng)
        })
        .collect();
    let has_factor = matches!(spec, ScenarioSpec::ComonotonicFactor { .. } | ScenarioSpec::Capm { .. });
    let (x, factor): (Vec<_>, Vec<_>) = draws.into_iter().unzip();
    Ok(ScenarioBatch { spec: Some(spec.clone()), seed, x, factor: has_factor.then_some(factor), weights: None })
}

/// Every scenario of a finite-support spec with its probability.
pub fn exact_batch(spec: &ScenarioSpec) -> Result<ScenarioBatch> {
    spec.validate()?;
    let ScenarioSpec::FiniteSupport { scenarios } = spec else {
        return Err(NetError::Model("exact enumeration needs a finite-support spec".into()));
    };
    Ok(ScenarioBatch {
        spec: Some(spec.clone()),
        seed: 0,
        x: scenarios.iter().map(|s| s.x.clone()).collect(),
        factor: None,
        weights: Some(scenarios.iter().map(|s| s.probability).collect()),
    })
}

fn draw(spec: &ScenarioSpec, chol: Option<&DMatrix<f64>>, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    match spec {
        ScenarioSpec::ComonotonicFactor { model } => {
            let q = model.distribution.sample(rng);
            (model.endowments(q), q)
        }
        ScenarioSpec::Capm { params, measure, variant } => capm_draw(params, *measure, *variant, rng),
        ScenarioSpec::GaussianCopulaLognormal { mu, sigma, .. } => {
            let l = chol.expect("cholesky factor");
            let w = DVector::from_fn(mu.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = l * w;
            ((0..mu.len()).map(|i| (mu[i] + sigma[i] * y[i]).exp()).collect(), f64::NAN)
        }
        ScenarioSpec::FiniteSupport { scenarios } => {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            for s in scenarios {
                cum += s.probability;
                if u < cum {
                    return (s.x.clone(), f64::NAN);
                }
            }
            (scenarios[scenarios.len() - 1].x.clone(), f64::NAN)
        }
    }
}

fn capm_draw(p: &CapmParams, measure: Measure, variant: CapmVariant, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let t = p.t;
    let sqrt_t = t.sqrt();
    // risk-neutral Brownian motion at T; under P it carries the market price of risk
    let mut w_q = sqrt_t * rng.sample::<f64, _>(StandardNormal);
    if measure == Measure::P {
        w_q += (p.mu_m - p.r) / p.sigma_m * t;
    }
    let q_t = p.q0 * ((p.r - 0.5 * p.sigma_m * p.sigma_m) * t + p.sigma_m * w_q).exp();
    let x = (0..p.n())
        .map(|i| {
            let eta = match variant {
                CapmVariant::Actual => {
                    let b = sqrt_t * rng.sample::<f64, _>(StandardNormal);
                    let sig = p.sigma[i];
                    ((p.r - 0.5 * sig * sig) * t + p.beta[i] * p.sigma_m * w_q + p.gamma[i] * b).exp()
                }
                CapmVariant::Lower | CapmVariant::Upper => {
                    let z = if variant == CapmVariant::Lower { p.sigma[i] } else { p.beta[i] * p.sigma_m };
                    ((p.r - 0.5 * z * z) * t + z * w_q).exp()
                }
            };
            p.s[i] * p.q0 * eta
        })
        .collect();
    (x, q_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capm::hat_eta;

    fn capm_spec(variant: CapmVariant) -> ScenarioSpec {
        let params = CapmParams::new(0.03, 2.0, 0.3, vec![0.8, 1.2], vec![0.2, 0.1], vec![1.0, 2.0]).unwrap();
        ScenarioSpec::Capm { params, measure: Measure::Q, variant }
    }

    #[test]
    fn same_seed_same_batch() {
        let spec = capm_spec(CapmVariant::Actual);
        let a = simulate(&spec, 500, 42).unwrap();
        let b = simulate(&spec, 500, 42).unwrap();
        let c = simulate(&spec, 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.x, c.x);
        // prefixes agree because each path has its own stream
        assert_eq!(simulate(&spec, 100, 42).unwrap().x[..], a.x[..100]);
    }

    #[test]
    fn discounted_market_is_a_martingale() {
        let spec = capm_spec(CapmVariant::Actual);
        let batch = simulate(&spec, 200_000, 7).unwrap();
        let q = batch.factor.unwrap();
        let d: Vec<f64> = q.iter().map(|v| v * (-0.06f64).exp()).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let se = (var / d.len() as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} +- {se}");
    }

    #[test]
    fn proxy_draws_are_functions_of_the_market() {
        let spec = capm_spec(CapmVariant::Upper);
        let ScenarioSpec::Capm { params, .. } = &spec else { unreachable!() };
        let batch = simulate(&spec, 20, 1).unwrap();
        let z = params.loading(crate::capm::Which::Upper);
        for (x, q) in batch.x.iter().zip(batch.factor.as_ref().unwrap()) {
            let eta = hat_eta(&z, *q, params).unwrap();
            for i in 0..2 {
                assert!((x[i] - params.s[i] * eta[i]).abs() < 1e-12 * x[i].max(1.0));
            }
        }
    }

    #[test]
    fn finite_support_frequencies() {
        let spec = ScenarioSpec::FiniteSupport {
            scenarios: vec![
                WeightedScenario { x: vec![0.0, 2.0], probability: 0.5 },
                WeightedScenario { x: vec![1.0, 0.0], probability: 0.5 },
            ],
        };
        let exact = exact_batch(&spec).unwrap();
        assert_eq!(exact.weights, Some(vec![0.5, 0.5]));
        let batch = simulate(&spec, 10_000, 5).unwrap();
        let first = batch.x.iter().filter(|x| x[0] == 0.0).count() as f64 / 10_000.0;
        assert!((first - 0.5).abs() < 3.0 * 0.005);
    }

    #[test]
    fn copula_validation() {
        let bad = ScenarioSpec::GaussianCopulaLognormal {
            mu: vec![0.0, 0.0],
            sigma: vec![1.0, 1.0],
            correlation: vec![vec![1.0, 1.5], vec![1.5, 1.0]],
        };
        assert!(simulate(&bad, 10, 0).is_err());
        let good = ScenarioSpec::GaussianCopulaLognormal {
            mu: vec![0.0, 1.0],
            sigma: vec![0.5, 0.0],
            correlation: vec![vec![1.0, 0.3], vec![0.3, 1.0]],
        };
        let b = simulate(&good, 10, 0).unwrap();
        assert!(b.x.iter().all(|x| (x[1] - 1f64.exp()).abs() < 1e-12));
    }
}
