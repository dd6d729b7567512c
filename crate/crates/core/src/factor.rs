//! Single-factor comonotonic endowment models.
//!
//! Every bank's endowment is a nondecreasing function of one nonnegative
//! scalar factor `q`. Expectations over an interval of `q` are the only
//! distributional query the comonotonic formulas need, see
//! [`partial_expectation`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::marginal::Marginal;
use crate::special::{norm_cdf, norm_pdf};

/// Nondecreasing map from the factor to one bank's endowment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndowmentMap {
    /// `intercept + slope * q`.
    Affine { intercept: f64, slope: f64 },
    /// `scale * exp(log_shift) * q^power`.
    PowerAffine { scale: f64, log_shift: f64, power: f64 },
    /// Piecewise-linear through `(q, value)` knots, flat outside them.
    Tabulated { knots: Vec<(f64, f64)> },
    /// Quantile function of a marginal law; the factor must be uniform on `[0, 1]`.
    Quantile { marginal: Marginal },
}

impl EndowmentMap {
    pub fn constant(value: f64) -> Self {
        EndowmentMap::Affine { intercept: value, slope: 0.0 }
    }

    pub fn linear(slope: f64) -> Self {
        EndowmentMap::Affine { intercept: 0.0, slope }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EndowmentMap::Affine { intercept, slope } => {
                if !(intercept.is_finite() && slope.is_finite()) || *intercept < 0.0 || *slope < 0.0 {
                    return Err(NetError::Model(format!(
                        "affine map needs intercept >= 0 and slope >= 0, got ({intercept}, {slope})"
                    )));
                }
            }
            EndowmentMap::PowerAffine { scale, log_shift, power } => {
                if !(scale.is_finite() && log_shift.is_finite() && power.is_finite())
                    || *scale < 0.0
                    || *power < 0.0
                {
                    return Err(NetError::Model(format!(
                        "power-affine map needs scale >= 0 and power >= 0, got ({scale}, {log_shift}, {power})"
                    )));
                }
            }
            EndowmentMap::Tabulated { knots } => {
                if knots.is_empty() {
                    return Err(NetError::Model("tabulated map has no knots".into()));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(NetError::Model("tabulated knots must have increasing q".into()));
                    }
                    if w[1].1 < w[0].1 {
                        return Err(NetError::Model(format!(
                            "tabulated map decreases between q = {} and q = {}",
                            w[0].0, w[1].0
                        )));
                    }
                }
                if knots.iter().any(|k| !k.0.is_finite() || !k.1.is_finite() || k.1 < 0.0) {
                    return Err(NetError::Model("tabulated knots must be finite with nonnegative values".into()));
                }
            }
            EndowmentMap::Quantile { marginal } => marginal.validate()?,
        }
        Ok(())
    }

    pub fn eval(&self, q: f64) -> f64 {
        match self {
            EndowmentMap::Affine { intercept, slope } => {
                if *slope == 0.0 {
                    *intercept
                } else {
                    intercept + slope * q
                }
            }
            EndowmentMap::PowerAffine { scale, log_shift, power } => {
                if *scale == 0.0 {
                    0.0
                } else {
                    scale * log_shift.exp() * q.powf(*power)
                }
            }
            EndowmentMap::Tabulated { knots } => interpolate(knots, q),
            EndowmentMap::Quantile { marginal } => marginal.quantile(q),
        }
    }

    /// `lim_{q -> inf} f(q)`.
    pub fn limit(&self) -> f64 {
        match self {
            EndowmentMap::Affine { intercept, slope } => {
                if *slope > 0.0 { f64::INFINITY } else { *intercept }
            }
            EndowmentMap::PowerAffine { scale, log_shift, power } => {
                if *scale == 0.0 {
                    0.0
                } else if *power > 0.0 {
                    f64::INFINITY
                } else {
                    scale * log_shift.exp()
                }
            }
            EndowmentMap::Tabulated { knots } => knots.last().map_or(0.0, |k| k.1),
            EndowmentMap::Quantile { marginal } => marginal.sup_support(),
        }
    }

    /// Closed-form inverse `f^{-1}(y)` for strictly increasing continuous maps.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        match self {
            EndowmentMap::Affine { intercept, slope } if *slope > 0.0 => Some((y - intercept) / slope),
            EndowmentMap::PowerAffine { scale, log_shift, power } if *scale > 0.0 && *power > 0.0 => {
                if y <= 0.0 {
                    Some(0.0)
                } else {
                    Some((((y / scale).ln() - log_shift) / power).exp())
                }
            }
            _ => None,
        }
    }

    /// Factor values where the map jumps, when it is a step function.
    /// `None` means the map is not piecewise constant.
    pub fn step_breakpoints(&self) -> Option<Vec<f64>> {
        match self {
            EndowmentMap::Affine { slope, .. } if *slope == 0.0 => Some(Vec::new()),
            EndowmentMap::PowerAffine { scale, power, .. } if *scale == 0.0 || *power == 0.0 => Some(Vec::new()),
            EndowmentMap::Quantile { marginal } => marginal.breakpoints(),
            _ => None,
        }
    }
}

fn interpolate(knots: &[(f64, f64)], q: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if q <= first.0 {
        return first.1;
    }
    if q >= last.0 {
        return last.1;
    }
    let k = knots.partition_point(|k| k.0 <= q);
    let (q0, v0) = knots[k - 1];
    let (q1, v1) = knots[k];
    v0 + (v1 - v0) * (q - q0) / (q1 - q0)
}

/// Law of the scalar factor `q >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorDistribution {
    /// `log q ~ N(mu, sigma2)`.
    Lognormal { mu: f64, sigma2: f64 },
    /// Mixture of point masses `(q, weight)`.
    PointMasses { atoms: Vec<(f64, f64)> },
    /// Equally weighted sample.
    Empirical { samples: Vec<f64> },
    /// Uniform on `[0, 1]`; pairs with quantile maps.
    Uniform,
}

impl FactorDistribution {
    pub fn point(q: f64) -> Self {
        FactorDistribution::PointMasses { atoms: vec![(q, 1.0)] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FactorDistribution::Lognormal { mu, sigma2 } => {
                if !mu.is_finite() || !sigma2.is_finite() || *sigma2 < 0.0 {
                    return Err(NetError::Model(format!("lognormal factor needs finite mu and sigma2 >= 0, got ({mu}, {sigma2})")));
                }
            }
            FactorDistribution::PointMasses { atoms } => {
                if atoms.is_empty() {
                    return Err(NetError::Model("point-mass factor has no atoms".into()));
                }
                if atoms.iter().any(|&(q, w)| !q.is_finite() || q < 0.0 || !w.is_finite() || w < 0.0) {
                    return Err(NetError::Model("point masses need finite q >= 0 and weight >= 0".into()));
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(NetError::Model(format!("point-mass weights sum to {total}")));
                }
            }
            FactorDistribution::Empirical { samples } => {
                if samples.is_empty() || samples.iter().any(|q| !q.is_finite() || *q < 0.0) {
                    return Err(NetError::Model("empirical factor needs a nonempty sample of finite q >= 0".into()));
                }
            }
            FactorDistribution::Uniform => {}
        }
        Ok(())
    }

    /// Largest value the factor can take.
    pub fn sup_support(&self) -> f64 {
        match self {
            FactorDistribution::Lognormal { mu, sigma2 } => {
                if *sigma2 > 0.0 { f64::INFINITY } else { mu.exp() }
            }
            FactorDistribution::PointMasses { atoms } => atoms.iter().map(|a| a.0).fold(0.0, f64::max),
            FactorDistribution::Empirical { samples } => samples.iter().copied().fold(0.0, f64::max),
            FactorDistribution::Uniform => 1.0,
        }
    }

    /// Factor values used to spot-check monotonicity of maps.
    fn probe_grid(&self) -> Vec<f64> {
        let mut grid = match self {
            FactorDistribution::Lognormal { mu, sigma2 } => {
                let s = sigma2.sqrt();
                (-80..=80).map(|k| (mu + s * f64::from(k) * 0.1).exp()).collect()
            }
            FactorDistribution::PointMasses { atoms } => atoms.iter().map(|a| a.0).collect(),
            FactorDistribution::Empirical { samples } => samples.clone(),
            FactorDistribution::Uniform => (1..200).map(|k| f64::from(k) / 200.0).collect(),
        };
        grid.push(0.0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FactorDistribution::Lognormal { mu, sigma2 } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma2.sqrt() * z).exp()
            }
            FactorDistribution::PointMasses { atoms } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                for &(q, w) in atoms {
                    cum += w;
                    if u < cum {
                        return q;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            FactorDistribution::Empirical { samples } => samples[rng.random_range(0..samples.len())],
            FactorDistribution::Uniform => rng.random(),
        }
    }

    /// `P(q in [a, b))`.
    pub fn prob(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        match self {
            FactorDistribution::Lognormal { mu, sigma2 } => {
                if *sigma2 == 0.0 {
                    let q = mu.exp();
                    return if a <= q && q < b { 1.0 } else { 0.0 };
                }
                let s = sigma2.sqrt();
                norm_cdf(log_std(b, *mu, s)) - norm_cdf(log_std(a, *mu, s))
            }
            FactorDistribution::PointMasses { atoms } => {
                atoms.iter().filter(|&&(q, _)| a <= q && q < b).map(|a| a.1).sum()
            }
            FactorDistribution::Empirical { samples } => {
                let hits = samples.iter().filter(|&&q| a <= q && q < b).count();
                hits as f64 / samples.len() as f64
            }
            FactorDistribution::Uniform => (b.min(1.0) - a.max(0.0)).max(0.0),
        }
    }
}

/// `(ln c - mu) / s` with `ln 0 = -inf` and `ln inf = inf`.
fn log_std(c: f64, mu: f64, s: f64) -> f64 {
    if c <= 0.0 {
        f64::NEG_INFINITY
    } else if c == f64::INFINITY {
        f64::INFINITY
    } else {
        (c.ln() - mu) / s
    }
}

/// A full comonotonic model: one map per bank plus the factor law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub maps: Vec<EndowmentMap>,
    pub distribution: FactorDistribution,
}

impl FactorModel {
    pub fn new(maps: Vec<EndowmentMap>, distribution: FactorDistribution) -> Result<Self> {
        let m = Self { maps, distribution };
        m.validate()?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.maps.len()
    }

    /// Checks every map's parameters and spot-checks monotonicity and
    /// nonnegativity on a grid over the factor's support.
    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        let uniform = matches!(self.distribution, FactorDistribution::Uniform);
        let grid = self.distribution.probe_grid();
        for (i, map) in self.maps.iter().enumerate() {
            map.validate().map_err(|e| NetError::Model(format!("bank {i}: {e}")))?;
            if matches!(map, EndowmentMap::Quantile { .. }) && !uniform {
                return Err(NetError::Model(format!("bank {i}: quantile maps require a uniform factor")));
            }
            let mut prev = f64::NEG_INFINITY;
            for &q in &grid {
                let v = map.eval(q);
                if v.is_nan() || v < 0.0 {
                    return Err(NetError::Model(format!("bank {i}: endowment {v} at q = {q}")));
                }
                if v < prev - 1e-12 * prev.abs().max(1.0) {
                    return Err(NetError::Model(format!("bank {i}: endowment map decreases near q = {q}")));
                }
                prev = v;
            }
        }
        Ok(())
    }

    pub fn endowments(&self, q: f64) -> Vec<f64> {
        self.maps.iter().map(|m| m.eval(q)).collect()
    }

    /// Same model with banks relabelled so that new bank `k` is old bank `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            maps: perm.iter().map(|&i| self.maps[i].clone()).collect(),
            distribution: self.distribution.clone(),
        }
    }
}

/// `P(q in [a, b))` and `E[f(q) 1{q in [a, b)}]`.
///
/// Closed forms cover lognormal and uniform factors with affine or
/// power-affine maps, quantile maps of lognormal or finite marginals, and
/// discrete factors. Everything else goes through adaptive Gauss-Legendre
/// quadrature.
pub fn partial_expectation(dist: &FactorDistribution, f: &EndowmentMap, a: f64, b: f64) -> Result<(f64, f64)> {
    if a.is_nan() || b.is_nan() || a > b {
        return Err(NetError::Model(format!("partial expectation over [{a}, {b}) is not an interval")));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    let prob = dist.prob(a, b);
    let pe = match dist {
        FactorDistribution::PointMasses { atoms } => atoms
            .iter()
            .filter(|&&(q, _)| a <= q && q < b)
            .map(|&(q, w)| w * f.eval(q))
            .sum(),
        FactorDistribution::Empirical { samples } => {
            let s: f64 = samples.iter().filter(|&&q| a <= q && q < b).map(|&q| f.eval(q)).sum();
            s / samples.len() as f64
        }
        FactorDistribution::Lognormal { mu, sigma2 } if *sigma2 == 0.0 => {
            let q = mu.exp();
            if a <= q && q < b { f.eval(q) } else { 0.0 }
        }
        FactorDistribution::Lognormal { mu, sigma2 } => lognormal_moment(*mu, sigma2.sqrt(), f, a, b)?,
        FactorDistribution::Uniform => uniform_moment(f, a, b)?,
    };
    Ok((prob, pe))
}

/// `E[q^k 1{q in [a, b)}]` for `log q ~ N(mu, s^2)`.
fn lognormal_power_moment(mu: f64, s: f64, k: f64, a: f64, b: f64) -> f64 {
    let shift = k * s;
    (k * mu + 0.5 * k * k * s * s).exp()
        * (norm_cdf(log_std(b, mu, s) - shift) - norm_cdf(log_std(a, mu, s) - shift))
}

fn lognormal_moment(mu: f64, s: f64, f: &EndowmentMap, a: f64, b: f64) -> Result<f64> {
    match f {
        EndowmentMap::Affine { intercept, slope } => {
            let p = norm_cdf(log_std(b, mu, s)) - norm_cdf(log_std(a, mu, s));
            let first = if *slope == 0.0 { 0.0 } else { slope * lognormal_power_moment(mu, s, 1.0, a, b) };
            Ok(intercept * p + first)
        }
        EndowmentMap::PowerAffine { scale, log_shift, power } => {
            if *scale == 0.0 {
                return Ok(0.0);
            }
            Ok(scale * log_shift.exp() * lognormal_power_moment(mu, s, *power, a, b))
        }
        _ => {
            // substitute q = exp(mu + s t) with t standard normal
            let ta = log_std(a, mu, s).max(-40.0);
            let tb = log_std(b, mu, s).min(40.0);
            if ta >= tb {
                return Ok(0.0);
            }
            let scale = f.eval((mu + s * tb).exp()).max(1.0);
            integrate(&|t: f64| f.eval((mu + s * t).exp()) * norm_pdf(t), ta, tb, 1e-14 * scale)
        }
    }
}

fn uniform_moment(f: &EndowmentMap, a: f64, b: f64) -> Result<f64> {
    let lo = a.max(0.0);
    let hi = b.min(1.0);
    if hi <= lo {
        return Ok(0.0);
    }
    match f {
        EndowmentMap::Affine { intercept, slope } => {
            Ok(intercept * (hi - lo) + 0.5 * slope * (hi * hi - lo * lo))
        }
        EndowmentMap::PowerAffine { scale, log_shift, power } => {
            let k = power + 1.0;
            Ok(scale * log_shift.exp() * (hi.powf(k) - lo.powf(k)) / k)
        }
        EndowmentMap::Quantile { marginal } => Ok(marginal.partial_moment(lo, hi)),
        EndowmentMap::Tabulated { .. } => {
            let scale = f.eval(hi).max(1.0);
            integrate(&|q: f64| f.eval(q), lo, hi, 1e-14 * scale)
        }
    }
}

const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_21,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_87,
    0.269_266_719_309_996_35,
    0.219_086_362_515_982_04,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];
const MAX_DEPTH: u32 = 48;

fn gauss_legendre_10(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Adaptive 10-point Gauss-Legendre quadrature with interval bisection.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Option<f64> {
        let m = 0.5 * (a + b);
        let left = gauss_legendre_10(f, a, m);
        let right = gauss_legendre_10(f, m, b);
        let refined = left + right;
        if (refined - whole).abs() <= tol.max(1e-13 * refined.abs()) {
            return Some(refined);
        }
        if depth >= MAX_DEPTH || !refined.is_finite() {
            return None;
        }
        Some(recurse(f, a, m, left, 0.5 * tol, depth + 1)? + recurse(f, m, b, right, 0.5 * tol, depth + 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let whole = gauss_legendre_10(f, a, b);
    recurse(f, a, b, whole, abs_tol, 0).ok_or(NetError::Quadrature { lo: a, hi: b })
}
