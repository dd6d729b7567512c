//! One-dimensional endowment laws with quantile queries.

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::special::{norm_cdf, norm_ppf};

/// Marginal law of a single bank's endowment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    /// `exp(mu + sigma N(0,1))`.
    Lognormal { mu: f64, sigma: f64 },
    /// Finitely many values `(value, probability)`.
    Finite { atoms: Vec<(f64, f64)> },
}

impl Marginal {
    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        let m = Marginal::Lognormal { mu, sigma };
        m.validate()?;
        Ok(m)
    }

    /// Builds a finite law, sorting values and merging duplicates.
    pub fn finite(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut sorted: Vec<(f64, f64)> = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (v, p) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        let m = Marginal::Finite { atoms: merged };
        m.validate()?;
        Ok(m)
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::finite(&[(value, 1.0)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma < 0.0 {
                    return Err(NetError::Model(format!("lognormal marginal needs finite mu and sigma >= 0, got ({mu}, {sigma})")));
                }
            }
            Marginal::Finite { atoms } => {
                if atoms.is_empty() {
                    return Err(NetError::Model("finite marginal has no atoms".into()));
                }
                let mut total = 0.0;
                let mut prev = f64::NEG_INFINITY;
                for &(v, p) in atoms {
                    if !v.is_finite() || v < 0.0 || !p.is_finite() || p < 0.0 {
                        return Err(NetError::Model(format!("bad atom ({v}, {p})")));
                    }
                    if v <= prev {
                        return Err(NetError::Model("finite marginal atoms must be strictly increasing".into()));
                    }
                    prev = v;
                    total += p;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(NetError::Model(format!("finite marginal probabilities sum to {total}")));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Marginal::Finite { atoms } => atoms.iter().map(|(v, p)| v * p).sum(),
        }
    }

    /// Generalized inverse `inf { x >= 0 : F(x) >= u }`, left-continuous in `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            Marginal::Lognormal { mu, sigma } => {
                if u >= 1.0 {
                    if *sigma > 0.0 { f64::INFINITY } else { mu.exp() }
                } else {
                    (mu + sigma * norm_ppf(u)).exp()
                }
            }
            Marginal::Finite { atoms } => {
                let mut cum = 0.0;
                for &(v, p) in atoms {
                    cum += p;
                    if cum >= u {
                        return v;
                    }
                }
                atoms.last().map_or(0.0, |a| a.0)
            }
        }
    }

    /// `E[F^{-1}(U) 1{U in [a, b)}]` for `U` uniform on `[0, 1]`.
    pub fn partial_moment(&self, a: f64, b: f64) -> f64 {
        let lo = a.clamp(0.0, 1.0);
        let hi = b.clamp(0.0, 1.0);
        if hi <= lo {
            return 0.0;
        }
        match self {
            Marginal::Lognormal { mu, sigma } => {
                let m = (mu + 0.5 * sigma * sigma).exp();
                if *sigma == 0.0 {
                    return m * (hi - lo);
                }
                m * (norm_cdf(norm_ppf(hi) - sigma) - norm_cdf(norm_ppf(lo) - sigma))
            }
            Marginal::Finite { atoms } => {
                let mut cum = 0.0;
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    let (c0, c1) = (cum, cum + p);
                    cum = c1;
                    let overlap = hi.min(c1) - lo.max(c0);
                    if overlap > 0.0 {
                        acc += v * overlap;
                    }
                }
                acc
            }
        }
    }

    /// Cumulative probabilities at which the quantile function jumps.
    pub fn breakpoints(&self) -> Option<Vec<f64>> {
        match self {
            Marginal::Lognormal { sigma, .. } if *sigma == 0.0 => Some(Vec::new()),
            Marginal::Lognormal { .. } => None,
            Marginal::Finite { atoms } => {
                let mut cum = 0.0;
                let mut out = Vec::with_capacity(atoms.len());
                for &(_, p) in &atoms[..atoms.len() - 1] {
                    cum += p;
                    out.push(cum);
                }
                Some(out)
            }
        }
    }

    pub fn sup_support(&self) -> f64 {
        self.quantile(1.0)
    }
}
