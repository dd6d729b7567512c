//! Debt and equity prices when endowments follow the CAPM/GBM model.
//!
//! Each bank holds `s_i` units of a portfolio `eta^i` whose log-return loads on
//! the market with beta `beta_i` plus independent idiosyncratic noise. Two
//! comonotonic proxies `s_i * eta_hat^i(z)` bracket expected payments under
//! full recovery: `z = sigma` (all risk loaded on the market) from below and
//! `z = beta * sigma_M` (the market-conditional mean) from above. Both are
//! priced in closed form along the solvency-threshold ladder.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::require_full_recovery;
use crate::comonotonic::{solvency_thresholds, SolvencyThresholds};
use crate::error::{NetError, Result};
use crate::factor::{EndowmentMap, FactorDistribution, FactorModel};
use crate::network::FinancialNetwork;
use crate::special::norm_cdf;

const CONSISTENCY_TOL: f64 = 1e-12;

fn default_q0() -> f64 {
    1.0
}

/// Market and portfolio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapmParams {
    /// Risk-free rate per year.
    pub r: f64,
    /// Maturity in years.
    #[serde(rename = "T")]
    pub t: f64,
    pub sigma_m: f64,
    pub beta: Vec<f64>,
    /// Idiosyncratic volatilities.
    pub gamma: Vec<f64>,
    /// Total volatilities; filled from `beta` and `gamma` when left empty.
    #[serde(default)]
    pub sigma: Vec<f64>,
    /// Investment sizes.
    pub s: Vec<f64>,
    #[serde(default = "default_q0")]
    pub q0: f64,
    /// Physical market drift, used only when simulating under the real-world measure.
    #[serde(default)]
    pub mu_m: f64,
}

impl CapmParams {
    /// Builds parameters from betas and idiosyncratic volatilities.
    pub fn new(r: f64, t: f64, sigma_m: f64, beta: Vec<f64>, gamma: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        let sigma = beta.iter().zip(&gamma).map(|(b, g)| (b * b * sigma_m * sigma_m + g * g).sqrt()).collect();
        let p = Self { r, t, sigma_m, beta, gamma, sigma, s, q0: 1.0, mu_m: 0.0 };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from betas and total volatilities; rejects
    /// `beta_i sigma_M > sigma_i`, which would need a correlation above one.
    pub fn from_total_vol(r: f64, t: f64, sigma_m: f64, beta: Vec<f64>, sigma: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        let mut gamma = Vec::with_capacity(beta.len());
        for (i, (b, sg)) in beta.iter().zip(&sigma).enumerate() {
            let sys = b * sigma_m;
            let g2 = sg * sg - sys * sys;
            if g2 < -CONSISTENCY_TOL * sg.max(1.0) {
                return Err(NetError::Model(format!(
                    "bank {i}: market correlation beta*sigma_M/sigma = {} exceeds 1",
                    sys / sg
                )));
            }
            gamma.push(g2.max(0.0).sqrt());
        }
        let p = Self { r, t, sigma_m, beta, gamma, sigma, s, q0: 1.0, mu_m: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// Fills an empty `sigma` and checks all invariants.
    pub fn normalized(mut self) -> Result<Self> {
        if self.sigma.is_empty() {
            self.sigma = self
                .beta
                .iter()
                .zip(&self.gamma)
                .map(|(b, g)| (b * b * self.sigma_m * self.sigma_m + g * g).sqrt())
                .collect();
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.s.len();
        if self.beta.len() != n || self.gamma.len() != n || self.sigma.len() != n {
            return Err(NetError::Shape(format!(
                "CAPM vectors have lengths s={}, beta={}, gamma={}, sigma={}",
                n,
                self.beta.len(),
                self.gamma.len(),
                self.sigma.len()
            )));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(NetError::Model(format!("maturity T = {} must be positive", self.t)));
        }
        if !(self.sigma_m > 0.0) || !self.sigma_m.is_finite() {
            return Err(NetError::Model(format!("market volatility sigma_M = {} must be positive", self.sigma_m)));
        }
        if !self.r.is_finite() || !self.mu_m.is_finite() {
            return Err(NetError::Model("r and mu_M must be finite".into()));
        }
        if !(self.q0 > 0.0) || !self.q0.is_finite() {
            return Err(NetError::Model(format!("initial market price q0 = {} must be positive", self.q0)));
        }
        for i in 0..n {
            let (s, b, g, sg) = (self.s[i], self.beta[i], self.gamma[i], self.sigma[i]);
            if !(s >= 0.0 && s.is_finite()) || !(b >= 0.0 && b.is_finite()) || !(g >= 0.0 && g.is_finite()) {
                return Err(NetError::Model(format!("bank {i}: s, beta and gamma must be finite and nonnegative")));
            }
            let implied = (b * b * self.sigma_m * self.sigma_m + g * g).sqrt();
            if (sg - implied).abs() > CONSISTENCY_TOL * implied.max(1.0) {
                return Err(NetError::Model(format!(
                    "bank {i}: sigma = {sg} inconsistent with sqrt(beta^2 sigma_M^2 + gamma^2) = {implied}"
                )));
            }
            if sg > 0.0 && b * self.sigma_m > sg * (1.0 + CONSISTENCY_TOL) {
                return Err(NetError::Model(format!("bank {i}: market correlation exceeds 1")));
            }
        }
        Ok(())
    }

    /// Restriction to a single bank, optionally with a different position.
    pub fn single(&self, i: usize, s: f64) -> Self {
        Self {
            r: self.r,
            t: self.t,
            sigma_m: self.sigma_m,
            beta: vec![self.beta[i]],
            gamma: vec![self.gamma[i]],
            sigma: vec![self.sigma[i]],
            s: vec![s],
            q0: self.q0,
            mu_m: self.mu_m,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.beta.windows(2).all(|w| w[0] == w[1]) && self.gamma.windows(2).all(|w| w[0] == w[1])
    }

    /// Per-bank loading for the requested bound.
    pub fn loading(&self, which: Which) -> Vec<f64> {
        match which {
            Which::Lower => self.sigma.clone(),
            Which::Upper => self.beta.iter().map(|b| b * self.sigma_m).collect(),
        }
    }

    fn discount(&self) -> f64 {
        (-self.r * self.t).exp()
    }

    /// Log-prefactor of `eta_hat` for loading `z`.
    fn log_prefactor(&self, z: f64) -> f64 {
        (1.0 - z / self.sigma_m) * (self.r + 0.5 * z * self.sigma_m) * self.t
    }

    /// Risk-neutral law of `q_T / q0`.
    pub fn factor_law(&self) -> FactorDistribution {
        FactorDistribution::Lognormal {
            mu: (self.r - 0.5 * self.sigma_m * self.sigma_m) * self.t,
            sigma2: self.sigma_m * self.sigma_m * self.t,
        }
    }

    /// Comonotonic model `x_i = s_i q0 eta_hat^i(z)` on the normalized factor `q_T / q0`.
    pub fn factor_model(&self, z: &[f64]) -> Result<FactorModel> {
        let maps = z
            .iter()
            .zip(&self.s)
            .map(|(&zi, &si)| EndowmentMap::PowerAffine {
                scale: si * self.q0,
                log_shift: self.log_prefactor(zi),
                power: zi / self.sigma_m,
            })
            .collect();
        FactorModel::new(maps, self.factor_law())
    }
}

/// Which comonotonic proxy to price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    /// `z = sigma`: the comonotonic version, a lower bound on payments.
    Lower,
    /// `z = beta sigma_M`: the market-conditional mean, an upper bound on payments.
    Upper,
}

/// `eta_hat_T^i(z) = exp((1 - z_i/sigma_M)(r + z_i sigma_M/2) T) qT^{z_i/sigma_M}`.
pub fn hat_eta(z: &[f64], q_t: f64, params: &CapmParams) -> Result<Vec<f64>> {
    if !(params.sigma_m > 0.0) {
        return Err(NetError::Model("sigma_M must be positive".into()));
    }
    if !(q_t > 0.0) {
        return Err(NetError::Model(format!("market level {q_t} must be positive")));
    }
    Ok(z.iter().map(|&zi| (params.log_prefactor(zi) + zi / params.sigma_m * q_t.ln()).exp()).collect())
}

/// `Phi(-d)` at threshold `q` (normalized factor units), with the sentinels
/// `q = inf -> 1` and `q = 0 -> 0` taken as limits.
fn phi_below(q: f64, drift: f64, params: &CapmParams) -> f64 {
    if q == f64::INFINITY {
        1.0
    } else if q <= 0.0 {
        0.0
    } else {
        let d = ((1.0 / q).ln() + drift * params.t) / (params.sigma_m * params.t.sqrt());
        norm_cdf(-d)
    }
}

/// Solvency thresholds of the comonotonic proxy for loading `z`; for a
/// homogeneous system the thresholds at `z = sigma_M` are mapped through
/// the common monotone transform.
pub fn proxy_thresholds(net: &FinancialNetwork, params: &CapmParams, z: &[f64]) -> Result<SolvencyThresholds> {
    let common = z.windows(2).all(|w| w[0] == w[1]) && params.s.iter().all(|&s| s >= 0.0);
    let zc = z.first().copied().unwrap_or(0.0);
    if common && zc > 0.0 && zc != params.sigma_m {
        let base = solvency_thresholds(net, &params.factor_model(&vec![params.sigma_m; z.len()])?)?;
        let ratio = params.sigma_m / zc;
        let shift = params.log_prefactor(zc) / zc * params.sigma_m;
        let q_star = base.q_star.iter().map(|&q| homogeneous_map(q, shift, ratio)).collect();
        return Ok(SolvencyThresholds { q_star, ..base });
    }
    solvency_thresholds(net, &params.factor_model(z)?)
}

/// `q*(z) = exp((1 - sigma_M/z)(r + z sigma_M/2) T) q*(sigma_M)^{sigma_M/z}`.
fn homogeneous_map(q: f64, shift: f64, ratio: f64) -> f64 {
    if q == f64::INFINITY || q == 0.0 {
        q
    } else {
        (-shift + ratio * q.ln()).exp()
    }
}

/// Homogeneous-shortcut thresholds, always via the `z = sigma_M` solve.
pub fn homogeneous_thresholds(net: &FinancialNetwork, params: &CapmParams, z: f64) -> Result<Vec<f64>> {
    if !(z > 0.0) {
        return Err(NetError::Model("homogeneous shortcut needs a positive loading".into()));
    }
    let base = solvency_thresholds(net, &params.factor_model(&vec![params.sigma_m; net.n()])?)?;
    let ratio = params.sigma_m / z;
    let shift = params.log_prefactor(z) / z * params.sigma_m;
    Ok(base.q_star.iter().map(|&q| homogeneous_map(q, shift, ratio)).collect())
}

/// Closed-form prices for one comonotonic proxy.
#[derive(Debug, Clone, Serialize)]
pub struct PriceBound {
    pub which: Option<Which>,
    /// Loadings `z` used for the proxy.
    pub z: Vec<f64>,
    /// Solvency thresholds in market-price units (`q0` times the normalized factor).
    pub q_star: Vec<f64>,
    /// Discounted debt price per unit of face value, in `[0, e^{-rT}]`.
    pub price: Vec<f64>,
    pub rate: Vec<f64>,
    /// Discounted expected equity.
    pub market_cap: Vec<f64>,
    /// False when computed under bankruptcy costs, where no bound is implied.
    pub guaranteed: bool,
}

/// Ladder evaluation of discounted payments and equities for loadings `z`.
pub fn price_with_loading(net: &FinancialNetwork, params: &CapmParams, z: &[f64]) -> Result<PriceBound> {
    params.validate()?;
    let n = net.n();
    if params.n() != n || z.len() != n {
        return Err(NetError::Shape(format!("CAPM parameters for {} banks, network has {n}", params.n())));
    }
    let th = proxy_thresholds(net, params, z)?;
    let bounds = th.boundaries();
    let disc = params.discount();
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(n, params.s.iter().map(|s| s * params.q0)));
    let drift1: Vec<f64> = z.iter().map(|zj| params.r - 0.5 * (params.sigma_m - 2.0 * zj) * params.sigma_m).collect();
    let drift2 = params.r - 0.5 * params.sigma_m * params.sigma_m;

    // interval k is [bounds[k + 1], bounds[k])
    let terms: Vec<DVector<f64>> = (0..=n)
        .map(|k| {
            let (hi, lo) = (bounds[k], bounds[k + 1]);
            let dphi1 = DVector::from_iterator(
                n,
                drift1.iter().map(|&d| phi_below(hi, d, params) - phi_below(lo, d, params)),
            );
            let dphi2 = phi_below(hi, drift2, params) - phi_below(lo, drift2, params);
            let (delta, offset) = &th.ladder[k];
            delta * (&scale * dphi1) - offset * (disc * dphi2)
        })
        .collect();

    let rank = th.rank();
    let mut price = Vec::with_capacity(n);
    let mut market_cap = Vec::with_capacity(n);
    for i in 0..n {
        let r = rank[i];
        let shortfall: f64 = terms[r + 1..].iter().map(|t| t[i]).sum();
        let equity: f64 = terms[..=r].iter().map(|t| t[i]).sum();
        let p_bar = net.p_bar()[i];
        price.push((disc + shortfall / p_bar).clamp(0.0, disc));
        market_cap.push(equity.max(0.0));
    }
    let rate = price.iter().zip(net.p_bar().iter()).map(|(&u, &pb)| effective_rate(u * pb, pb, params.t)).collect();
    Ok(PriceBound {
        which: None,
        z: z.to_vec(),
        q_star: th.q_star.iter().map(|q| q * params.q0).collect(),
        price,
        rate,
        market_cap,
        guaranteed: net.full_recovery(),
    })
}

/// Lower (`z = sigma`) or upper (`z = beta sigma_M`) bound on discounted
/// debt prices. Under bankruptcy costs the closed form is only returned with
/// `force`, flagged as carrying no bound guarantee.
pub fn debt_price_bound(net: &FinancialNetwork, params: &CapmParams, which: Which, force: bool) -> Result<PriceBound> {
    if !force {
        require_full_recovery(net)?;
    }
    let mut out = price_with_loading(net, params, &params.loading(which))?;
    out.which = Some(which);
    Ok(out)
}

/// Discounted expected equity for the requested proxy.
pub fn market_cap(net: &FinancialNetwork, params: &CapmParams, which: Which, force: bool) -> Result<Vec<f64>> {
    Ok(debt_price_bound(net, params, which, force)?.market_cap)
}

/// `R = (log p_bar - log price) / T` for a discounted price in currency units.
/// A zero price returns `+inf`.
pub fn effective_rate(price: f64, p_bar: f64, t: f64) -> f64 {
    if price <= 0.0 {
        warn!("zero debt price; effective rate is infinite");
        return f64::INFINITY;
    }
    (p_bar.ln() - price.ln()) / t
}

/// How interbank assets are treated in the no-network baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Interbank assets paid in full at maturity in the risk-free asset.
    RiskfreeInterbank,
    /// Interbank assets held as extra units of the bank's risky portfolio.
    RiskyInterbank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineValue {
    pub price: f64,
    pub rate: f64,
    pub market_cap: f64,
}

/// Single-firm structural prices without contagion. Each bank is priced
/// alone with its own total volatility.
pub fn merton_baseline(net: &FinancialNetwork, params: &CapmParams, mode: BaselineMode) -> Result<Vec<BaselineValue>> {
    params.validate()?;
    if params.n() != net.n() {
        return Err(NetError::Shape(format!("CAPM parameters for {} banks, network has {}", params.n(), net.n())));
    }
    let disc = params.discount();
    (0..net.n())
        .map(|i| {
            let p_bar = net.p_bar()[i];
            let cash = net.interbank_assets()[i];
            let (face, extra_cash, s) = match mode {
                BaselineMode::RiskfreeInterbank => (p_bar - cash, cash, params.s[i]),
                BaselineMode::RiskyInterbank => (p_bar, 0.0, params.s[i] + cash * disc / params.q0),
            };
            if face <= 0.0 {
                // cash alone covers the debt
                let cap = params.s[i] * params.q0 + (cash - p_bar) * disc;
                return Ok(BaselineValue { price: disc, rate: params.r, market_cap: cap });
            }
            let single = FinancialNetwork::from_rows(&[vec![0.0, face]], 1.0, 1.0)?;
            let p = params.single(i, s);
            let out = price_with_loading(&single, &p, &[p.sigma[0]])?;
            let price = (out.price[0] * face + extra_cash * disc) / p_bar;
            Ok(BaselineValue {
                price,
                rate: effective_rate(price * p_bar, p_bar, params.t),
                market_cap: out.market_cap[0],
            })
        })
        .collect()
}
