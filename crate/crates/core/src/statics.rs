//! Comparative statics as long-format rows `(param, bank, metric, value)`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{ratio_via_assets, ratio_via_liabilities};
use crate::capm::{debt_price_bound, merton_baseline, BaselineMode, CapmParams, Which};
use crate::clearing::greatest_clearing;
use crate::error::{NetError, Result};
use crate::network::FinancialNetwork;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticsRow {
    pub param: String,
    pub bank: String,
    pub metric: String,
    pub value: f64,
}

fn row(param: &str, bank: &str, metric: &str, value: f64) -> StaticsRow {
    StaticsRow { param: param.into(), bank: bank.into(), metric: metric.into(), value }
}

fn collect(chunks: Vec<Result<Vec<StaticsRow>>>) -> Result<Vec<StaticsRow>> {
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Median with `total_cmp` ordering, averaging the middle pair.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Discounted price per unit face value at the mean endowment `s q0 e^{rT}`.
pub fn jensen_price(net: &FinancialNetwork, params: &CapmParams) -> Result<Vec<f64>> {
    let growth = (params.r * params.t).exp();
    let mean = DVector::from_iterator(net.n(), params.s.iter().map(|s| s * params.q0 * growth));
    let cl = greatest_clearing(net, &mean)?;
    let disc = (-params.r * params.t).exp();
    Ok((0..net.n()).map(|i| disc * cl.payments[i] / net.p_bar()[i]).collect())
}

/// Bounds and thresholds over a grid of common betas, total volatilities fixed.
pub fn sweep_beta(net: &FinancialNetwork, params: &CapmParams, ids: &[String], grid: &[f64]) -> Result<Vec<StaticsRow>> {
    let chunks = grid
        .par_iter()
        .map(|&beta| {
            let p = CapmParams::from_total_vol(
                params.r,
                params.t,
                params.sigma_m,
                vec![beta; net.n()],
                params.sigma.clone(),
                params.s.clone(),
            )
            .map(|mut p| {
                p.q0 = params.q0;
                p
            })?;
            let lo = debt_price_bound(net, &p, Which::Lower, false)?;
            let hi = debt_price_bound(net, &p, Which::Upper, false)?;
            let jensen = jensen_price(net, &p)?;
            let key = beta.to_string();
            let mut rows = Vec::new();
            for (i, id) in ids.iter().enumerate() {
                rows.push(row(&key, id, "price_lower", lo.price[i]));
                rows.push(row(&key, id, "price_upper", hi.price[i]));
                rows.push(row(&key, id, "price_jensen", jensen[i]));
                rows.push(row(&key, id, "q_star_lower", lo.q_star[i]));
                rows.push(row(&key, id, "q_star_upper", hi.q_star[i]));
                rows.push(row(&key, id, "market_cap_lower", lo.market_cap[i]));
                rows.push(row(&key, id, "market_cap_upper", hi.market_cap[i]));
            }
            Ok(rows)
        })
        .collect();
    collect(chunks)
}

/// Network rates and caps against both single-firm baselines over maturities.
pub fn sweep_maturity(net: &FinancialNetwork, params: &CapmParams, ids: &[String], grid: &[f64]) -> Result<Vec<StaticsRow>> {
    let chunks = grid
        .par_iter()
        .map(|&t| {
            let p = CapmParams { t, ..params.clone() };
            let full = debt_price_bound(net, &p, Which::Lower, true)?;
            let a = merton_baseline(net, &p, BaselineMode::RiskfreeInterbank)?;
            let b = merton_baseline(net, &p, BaselineMode::RiskyInterbank)?;
            let key = t.to_string();
            let mut rows = Vec::new();
            for (i, id) in ids.iter().enumerate() {
                rows.push(row(&key, id, "rate_network", full.rate[i]));
                rows.push(row(&key, id, "rate_riskfree", a[i].rate));
                rows.push(row(&key, id, "rate_risky", b[i].rate));
                rows.push(row(&key, id, "market_cap_network", full.market_cap[i]));
                rows.push(row(&key, id, "market_cap_riskfree", a[i].market_cap));
                rows.push(row(&key, id, "market_cap_risky", b[i].market_cap));
            }
            Ok(rows)
        })
        .collect();
    collect(chunks)
}

/// Prices, rates and caps with `alpha_x = alpha_L = alpha`, plus cross-bank medians.
pub fn sweep_alpha(net: &FinancialNetwork, params: &CapmParams, ids: &[String], grid: &[f64]) -> Result<Vec<StaticsRow>> {
    let chunks = grid
        .par_iter()
        .map(|&alpha| {
            let net_a = net.with_recovery(alpha, alpha)?;
            let out = debt_price_bound(&net_a, params, Which::Lower, true)?;
            let key = alpha.to_string();
            let mut rows = Vec::new();
            for (i, id) in ids.iter().enumerate() {
                rows.push(row(&key, id, "price", out.price[i]));
                rows.push(row(&key, id, "rate", out.rate[i]));
                rows.push(row(&key, id, "market_cap", out.market_cap[i]));
            }
            rows.push(row(&key, "median", "rate", median(&out.rate)));
            rows.push(row(&key, "median", "market_cap", median(&out.market_cap)));
            Ok(rows)
        })
        .collect();
    collect(chunks)
}

/// How a target debt-firm value ratio is reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioRoute {
    /// Change external positions, liabilities fixed.
    Assets,
    /// Change total liabilities, positions and relative liabilities fixed.
    Liabilities,
}

/// Effective rates under ratio changes for banks `pair`, other ratios at
/// their current values, no cash. Infeasible grid points are skipped. The
/// param column reads `d_a:d_b`.
pub fn sweep_ratio(
    net: &FinancialNetwork,
    params: &CapmParams,
    ids: &[String],
    pair: (usize, usize),
    grid_a: &[f64],
    grid_b: &[f64],
    route: RatioRoute,
) -> Result<Vec<StaticsRow>> {
    let n = net.n();
    if pair.0 >= n || pair.1 >= n || pair.0 == pair.1 {
        return Err(NetError::Shape(format!("ratio pair {pair:?} invalid for {n} banks")));
    }
    let base = crate::calibration::current_ratio(net, &params.s, params.q0, None)?;
    let points: Vec<(f64, f64)> = grid_a.iter().flat_map(|&a| grid_b.iter().map(move |&b| (a, b))).collect();
    let metric = match route {
        RatioRoute::Assets => "rate_assets",
        RatioRoute::Liabilities => "rate_liabilities",
    };
    let chunks = points
        .par_iter()
        .map(|&(da, db)| {
            let mut d = base.clone();
            d[pair.0] = da;
            d[pair.1] = db;
            let priced = match route {
                RatioRoute::Assets => ratio_via_assets(net, &d, params.q0, None).and_then(|s| {
                    let p = CapmParams { s, ..params.clone() };
                    debt_price_bound(net, &p, Which::Lower, true)
                }),
                RatioRoute::Liabilities => ratio_via_liabilities(net, &params.s, &d, params.q0, None)
                    .and_then(|net2| debt_price_bound(&net2, params, Which::Lower, true)),
            };
            let out = match priced {
                Ok(o) => o,
                Err(NetError::Infeasible(_)) => return Ok(Vec::new()),
                Err(e) => return Err(e),
            };
            let key = format!("{da}:{db}");
            Ok(ids.iter().enumerate().map(|(i, id)| row(&key, id, metric, out.rate[i])).collect())
        })
        .collect();
    collect(chunks)
}
