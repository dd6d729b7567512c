//! Solvency thresholds and closed-form expectations for comonotonic
//! endowments `X = f(q)`.
//!
//! Because every endowment is nondecreasing in `q`, the default set is
//! nested along the factor line. Sorting banks by the factor level below which
//! they default gives at most `n + 1` intervals, and on interval `k` the
//! wealths are `Delta_k f(q) - delta_k` with the first `k` banks in default.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::clearing::linear_representation;
use crate::error::{NetError, Result};
use crate::factor::{partial_expectation, FactorModel};
use crate::network::FinancialNetwork;

/// Relative bisection tolerance on the factor.
pub const BISECTION_REL_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;

/// Factor levels at which each bank becomes solvent, plus the linear ladder.
#[derive(Debug, Clone)]
pub struct SolvencyThresholds {
    /// `q*_i` indexed by original bank label; `inf` means never solvent.
    pub q_star: Vec<f64>,
    /// `order[k]` is the bank in sorted position `k`, thresholds nonincreasing.
    pub order: Vec<usize>,
    /// `(Delta_k, delta_k)` for `k = 0..=n`, where the banks `order[..k]` default.
    pub ladder: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl SolvencyThresholds {
    pub fn sorted(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.q_star[i]).collect()
    }

    /// Interval endpoints `[inf, q*_[1], ..., q*_[n], 0]`; interval `k` is
    /// `[bounds[k + 1], bounds[k])`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.order.len() + 2);
        b.push(f64::INFINITY);
        b.extend(self.sorted());
        b.push(0.0);
        b
    }

    /// Sorted position of each bank.
    pub fn rank(&self) -> Vec<usize> {
        let mut rank = vec![0; self.order.len()];
        for (k, &i) in self.order.iter().enumerate() {
            rank[i] = k;
        }
        rank
    }
}

/// `e_i^T Delta f(q) - delta_i`, treating `0 * inf` as zero.
fn row_gap(delta_row: &[f64], offset: f64, model: &FactorModel, q: f64) -> f64 {
    let mut acc = 0.0;
    for (d, map) in delta_row.iter().zip(&model.maps) {
        if *d != 0.0 {
            acc += d * map.eval(q);
        }
    }
    acc - offset
}

fn row_gap_limit(delta_row: &[f64], offset: f64, model: &FactorModel) -> f64 {
    let mut acc = 0.0;
    for (d, map) in delta_row.iter().zip(&model.maps) {
        if *d != 0.0 {
            acc += d * map.limit();
        }
    }
    acc - offset
}

/// `sup { q >= 0 : e_i^T Delta f(q) < delta_i }^+`, capped at `cap`.
fn threshold_candidate(
    delta_row: &[f64],
    offset: f64,
    model: &FactorModel,
    cap: f64,
    closed_form: Option<f64>,
    breakpoints: Option<&[f64]>,
) -> Result<f64> {
    let g = |q: f64| row_gap(delta_row, offset, model, q);
    if g(0.0) >= 0.0 {
        return Ok(0.0);
    }
    if let Some(q) = closed_form {
        return Ok(q.max(0.0).min(cap));
    }
    let upper = model.distribution.sup_support();

    if let Some(bps) = breakpoints {
        // piecewise constant: the supremum sits on a jump or at the support edge
        if g(upper) < 0.0 {
            return Ok(cap);
        }
        let mut best = 0.0;
        let (mut lo, mut hi) = (0usize, bps.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if g(bps[mid]) < 0.0 {
                best = bps[mid];
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        return Ok(best.min(cap));
    }

    let mut hi = cap;
    if hi.is_finite() {
        if g(hi) < 0.0 {
            return Ok(cap);
        }
    } else {
        if row_gap_limit(delta_row, offset, model) < 0.0 {
            return Ok(f64::INFINITY);
        }
        hi = 1.0;
        let mut prev = g(0.0);
        loop {
            let v = g(hi);
            if v < prev {
                return Err(NetError::Model(format!("endowment map is not monotone near q = {hi}")));
            }
            if v >= 0.0 {
                break;
            }
            prev = v;
            hi *= 2.0;
            if !hi.is_finite() {
                return Ok(f64::INFINITY);
            }
        }
    }
    bisect(&g, 0.0, hi)
}

fn bisect(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut g_lo, mut g_hi) = (g(lo), g(hi));
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v < g_lo || v > g_hi {
            return Err(NetError::Model(format!("endowment map is not monotone near q = {mid}")));
        }
        if v < 0.0 {
            lo = mid;
            g_lo = v;
        } else {
            hi = mid;
            g_hi = v;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_sizes(net: &FinancialNetwork, model: &FactorModel) -> Result<()> {
    if model.n() != net.n() {
        return Err(NetError::Shape(format!("factor model has {} maps for {} banks", model.n(), net.n())));
    }
    Ok(())
}

/// Solvency thresholds by the iterative default ordering: at each step the
/// not-yet-defaulted bank with the largest threshold (given the banks already
/// in default) defaults next, clamped to the previous threshold so that
/// contagious defaults share a level.
pub fn solvency_thresholds(net: &FinancialNetwork, model: &FactorModel) -> Result<SolvencyThresholds> {
    check_sizes(net, model)?;
    let n = net.n();

    let breakpoints: Option<Vec<f64>> = {
        let mut all = Vec::new();
        let mut ok = true;
        for m in &model.maps {
            match m.step_breakpoints() {
                Some(b) => all.extend(b),
                None => ok = false,
            }
        }
        ok.then(|| {
            all.sort_by(f64::total_cmp);
            all.dedup();
            all
        })
    };

    let mut z = vec![false; n];
    let mut q_star = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(n);
    let mut ladder = Vec::with_capacity(n + 1);
    ladder.push(linear_representation(net, &z)?);
    let mut prev = f64::INFINITY;

    for step in 0..n {
        let (delta, offset) = &ladder[step];
        let first_step = step == 0 && net.gamma().is_none();
        let remaining: Vec<usize> = (0..n).filter(|&i| !z[i]).collect();
        let candidates: Vec<f64> = remaining
            .par_iter()
            .map(|&i| {
                let row: Vec<f64> = delta.row(i).iter().copied().collect();
                let closed = if first_step { model.maps[i].inverse(offset[i]) } else { None };
                threshold_candidate(&row, offset[i], model, prev, closed, breakpoints.as_deref())
            })
            .collect::<Result<_>>()?;
        let mut pick = 0;
        for (c, v) in candidates.iter().enumerate() {
            if *v > candidates[pick] {
                pick = c;
            }
        }
        let bank = remaining[pick];
        let q = candidates[pick].min(prev);
        q_star[bank] = q;
        prev = q;
        order.push(bank);
        z[bank] = true;
        ladder.push(linear_representation(net, &z)?);
    }

    Ok(SolvencyThresholds { q_star, order, ladder })
}

/// Expected outcomes for one bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BankExpectation {
    /// Probability of default.
    pub pd: f64,
    /// Expected wealth.
    pub wealth: f64,
    /// Expected payment.
    pub payment: f64,
    /// Expected equity.
    pub equity: f64,
}

#[derive(Debug, Clone)]
pub struct ComonotonicExpectations {
    pub thresholds: SolvencyThresholds,
    pub banks: Vec<BankExpectation>,
}

/// Per-interval contributions `Delta_k E[f(q) 1_k] - delta_k P_k`.
fn interval_terms(model: &FactorModel, th: &SolvencyThresholds) -> Result<Vec<DVector<f64>>> {
    let bounds = th.boundaries();
    let n = model.n();
    (0..=n)
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = (bounds[k + 1], bounds[k]);
            if !(hi > lo) {
                return Ok(DVector::zeros(n));
            }
            let prob = model.distribution.prob(lo, hi);
            let mut pe = DVector::zeros(n);
            for (j, map) in model.maps.iter().enumerate() {
                pe[j] = partial_expectation(&model.distribution, map, lo, hi)?.1;
            }
            let (delta, offset) = &th.ladder[k];
            Ok(delta * pe - offset * prob)
        })
        .collect()
}

/// Probability of default and expected wealth, payment and equity for every
/// bank under comonotonic endowments.
pub fn expected_values(net: &FinancialNetwork, model: &FactorModel) -> Result<ComonotonicExpectations> {
    let thresholds = solvency_thresholds(net, model)?;
    let terms = interval_terms(model, &thresholds)?;
    let rank = thresholds.rank();
    let banks = (0..net.n())
        .map(|i| {
            let r = rank[i];
            // sorted position r defaults on intervals k >= r + 1
            let equity: f64 = terms[..=r].iter().map(|t| t[i]).sum();
            let shortfall: f64 = terms[r + 1..].iter().map(|t| t[i]).sum();
            BankExpectation {
                pd: model.distribution.prob(0.0, thresholds.q_star[i]),
                wealth: equity + shortfall,
                payment: net.p_bar()[i] + shortfall,
                equity,
            }
        })
        .collect();
    Ok(ComonotonicExpectations { thresholds, banks })
}
