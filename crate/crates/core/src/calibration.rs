//! Stylized balance-sheet calibration and debt-firm value ratios.
//!
//! Banks hold interbank assets and one external risky position; they owe
//! interbank liabilities, external liabilities and carry capital. From total
//! assets `A`, capital `C` and interbank liabilities `IB`, with interbank
//! assets taken equal to `IB`:
//! `s = A - IB`, `L_ext = A - IB - C`, `p_bar = L_ext + IB`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::network::FinancialNetwork;

/// Reported aggregates for one bank, in currency units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSheet {
    pub bank_id: String,
    pub total_assets: f64,
    pub capital: f64,
    pub interbank_liabilities: f64,
}

/// Calibrated aggregates, indexed like the input sheets.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// External risky assets.
    pub s: Vec<f64>,
    /// Liabilities to the societal node.
    pub l_ext: Vec<f64>,
    pub p_bar: Vec<f64>,
    /// Interbank liabilities (row sums of the interbank block).
    pub row_sums: Vec<f64>,
    /// Interbank assets (column sums), equal to the row sums by assumption.
    pub col_sums: Vec<f64>,
}

pub fn calibrate(sheets: &[BalanceSheet]) -> Result<Calibration> {
    let n = sheets.len();
    let mut out = Calibration {
        s: Vec::with_capacity(n),
        l_ext: Vec::with_capacity(n),
        p_bar: Vec::with_capacity(n),
        row_sums: Vec::with_capacity(n),
        col_sums: Vec::with_capacity(n),
    };
    for (i, b) in sheets.iter().enumerate() {
        let (a, c, ib) = (b.total_assets, b.capital, b.interbank_liabilities);
        if !a.is_finite() || !c.is_finite() || !ib.is_finite() {
            return Err(NetError::Calibration { bank: i, reason: "non-finite balance-sheet entry".into() });
        }
        if ib < 0.0 {
            return Err(NetError::Calibration { bank: i, reason: format!("negative interbank liabilities {ib}") });
        }
        let s = a - ib;
        if s < 0.0 {
            return Err(NetError::Calibration { bank: i, reason: format!("external assets A - IB = {s} are negative") });
        }
        let l_ext = s - c;
        if l_ext < 0.0 {
            return Err(NetError::Calibration { bank: i, reason: format!("external liabilities A - IB - C = {l_ext} are negative") });
        }
        out.s.push(s);
        out.l_ext.push(l_ext);
        out.p_bar.push(l_ext + ib);
        out.row_sums.push(ib);
        out.col_sums.push(ib);
    }
    Ok(out)
}

/// Random off-diagonal mask with the given link density. Every row and
/// column keeps at least one link.
pub fn random_mask(n: usize, density: f64, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask: Vec<Vec<bool>> =
        (0..n).map(|i| (0..n).map(|j| i != j && rng.random::<f64>() < density).collect()).collect();
    if n > 1 {
        for i in 0..n {
            if !mask[i].iter().any(|&m| m) {
                let j = (i + 1 + rng.random_range(0..n - 1)) % n;
                mask[i][j] = true;
            }
            if !(0..n).any(|k| mask[k][i]) {
                let k = (i + 1 + rng.random_range(0..n - 1)) % n;
                mask[k][i] = true;
            }
        }
    }
    mask
}

pub const RAS_TOL: f64 = 1e-12;
pub const RAS_MAX_ITER: usize = 20_000;

/// Nonnegative matrix with the given margins, zero diagonal and zeros off
/// the mask, by alternating row and column scaling from seeded positive
/// starting weights.
pub fn fill_matrix(row_sums: &[f64], col_sums: &[f64], mask: &[Vec<bool>], seed: u64) -> Result<DMatrix<f64>> {
    let n = row_sums.len();
    if col_sums.len() != n || mask.len() != n || mask.iter().any(|r| r.len() != n) {
        return Err(NetError::Shape("margins and mask sizes differ".into()));
    }
    if row_sums.iter().chain(col_sums).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(NetError::Infeasible("margins must be finite and nonnegative".into()));
    }
    let (tr, tc): (f64, f64) = (row_sums.iter().sum(), col_sums.iter().sum());
    if (tr - tc).abs() > 1e-10 * tr.max(tc).max(1.0) {
        return Err(NetError::Infeasible(format!("row sums total {tr} but column sums total {tc}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::from_fn(n, n, |i, j| {
        if i != j && mask[i][j] && row_sums[i] > 0.0 && col_sums[j] > 0.0 {
            0.5 + rng.random::<f64>()
        } else {
            0.0
        }
    });
    for i in 0..n {
        if row_sums[i] > 0.0 && x.row(i).sum() == 0.0 {
            return Err(NetError::Infeasible(format!("row {i} needs {} but has no admissible entries", row_sums[i])));
        }
        if col_sums[i] > 0.0 && x.column(i).sum() == 0.0 {
            return Err(NetError::Infeasible(format!("column {i} needs {} but has no admissible entries", col_sums[i])));
        }
    }
    let scale = tr.max(1.0);
    for _ in 0..RAS_MAX_ITER {
        for i in 0..n {
            let r = x.row(i).sum();
            if r > 0.0 {
                x.row_mut(i).scale_mut(row_sums[i] / r);
            }
        }
        for j in 0..n {
            let c = x.column(j).sum();
            if c > 0.0 {
                x.column_mut(j).scale_mut(col_sums[j] / c);
            }
        }
        let err = (0..n).map(|i| (x.row(i).sum() - row_sums[i]).abs()).fold(0.0, f64::max);
        if err <= RAS_TOL * scale {
            return Ok(x);
        }
    }
    Err(NetError::Infeasible(format!("margins cannot be matched on the mask within {RAS_MAX_ITER} scaling rounds")))
}

/// Calibrated network plus the external positions.
#[derive(Debug, Clone)]
pub struct CalibratedSystem {
    pub network: FinancialNetwork,
    pub s: Vec<f64>,
    pub bank_ids: Vec<String>,
}

/// Balance sheets to a full network, filling the interbank block by RAS on a
/// random mask of the given density.
pub fn calibrate_network(
    sheets: &[BalanceSheet],
    density: f64,
    seed: u64,
    alpha_x: f64,
    alpha_l: f64,
) -> Result<CalibratedSystem> {
    let cal = calibrate(sheets)?;
    let n = sheets.len();
    let mask = random_mask(n, density, seed);
    let block = fill_matrix(&cal.row_sums, &cal.col_sums, &mask, seed.wrapping_add(1))?;
    let liabilities = DMatrix::from_fn(n, n + 1, |i, j| if j < n { block[(i, j)] } else { cal.l_ext[i] });
    let network = FinancialNetwork::new(liabilities, alpha_x, alpha_l, None)?;
    Ok(CalibratedSystem { network, s: cal.s, bank_ids: sheets.iter().map(|b| b.bank_id.clone()).collect() })
}

fn cash_or_zero(cash: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    match cash {
        None => Ok(vec![0.0; n]),
        Some(b) if b.len() == n => Ok(b.to_vec()),
        Some(b) => Err(NetError::Shape(format!("cash has length {}, expected {n}", b.len()))),
    }
}

/// Debt-firm value ratios `d_i = p_bar_i / (b_i + s_i q0 + (Pi^T p_bar)_i)`.
pub fn current_ratio(net: &FinancialNetwork, s: &[f64], q0: f64, cash: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = net.n();
    if s.len() != n {
        return Err(NetError::Shape(format!("s has length {}, expected {n}", s.len())));
    }
    let b = cash_or_zero(cash, n)?;
    let inter = net.interbank_assets();
    Ok((0..n).map(|i| net.p_bar()[i] / (b[i] + s[i] * q0 + inter[i])).collect())
}

/// External positions giving ratios `d` with liabilities held fixed:
/// `s_i = (p_bar_i / d_i - (Pi^T p_bar)_i - b_i) / q0`.
pub fn ratio_via_assets(net: &FinancialNetwork, d: &[f64], q0: f64, cash: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = net.n();
    if d.len() != n {
        return Err(NetError::Shape(format!("d has length {}, expected {n}", d.len())));
    }
    let b = cash_or_zero(cash, n)?;
    let inter = net.interbank_assets();
    (0..n)
        .map(|i| {
            if !(d[i] > 0.0) {
                return Err(NetError::Infeasible(format!("ratio d[{i}] = {} must be positive", d[i])));
            }
            let s = (net.p_bar()[i] / d[i] - inter[i] - b[i]) / q0;
            if s < -1e-12 * net.p_bar()[i].max(1.0) {
                return Err(NetError::Infeasible(format!(
                    "ratio d[{i}] = {} exceeds p_bar / (Pi^T p_bar + b) = {}",
                    d[i],
                    net.p_bar()[i] / (inter[i] + b[i])
                )));
            }
            Ok(s.max(0.0))
        })
        .collect()
}

/// Liabilities giving ratios `d` with positions `s` and relative liabilities
/// held fixed: solves `(I - diag(d) Pi^T) p_bar = diag(d) (b + s q0)`.
/// Feasible when the inverse of `I - diag(d) Pi^T` is nonnegative.
pub fn ratio_via_liabilities(
    net: &FinancialNetwork,
    s: &[f64],
    d: &[f64],
    q0: f64,
    cash: Option<&[f64]>,
) -> Result<FinancialNetwork> {
    let n = net.n();
    if d.len() != n || s.len() != n {
        return Err(NetError::Shape(format!("d and s must have length {n}")));
    }
    if let Some(i) = d.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(NetError::Infeasible(format!("ratio d[{i}] = {} must be positive", d[i])));
    }
    let b = cash_or_zero(cash, n)?;
    let dm = DMatrix::from_diagonal(&DVector::from_column_slice(d));
    let a = DMatrix::identity(n, n) - &dm * net.pi().transpose();
    let inv = a
        .try_inverse()
        .ok_or_else(|| NetError::Infeasible("I - diag(d) Pi^T is singular".into()))?;
    if inv.iter().any(|v| *v < -1e-12) {
        return Err(NetError::Infeasible("I - diag(d) Pi^T has a negative inverse entry; ratios too large".into()));
    }
    let rhs = DVector::from_fn(n, |i, _| d[i] * (b[i] + s[i] * q0));
    let p_bar = inv * rhs;
    if let Some(i) = p_bar.iter().position(|v| !(*v > 0.0)) {
        return Err(NetError::Infeasible(format!("implied total liability of bank {i} is {}", p_bar[i])));
    }
    FinancialNetwork::from_relative(net.pi(), &p_bar, net.alpha_x(), net.alpha_l(), net.gamma().cloned())
}
