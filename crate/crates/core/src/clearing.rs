//! Greatest clearing wealths under deterministic endowments.
//!
//! Wealths solve `V = Psi*(V)`. For a fixed default set `z` the fixed point is
//! affine in the endowments, `V = Delta(z) x - delta(z)`, which is what the
//! fictitious default algorithm exploits: guess `z`, solve the linear system,
//! update `z` from the signs of `V`, repeat until `z` is stable.

use nalgebra::{DMatrix, DVector};

use crate::error::{NetError, Result};
use crate::network::FinancialNetwork;

/// Relative tolerance used to classify a wealth as negative. A bank is in
/// default when `V_i < -ZERO_TOL * max(1, p_bar_i)`; exact zero is solvent.
pub const ZERO_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn defaults_at(v: f64, p_bar: f64) -> bool {
    v < -ZERO_TOL * p_bar.max(1.0)
}

/// Outcome of clearing the network for one endowment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResult {
    /// Clearing wealths `V`.
    pub wealth: DVector<f64>,
    /// Payments `p = p_bar - V^-`.
    pub payments: DVector<f64>,
    /// Equities `E = V^+`.
    pub equity: DVector<f64>,
    /// Default indicator `z_i = 1{V_i < 0}`.
    pub defaults: Vec<bool>,
    /// Number of linear solves performed by the fictitious default algorithm.
    pub iterations: usize,
    /// Total payment received by the societal node.
    pub societal_payment: f64,
}

impl ClearingResult {
    pub fn n_defaults(&self) -> usize {
        self.defaults.iter().filter(|&&d| d).count()
    }
}

fn check_endowments(net: &FinancialNetwork, x: &DVector<f64>) -> Result<()> {
    if x.len() != net.n() {
        return Err(NetError::Shape(format!("endowments have length {}, expected {}", x.len(), net.n())));
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(NetError::Endowment(format!("x[{i}] = {v} must be finite and nonnegative")));
    }
    Ok(())
}

/// One application of the clearing map `Psi*` to a wealth vector.
pub fn psi_star(net: &FinancialNetwork, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_endowments(net, x)?;
    if v.len() != net.n() {
        return Err(NetError::Shape("wealth vector length".into()));
    }
    let n = net.n();
    let pi = net.pi();
    let p_bar = net.p_bar();
    Ok(DVector::from_fn(n, |i, _| {
        let solvent = v[i] >= 0.0;
        let (ax, al) = if solvent { (1.0, 1.0) } else { (net.alpha_x(), net.alpha_l()) };
        let mut inflow = 0.0;
        for j in 0..n {
            inflow += pi[(j, i)] * (p_bar[j] - (-v[j]).max(0.0));
        }
        if let Some(g) = net.gamma() {
            for j in 0..n {
                inflow += g[(j, i)] * v[j].max(0.0);
            }
        }
        ax * x[i] + al * inflow - p_bar[i]
    }))
}

/// The matrix `M(z) = I - (I - (1 - alpha_L) diag z) [Pi^T diag z + Gamma^T (I - diag z)]`
/// shared by `Delta(z)` and `delta(z)`.
fn system_matrix(net: &FinancialNetwork, z: &[bool]) -> DMatrix<f64> {
    let n = net.n();
    let pi = net.pi();
    let gamma = net.gamma();
    let al = net.alpha_l();
    DMatrix::from_fn(n, n, |i, j| {
        let scale = if z[i] { al } else { 1.0 };
        let coupling = if z[j] { pi[(j, i)] } else { gamma.map_or(0.0, |g| g[(j, i)]) };
        let id = if i == j { 1.0 } else { 0.0 };
        id - scale * coupling
    })
}

/// Right-hand side constant `[I - (I - (1 - alpha_L) diag z) Pi^T] p_bar`.
fn offset_rhs(net: &FinancialNetwork, z: &[bool]) -> DVector<f64> {
    let ib = net.interbank_assets();
    let al = net.alpha_l();
    DVector::from_fn(net.n(), |i, _| net.p_bar()[i] - if z[i] { al } else { 1.0 } * ib[i])
}

fn check_z(net: &FinancialNetwork, z: &[bool]) -> Result<()> {
    if z.len() != net.n() {
        return Err(NetError::Shape(format!("default set has length {}, expected {}", z.len(), net.n())));
    }
    Ok(())
}

fn lu_solve(m: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.lu()
        .solve(rhs)
        .ok_or_else(|| NetError::Internal("clearing system matrix is singular".into()))
}

/// `Delta(z)` and `delta(z)` from a single LU factorization.
pub fn linear_representation(net: &FinancialNetwork, z: &[bool]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_z(net, z)?;
    let n = net.n();
    let ax = net.alpha_x();
    let mut rhs = DMatrix::zeros(n, n + 1);
    for i in 0..n {
        rhs[(i, i)] = if z[i] { ax } else { 1.0 };
    }
    rhs.set_column(n, &offset_rhs(net, z));
    let sol = lu_solve(system_matrix(net, z), &rhs)?;
    let delta = sol.columns(0, n).into_owned();
    let offset = sol.column(n).into_owned();
    Ok((delta, offset))
}

/// `Delta(z) = M(z)^{-1} (I - (1 - alpha_x) diag z)`.
pub fn delta_matrix(net: &FinancialNetwork, z: &[bool]) -> Result<DMatrix<f64>> {
    Ok(linear_representation(net, z)?.0)
}

/// `delta(z) = M(z)^{-1} [I - (I - (1 - alpha_L) diag z) Pi^T] p_bar`.
pub fn delta_vector(net: &FinancialNetwork, z: &[bool]) -> Result<DVector<f64>> {
    Ok(linear_representation(net, z)?.1)
}

/// Wealths for a fixed default set: solves `M(z) V = D_x(z) x - c(z)`.
fn wealth_given(net: &FinancialNetwork, x: &DVector<f64>, z: &[bool]) -> Result<DVector<f64>> {
    let ax = net.alpha_x();
    let offset = offset_rhs(net, z);
    let rhs = DVector::from_fn(net.n(), |i, _| if z[i] { ax } else { 1.0 } * x[i] - offset[i]);
    if net.gamma().is_none() && z.iter().all(|&d| !d) {
        return Ok(rhs);
    }
    system_matrix(net, z)
        .lu()
        .solve(&rhs)
        .ok_or_else(|| NetError::Internal("clearing system matrix is singular".into()))
}

/// Greatest clearing solution via the fictitious default algorithm.
pub fn greatest_clearing(net: &FinancialNetwork, x: &DVector<f64>) -> Result<ClearingResult> {
    check_endowments(net, x)?;
    let n = net.n();
    let p_bar = net.p_bar();

    let mut z = vec![false; n];
    let mut v = wealth_given(net, x, &z)?;
    let mut iterations = 1;
    loop {
        let next: Vec<bool> = (0..n).map(|i| defaults_at(v[i], p_bar[i])).collect();
        if next == z {
            break;
        }
        z = next;
        v = wealth_given(net, x, &z)?;
        iterations += 1;
        if iterations > n + 1 {
            return Err(NetError::Internal(format!(
                "fictitious default algorithm did not settle within {} rounds",
                n + 1
            )));
        }
    }
    Ok(finish(net, v, z, iterations))
}

fn finish(net: &FinancialNetwork, wealth: DVector<f64>, defaults: Vec<bool>, iterations: usize) -> ClearingResult {
    let n = net.n();
    let p_bar = net.p_bar();
    let payments = DVector::from_fn(n, |i, _| {
        if defaults[i] {
            (p_bar[i] + wealth[i]).clamp(0.0, p_bar[i])
        } else {
            p_bar[i]
        }
    });
    let equity = DVector::from_fn(n, |i, _| if defaults[i] { 0.0 } else { wealth[i].max(0.0) });
    let societal_payment = net.pi_soc().dot(&payments);
    ClearingResult { wealth, payments, equity, defaults, iterations, societal_payment }
}
