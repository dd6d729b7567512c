//! Static interbank network: nominal liabilities, relative liabilities and
//! recovery rates.
//!
//! Banks are indexed `0..n`; the societal node is the implicit last column of
//! the liabilities matrix and never appears as a row.

use nalgebra::{DMatrix, DVector};

use crate::error::{NetError, Result};

/// An immutable financial network.
#[derive(Debug, Clone, PartialEq)]
pub struct FinancialNetwork {
    liabilities: DMatrix<f64>,
    p_bar: DVector<f64>,
    pi: DMatrix<f64>,
    pi_soc: DVector<f64>,
    interbank: DVector<f64>,
    alpha_x: f64,
    alpha_l: f64,
    gamma: Option<DMatrix<f64>>,
}

impl FinancialNetwork {
    /// Builds and validates a network from an `n x (n+1)` liabilities matrix
    /// whose last column holds obligations to the societal node.
    pub fn new(
        liabilities: DMatrix<f64>,
        alpha_x: f64,
        alpha_l: f64,
        gamma: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = liabilities.nrows();
        if n == 0 {
            return Err(NetError::Shape("network has no banks".into()));
        }
        if liabilities.ncols() != n + 1 {
            return Err(NetError::Shape(format!(
                "liabilities must be {n} x {}, got {} x {}",
                n + 1,
                liabilities.nrows(),
                liabilities.ncols()
            )));
        }
        for (name, value) in [("alpha_x", alpha_x), ("alpha_L", alpha_l)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(NetError::RecoveryRate { name, value });
            }
        }
        for i in 0..n {
            for j in 0..=n {
                let v = liabilities[(i, j)];
                if !v.is_finite() {
                    return Err(NetError::NonFinite { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(NetError::NegativeLiability { row: i, col: j, value: v });
                }
            }
            if liabilities[(i, i)] != 0.0 {
                return Err(NetError::SelfObligation { bank: i, value: liabilities[(i, i)] });
            }
        }

        let p_bar = DVector::from_iterator(n, liabilities.row_iter().map(|r| r.sum()));
        let mut pi = DMatrix::zeros(n, n);
        let mut pi_soc = DVector::zeros(n);
        for i in 0..n {
            if p_bar[i] <= 0.0 {
                return Err(NetError::ZeroLiabilities { bank: i });
            }
            if liabilities[(i, n)] <= 0.0 {
                return Err(NetError::NoSocietalObligation { bank: i });
            }
            for j in 0..n {
                pi[(i, j)] = liabilities[(i, j)] / p_bar[i];
            }
            pi_soc[i] = liabilities[(i, n)] / p_bar[i];
        }

        if let Some(g) = &gamma {
            if g.nrows() != n || g.ncols() != n {
                return Err(NetError::Shape(format!(
                    "cross-ownership must be {n} x {n}, got {} x {}",
                    g.nrows(),
                    g.ncols()
                )));
            }
            for i in 0..n {
                for j in 0..n {
                    let v = g[(i, j)];
                    if !v.is_finite() {
                        return Err(NetError::NonFinite { row: i, col: j });
                    }
                    if v < 0.0 {
                        return Err(NetError::CrossOwnership { bank: i, sum: v });
                    }
                }
                let sum = g.row(i).sum();
                if sum >= 1.0 {
                    return Err(NetError::CrossOwnership { bank: i, sum });
                }
            }
        }

        let interbank = pi.tr_mul(&p_bar);
        Ok(Self { liabilities, p_bar, pi, pi_soc, interbank, alpha_x, alpha_l, gamma })
    }

    /// Convenience constructor from row-major nested slices.
    pub fn from_rows(rows: &[Vec<f64>], alpha_x: f64, alpha_l: f64) -> Result<Self> {
        let n = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(NetError::Shape("ragged liabilities rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(n, width, &flat), alpha_x, alpha_l, None)
    }

    /// Rebuilds a network from relative liabilities and totals, i.e.
    /// `L_ij = pi_ij * p_bar_i` and the societal column `(1 - sum_j pi_ij) * p_bar_i`.
    pub fn from_relative(
        pi: &DMatrix<f64>,
        p_bar: &DVector<f64>,
        alpha_x: f64,
        alpha_l: f64,
        gamma: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = pi.nrows();
        if pi.ncols() != n || p_bar.len() != n {
            return Err(NetError::Shape("relative liabilities and totals disagree in size".into()));
        }
        let mut l = DMatrix::zeros(n, n + 1);
        for i in 0..n {
            let row_sum: f64 = pi.row(i).sum();
            for j in 0..n {
                l[(i, j)] = pi[(i, j)] * p_bar[i];
            }
            l[(i, n)] = (1.0 - row_sum) * p_bar[i];
        }
        Self::new(l, alpha_x, alpha_l, gamma)
    }

    pub fn n(&self) -> usize {
        self.p_bar.len()
    }

    /// Nominal liabilities, `n x (n+1)`.
    pub fn liabilities(&self) -> &DMatrix<f64> {
        &self.liabilities
    }

    pub fn p_bar(&self) -> &DVector<f64> {
        &self.p_bar
    }

    /// Relative interbank liabilities, `n x n`.
    pub fn pi(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn pi_soc(&self) -> &DVector<f64> {
        &self.pi_soc
    }

    pub fn alpha_x(&self) -> f64 {
        self.alpha_x
    }

    pub fn alpha_l(&self) -> f64 {
        self.alpha_l
    }

    pub fn gamma(&self) -> Option<&DMatrix<f64>> {
        self.gamma.as_ref()
    }

    pub fn full_recovery(&self) -> bool {
        self.alpha_x == 1.0 && self.alpha_l == 1.0
    }

    /// Nominal interbank assets `Pi^T p_bar`.
    pub fn interbank_assets(&self) -> &DVector<f64> {
        &self.interbank
    }

    /// Same topology with different recovery rates.
    pub fn with_recovery(&self, alpha_x: f64, alpha_l: f64) -> Result<Self> {
        Self::new(self.liabilities.clone(), alpha_x, alpha_l, self.gamma.clone())
    }

    /// Returns the network with banks relabelled so that new bank `k` is old
    /// bank `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(NetError::Shape("permutation length".into()));
        }
        let mut l = DMatrix::zeros(n, n + 1);
        for (a, &i) in perm.iter().enumerate() {
            for (b, &j) in perm.iter().enumerate() {
                l[(a, b)] = self.liabilities[(i, j)];
            }
            l[(a, n)] = self.liabilities[(i, n)];
        }
        let gamma = self
            .gamma
            .as_ref()
            .map(|g| DMatrix::from_fn(n, n, |a, b| g[(perm[a], perm[b])]));
        Self::new(l, self.alpha_x, self.alpha_l, gamma)
    }
}
