//! Pricing bounds for general random endowments under full recovery.
//!
//! For any endowment vector `X` with given marginals, expected payments are
//! bracketed below by the comonotonic coupling `Z = (F_1^{-1}(U), ..., F_n^{-1}(U))`
//! and above by the payments at the mean, with a conditional-mean comonotonic
//! model in between when the caller supplies one.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::clearing::greatest_clearing;
use crate::comonotonic::{expected_values, BankExpectation};
use crate::error::{NetError, Result};
use crate::factor::{EndowmentMap, FactorDistribution, FactorModel};
use crate::marginal::Marginal;
use crate::network::FinancialNetwork;

/// Marginal laws of the endowments, one per bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSet {
    pub marginals: Vec<Marginal>,
}

impl MarginalSet {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    pub fn n(&self) -> usize {
        self.marginals.len()
    }

    pub fn means(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.marginals.iter().map(Marginal::mean))
    }

    /// The comonotonic coupling as a factor model on a uniform factor.
    pub fn comonotonic_model(&self) -> Result<FactorModel> {
        let maps = self.marginals.iter().map(|m| EndowmentMap::Quantile { marginal: m.clone() }).collect();
        FactorModel::new(maps, FactorDistribution::Uniform)
    }
}

/// Expected wealth and payment for one bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub wealth: f64,
    pub payment: f64,
}

impl From<&BankExpectation> for BoundValue {
    fn from(b: &BankExpectation) -> Self {
        Self { wealth: b.wealth, payment: b.payment }
    }
}

pub(crate) fn require_full_recovery(net: &FinancialNetwork) -> Result<()> {
    if net.full_recovery() {
        Ok(())
    } else {
        Err(NetError::RequiresFullRecovery { alpha_x: net.alpha_x(), alpha_l: net.alpha_l() })
    }
}

fn check_n(net: &FinancialNetwork, n: usize) -> Result<()> {
    if n != net.n() {
        return Err(NetError::Shape(format!("{n} marginals for {} banks", net.n())));
    }
    Ok(())
}

/// `E[V(Z)]`, `E[p(Z)]` for the comonotonic coupling of the marginals.
pub fn comonotonic_lower(net: &FinancialNetwork, marg: &MarginalSet) -> Result<Vec<BoundValue>> {
    require_full_recovery(net)?;
    check_n(net, marg.n())?;
    let ev = expected_values(net, &marg.comonotonic_model()?)?;
    Ok(ev.banks.iter().map(BoundValue::from).collect())
}

/// `V(E[X])`, `p(E[X])`.
pub fn jensen_upper(net: &FinancialNetwork, mean_x: &DVector<f64>) -> Result<Vec<BoundValue>> {
    require_full_recovery(net)?;
    check_n(net, mean_x.len())?;
    let cl = greatest_clearing(net, mean_x)?;
    Ok((0..net.n()).map(|i| BoundValue { wealth: cl.wealth[i], payment: cl.payments[i] }).collect())
}

/// Comonotonic values of the conditional means `E[X_i | q] = f_i(q)`.
pub fn conditional_upper(net: &FinancialNetwork, cond: &FactorModel) -> Result<Vec<BoundValue>> {
    require_full_recovery(net)?;
    check_n(net, cond.n())?;
    cond.validate()?;
    let ev = expected_values(net, cond)?;
    Ok(ev.banks.iter().map(BoundValue::from).collect())
}

/// One row of the bounds table, expected payments only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichRow {
    pub bank: usize,
    pub lower: f64,
    pub conditional_upper: Option<f64>,
    pub jensen_upper: f64,
}

/// Lower, optional conditional, and Jensen bounds on expected payments.
pub fn sandwich(net: &FinancialNetwork, marg: &MarginalSet, cond: Option<&FactorModel>) -> Result<Vec<SandwichRow>> {
    let lower = comonotonic_lower(net, marg)?;
    let upper = jensen_upper(net, &marg.means())?;
    let mid = cond.map(|c| conditional_upper(net, c)).transpose()?;
    Ok((0..net.n())
        .map(|i| SandwichRow {
            bank: i,
            lower: lower[i].payment,
            conditional_upper: mid.as_ref().map(|m| m[i].payment),
            jensen_upper: upper[i].payment,
        })
        .collect())
}
