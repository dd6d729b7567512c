//! Monte Carlo averages of clearing outcomes over a scenario batch.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::clearing::greatest_clearing;
use crate::error::{NetError, Result};
use crate::network::FinancialNetwork;
use crate::oracle::simulate::ScenarioBatch;

const CHUNK: usize = 4096;

/// Mean and standard error of one quantity. The standard error is zero for
/// exactly enumerated batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McStat {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McBank {
    pub pd: McStat,
    pub wealth: McStat,
    pub payment: McStat,
    pub equity: McStat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McExpectations {
    pub n_paths: usize,
    pub banks: Vec<McBank>,
    /// Total equity of the banks.
    pub sector_equity: McStat,
    pub societal_payment: McStat,
}

/// Running mean and centred second moment, mergeable across chunks.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Self { n, mean: self.mean + d * other.n / n, m2: self.m2 + other.m2 + d * d * self.n * other.n / n }
    }

    fn stat(&self) -> McStat {
        let se = if self.n > 1.0 { (self.m2 / (self.n - 1.0) / self.n).sqrt() } else { 0.0 };
        McStat { mean: self.mean, se }
    }
}

/// Number of tracked quantities: four per bank plus sector equity and society.
fn width(n: usize) -> usize {
    4 * n + 2
}

fn outcomes(net: &FinancialNetwork, x: &[f64]) -> Result<Vec<f64>> {
    let n = net.n();
    let cl = greatest_clearing(net, &DVector::from_column_slice(x))?;
    let mut out = Vec::with_capacity(width(n));
    for i in 0..n {
        out.push(if cl.defaults[i] { 1.0 } else { 0.0 });
        out.push(cl.wealth[i]);
        out.push(cl.payments[i]);
        out.push(cl.equity[i]);
    }
    out.push(cl.equity.sum());
    out.push(cl.societal_payment);
    Ok(out)
}

/// Averages greatest-clearing outcomes over the batch. Chunks are reduced in
/// a fixed order, so results do not depend on the thread count.
pub fn mc_expectations(net: &FinancialNetwork, batch: &ScenarioBatch) -> Result<McExpectations> {
    let n = net.n();
    if batch.x.is_empty() {
        return Err(NetError::Model("empty scenario batch".into()));
    }
    if batch.n_banks() != n {
        return Err(NetError::Shape(format!("batch has {} banks, network has {n}", batch.n_banks())));
    }
    let w = width(n);

    let stats: Vec<McStat> = if let Some(weights) = &batch.weights {
        let mut acc = vec![0.0; w];
        for (x, p) in batch.x.iter().zip(weights) {
            for (a, v) in acc.iter_mut().zip(outcomes(net, x)?) {
                *a += p * v;
            }
        }
        acc.into_iter().map(|mean| McStat { mean, se: 0.0 }).collect()
    } else {
        let chunks: Vec<Vec<Moments>> = batch
            .x
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut m = vec![Moments::default(); w];
                for x in chunk {
                    for (mk, v) in m.iter_mut().zip(outcomes(net, x)?) {
                        mk.push(v);
                    }
                }
                Ok(m)
            })
            .collect::<Result<_>>()?;
        let total = chunks.into_iter().fold(vec![Moments::default(); w], |acc, c| {
            acc.into_iter().zip(c).map(|(a, b)| a.merge(b)).collect()
        });
        total.iter().map(Moments::stat).collect()
    };

    let banks = (0..n)
        .map(|i| McBank { pd: stats[4 * i], wealth: stats[4 * i + 1], payment: stats[4 * i + 2], equity: stats[4 * i + 3] })
        .collect();
    Ok(McExpectations { n_paths: batch.n_paths(), banks, sector_equity: stats[4 * n], societal_payment: stats[4 * n + 1] })
}
