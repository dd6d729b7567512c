#![allow(dead_code)]

use nalgebra::DVector;
use netval_core::network::FinancialNetwork;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn two_bank(alpha: f64) -> FinancialNetwork {
    FinancialNetwork::from_rows(&[vec![0.0, 7.0, 3.0], vec![3.0, 0.0, 3.0]], alpha, alpha).unwrap()
}

pub fn small_cycle(alpha: f64) -> FinancialNetwork {
    FinancialNetwork::from_rows(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 2.0]], alpha, alpha).unwrap()
}

/// Liability rows for `n` banks: sparse interbank block, positive societal column.
pub fn random_rows<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..=n)
                .map(|j| {
                    if j == n {
                        rng.random_range(0.1..5.0)
                    } else if j == i || rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.0..5.0)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn random_network(seed: u64, n_max: usize, alpha_x: f64, alpha_l: f64) -> FinancialNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=n_max);
    FinancialNetwork::from_rows(&random_rows(&mut rng, n), alpha_x, alpha_l).unwrap()
}

/// Endowments on the scale of total liabilities so that defaults are common.
pub fn random_endowment<R: Rng>(rng: &mut R, net: &FinancialNetwork) -> DVector<f64> {
    DVector::from_fn(net.n(), |i, _| rng.random_range(0.0..1.2) * net.p_bar()[i])
}

/// Random correlation matrix from a normalized Gram matrix.
pub fn random_correlation<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let g: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.05 } else { 0.0 }).collect()).collect();
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { g[i][j] / (g[i][i] * g[j][j]).sqrt() }).collect()).collect()
}

fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 3 => 0.0..5.0f64]
}

/// Liability rows for 2 to `n_max` banks.
pub fn rows_strategy(n_max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=n_max).prop_flat_map(|n| {
        prop::collection::vec((prop::collection::vec(entry(), n), 0.1..5.0f64), n).prop_map(move |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (mut r, soc))| {
                    r[i] = 0.0;
                    r.push(soc);
                    r
                })
                .collect()
        })
    })
}

/// A network together with `k` endowment vectors on the liability scale.
pub fn net_with_endowments(n_max: usize, k: usize, alpha: f64) -> impl Strategy<Value = (FinancialNetwork, Vec<DVector<f64>>)> {
    rows_strategy(n_max).prop_flat_map(move |rows| {
        let n = rows.len();
        let net = FinancialNetwork::from_rows(&rows, alpha, alpha).unwrap();
        let xs = prop::collection::vec(prop::collection::vec(0.0..1.2f64, n), k);
        (Just(net), xs).prop_map(|(net, xs)| {
            let xs = xs.into_iter().map(|u| DVector::from_fn(u.len(), |i, _| u[i] * net.p_bar()[i])).collect();
            (net, xs)
        })
    })
}
