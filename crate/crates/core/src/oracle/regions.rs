//! Default-set regions of the endowment space.
//!
//! For each `z` the endowments consistent with `z` form an intersection of
//! halfspaces `e_i^T Delta(z) x >= delta_i(z)` (solvent) and
//! `e_i^T Delta(z) x < delta_i(z)` (default). Under bankruptcy costs several
//! sets can be consistent with the same `x`; the region of the greatest
//! clearing solution then also excludes every region of a strictly smaller
//! default set.

use nalgebra::{DMatrix, DVector};

use crate::clearing::{linear_representation, ZERO_TOL};
use crate::error::{NetError, Result};
use crate::network::FinancialNetwork;

pub const MAX_REGION_BANKS: usize = 12;

/// One region; `halfspaces[i] = (a, b, strict)` reads `a x > b` when strict
/// and `a x >= b` otherwise.
#[derive(Debug, Clone)]
pub struct DefaultRegion {
    pub z: Vec<bool>,
    pub halfspaces: Vec<(DVector<f64>, f64, bool)>,
    /// Masks of the strictly smaller default sets to subtract; empty at full recovery.
    pub excluded: Vec<usize>,
}

impl DefaultRegion {
    pub fn mask(&self) -> usize {
        to_mask(&self.z)
    }

    /// Whether `x` satisfies the halfspaces, using the clearing tolerance so
    /// that zero wealth counts as solvent.
    pub fn consistent(&self, x: &DVector<f64>, p_bar: &DVector<f64>) -> bool {
        self.halfspaces.iter().enumerate().all(|(i, (a, b, _))| {
            let gap = a.dot(x) - b;
            let tol = ZERO_TOL * p_bar[i].max(1.0);
            if self.z[i] {
                // the row is negated, so gap is -V_i here
                gap > tol
            } else {
                gap >= -tol
            }
        })
    }
}

fn to_mask(z: &[bool]) -> usize {
    z.iter().enumerate().filter(|(_, &d)| d).fold(0, |m, (i, _)| m | (1 << i))
}

fn from_mask(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask & (1 << i) != 0).collect()
}

/// All `2^n` regions in increasing order of default count (ties by mask).
pub fn enumerate_regions(net: &FinancialNetwork) -> Result<Vec<DefaultRegion>> {
    let n = net.n();
    if n > MAX_REGION_BANKS {
        return Err(NetError::TooManyBanks { n, max: MAX_REGION_BANKS });
    }
    let costly = !net.full_recovery();
    let mut masks: Vec<usize> = (0..1usize << n).collect();
    masks.sort_by_key(|&m| (m.count_ones(), m));
    masks
        .into_iter()
        .map(|mask| {
            let z = from_mask(mask, n);
            let (delta, offset) = linear_representation(net, &z)?;
            let halfspaces = (0..n)
                .map(|i| {
                    let sign = if z[i] { -1.0 } else { 1.0 };
                    let row: DVector<f64> = delta.row(i).transpose() * sign;
                    (row, sign * offset[i], z[i] && costly)
                })
                .collect();
            let excluded = if costly {
                (0..mask).filter(|&m| m & mask == m && m != mask).collect()
            } else {
                Vec::new()
            };
            Ok(DefaultRegion { z, halfspaces, excluded })
        })
        .collect()
}

/// Default set of `x` read off the region list: the first region, in
/// increasing default count, containing `x`. Exclusions are checked by
/// recursive, memoized membership in the smaller regions.
pub fn classify(net: &FinancialNetwork, regions: &[DefaultRegion], x: &DVector<f64>) -> Result<Vec<bool>> {
    let n = net.n();
    if x.len() != n || regions.len() != 1 << n {
        return Err(NetError::Shape("region list or endowment size does not match the network".into()));
    }
    let mut index = vec![0; regions.len()];
    for (k, r) in regions.iter().enumerate() {
        index[r.mask()] = k;
    }
    let mut memo: Vec<Option<bool>> = vec![None; regions.len()];
    for r in regions {
        if member(r.mask(), regions, &index, x, net.p_bar(), &mut memo) {
            return Ok(r.z.clone());
        }
    }
    Err(NetError::Internal("endowment lies in no default region".into()))
}

/// Masks of every region containing `x`; the regions partition the
/// endowment space, so a single mask is expected.
pub fn regions_containing(net: &FinancialNetwork, regions: &[DefaultRegion], x: &DVector<f64>) -> Result<Vec<usize>> {
    let n = net.n();
    if x.len() != n || regions.len() != 1 << n {
        return Err(NetError::Shape("region list or endowment size does not match the network".into()));
    }
    let mut index = vec![0; regions.len()];
    for (k, r) in regions.iter().enumerate() {
        index[r.mask()] = k;
    }
    let mut memo: Vec<Option<bool>> = vec![None; regions.len()];
    Ok(regions
        .iter()
        .map(DefaultRegion::mask)
        .filter(|&m| member(m, regions, &index, x, net.p_bar(), &mut memo))
        .collect())
}

fn member(
    mask: usize,
    regions: &[DefaultRegion],
    index: &[usize],
    x: &DVector<f64>,
    p_bar: &DVector<f64>,
    memo: &mut [Option<bool>],
) -> bool {
    if let Some(v) = memo[mask] {
        return v;
    }
    let r = &regions[index[mask]];
    let v = r.consistent(x, p_bar) && r.excluded.iter().all(|&m| !member(m, regions, index, x, p_bar, memo));
    memo[mask] = Some(v);
    v
}

/// Stacked halfspace matrix of a region, handy for plotting.
pub fn halfspace_matrix(region: &DefaultRegion) -> (DMatrix<f64>, DVector<f64>) {
    let n = region.z.len();
    let a = DMatrix::from_fn(n, n, |i, j| region.halfspaces[i].0[j]);
    let b = DVector::from_fn(n, |i, _| region.halfspaces[i].1);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::greatest_clearing;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cycle(alpha: f64) -> FinancialNetwork {
        FinancialNetwork::from_rows(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 2.0]], alpha, alpha).unwrap()
    }

    #[test]
    fn ordering_and_exclusions() {
        let regions = enumerate_regions(&small_cycle(0.5)).unwrap();
        let masks: Vec<usize> = regions.iter().map(DefaultRegion::mask).collect();
        assert_eq!(masks, vec![0, 1, 2, 3]);
        assert_eq!(regions[3].excluded, vec![0, 1, 2]);
        assert!(regions[1].halfspaces[0].2 && !regions[1].halfspaces[1].2);
        assert!(enumerate_regions(&small_cycle(1.0)).unwrap().iter().all(|r| r.excluded.is_empty()));
    }

    #[test]
    fn refuses_large_networks() {
        let n = 13;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..=n).map(|j| if j == n { 1.0 } else if j == i { 0.0 } else { 0.1 }).collect()).collect();
        let net = FinancialNetwork::from_rows(&rows, 1.0, 1.0).unwrap();
        let err = enumerate_regions(&net).unwrap_err();
        assert!(err.to_string().contains("2^n"));
    }

    #[test]
    fn random_points_agree_with_clearing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for alpha in [1.0, 0.5] {
            let net = small_cycle(alpha);
            let regions = enumerate_regions(&net).unwrap();
            for _ in 0..2000 {
                let x = DVector::from_fn(2, |_, _| rng.random_range(0.0..3.5));
                let z = classify(&net, &regions, &x).unwrap();
                assert_eq!(z, greatest_clearing(&net, &x).unwrap().defaults, "{x}");
            }
        }
    }
}
