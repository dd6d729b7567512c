mod common;

use common::{small_cycle, random_endowment, random_network};
use nalgebra::DVector;
use netval_core::clearing::greatest_clearing;
use netval_core::factor::{EndowmentMap, FactorDistribution, FactorModel};
use netval_core::oracle::{classify, enumerate_regions, mc_expectations, regions_containing, simulate, ScenarioSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POINTS: usize = 100_000;

#[test]
fn regions_agree_with_clearing() {
    for alpha in [1.0, 0.5] {
        let mut mismatches = 0;
        let mut total = 0;
        for seed in 0..10u64 {
            let net = random_network(3000 + seed, 4, alpha, alpha);
            let regions = enumerate_regions(&net).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..POINTS / 10 {
                let x = random_endowment(&mut rng, &net);
                let z = classify(&net, &regions, &x).unwrap();
                total += 1;
                if z != greatest_clearing(&net, &x).unwrap().defaults {
                    mismatches += 1;
                }
            }
        }
        assert_eq!(total, POINTS);
        assert_eq!(mismatches, 0, "alpha {alpha}: {mismatches} of {total} points misclassified");
    }
}

#[test]
fn regions_are_disjoint() {
    for alpha in [1.0, 0.5, 0.0] {
        for seed in 0..5u64 {
            let net = random_network(3100 + seed, 4, alpha, alpha);
            let regions = enumerate_regions(&net).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5000 {
                let x = random_endowment(&mut rng, &net);
                let hits = regions_containing(&net, &regions, &x).unwrap();
                assert_eq!(hits.len(), 1, "alpha {alpha} seed {seed} x {x}: {hits:?}");
            }
        }
    }
}

/// Sample pairs sharing a default set and look for a midpoint that leaves it.
fn nonconvex_witness(alpha: f64, samples: usize) -> Option<(DVector<f64>, DVector<f64>)> {
    let net = small_cycle(alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<(DVector<f64>, Vec<bool>)> = (0..samples)
        .map(|_| {
            let x = DVector::from_fn(2, |_, _| rng.random_range(0.0..3.0));
            let z = greatest_clearing(&net, &x).unwrap().defaults;
            (x, z)
        })
        .collect();
    for (a, za) in &pts {
        for (b, zb) in &pts {
            if za != zb {
                continue;
            }
            let mid = (a + b) * 0.5;
            if &greatest_clearing(&net, &mid).unwrap().defaults != za {
                return Some((a.clone(), b.clone()));
            }
        }
    }
    None
}

#[test]
fn bankruptcy_costs_make_regions_nonconvex() {
    assert!(nonconvex_witness(0.5, 400).is_some());
    assert!(nonconvex_witness(1.0, 400).is_none());
}

#[test]
fn standard_error_scales_with_root_paths() {
    let net = common::two_bank(1.0);
    let model = FactorModel::new(
        vec![EndowmentMap::linear(3.0), EndowmentMap::linear(4.0)],
        FactorDistribution::Lognormal { mu: -0.5, sigma2: 1.0 },
    )
    .unwrap();
    let spec = ScenarioSpec::ComonotonicFactor { model };
    let small = mc_expectations(&net, &simulate(&spec, 10_000, 1).unwrap()).unwrap();
    let large = mc_expectations(&net, &simulate(&spec, 1_000_000, 1).unwrap()).unwrap();
    for i in 0..2 {
        let ratio = small.banks[i].payment.se / large.banks[i].payment.se;
        assert!((8.0..=12.5).contains(&ratio), "bank {i}: ratio {ratio}");
    }
}
