mod common;

use common::{two_bank, random_network, rows_strategy};
use netval_core::capm::{debt_price_bound, proxy_thresholds, CapmParams, Which};
use netval_core::comonotonic::solvency_thresholds;
use netval_core::network::FinancialNetwork;
use netval_core::oracle::{mc_expectations, simulate, CapmVariant, Measure, ScenarioSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params_for(net: &FinancialNetwork, r: f64, t: f64, sigma_m: f64, beta: &[f64], idio: &[f64], scale: &[f64]) -> CapmParams {
    let n = net.n();
    let sigma: Vec<f64> = (0..n).map(|i| (beta[i] * sigma_m).abs() + idio[i]).collect();
    let s: Vec<f64> = (0..n).map(|i| scale[i] * net.p_bar()[i]).collect();
    CapmParams::from_total_vol(r, t, sigma_m, beta[..n].to_vec(), sigma, s).unwrap()
}

fn case() -> impl Strategy<Value = (FinancialNetwork, CapmParams)> {
    (
        rows_strategy(5),
        0.0..0.08f64,
        0.1..5.0f64,
        0.05..0.6f64,
        prop::collection::vec(0.0..1.5f64, 5),
        prop::collection::vec(0.0..0.4f64, 5),
        prop::collection::vec(0.1..2.0f64, 5),
    )
        .prop_map(|(rows, r, t, sm, beta, idio, scale)| {
            let net = FinancialNetwork::from_rows(&rows, 1.0, 1.0).unwrap();
            let p = params_for(&net, r, t, sm, &beta, &idio, &scale);
            (net, p)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn prices_are_bracketed_and_ordered((net, params) in case()) {
        let disc = (-params.r * params.t).exp();
        let lo = debt_price_bound(&net, &params, Which::Lower, false).unwrap();
        let hi = debt_price_bound(&net, &params, Which::Upper, false).unwrap();
        for i in 0..net.n() {
            for p in [lo.price[i], hi.price[i]] {
                prop_assert!((0.0..=disc).contains(&p), "price {p} outside [0, {disc}]");
            }
            prop_assert!(lo.price[i] <= hi.price[i] + 1e-12, "bank {i}: {} > {}", lo.price[i], hi.price[i]);
        }
    }

    #[test]
    fn homogeneous_shortcut_matches_general_thresholds(
        rows in rows_strategy(5),
        r in 0.0..0.08f64,
        t in 0.1..5.0f64,
        sigma_m in 0.1..0.5f64,
        beta in 0.05..1.5f64,
        idio in 0.0..0.3f64,
        scale in prop::collection::vec(0.1..2.0f64, 5),
    ) {
        let net = FinancialNetwork::from_rows(&rows, 1.0, 1.0).unwrap();
        let n = net.n();
        let p = params_for(&net, r, t, sigma_m, &vec![beta; n], &vec![idio; n], &scale);
        for which in [Which::Lower, Which::Upper] {
            let z = p.loading(which);
            let fast = proxy_thresholds(&net, &p, &z).unwrap();
            let slow = solvency_thresholds(&net, &p.factor_model(&z).unwrap()).unwrap();
            for i in 0..n {
                let (a, b) = (fast.q_star[i], slow.q_star[i]);
                prop_assert!(a == b || (a - b).abs() <= 1e-9 * a.abs().max(1.0), "bank {i}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn closed_form_price_matches_risk_neutral_monte_carlo() {
    let net = two_bank(1.0);
    let params = CapmParams::from_total_vol(0.0, 1.0, 1.0, vec![1.0; 2], vec![1.0; 2], vec![3.0, 4.0]).unwrap();
    let out = debt_price_bound(&net, &params, Which::Lower, false).unwrap();
    let spec = ScenarioSpec::Capm { params: params.clone(), measure: Measure::Q, variant: CapmVariant::Actual };
    let mc = mc_expectations(&net, &simulate(&spec, 1_000_000, 11).unwrap()).unwrap();
    for i in 0..2 {
        let p_bar = net.p_bar()[i];
        let m = mc.banks[i].payment;
        assert!((out.price[i] * p_bar - m.mean).abs() <= 3.0 * m.se, "bank {i}: {} vs {m:?}", out.price[i] * p_bar);
        let e = mc.banks[i].equity;
        assert!((out.market_cap[i] - e.mean).abs() <= 3.0 * e.se, "bank {i}: cap {} vs {e:?}", out.market_cap[i]);
    }
}

#[test]
fn higher_recovery_lowers_rates_and_raises_caps() {
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    for seed in 0..15u64 {
        let base = random_network(2100 + seed, 6, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = base.n();
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.2)).collect();
        let idio: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.3)).collect();
        let scale: Vec<f64> = (0..n).map(|_| rng.random_range(0.4..1.5)).collect();
        let params = params_for(&base, 0.02, 1.0, 0.2, &beta, &idio, &scale);
        let outs: Vec<_> = grid
            .iter()
            .map(|&a| debt_price_bound(&base.with_recovery(a, a).unwrap(), &params, Which::Lower, true).unwrap())
            .collect();
        for w in outs.windows(2) {
            for i in 0..n {
                assert!(w[1].rate[i] <= w[0].rate[i] + 1e-9, "seed {seed} bank {i}: rate {} -> {}", w[0].rate[i], w[1].rate[i]);
                assert!(
                    w[1].market_cap[i] >= w[0].market_cap[i] - 1e-9 * base.p_bar()[i],
                    "seed {seed} bank {i}: cap {} -> {}",
                    w[0].market_cap[i],
                    w[1].market_cap[i]
                );
            }
        }
    }
}
