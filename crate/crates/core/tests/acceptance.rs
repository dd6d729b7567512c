//! End-to-end acceptance checks, one PASS/FAIL line per criterion.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::{two_bank, small_cycle, random_correlation, random_endowment, random_network};
use nalgebra::{DVector, Matrix2, Vector2};
use netval_core::bounds::{jensen_upper, MarginalSet};
use netval_core::calibration::calibrate_network;
use netval_core::capm::{debt_price_bound, CapmParams, Which};
use netval_core::clearing::greatest_clearing;
use netval_core::comonotonic::expected_values;
use netval_core::factor::{EndowmentMap, FactorDistribution, FactorModel};
use netval_core::io::load_balance_sheets;
use netval_core::marginal::Marginal;
use netval_core::oracle::{classify, enumerate_regions, exact_batch, mc_expectations, simulate, McStat, ScenarioSpec, WeightedScenario};
use netval_core::statics::{sweep_alpha, sweep_beta, sweep_maturity, sweep_ratio, RatioRoute, StaticsRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> std::result::Result<(), String> {
    ensure((a - b).abs() <= tol, || format!("{what}: {a} vs {b}"))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn two_point(a: [f64; 2], b: [f64; 2]) -> ScenarioSpec {
    ScenarioSpec::FiniteSupport {
        scenarios: vec![
            WeightedScenario { x: a.to_vec(), probability: 0.5 },
            WeightedScenario { x: b.to_vec(), probability: 0.5 },
        ],
    }
}

fn payments(net: &netval_core::network::FinancialNetwork, x: [f64; 2]) -> std::result::Result<DVector<f64>, String> {
    Ok(greatest_clearing(net, &DVector::from_vec(x.to_vec())).map_err(err)?.payments)
}

fn criterion_1() -> Check {
    for alpha in [1.0, 0.5] {
        let net = small_cycle(alpha);
        let d = 6.0 - alpha * alpha;
        let fixtures = [
            ([0.0, 2.0], [4.0 * alpha * alpha / d, 12.0 * alpha / d]),
            ([1.0, 0.0], [6.0 * alpha / d, 3.0 * alpha * alpha / d]),
            ([1.0, 2.0], [2.0, 3.0]),
            ([0.0, 0.0], [0.0, 0.0]),
        ];
        for (x, want) in fixtures {
            let p = payments(&net, x)?;
            for i in 0..2 {
                close(p[i], want[i], 1e-12, &format!("alpha {alpha} p({x:?})[{i}]"))?;
            }
        }
        let ex = mc_expectations(&net, &exact_batch(&two_point([0.0, 2.0], [1.0, 0.0])).map_err(err)?).map_err(err)?;
        let marg = MarginalSet::new(vec![
            Marginal::finite(&[(0.0, 0.5), (1.0, 0.5)]).map_err(err)?,
            Marginal::finite(&[(0.0, 0.5), (2.0, 0.5)]).map_err(err)?,
        ])
        .map_err(err)?;
        let ez = expected_values(&net, &marg.comonotonic_model().map_err(err)?).map_err(err)?;
        let want_x = [alpha * (2.0 * alpha + 3.0) / d, 3.0 * alpha * (alpha + 4.0) / (2.0 * d)];
        let at_mean = payments(&net, [0.5, 1.0])?;
        for i in 0..2 {
            close(ex.banks[i].payment.mean, want_x[i], 1e-12, &format!("alpha {alpha} E[p(X)][{i}]"))?;
            close(ez.banks[i].payment, [1.0, 1.5][i], 1e-12, &format!("alpha {alpha} E[p(Z)][{i}]"))?;
            close(at_mean[i], ex.banks[i].payment.mean, 1e-12, &format!("alpha {alpha} p(E[X])[{i}]"))?;
            if alpha < 1.0 {
                ensure(ex.banks[i].payment.mean < ez.banks[i].payment, || {
                    format!("alpha {alpha}: comonotonic value still below E[p(X)] for bank {i}")
                })?;
            }
        }
    }
    Ok("fixtures at alpha 1 and 0.5, lower bound fails under costs".into())
}

fn criterion_2() -> Check {
    let eps = 0.1;
    let net = small_cycle(1.0);
    let ex = mc_expectations(&net, &exact_batch(&two_point([1.0 + eps, 2.0], [2.0, 1.0 + eps])).map_err(err)?).map_err(err)?;
    let ez = mc_expectations(&net, &exact_batch(&two_point([1.0 + eps, 1.0 + eps], [2.0, 2.0])).map_err(err)?).map_err(err)?;
    let got_x = [ex.banks[0].equity.mean, ex.banks[1].equity.mean, ex.societal_payment.mean];
    let got_z = [ez.banks[0].equity.mean, ez.banks[1].equity.mean, ez.societal_payment.mean];
    let want_x = [(1.0 + 2.0 * eps) / 3.0, 0.0, (8.0 + eps) / 3.0];
    let want_z = [0.5, 0.0, 2.5 + eps];
    for k in 0..3 {
        close(got_x[k], want_x[k], 1e-12, &format!("E[E(X)][{k}]"))?;
        close(got_z[k], want_z[k], 1e-12, &format!("E[E(Z)][{k}]"))?;
    }
    ensure(got_x[0] < got_z[0] && got_x[2] > got_z[2], || "comparisons not in opposite directions".into())?;
    Ok(format!("E[E(X)] = {got_x:.6?}, E[E(Z)] = {got_z:.6?}"))
}

fn criterion_3() -> Check {
    let (mut components, mut failures) = (0usize, 0usize);
    for seed in 0..200u64 {
        let net = random_network(10_000 + seed, 5, 1.0, 1.0);
        let n = net.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu: Vec<f64> = (0..n).map(|i| net.p_bar()[i].ln() + rng.random_range(-1.0..0.3)).collect();
        let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.2)).collect();
        let correlation = random_correlation(&mut rng, n);
        let marg = MarginalSet::new(mu.iter().zip(&sigma).map(|(&m, &s)| Marginal::lognormal(m, s).unwrap()).collect())
            .map_err(err)?;
        let lower = expected_values(&net, &marg.comonotonic_model().map_err(err)?).map_err(err)?;
        let upper = jensen_upper(&net, &marg.means()).map_err(err)?;
        let spec = ScenarioSpec::GaussianCopulaLognormal { mu, sigma, correlation };
        let mc = mc_expectations(&net, &simulate(&spec, 100_000, seed).map_err(err)?).map_err(err)?;
        for i in 0..n {
            let m = mc.banks[i].payment;
            components += 1;
            if m.mean < lower.banks[i].payment - 3.0 * m.se || m.mean > upper[i].payment + 3.0 * m.se {
                failures += 1;
            }
        }
    }
    let rate = failures as f64 / components as f64;
    ensure(rate <= 0.01, || format!("{failures} of {components} components outside the sandwich"))?;
    Ok(format!("{failures} of {components} components outside [E p(Z) - 3SE, p(E X) + 3SE]"))
}

/// Thresholds on the two-bank network read off the defining linear
/// equations: bank 1 with bank 2 paying in full, bank 2 with bank 1 in default.
fn two_bank_thresholds_by_hand() -> (f64, f64) {
    // 3 q + 3 = 10
    let q1 = (10.0 - 3.0) / 3.0;
    // unknowns (q, p1): p1 = 3 q + 0.5 * 6, 4 q + 0.7 p1 = 6
    let a = Matrix2::new(3.0, -1.0, 4.0, 0.7);
    let b = Vector2::new(-3.0, 6.0);
    let sol = a.lu().solve(&b).unwrap();
    (q1, sol[0])
}

fn within(analytic: f64, stat: McStat) -> bool {
    (analytic - stat.mean).abs() <= 3.0 * stat.se
}

fn criterion_4() -> Check {
    let net = two_bank(1.0);
    let model = FactorModel::new(
        vec![EndowmentMap::linear(3.0), EndowmentMap::linear(4.0)],
        FactorDistribution::Lognormal { mu: -0.5, sigma2: 1.0 },
    )
    .map_err(err)?;
    let ev = expected_values(&net, &model).map_err(err)?;
    let (q1, q2) = two_bank_thresholds_by_hand();
    close(ev.thresholds.q_star[0], q1, 1e-9, "q1*")?;
    close(ev.thresholds.q_star[1], q2, 1e-9, "q2*")?;
    close(q1, 7.0 / 3.0, 1e-12, "hand q1*")?;
    close(q2, 39.0 / 61.0, 1e-12, "hand q2*")?;
    let mc = mc_expectations(&net, &simulate(&ScenarioSpec::ComonotonicFactor { model }, 1_000_000, 2024).map_err(err)?)
        .map_err(err)?;
    let mut worst: f64 = 0.0;
    for (i, (a, m)) in ev.banks.iter().zip(&mc.banks).enumerate() {
        for (name, v, s) in [("pd", a.pd, m.pd), ("Ep", a.payment, m.payment), ("EE", a.equity, m.equity), ("EV", a.wealth, m.wealth)] {
            ensure(within(v, s), || format!("bank {i} {name}: {v} vs {s:?}"))?;
            worst = worst.max((v - s.mean).abs() / s.se);
        }
    }
    Ok(format!("q* = ({:.12}, {:.12}), largest MC deviation {worst:.2} SE", ev.thresholds.q_star[0], ev.thresholds.q_star[1]))
}

fn values(rows: &[StaticsRow], bank: &str, metric: &str) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.bank == bank && r.metric == metric).map(|r| (r.param.parse().unwrap(), r.value)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn example_params(t: f64) -> CapmParams {
    CapmParams::from_total_vol(0.0, t, 1.0, vec![1.0; 2], vec![1.0; 2], vec![3.0, 4.0]).unwrap()
}

fn criterion_5() -> Check {
    let net = two_bank(1.0);
    let ids = vec!["1".to_string(), "2".to_string()];
    let grid: Vec<f64> = (0..=4).map(|k| k as f64 * 0.25).collect();
    let rows = sweep_beta(&net, &example_params(1.0), &ids, &grid).map_err(err)?;
    for id in &ids {
        for metric in ["price_lower", "price_jensen"] {
            let v = values(&rows, id, metric);
            ensure(v.iter().all(|x| (x.1 - v[0].1).abs() <= 1e-12), || format!("bank {id} {metric} varies with beta: {v:?}"))?;
        }
        let lo = values(&rows, id, "price_lower");
        let hi = values(&rows, id, "price_upper");
        close(hi.last().unwrap().1, lo.last().unwrap().1, 1e-9, &format!("bank {id} upper(1) vs lower"))?;
    }
    let q1 = values(&rows, "1", "q_star_upper");
    let q2 = values(&rows, "2", "q_star_upper");
    ensure(q1.windows(2).all(|w| w[1].1 < w[0].1), || format!("q1 not strictly decreasing: {q1:?}"))?;
    ensure(q2.windows(2).all(|w| w[1].1 > w[0].1), || format!("q2 not strictly increasing: {q2:?}"))?;
    Ok(format!("q1 {:?}, q2 {:?}", q1.iter().map(|v| v.1).collect::<Vec<_>>(), q2.iter().map(|v| v.1).collect::<Vec<_>>()))
}

fn rate2_by_d1(rows: &[StaticsRow], metric: &str) -> Vec<Vec<(f64, f64)>> {
    let mut by_d2: std::collections::BTreeMap<u64, Vec<(f64, f64)>> = Default::default();
    for r in rows.iter().filter(|r| r.bank == "2" && r.metric == metric) {
        let (a, b) = r.param.split_once(':').unwrap();
        let (d1, d2): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
        by_d2.entry(d2.to_bits()).or_default().push((d1, r.value));
    }
    by_d2
        .into_values()
        .map(|mut v| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        })
        .collect()
}

fn criterion_6() -> Check {
    let net = two_bank(1.0);
    let ids = vec!["1".to_string(), "2".to_string()];
    let maturities: Vec<f64> = (1..=20).map(|k| k as f64 * 0.25).collect();
    let rows = sweep_maturity(&net, &example_params(1.0), &ids, &maturities).map_err(err)?;
    for id in &ids {
        let full = values(&rows, id, "rate_network");
        let base = values(&rows, id, "rate_riskfree");
        for (f, b) in full.iter().zip(&base) {
            ensure(f.1 >= b.1 - 1e-12, || format!("bank {id} T = {}: network rate {} < baseline {}", f.0, f.1, b.1))?;
        }
    }
    let grid: Vec<f64> = (1..=30).map(|k| k as f64 * 0.05).collect();
    let params = example_params(1.0);
    let assets = sweep_ratio(&net, &params, &ids, (0, 1), &grid, &grid, RatioRoute::Assets).map_err(err)?;
    let mut checked = 0;
    for series in rate2_by_d1(&assets, "rate_assets") {
        for w in series.windows(2) {
            checked += 1;
            ensure(w[1].1 >= w[0].1 - 1e-12, || format!("asset route: rate2 falls from d1 = {} to {}", w[0].0, w[1].0))?;
        }
    }
    ensure(checked > 0, || "asset route produced no feasible pairs".into())?;
    let liab = sweep_ratio(&net, &params, &ids, (0, 1), &grid, &grid, RatioRoute::Liabilities).map_err(err)?;
    let mut witness = None;
    for series in rate2_by_d1(&liab, "rate_liabilities") {
        if let Some(w) = series.windows(2).find(|w| w[1].1 < w[0].1 - 1e-9) {
            witness = Some((w[0], w[1]));
            break;
        }
    }
    let (a, b) = witness.ok_or_else(|| "liability route: rate2 monotone in d1 on every slice".to_string())?;
    Ok(format!("{checked} asset-route steps monotone; liability route rate2 {:.4} -> {:.4} as d1 {} -> {}", a.1, b.1, a.0, b.0))
}

fn criterion_7() -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/eba_synthetic_87.csv");
    let sheets = load_balance_sheets(&path).map_err(err)?;
    let sys = calibrate_network(&sheets, 0.5, 7, 1.0, 1.0).map_err(err)?;
    let n = sys.network.n();
    let params = CapmParams::new(0.0, 1.0, 0.2, vec![1.0; n], vec![0.0; n], sys.s.clone()).map_err(err)?;
    let start = Instant::now();
    let ev = expected_values(&sys.network, &params.factor_model(&params.loading(Which::Lower)).map_err(err)?).map_err(err)?;
    let priced = debt_price_bound(&sys.network, &params, Which::Lower, false).map_err(err)?;
    let elapsed = start.elapsed();
    ensure(ev.banks.len() == 87 && priced.price.len() == 87, || "wrong output size".into())?;
    ensure(elapsed < Duration::from_secs(1), || format!("expectations and prices took {elapsed:?}"))?;
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let rows = sweep_alpha(&sys.network, &params, &sys.bank_ids, &grid).map_err(err)?;
    let rate = values(&rows, "median", "rate");
    let cap = values(&rows, "median", "market_cap");
    ensure(rate.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12), || format!("median rate not nonincreasing: {rate:?}"))?;
    ensure(cap.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9), || format!("median cap not nondecreasing: {cap:?}"))?;
    Ok(format!(
        "87 banks priced in {elapsed:.2?}; median rate {:.4} -> {:.4}, median cap {:.2} -> {:.2}",
        rate[0].1,
        rate.last().unwrap().1,
        cap[0].1,
        cap.last().unwrap().1
    ))
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let instances = 2000;
    for k in 0..instances {
        let alpha = if k % 2 == 0 { 1.0 } else { rng.random_range(0.0..1.0) };
        let net = random_network(20_000 + k, 6, alpha, alpha);
        let tol = 1e-10 * net.p_bar().max().max(1.0);
        let x = random_endowment(&mut rng, &net);
        let y = random_endowment(&mut rng, &net);
        let join = x.zip_map(&y, f64::max);
        let meet = x.zip_map(&y, f64::min);
        let (cx, cy) = (greatest_clearing(&net, &x).map_err(err)?, greatest_clearing(&net, &y).map_err(err)?);
        let (cj, cm) = (greatest_clearing(&net, &join).map_err(err)?, greatest_clearing(&net, &meet).map_err(err)?);
        for c in [&cx, &cy, &cj, &cm] {
            ensure(c.iterations <= net.n() + 1, || format!("instance {k}: {} iterations for n = {}", c.iterations, net.n()))?;
        }
        for i in 0..net.n() {
            ensure(cj.wealth[i] >= cx.wealth[i] - tol && cj.payments[i] >= cx.payments[i] - tol && cj.equity[i] >= cx.equity[i] - tol, || {
                format!("instance {k}: clearing not monotone in bank {i}")
            })?;
        }
        if alpha == 1.0 {
            let cmid = greatest_clearing(&net, &((&x + &y) * 0.5)).map_err(err)?;
            for i in 0..net.n() {
                ensure(cmid.payments[i] >= 0.5 * (cx.payments[i] + cy.payments[i]) - tol, || format!("instance {k}: not concave"))?;
                ensure(cx.payments[i] + cy.payments[i] >= cj.payments[i] + cm.payments[i] - tol, || {
                    format!("instance {k}: not submodular")
                })?;
            }
            close(cx.equity.sum() + cx.societal_payment, x.sum(), tol, &format!("instance {k}: conservation"))?;
        }
    }
    let mut points = 0;
    for alpha in [1.0, 0.5] {
        for seed in 0..10u64 {
            let net = random_network(30_000 + seed, 4, alpha, alpha);
            let regions = enumerate_regions(&net).map_err(err)?;
            for _ in 0..10_000 {
                let x = random_endowment(&mut rng, &net);
                let z = classify(&net, &regions, &x).map_err(err)?;
                ensure(z == greatest_clearing(&net, &x).map_err(err)?.defaults, || format!("alpha {alpha}: region mismatch at {x}"))?;
                points += 1;
            }
        }
    }
    let net = small_cycle(0.5);
    let mut found = false;
    'outer: for i in 0..60usize {
        for j in 0..60usize {
            let a = DVector::from_vec(vec![i as f64 * 0.05, j as f64 * 0.05]);
            let za = greatest_clearing(&net, &a).map_err(err)?.defaults;
            for (k, l) in [(i + 7, j), (i, j + 7), (i + 7, j + 7), (i + 7, j.saturating_sub(7))] {
                let b = DVector::from_vec(vec![k as f64 * 0.05, l as f64 * 0.05]);
                if greatest_clearing(&net, &b).map_err(err)?.defaults != za {
                    continue;
                }
                if greatest_clearing(&net, &((&a + &b) * 0.5)).map_err(err)?.defaults != za {
                    found = true;
                    break 'outer;
                }
            }
        }
    }
    ensure(found, || "no non-convex default region found at alpha = 0.5".into())?;
    Ok(format!("{instances} clearing instances, {points} region points over both alphas, non-convex region found"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("small-cycle payment fixtures", criterion_1),
        ("equity non-comparability", criterion_2),
        ("payment sandwich under Gaussian copula", criterion_3),
        ("closed form vs Monte Carlo on the two-bank network", criterion_4),
        ("beta sweep", criterion_5),
        ("debt-firm ratio and maturity statics", criterion_6),
        ("87-bank scale check", criterion_7),
        ("invariant suites", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS ({name}, {secs:.2} s): {detail}", k + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {} FAIL ({name}, {secs:.2} s): {reason}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
