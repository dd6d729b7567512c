//! One function per subcommand, each producing a [`Table`].

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use netval_core::bounds::{sandwich, MarginalSet};
use netval_core::calibration::calibrate_network;
use netval_core::capm::{debt_price_bound, merton_baseline, BaselineMode, CapmParams, Which};
use netval_core::comonotonic::{expected_values, solvency_thresholds};
use netval_core::factor::FactorModel;
use netval_core::io::{
    load_balance_sheets, load_endowments, load_json, load_network, parse_batch, write_liabilities, MarginalsFile, SCHEMA_VERSION,
};
use netval_core::network::FinancialNetwork;
use netval_core::oracle::{classify, enumerate_regions, mc_expectations, simulate, McStat, ScenarioBatch, ScenarioSpec};
use netval_core::statics::{sweep_alpha, sweep_beta, sweep_maturity, sweep_ratio, RatioRoute};
use netval_core::{greatest_clearing, NetError, Result};

use crate::table::{Cell, Table};
use crate::{BaselineArg, Cli, Command, NetArgs, RouteArg, SweepArg, WhichArg};

pub fn dispatch(cli: &Cli) -> Result<Table> {
    match &cli.command {
        Command::Clear { net, endowments } => clear(net, endowments),
        Command::QStar { net, model } => q_star(net, model),
        Command::Expect { net, model } => expect(net, model),
        Command::Bounds { net, marginals } => bounds(net, marginals),
        Command::Price { net, capm, which, baseline, allow_bankruptcy_costs } => {
            price(net, capm, *which, *baseline, *allow_bankruptcy_costs)
        }
        Command::Statics { net, capm, sweep, grid, grid_b, pair, route } => {
            statics(net, capm, *sweep, grid, grid_b.as_deref(), pair.as_deref(), *route)
        }
        Command::Calibrate { sheets, out_dir, density } => calibrate(sheets, out_dir, *density, cli.seed),
        Command::Simulate { spec, paths, network } => simulate_batch(spec, *paths, network.as_deref(), cli.seed),
        Command::Mc { net, batch, spec, paths } => mc(net, batch.as_deref(), spec.as_deref(), *paths, cli.seed),
        Command::Regions { net, endowments } => regions(net, endowments.as_deref()),
    }
}

fn load(net: &NetArgs) -> Result<(FinancialNetwork, Vec<String>)> {
    load_network(&net.network, net.alpha_x, net.alpha_l, net.gamma.as_deref())
}

fn load_capm(path: &Path) -> Result<CapmParams> {
    load_json::<CapmParams>(path)?.normalized()
}

/// `start:stop:step` or a comma-separated list. Grid points are rounded to
/// twelve decimals so that labels such as `0.3` print cleanly.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || NetError::Parse(format!("grid '{spec}' is neither start:stop:step nor a comma list"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, h] = parts[..] else { return Err(bad()) };
        let (a, b, h) = (num(a)?, num(b)?, num(h)?);
        if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        let steps = ((b - a) / h + 1e-9).floor() as usize;
        (0..=steps).map(|k| ((a + k as f64 * h) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() {
        return Err(bad());
    }
    Ok(grid)
}

fn clear(net: &NetArgs, endowments: &Path) -> Result<Table> {
    let (network, ids) = load(net)?;
    let rows = load_endowments(endowments, &ids)?;
    let mut t = Table::new("clear", &["scenario", "bank", "wealth", "payment", "equity", "default"]);
    for (k, x) in rows.iter().enumerate() {
        let cl = greatest_clearing(&network, &DVector::from_column_slice(x))?;
        for (i, id) in ids.iter().enumerate() {
            t.push(vec![
                k.into(),
                id.as_str().into(),
                cl.wealth[i].into(),
                cl.payments[i].into(),
                cl.equity[i].into(),
                cl.defaults[i].into(),
            ]);
        }
        t.push(vec![k.into(), "society".into(), Cell::Empty, cl.societal_payment.into(), Cell::Empty, Cell::Empty]);
    }
    Ok(t)
}

fn q_star(net: &NetArgs, model: &Path) -> Result<Table> {
    let (network, ids) = load(net)?;
    let model: FactorModel = load_json(model)?;
    let th = solvency_thresholds(&network, &model)?;
    let rank = th.rank();
    let mut t = Table::new("q-star", &["bank", "q_star", "rank"]);
    for (i, id) in ids.iter().enumerate() {
        t.push(vec![id.as_str().into(), th.q_star[i].into(), rank[i].into()]);
    }
    Ok(t)
}

fn expect(net: &NetArgs, model: &Path) -> Result<Table> {
    let (network, ids) = load(net)?;
    let model: FactorModel = load_json(model)?;
    let ev = expected_values(&network, &model)?;
    let mut t = Table::new("expect", &["bank", "q_star", "pd", "wealth", "payment", "equity"]);
    for (i, id) in ids.iter().enumerate() {
        let b = &ev.banks[i];
        t.push(vec![
            id.as_str().into(),
            ev.thresholds.q_star[i].into(),
            b.pd.into(),
            b.wealth.into(),
            b.payment.into(),
            b.equity.into(),
        ]);
    }
    Ok(t)
}

fn bounds(net: &NetArgs, marginals: &Path) -> Result<Table> {
    let (network, ids) = load(net)?;
    let file: MarginalsFile = load_json(marginals)?;
    let marg = MarginalSet::new(file.marginals)?;
    let rows = sandwich(&network, &marg, file.conditional.as_ref())?;
    let mut t = Table::new("bounds", &["bank", "lower", "conditional_upper", "jensen_upper"]);
    for r in rows {
        t.push(vec![ids[r.bank].as_str().into(), r.lower.into(), r.conditional_upper.into(), r.jensen_upper.into()]);
    }
    Ok(t)
}

fn price(net: &NetArgs, capm: &Path, which: WhichArg, baseline: BaselineArg, force: bool) -> Result<Table> {
    let (network, ids) = load(net)?;
    let params = load_capm(capm)?;
    let mut t = Table::new("price", &["bank", "bound", "q_star", "price", "rate", "market_cap"]);
    let bounds: &[(Which, &str)] = match which {
        WhichArg::Lower => &[(Which::Lower, "lower")],
        WhichArg::Upper => &[(Which::Upper, "upper")],
        WhichArg::Both => &[(Which::Lower, "lower"), (Which::Upper, "upper")],
    };
    for &(w, label) in bounds {
        let out = debt_price_bound(&network, &params, w, force)?;
        if !out.guaranteed {
            log::warn!("{label} prices computed with bankruptcy costs are not bounds");
        }
        for (i, id) in ids.iter().enumerate() {
            t.push(vec![
                id.as_str().into(),
                label.into(),
                out.q_star[i].into(),
                out.price[i].into(),
                out.rate[i].into(),
                out.market_cap[i].into(),
            ]);
        }
    }
    let modes: &[(BaselineMode, &str)] = match baseline {
        BaselineArg::None => &[],
        BaselineArg::Riskfree => &[(BaselineMode::RiskfreeInterbank, "baseline_riskfree")],
        BaselineArg::Risky => &[(BaselineMode::RiskyInterbank, "baseline_risky")],
        BaselineArg::Both => {
            &[(BaselineMode::RiskfreeInterbank, "baseline_riskfree"), (BaselineMode::RiskyInterbank, "baseline_risky")]
        }
    };
    for &(mode, label) in modes {
        for (i, b) in merton_baseline(&network, &params, mode)?.iter().enumerate() {
            t.push(vec![ids[i].as_str().into(), label.into(), Cell::Empty, b.price.into(), b.rate.into(), b.market_cap.into()]);
        }
    }
    Ok(t)
}

fn bank_index(ids: &[String], id: &str) -> Result<usize> {
    ids.iter().position(|x| x == id).ok_or_else(|| NetError::Parse(format!("unknown bank id '{id}'")))
}

fn statics(
    net: &NetArgs,
    capm: &Path,
    sweep: SweepArg,
    grid: &str,
    grid_b: Option<&str>,
    pair: Option<&str>,
    route: RouteArg,
) -> Result<Table> {
    let (network, ids) = load(net)?;
    let params = load_capm(capm)?;
    let g = parse_grid(grid)?;
    let rows = match sweep {
        SweepArg::Beta => sweep_beta(&network, &params, &ids, &g)?,
        SweepArg::Maturity => sweep_maturity(&network, &params, &ids, &g)?,
        SweepArg::Alpha => sweep_alpha(&network, &params, &ids, &g)?,
        SweepArg::Ratio => {
            let pair = pair.ok_or_else(|| NetError::Parse("--sweep ratio needs --pair ID_A,ID_B".into()))?;
            let (a, b) = pair.split_once(',').ok_or_else(|| NetError::Parse(format!("pair '{pair}' is not ID_A,ID_B")))?;
            let pair = (bank_index(&ids, a.trim())?, bank_index(&ids, b.trim())?);
            let gb = match grid_b {
                Some(s) => parse_grid(s)?,
                None => g.clone(),
            };
            let route = match route {
                RouteArg::Assets => RatioRoute::Assets,
                RouteArg::Liabilities => RatioRoute::Liabilities,
            };
            sweep_ratio(&network, &params, &ids, pair, &g, &gb, route)?
        }
    };
    let mut t = Table::new("statics", &["param", "bank", "metric", "value"]);
    for r in rows {
        t.push(vec![Cell::parse(&r.param), Cell::Text(r.bank), Cell::Text(r.metric), r.value.into()]);
    }
    Ok(t)
}

fn calibrate(sheets: &Path, out_dir: &Path, density: f64, seed: u64) -> Result<Table> {
    let sheets = load_balance_sheets(sheets)?;
    let sys = calibrate_network(&sheets, density, seed, 1.0, 1.0)?;
    let n = sys.network.n();
    fs::create_dir_all(out_dir)?;
    let mut buf = Vec::new();
    write_liabilities(&mut buf, &sys.bank_ids, sys.network.liabilities())?;
    fs::write(out_dir.join("network.csv"), buf)?;
    let params = CapmParams::new(0.0, 1.0, 0.2, vec![1.0; n], vec![0.0; n], sys.s.clone())?;
    let mut doc = serde_json::to_value(&params)?;
    doc["schema_version"] = SCHEMA_VERSION.into();
    fs::write(out_dir.join("capm.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    let mut t = Table::new("calibrate", &["bank", "s", "external_liabilities", "p_bar", "interbank_assets"]);
    for (i, id) in sys.bank_ids.iter().enumerate() {
        let l = sys.network.liabilities();
        t.push(vec![
            id.as_str().into(),
            sys.s[i].into(),
            l[(i, n)].into(),
            sys.network.p_bar()[i].into(),
            sys.network.interbank_assets()[i].into(),
        ]);
    }
    Ok(t)
}

fn batch_ids(network: Option<&Path>, n: usize) -> Result<Vec<String>> {
    match network {
        Some(p) => {
            let (net, ids) = load_network(p, 1.0, 1.0, None)?;
            if net.n() != n {
                return Err(NetError::Shape(format!("spec has {n} banks, network has {}", net.n())));
            }
            Ok(ids)
        }
        None => Ok((1..=n).map(|i| format!("x{i}")).collect()),
    }
}

fn simulate_batch(spec: &Path, paths: usize, network: Option<&Path>, seed: u64) -> Result<Table> {
    let spec: ScenarioSpec = load_json(spec)?;
    let batch = simulate(&spec, paths, seed)?;
    let ids = batch_ids(network, spec.n())?;
    let mut cols: Vec<&str> = vec!["path"];
    cols.extend(ids.iter().map(String::as_str));
    if batch.factor.is_some() {
        cols.push("factor");
    }
    let mut t = Table::new("simulate", &cols);
    for (k, x) in batch.x.iter().enumerate() {
        let mut row: Vec<Cell> = vec![k.into()];
        row.extend(x.iter().map(|v| Cell::Num(*v)));
        if let Some(f) = &batch.factor {
            row.push(f[k].into());
        }
        t.push(row);
    }
    Ok(t)
}

fn stat_row(t: &mut Table, bank: &str, metric: &str, s: McStat) {
    t.push(vec![bank.into(), metric.into(), s.mean.into(), s.se.into()]);
}

fn mc(net: &NetArgs, batch: Option<&Path>, spec: Option<&Path>, paths: usize, seed: u64) -> Result<Table> {
    let (network, ids) = load(net)?;
    let batch = match (batch, spec) {
        (Some(path), _) => {
            let (bids, x, factor, weights) = parse_batch(fs::File::open(path).map_err(|e| {
                NetError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
            })?)?;
            if bids != ids {
                return Err(NetError::Parse(format!("batch columns {bids:?} do not match bank ids {ids:?}")));
            }
            ScenarioBatch { spec: None, seed, x, factor, weights }
        }
        (None, Some(path)) => simulate(&load_json::<ScenarioSpec>(path)?, paths, seed)?,
        (None, None) => return Err(NetError::Parse("mc needs --batch or --spec".into())),
    };
    let out = mc_expectations(&network, &batch)?;
    let mut t = Table::new("mc", &["bank", "metric", "mean", "se"]);
    for (id, b) in ids.iter().zip(&out.banks) {
        stat_row(&mut t, id, "pd", b.pd);
        stat_row(&mut t, id, "wealth", b.wealth);
        stat_row(&mut t, id, "payment", b.payment);
        stat_row(&mut t, id, "equity", b.equity);
    }
    stat_row(&mut t, "sector", "equity", out.sector_equity);
    stat_row(&mut t, "society", "payment", out.societal_payment);
    Ok(t)
}

fn bits(z: &[bool]) -> String {
    z.iter().map(|&d| if d { '1' } else { '0' }).collect()
}

fn regions(net: &NetArgs, endowments: Option<&Path>) -> Result<Table> {
    let (network, ids) = load(net)?;
    let regions = enumerate_regions(&network)?;
    if let Some(path) = endowments {
        let mut t = Table::new("regions", &["scenario", "defaults"]);
        for (k, x) in load_endowments(path, &ids)?.iter().enumerate() {
            let z = classify(&network, &regions, &DVector::from_column_slice(x))?;
            t.push(vec![k.into(), Cell::Text(bits(&z))]);
        }
        return Ok(t);
    }
    let mut cols = vec!["defaults".to_owned(), "bank".to_owned()];
    cols.extend(ids.iter().map(|id| format!("coef_{id}")));
    cols.extend(["rhs", "relation", "excluded"].map(String::from));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("regions", &col_refs);
    let n = network.n();
    for r in &regions {
        let excluded = r
            .excluded
            .iter()
            .map(|&m| bits(&(0..n).map(|i| m & (1 << i) != 0).collect::<Vec<_>>()))
            .collect::<Vec<_>>()
            .join(";");
        for (i, (a, b, _)) in r.halfspaces.iter().enumerate() {
            let mut row: Vec<Cell> = vec![Cell::Text(bits(&r.z)), ids[i].as_str().into()];
            row.extend(a.iter().map(|v| Cell::Num(*v)));
            row.push((*b).into());
            row.push(if r.z[i] { ">" } else { ">=" }.into());
            row.push(Cell::Text(excluded.clone()));
            t.push(row);
        }
    }
    Ok(t)
}
