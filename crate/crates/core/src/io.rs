//! CSV and JSON formats.
//!
//! Liabilities matrix (dense, header row of bank ids, last column society):
//!
//! ```text
//! bank,B1,B2,society
//! B1,0,7,3
//! B2,3,0,3
//! ```
//!
//! A cross-ownership matrix uses the same layout without the society column.
//! Balance sheets use `bank_id,total_assets,capital,interbank_liabilities`.
//! Endowments have a header of bank ids and one scenario per row. Scenario
//! batches have `path,<ids...>` followed by optional `factor` and `weight`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::BalanceSheet;
use crate::error::{NetError, Result};
use crate::factor::FactorModel;
use crate::marginal::Marginal;
use crate::network::FinancialNetwork;
use crate::oracle::simulate::ScenarioBatch;

pub const SCHEMA_VERSION: &str = "1";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        NetError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| NetError::Parse(format!("{what}: cannot parse '{s}' as a number")))
}

/// Bank ids and a dense matrix, reading `extra` trailing columns beyond the
/// `n` bank columns.
fn read_labelled_matrix<R: Read>(reader: R, extra: usize, what: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 1 + extra {
        return Err(NetError::Parse(format!("{what}: header too short")));
    }
    let ids: Vec<String> = header.iter().skip(1).take(header.len() - 1 - extra).map(str::to_owned).collect();
    let n = ids.len();
    let mut rows = Vec::with_capacity(n);
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != n + 1 + extra {
            return Err(NetError::Parse(format!("{what}: row {} has {} fields, expected {}", r + 1, rec.len(), n + 1 + extra)));
        }
        if r >= n || rec[0] != ids[r] {
            return Err(NetError::Parse(format!(
                "{what}: row {} labelled '{}' does not match header order",
                r + 1,
                &rec[0]
            )));
        }
        let vals = rec.iter().skip(1).map(|s| parse_f64(s, what)).collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    if rows.len() != n {
        return Err(NetError::Parse(format!("{what}: {} rows for {n} banks", rows.len())));
    }
    Ok((ids, DMatrix::from_fn(n, n + extra, |i, j| rows[i][j])))
}

fn write_labelled_matrix<W: Write>(writer: W, ids: &[String], m: &DMatrix<f64>, extra: Option<&str>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec!["bank".to_owned()];
    header.extend(ids.iter().cloned());
    if let Some(e) = extra {
        header.push(e.to_owned());
    }
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.row(i).iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest decimal that round-trips; negative zero prints as `0`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub fn parse_liabilities<R: Read>(reader: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    read_labelled_matrix(reader, 1, "liabilities")
}

pub fn write_liabilities<W: Write>(writer: W, ids: &[String], liabilities: &DMatrix<f64>) -> Result<()> {
    write_labelled_matrix(writer, ids, liabilities, Some("society"))
}

pub fn parse_gamma<R: Read>(reader: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    read_labelled_matrix(reader, 0, "cross-ownership")
}

pub fn write_gamma<W: Write>(writer: W, ids: &[String], gamma: &DMatrix<f64>) -> Result<()> {
    write_labelled_matrix(writer, ids, gamma, None)
}

/// Network and bank ids from a liabilities CSV and optional cross-ownership CSV.
pub fn load_network(path: &Path, alpha_x: f64, alpha_l: f64, gamma: Option<&Path>) -> Result<(FinancialNetwork, Vec<String>)> {
    let (ids, l) = parse_liabilities(open(path)?)?;
    let g = match gamma {
        Some(p) => {
            let (gids, g) = parse_gamma(open(p)?)?;
            if gids != ids {
                return Err(NetError::Parse("cross-ownership ids differ from liabilities ids".into()));
            }
            Some(g)
        }
        None => None,
    };
    Ok((FinancialNetwork::new(l, alpha_x, alpha_l, g)?, ids))
}

pub fn parse_balance_sheets<R: Read>(reader: R) -> Result<Vec<BalanceSheet>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let sheets = rdr.deserialize().collect::<std::result::Result<Vec<BalanceSheet>, _>>()?;
    if sheets.is_empty() {
        return Err(NetError::Parse("balance-sheet file has no banks".into()));
    }
    Ok(sheets)
}

pub fn load_balance_sheets(path: &Path) -> Result<Vec<BalanceSheet>> {
    parse_balance_sheets(open(path)?)
}

pub fn write_balance_sheets<W: Write>(writer: W, sheets: &[BalanceSheet]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["bank_id", "total_assets", "capital", "interbank_liabilities"])?;
    for s in sheets {
        w.write_record([
            s.bank_id.clone(),
            fmt_f64(s.total_assets),
            fmt_f64(s.capital),
            fmt_f64(s.interbank_liabilities),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Endowment scenarios: header of bank ids, one row per scenario.
pub fn parse_endowments<R: Read>(reader: R, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != ids {
        return Err(NetError::Parse(format!("endowment header {header:?} does not match bank ids {ids:?}")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(rec.iter().map(|s| parse_f64(s, "endowments")).collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

pub fn load_endowments(path: &Path, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    parse_endowments(open(path)?, ids)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s)?;
    Ok(serde_json::from_str(&s)?)
}

/// Marginal laws for the bounds table, with an optional conditional-mean model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalsFile {
    pub marginals: Vec<Marginal>,
    #[serde(default)]
    pub conditional: Option<FactorModel>,
}

pub fn write_batch<W: Write>(writer: W, ids: &[String], batch: &ScenarioBatch) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec!["path".to_owned()];
    header.extend(ids.iter().cloned());
    if batch.factor.is_some() {
        header.push("factor".into());
    }
    if batch.weights.is_some() {
        header.push("weight".into());
    }
    w.write_record(&header)?;
    for (k, x) in batch.x.iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(x.iter().map(|v| fmt_f64(*v)));
        if let Some(f) = &batch.factor {
            rec.push(fmt_f64(f[k]));
        }
        if let Some(wt) = &batch.weights {
            rec.push(fmt_f64(wt[k]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Endowment rows, optional factor column and optional weights of a batch CSV.
pub type BatchColumns = (Vec<String>, Vec<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>);

pub fn parse_batch<R: Read>(reader: R) -> Result<BatchColumns> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.first().map(String::as_str) != Some("path") {
        return Err(NetError::Parse("batch CSV must start with a 'path' column".into()));
    }
    let has_weight = header.last().map(String::as_str) == Some("weight");
    let has_factor = header.iter().any(|h| h == "factor");
    let n = header.len() - 1 - usize::from(has_weight) - usize::from(has_factor);
    let ids = header[1..=n].to_vec();
    let (mut x, mut factor, mut weight) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let vals = rec.iter().skip(1).map(|s| parse_f64(s, "batch")).collect::<Result<Vec<_>>>()?;
        if vals.len() != header.len() - 1 {
            return Err(NetError::Parse("batch row length differs from header".into()));
        }
        x.push(vals[..n].to_vec());
        if has_factor {
            factor.push(vals[n]);
        }
        if has_weight {
            weight.push(vals[vals.len() - 1]);
        }
    }
    Ok((ids, x, has_factor.then_some(factor), has_weight.then_some(weight)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = "bank,B1,B2,society\nB1,0,7,3\nB2,3,0,3\n";

    #[test]
    fn liabilities_round_trip() {
        let (ids, l) = parse_liabilities(FIG2.as_bytes()).unwrap();
        assert_eq!(ids, vec!["B1", "B2"]);
        assert_eq!(l[(0, 1)], 7.0);
        let mut out = Vec::new();
        write_liabilities(&mut out, &ids, &l).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), FIG2);
    }

    #[test]
    fn malformed_liabilities() {
        assert!(matches!(parse_liabilities("bank,B1,B2,society\nB2,3,0,3\nB1,0,7,3\n".as_bytes()), Err(NetError::Parse(_))));
        assert!(matches!(parse_liabilities("bank,B1,B2,society\nB1,0,x,3\nB2,3,0,3\n".as_bytes()), Err(NetError::Parse(_))));
        assert!(parse_liabilities("bank,B1,B2,society\nB1,0,7\nB2,3,0,3\n".as_bytes()).is_err());
        assert!(matches!(parse_liabilities("bank,B1,B2,society\nB1,0,7,3\n".as_bytes()), Err(NetError::Parse(_))));
    }

    #[test]
    fn balance_sheets_round_trip() {
        let text = "bank_id,total_assets,capital,interbank_liabilities\nA,10,2,4\nB,10.5,3,4\n";
        let sheets = parse_balance_sheets(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_balance_sheets(&mut out, &sheets).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn endowments_need_matching_header() {
        let ids = vec!["B1".to_owned(), "B2".to_owned()];
        let x = parse_endowments("B1,B2\n0,2\n1,0\n".as_bytes(), &ids).unwrap();
        assert_eq!(x, vec![vec![0.0, 2.0], vec![1.0, 0.0]]);
        assert!(parse_endowments("B2,B1\n0,2\n".as_bytes(), &ids).is_err());
    }

    #[test]
    fn batch_round_trip() {
        use crate::oracle::simulate::{exact_batch, ScenarioSpec, WeightedScenario};
        let spec = ScenarioSpec::FiniteSupport {
            scenarios: vec![
                WeightedScenario { x: vec![0.0, 2.0], probability: 0.5 },
                WeightedScenario { x: vec![1.0, 0.0], probability: 0.5 },
            ],
        };
        let batch = exact_batch(&spec).unwrap();
        let ids = vec!["B1".to_owned(), "B2".to_owned()];
        let mut out = Vec::new();
        write_batch(&mut out, &ids, &batch).unwrap();
        let (rid, x, f, w) = parse_batch(out.as_slice()).unwrap();
        assert_eq!(rid, ids);
        assert_eq!(x, batch.x);
        assert_eq!(f, None);
        assert_eq!(w, batch.weights);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
