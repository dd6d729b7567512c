//! Argument parsing, dispatch and error reporting for the `netval` binary.

pub mod commands;
pub mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use netval_core::io::SCHEMA_VERSION;
use netval_core::NetError;
use serde_json::json;

pub use table::Format;

/// Clearing, comonotonic expectations and debt-price bounds for interbank networks.
#[derive(Debug, Parser)]
#[command(name = "netval", version)]
pub struct Cli {
    /// Output encoding.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Seed for random draws and calibration masks.
    #[arg(long, global = true, env = "NETVAL_SEED", default_value_t = 42)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct NetArgs {
    /// Liabilities CSV: header `bank,<ids...>,society`, one row per bank.
    #[arg(long)]
    pub network: PathBuf,
    /// Optional cross-ownership CSV: header `bank,<ids...>`.
    #[arg(long)]
    pub gamma: Option<PathBuf>,
    /// Recovery rate on external assets of defaulting banks.
    #[arg(long, default_value_t = 1.0)]
    pub alpha_x: f64,
    /// Recovery rate on interbank assets of defaulting banks.
    #[arg(long, default_value_t = 1.0)]
    pub alpha_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichArg {
    Lower,
    Upper,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    None,
    Riskfree,
    Risky,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    Beta,
    #[value(name = "T")]
    Maturity,
    Alpha,
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Assets,
    Liabilities,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Greatest clearing wealths, payments and equities for each endowment row.
    Clear {
        #[command(flatten)]
        net: NetArgs,
        /// Endowments CSV: header of bank ids, one scenario per row.
        #[arg(long)]
        endowments: PathBuf,
    },
    /// Solvency thresholds of a single-factor comonotonic model.
    #[command(name = "q-star")]
    QStar {
        #[command(flatten)]
        net: NetArgs,
        /// Factor model JSON.
        #[arg(long)]
        model: PathBuf,
    },
    /// Default probabilities and expected wealth, payment and equity.
    Expect {
        #[command(flatten)]
        net: NetArgs,
        /// Factor model JSON.
        #[arg(long)]
        model: PathBuf,
    },
    /// Comonotonic, conditional and Jensen bounds on expected payments.
    Bounds {
        #[command(flatten)]
        net: NetArgs,
        /// Marginals JSON with an optional conditional-mean model.
        #[arg(long)]
        marginals: PathBuf,
    },
    /// Debt prices, effective rates and market caps under the CAPM model.
    Price {
        #[command(flatten)]
        net: NetArgs,
        /// CAPM parameters JSON.
        #[arg(long)]
        capm: PathBuf,
        #[arg(long, value_enum, default_value_t = WhichArg::Both)]
        which: WhichArg,
        /// Single-firm comparison prices.
        #[arg(long, value_enum, default_value_t = BaselineArg::None)]
        baseline: BaselineArg,
        /// Price with bankruptcy costs; the outputs are then not bounds.
        #[arg(long)]
        allow_bankruptcy_costs: bool,
    },
    /// Long-format comparative statics `param,bank,metric,value`.
    Statics {
        #[command(flatten)]
        net: NetArgs,
        /// CAPM parameters JSON.
        #[arg(long)]
        capm: PathBuf,
        #[arg(long, value_enum)]
        sweep: SweepArg,
        /// Grid as `start:stop:step` or a comma list.
        #[arg(long)]
        grid: String,
        /// Second grid for `--sweep ratio` (defaults to `--grid`).
        #[arg(long)]
        grid_b: Option<String>,
        /// Bank ids varied by `--sweep ratio`, as `ID_A,ID_B`.
        #[arg(long)]
        pair: Option<String>,
        #[arg(long, value_enum, default_value_t = RouteArg::Assets)]
        route: RouteArg,
    },
    /// Network and CAPM parameter files from balance sheets.
    Calibrate {
        /// Balance-sheet CSV `bank_id,total_assets,capital,interbank_liabilities`.
        #[arg(long)]
        sheets: PathBuf,
        /// Directory receiving `network.csv` and `capm.json`.
        #[arg(long)]
        out_dir: PathBuf,
        /// Share of off-diagonal interbank links allowed.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
    },
    /// Draw an endowment scenario batch.
    Simulate {
        /// Scenario spec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Network CSV whose ids label the batch columns.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Monte Carlo expectations with standard errors.
    Mc {
        #[command(flatten)]
        net: NetArgs,
        /// Batch CSV from `simulate`.
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        batch: Option<PathBuf>,
        /// Scenario spec JSON, drawn on the fly.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
    },
    /// Default-region halfspaces, or the region of each endowment row.
    Regions {
        #[command(flatten)]
        net: NetArgs,
        /// Classify these endowment rows instead of listing halfspaces.
        #[arg(long)]
        endowments: Option<PathBuf>,
    },
}

/// Exit code and label for each error kind.
pub fn classify(e: &NetError) -> (u8, &'static str) {
    match e {
        NetError::Io(_) => (3, "io"),
        NetError::Parse(_)
        | NetError::Csv(_)
        | NetError::Json(_)
        | NetError::Shape(_)
        | NetError::NonFinite { .. }
        | NetError::NegativeLiability { .. }
        | NetError::SelfObligation { .. }
        | NetError::ZeroLiabilities { .. }
        | NetError::NoSocietalObligation { .. }
        | NetError::RecoveryRate { .. }
        | NetError::CrossOwnership { .. } => (4, "schema"),
        NetError::Infeasible(_)
        | NetError::Calibration { .. }
        | NetError::RequiresFullRecovery { .. }
        | NetError::Model(_)
        | NetError::Endowment(_)
        | NetError::TooManyBanks { .. }
        | NetError::Quadrature { .. } => (5, "infeasible"),
        NetError::Internal(_) => (1, "internal"),
    }
}

pub fn report(kind: &str, code: u8, message: &str) -> ExitCode {
    let doc = json!({ "schema_version": SCHEMA_VERSION, "error": { "kind": kind, "code": code, "message": message } });
    eprintln!("{doc}");
    ExitCode::from(code)
}

pub fn run(cli: &Cli) -> netval_core::Result<()> {
    let table = commands::dispatch(cli)?;
    match &cli.output {
        Some(path) => {
            let f = File::create(path)
                .map_err(|e| NetError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            let mut w = BufWriter::new(f);
            table.write(&mut w, cli.format)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            table.write(&mut w, cli.format)?;
            w.flush()?;
        }
    }
    Ok(())
}
