//! Command-line front end. Each subcommand reads its input, calls the
//! library, and prints or writes the result.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use rust_decimal_macros::dec;
use serde::{Deserialize, Serialize};

use crate::auction::AuctionScenario;
use crate::conversion::ConversionScenario;
use crate::error::{Error, Result};
use crate::ledger::{Money, Rate};
use crate::proptax::{default_multipliers, underpricing_penalty_experiment, PenaltyExperiment};
use crate::sim::experiments::{compounding_table, default_economy, iceberg_table, revenue_neutral_rate};
use crate::sim::{run_simulation, write_json, write_outputs, write_table, EconomyConfig, OutputFormat};

#[derive(Debug, Parser)]
#[command(name = "equitax", version, about = "In-kind equity tax calculators and economy simulator")]
pub struct Cli {
    /// Scenario or economy config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed; overrides the config's.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory. Tables go to stdout when absent.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a firm to the equity tax and print the share accounting.
    ConvertCalc,
    /// Clear a sealed-bid uniform-price share auction.
    Auction,
    /// Run the economy and write steps, summary and event log.
    Simulate,
    /// Tabulate annual versus deferred gains taxation and the iceberg
    /// equivalence.
    CompareRegimes,
    /// Expected cost of each posting strategy under the property tax.
    ProptaxSim,
    /// Find the revenue-neutral equity tax rate.
    Rates {
        /// Relative revenue tolerance.
        #[arg(long, default_value = "0.005")]
        tolerance: Decimal,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub growth: Decimal,
    pub tax: Decimal,
    pub years: Vec<u32>,
    pub value: Decimal,
    pub price_tax: Decimal,
    pub yields: Vec<Decimal>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            growth: dec!(0.10),
            tax: dec!(0.30),
            years: vec![1, 10, 30, 50, 95],
            value: dec!(1000000),
            price_tax: dec!(0.02),
            yields: vec![dec!(0.02), dec!(0.05), dec!(0.10)],
        }
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn rate(key: &str, v: Decimal) -> Result<Rate> {
    Rate::tax(v).map_err(|_| Error::config(format!("`{key}` = {v} must lie in [0, 1)")))
}

#[derive(Serialize)]
struct Row<'a> {
    item: &'a str,
    value: String,
}

fn row(item: &str, value: impl ToString) -> Row<'_> {
    Row { item, value: value.to_string() }
}

fn shares(q: crate::ledger::ShareQuantity) -> Decimal {
    q.value().normalize()
}

fn dollars(m: Money) -> String {
    format!("{:.2}", m.cents())
}

/// A reader closing the pipe early is not an error.
fn written(r: std::io::Result<()>) -> Result<()> {
    match r {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::invalid(e.to_string())),
        _ => Ok(()),
    }
}

/// Print `rows` to `out`, or write them to `dir/name.{csv,json}`.
fn emit<T: Serialize>(out: &mut dyn Write, dir: Option<&Path>, name: &str, rows: &[T], format: OutputFormat) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::invalid(format!("{}: {e}", dir.display())))?;
        let ext = if format == OutputFormat::Csv { "csv" } else { "json" };
        let path = dir.join(format!("{name}.{ext}"));
        write_table(&path, rows, format)?;
        return written(writeln!(out, "wrote {}", path.display()));
    }
    let text = match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| Error::invalid(e.to_string()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)
                .map_err(|e| Error::invalid(e.to_string()))?
        }
        OutputFormat::Json => serde_json::to_string_pretty(rows).map_err(|e| Error::invalid(e.to_string()))? + "\n",
    };
    written(out.write_all(text.as_bytes()))
}

/// Execute a parsed command line, writing human-facing output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let dir = cli.out.as_deref();
    match &cli.command {
        Command::ConvertCalc => {
            let scenario = match &cli.config {
                Some(p) => read_toml::<ConversionScenario>(p)?,
                None => ConversionScenario::worked_example(),
            };
            let o = scenario.run()?;
            let rows = [
                row("new_shares_issued", shares(o.new_shares_issued)),
                row("credit_shares", shares(o.credit_shares())),
                row("outside_shares", shares(o.auctioned)),
                row("unsold_shares", shares(o.unsold)),
                row("post_price", dollars(o.post_price)),
                row("clearing_price", dollars(o.clearing_price)),
                row("irs_proceeds", dollars(o.irs_proceeds)),
            ];
            emit(out, dir, "conversion", &rows, cli.format)
        }
        Command::Auction => {
            let path = cli.config.as_ref().ok_or_else(|| Error::config("`auction` needs --config with supply and bids"))?;
            let scenario: AuctionScenario = read_toml(path)?;
            let result = scenario.run()?;
            #[derive(Serialize)]
            struct AllocRow {
                bidder: u32,
                shares: Decimal,
                paid: String,
                credit: bool,
            }
            let rows: Vec<AllocRow> = result
                .allocations
                .iter()
                .map(|a| AllocRow { bidder: a.bidder.0, shares: shares(a.shares), paid: dollars(a.dollars_paid), credit: a.credit })
                .collect();
            emit(out, dir, "allocations", &rows, cli.format)?;
            let totals = [
                row("clearing_price", result.clearing_price.value().normalize()),
                row("allocated", shares(result.allocated())),
                row("unsold", shares(result.unsold)),
                row("proceeds", dollars(result.cash_proceeds())),
            ];
            emit(out, dir, "auction_summary", &totals, cli.format)
        }
        Command::Simulate => {
            let mut config = match &cli.config {
                Some(p) => EconomyConfig::from_path(p)?,
                None => default_economy(1),
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let report = run_simulation(&config)?;
            match dir {
                Some(dir) => {
                    for path in write_outputs(&report, dir, cli.format)? {
                        written(writeln!(out, "wrote {}", path.display()))?;
                    }
                    Ok(())
                }
                None => {
                    let text = serde_json::to_string_pretty(&report.summary).map_err(|e| Error::invalid(e.to_string()))?;
                    written(writeln!(out, "{text}"))
                }
            }
        }
        Command::CompareRegimes => {
            let cfg = match &cli.config {
                Some(p) => read_toml::<CompareConfig>(p)?,
                None => CompareConfig::default(),
            };
            let growth = compounding_table(rate("growth", cfg.growth)?, rate("tax", cfg.tax)?, &cfg.years)?;
            emit(out, dir, "compounding", &growth, cli.format)?;
            let yields = cfg.yields.iter().map(|y| rate("yields", *y)).collect::<Result<Vec<_>>>()?;
            let iceberg = iceberg_table(Money::new(cfg.value), rate("price_tax", cfg.price_tax)?, &yields)?;
            emit(out, dir, "iceberg", &iceberg, cli.format)
        }
        Command::ProptaxSim => {
            let exp = match &cli.config {
                Some(p) => read_toml::<PenaltyExperiment>(p)?,
                None => PenaltyExperiment::default(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(1));
            let table = underpricing_penalty_experiment(&default_multipliers(), &exp, &mut rng)?;
            emit(out, dir, "proptax", &table, cli.format)
        }
        Command::Rates { tolerance } => {
            let mut config = match &cli.config {
                Some(p) => EconomyConfig::from_path(p)?,
                None => default_economy(1),
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let search = revenue_neutral_rate(&config, *tolerance)?;
            match dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::invalid(format!("{}: {e}", dir.display())))?;
                    write_json(&dir.join("rates.json"), &search)
                }
                None => emit(out, None, "rates", &[search], cli.format),
            }
        }
    }
}

/// Parse `args`, run, report errors on stderr, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
