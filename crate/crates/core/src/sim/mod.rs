//! Seeded Monte Carlo economy with firms under both regimes.
//!
//! Investors price shares myopically: book value per share times one period
//! of expected net return, discounted at the interest rate. Economies are
//! independent, so batches of seeds run in parallel and are collected in
//! seed order.

pub mod config;
mod economy;
pub mod experiments;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{EconomyConfig, FirmClass, PricingRule};
pub use economy::{
    advance_firm, book_wealth, clipped_normal, conversion_cost_fraction, growth_factor, price_firm, EconomyState,
    FirmMeta, RegimeChange, StepRecord, BIDDER_BASE, ENTITY_BASE,
};

use crate::error::{Error, Result};
use crate::ledger::{EventLog, HolderKind, Money, Regime, TaxEventKind};

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub horizon_years: u32,
    pub steps: u64,
    pub total_revenue: Money,
    pub revenue_by_kind: BTreeMap<TaxEventKind, Money>,
    /// Unsold IRS pool shares valued at final prices.
    pub irs_pool_value: Money,
    pub equity_firms: usize,
    pub income_firms: usize,
    pub regime_changes: usize,
    pub individual_wealth_at_book: Money,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub summary: Summary,
    pub records: Vec<StepRecord>,
    pub changes: Vec<RegimeChange>,
    pub log: EventLog,
}

/// Cross-check the revenue total against per-firm step attributions and the
/// per-kind breakdown. All three are folds over the same log but take
/// different paths through it.
fn reconcile(state: &EconomyState) -> Result<()> {
    let total = state.ledger.log().total_revenue();
    let by_kind: Money = state.ledger.log().revenue_by_kind().values().copied().sum();
    let unattributed = state.ledger.log().revenue_where(|e| e.firm.is_none());
    let attributed: Money = state.records.iter().map(|r| r.tax_paid).sum();
    if total != by_kind || total != attributed + unattributed {
        return Err(Error::Invariant(format!(
            "revenue mismatch: log {total}, by kind {by_kind}, by firm {attributed} + {unattributed}"
        )));
    }
    Ok(())
}

/// Run one economy from `config` to its horizon.
pub fn run_simulation(config: &EconomyConfig) -> Result<SimulationReport> {
    let mut state = EconomyState::new(config.clone())?;
    while !state.is_done() {
        state.step()?;
    }
    reconcile(&state)?;
    let firms: Vec<_> = state.ledger.firms().collect();
    let summary = Summary {
        seed: config.seed,
        horizon_years: config.horizon_years,
        steps: config.steps(),
        total_revenue: state.ledger.log().total_revenue(),
        revenue_by_kind: state.ledger.log().revenue_by_kind(),
        irs_pool_value: firms.iter().map(|f| f.irs_accrued.times_price(f.price_per_share)).sum(),
        equity_firms: firms.iter().filter(|f| f.regime == Regime::EquityTaxed).count(),
        income_firms: firms.iter().filter(|f| f.regime == Regime::IncomeTaxed).count(),
        regime_changes: state.changes.len(),
        individual_wealth_at_book: state.holder_book_wealth(HolderKind::Individual)?,
    };
    Ok(SimulationReport { summary, records: state.records, changes: state.changes, log: state.ledger.log().clone() })
}

/// Run `config` once per seed in parallel. Results come back in seed order.
pub fn run_many(config: &EconomyConfig, seeds: &[u64]) -> Vec<Result<SimulationReport>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            run_simulation(&cfg)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

/// Write rows as CSV with a header, or as a JSON array.
pub fn write_table<T: Serialize>(path: &Path, rows: &[T], format: OutputFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row).map_err(|e| io_err(path, e))?;
            }
            w.flush().map_err(|e| io_err(path, e))?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| io_err(path, e))?;
            out.write_all(b"\n").map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Write `steps.{csv,json}`, `summary.json` and `events.jsonl` into `dir`.
pub fn write_outputs(report: &SimulationReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let steps = dir.join(format!("steps.{ext}"));
    write_table(&steps, &report.records, format)?;
    let summary = dir.join("summary.json");
    write_json(&summary, &report.summary)?;
    let events = dir.join("events.jsonl");
    let file = File::create(&events).map_err(|e| io_err(&events, e))?;
    let mut w = BufWriter::new(file);
    report.log.write_jsonl(&mut w).map_err(|e| io_err(&events, e))?;
    w.flush().map_err(|e| io_err(&events, e))?;
    Ok(vec![steps, summary, events])
}
