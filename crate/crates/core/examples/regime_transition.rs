//! Voluntary conversion: firms switch once the accumulated return
//! advantage pays back the conversion tax; favored firms stay put.

use std::path::Path;

use equitax::sim::experiments::transition_experiment;
use equitax::sim::EconomyConfig;

fn main() -> equitax::Result<()> {
    let config = EconomyConfig::from_path(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/transition.toml"))?;
    let report = transition_experiment(&config)?;
    for p in report.series.iter().filter(|p| p.time.fract().is_zero()) {
        println!(
            "t={:>2} equity share {:.2} (favored {:.2}) burden equity {:.4} income {:.4}",
            p.time, p.equity_fraction, p.favored_equity_fraction, p.burden_equity, p.burden_income
        );
    }
    println!("{} regime changes, conversion revenue {}", report.changes.len(), report.conversion_revenue);
    Ok(())
}
