//! Run the bundled three-class economy and print the revenue breakdown.

use std::path::Path;

use equitax::sim::{run_simulation, EconomyConfig};

fn main() -> equitax::Result<()> {
    let config = EconomyConfig::from_path(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/economy.toml"))?;
    let report = run_simulation(&config)?;
    let s = &report.summary;
    println!("{} steps, {} events", s.steps, report.log.len());
    for (kind, amount) in &s.revenue_by_kind {
        println!("{kind:?}: {amount}");
    }
    println!("total {}  unsold pool {}", s.total_revenue, s.irs_pool_value);
    Ok(())
}
