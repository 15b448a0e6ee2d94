//! The equity tax rate raising what the income tax raises on the same economy.

use equitax::sim::experiments::{default_economy, revenue_neutral_rate};
use rust_decimal_macros::dec;

fn main() -> equitax::Result<()> {
    let r = revenue_neutral_rate(&default_economy(1), dec!(0.005))?;
    println!("tau = {:.4}%  ({} iterations)", r.tau * dec!(100), r.iterations);
    println!("income tax {}  equity tax {}  gap {:.3}%", r.baseline_revenue, r.reform_revenue, r.relative_gap * dec!(100));
    Ok(())
}
