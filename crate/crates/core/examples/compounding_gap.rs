//! Gains taxed every year versus once at the horizon, 10% growth, 30% tax.

use equitax::ledger::Rate;
use equitax::sim::experiments::compounding_table;
use rust_decimal_macros::dec;

fn main() -> equitax::Result<()> {
    let rows = compounding_table(Rate::tax(dec!(0.10))?, Rate::tax(dec!(0.30))?, &[1, 10, 30, 50, 95])?;
    println!("{:>5} {:>16} {:>16} {:>8}", "years", "annual", "deferred", "ratio");
    for r in rows {
        println!("{:>5} {:>16.4} {:>16.4} {:>8.3}", r.years, r.annual, r.deferred, r.ratio);
    }
    Ok(())
}
