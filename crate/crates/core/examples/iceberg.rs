//! A tax on price equals a much larger tax on income: rate / yield.

use equitax::ledger::{Money, Rate};
use equitax::sim::experiments::iceberg_table;
use rust_decimal_macros::dec;

fn main() -> equitax::Result<()> {
    let yields = [dec!(0.02), dec!(0.05), dec!(0.10)].map(|y| Rate::tax(y).unwrap());
    for r in iceberg_table(Money::from_int(1_000_000), Rate::tax(dec!(0.02))?, &yields)? {
        println!(
            "yield {:>5}: 2% of price = {} = {:.0}% of income ({})",
            r.income_yield,
            r.tax_on_price,
            r.equivalent_income_rate * dec!(100),
            r.tax_on_income
        );
    }
    Ok(())
}
