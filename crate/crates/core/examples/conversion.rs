//! Convert an income-taxed firm to the equity tax: 2,000 shares bought at
//! $75 with $20 reinvested since, market $100, tax rate 20%.

use equitax::conversion::ConversionScenario;
use equitax::ledger::Money;

fn main() -> equitax::Result<()> {
    let scenario = ConversionScenario::worked_example();
    let o = scenario.run()?;
    println!("new shares issued  {}", o.new_shares_issued);
    println!("post price         ${}", o.post_price.cents());
    for lot in &o.credit_shares_per_lot {
        println!("holder {}: basis {} credit {} -> {} shares", lot.holder, lot.basis, lot.credit, lot.shares);
    }
    println!("sold to outsiders  {} at ${}", o.auctioned, o.clearing_price.cents());
    println!("IRS proceeds       ${}", o.irs_proceeds.cents());
    assert_eq!(o.irs_proceeds, Money::from_int(2000));
    Ok(())
}
