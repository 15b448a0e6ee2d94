//! Interest on deferred tax: a yearly t*i share levy, its present value,
//! and the bond proceeds alternative.

use equitax::deferred::{bond_proceeds_tax, perpetual_levy_pv, BondPosition, DeferredParams};
use equitax::ledger::{Money, Rate, Regime};
use rust_decimal_macros::dec;

fn main() -> equitax::Result<()> {
    let params = DeferredParams::new(dec!(0.20), dec!(0.05))?;
    println!("levy {} of shares a year", params.levy());
    let v = Money::from_int(1_000_000);
    println!("PV of perpetual levy on {v}: {} (one-time t*V = {})", perpetual_levy_pv(params.t, params.i, v)?, v.times_rate(params.t));
    let bond = BondPosition { face: Money::from_int(1000), issue_date: dec!(0), coupon: Rate::tax(dec!(0.05))?, holder_regime: Regime::IncomeTaxed };
    println!("tax on $1,000 proceeds after 10 years: {}", bond_proceeds_tax(&bond, &params, bond.face, dec!(10))?.cents());
    Ok(())
}
