//! Convert, hold under the equity tax, reconvert: does anyone save tax on
//! gains accrued before conversion?

use equitax::conversion::{roundtrip_recapture_check, ConversionScenario, StrikeChoice};
use equitax::ledger::{Money, Rate};
use rust_decimal_macros::dec;

fn main() -> equitax::Result<()> {
    let (firm, mut lots) = ConversionScenario::worked_example().firm_and_lots();
    lots[0].purchase_price_per_share = Money::from_int(40);
    lots[0].reinvested_after_acquisition_per_share = Money::ZERO;
    let (t, tau) = (Rate::tax(dec!(0.2))?, Rate::tax(dec!(0.02))?);
    let path: Vec<Money> = [100, 105, 95, 110].into_iter().map(Money::from_int).collect();
    for (label, strike, recapture) in [
        ("at-the-money puts", StrikeChoice::Market, true),
        ("inflated strike", StrikeChoice::Multiple(dec!(1.3)), true),
        ("no recapture", StrikeChoice::Market, false),
    ] {
        let r = roundtrip_recapture_check(&firm, &lots, t, tau, &path, strike, recapture)?;
        println!(
            "{label:>18}: advantage {:>12} ({:.4} of value), hold difference {}, puts paid {}",
            r.advantage, r.advantage_fraction, r.holding_difference, r.put_payoff
        );
    }
    Ok(())
}
