//! The IRS accrues 2% of publicly held shares a year; shares held by an
//! equity-taxed entity are outside the base.

use equitax::ledger::{Firm, FirmId, Holder, HolderId, Ledger, Money, Rate, Regime, ShareLot, ShareQuantity, TaxEventKind};
use equitax::regimes::{equity_tax_step, RealizationPolicy};
use rust_decimal::Decimal;
use rust_decimal_macros::dec;

fn main() -> equitax::Result<()> {
    let mut ledger = Ledger::new();
    ledger.add_holder(Holder::individual(HolderId(1), RealizationPolicy::Annual));
    ledger.add_holder(Holder::entity(HolderId(2)));
    let firm = Firm::new(FirmId(1), Regime::EquityTaxed, ShareQuantity::from_int(10_000), Money::from_int(50));
    ledger.add_firm(
        firm,
        vec![
            ShareLot::new(HolderId(1), FirmId(1), ShareQuantity::from_int(8_000), Money::from_int(50)),
            ShareLot::new(HolderId(2), FirmId(1), ShareQuantity::from_int(2_000), Money::from_int(50)),
        ],
    )?;
    let tau = Rate::tax(dec!(0.02))?;
    for quarter in 1..=4 {
        let time = Decimal::from(quarter) / Decimal::from(4);
        equity_tax_step(&mut ledger, FirmId(1), tau, dec!(0.25), time, TaxEventKind::EquityAccrual)?;
        println!("t={time}: IRS pool {}", ledger.firm(FirmId(1))?.irs_accrued);
    }
    println!("individual now holds {}, entity {}", ledger.position(HolderId(1), FirmId(1)), ledger.position(HolderId(2), FirmId(1)));
    Ok(())
}
