//! Interest on deferred tax: the `t*i` share levy and bond proceeds taxed with
//! interest compounded from issue.

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{pow_dec, FirmId, Ledger, Money, Rate, Regime, TaxEvent, TaxEventKind};
use crate::regimes::accrual_fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeferredParams {
    pub t: Rate,
    pub i: Rate,
}

impl DeferredParams {
    pub fn new(t: Decimal, i: Decimal) -> Result<Self> {
        let params = DeferredParams { t: Rate::tax(t)?, i: Rate::tax(i)? };
        Ok(params)
    }

    pub fn levy(&self) -> Rate {
        levy_fraction(self.t, self.i)
    }
}

/// Yearly share fraction paid as interest on deferred tax.
pub fn levy_fraction(t: Rate, i: Rate) -> Rate {
    Rate::new_unchecked(t.value() * i.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondPosition {
    pub face: Money,
    /// Clock years.
    pub issue_date: Decimal,
    pub coupon: Rate,
    pub holder_regime: Regime,
}

/// Tax on bond proceeds: `proceeds * t * (1 + i)^years`.
pub fn bond_proceeds_tax(bond: &BondPosition, params: &DeferredParams, proceeds: Money, years: Decimal) -> Result<Money> {
    if years < Decimal::ZERO {
        return Err(Error::invalid("negative holding period"));
    }
    if bond.holder_regime != Regime::IncomeTaxed {
        return Err(Error::invalid("bond levy applies to income-taxed holders"));
    }
    let growth = pow_dec(Decimal::ONE + params.i.value(), years)?;
    Ok(Money::new(proceeds.value() * params.t.value() * growth))
}

/// Present value at `i` of the perpetual levy `t*i*value`, paid at the end of
/// each year. Summation stops once the geometric tail bound `term / i` is
/// below `1e-14`.
pub fn perpetual_levy_pv(t: Rate, i: Rate, value: Money) -> Result<Money> {
    if i.value().is_zero() {
        return Ok(Money::ZERO);
    }
    let levy = levy_fraction(t, i).value() * value.value();
    let ratio = Decimal::ONE / (Decimal::ONE + i.value());
    let floor = Decimal::new(1, 14) * i.value();
    let mut discount = ratio;
    let mut total = Decimal::ZERO;
    loop {
        let term = levy * discount;
        total += term;
        if term.abs() < floor {
            break;
        }
        discount *= ratio;
    }
    Ok(Money::new(total))
}

/// Take the `t*i` levy for `dt` from individual-held shares of an
/// income-taxed firm. Equity-taxed firms already pay in shares and
/// equity-taxed holders are exempt.
pub fn deferred_levy_step(
    ledger: &mut Ledger,
    firm: FirmId,
    params: &DeferredParams,
    dt: Decimal,
    time: Decimal,
) -> Result<Option<TaxEvent>> {
    if ledger.firm(firm)?.regime != Regime::IncomeTaxed {
        return Err(Error::WrongRegime(firm.0));
    }
    let fraction = accrual_fraction(params.levy(), dt)?;
    if fraction.is_zero() {
        return Ok(None);
    }
    let taken = ledger.accrue_to_irs(firm, fraction)?;
    let event = TaxEvent::shares(time, TaxEventKind::DeferredInterest, taken).for_firm(firm);
    ledger.record(event.clone());
    Ok(Some(event))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Firm, Holder, HolderId, ShareLot, ShareQuantity};
    use crate::regimes::RealizationPolicy;
    use rust_decimal_macros::dec;

    fn bond() -> BondPosition {
        BondPosition {
            face: Money::from_int(1000),
            issue_date: Decimal::ZERO,
            coupon: Rate::new_unchecked(dec!(0.05)),
            holder_regime: Regime::IncomeTaxed,
        }
    }

    #[test]
    fn levy_examples() {
        let r = |v| Rate::tax(v).unwrap();
        assert_eq!(levy_fraction(r(dec!(0.2)), r(dec!(0.05))).value(), dec!(0.01));
        assert!(levy_fraction(r(dec!(0)), r(dec!(0.07))).value().is_zero());
        assert_eq!(levy_fraction(r(dec!(0.3)), r(dec!(0.1))).value(), dec!(0.03));
    }

    #[test]
    fn bond_examples() {
        let p = DeferredParams::new(dec!(0.2), dec!(0.05)).unwrap();
        let proceeds = Money::from_int(1000);
        assert_eq!(bond_proceeds_tax(&bond(), &p, proceeds, Decimal::ZERO).unwrap(), Money::from_int(200));
        let ten = bond_proceeds_tax(&bond(), &p, proceeds, dec!(10)).unwrap();
        let oracle = 200.0 * 1.05f64.powi(10);
        assert!((ten.value().to_string().parse::<f64>().unwrap() - oracle).abs() < 1e-9);
        assert_eq!(ten.cents(), dec!(325.78));

        let flat = DeferredParams::new(dec!(0.2), dec!(0)).unwrap();
        assert_eq!(bond_proceeds_tax(&bond(), &flat, proceeds, dec!(37)).unwrap(), Money::from_int(200));
        assert!(bond_proceeds_tax(&bond(), &p, proceeds, dec!(-1)).is_err());
    }

    #[test]
    fn perpetual_levy_matches_one_time_tax() {
        let r = |v| Rate::tax(v).unwrap();
        let pv = perpetual_levy_pv(r(dec!(0.2)), r(dec!(0.05)), Money::from_int(1_000_000)).unwrap();
        assert!((pv.value() - dec!(200_000)).abs() < dec!(0.0000000001));
    }

    #[test]
    fn levy_step_skips_entities() {
        let mut ledger = Ledger::new();
        ledger.add_holder(Holder::individual(HolderId(1), RealizationPolicy::Annual));
        ledger.add_holder(Holder::entity(HolderId(2)));
        let firm = Firm::new(FirmId(1), Regime::IncomeTaxed, ShareQuantity::from_int(200), Money::from_int(10));
        ledger
            .add_firm(
                firm,
                vec![
                    ShareLot::new(HolderId(1), FirmId(1), ShareQuantity::from_int(100), Money::from_int(10)),
                    ShareLot::new(HolderId(2), FirmId(1), ShareQuantity::from_int(100), Money::from_int(10)),
                ],
            )
            .unwrap();
        let p = DeferredParams::new(dec!(0.2), dec!(0.05)).unwrap();
        deferred_levy_step(&mut ledger, FirmId(1), &p, Decimal::ONE, Decimal::ONE).unwrap();
        assert_eq!(ledger.position(HolderId(1), FirmId(1)), ShareQuantity::from_int(99));
        assert_eq!(ledger.position(HolderId(2), FirmId(1)), ShareQuantity::from_int(100));
        ledger.check_all().unwrap();
    }
}
