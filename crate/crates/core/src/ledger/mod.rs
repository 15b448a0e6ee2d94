//! Firms, share lots and holders, with the bookkeeping every other module
//! builds on.
//!
//! The ledger owns one economy's state. Share conservation holds per firm at
//! all times: the quantities in holder lots plus the IRS's accrued pool equal
//! the firm's outstanding shares, exactly.

mod events;
mod units;

use std::collections::BTreeMap;
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

pub use events::{EventLog, TaxAmount, TaxEvent, TaxEventKind};
pub use units::{div_q, pow_dec, quantize, Money, Rate, ShareQuantity, LEDGER_SCALE};

use crate::error::{Error, Result};
use crate::regimes::RealizationPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FirmId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HolderId(pub u32);

impl fmt::Display for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.0)
    }
}

impl fmt::Display for HolderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    IncomeTaxed,
    EquityTaxed,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::IncomeTaxed => "income",
            Regime::EquityTaxed => "equity",
        })
    }
}

/// How a firm's gross income is spent. Masked income is reinvestment booked
/// as a deductible expense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncomeSplit {
    pub expenses: Decimal,
    pub dividends: Decimal,
    pub reinvestment: Decimal,
    pub masked: Decimal,
}

impl IncomeSplit {
    pub fn new(expenses: Decimal, dividends: Decimal, reinvestment: Decimal, masked: Decimal) -> Result<Self> {
        let split = IncomeSplit { expenses, dividends, reinvestment, masked };
        split.validate()?;
        Ok(split)
    }

    /// Split where `payout` of the distributable income (what is neither
    /// expensed nor masked) is paid out as dividends.
    pub fn from_policy(expenses: Decimal, masked: Decimal, payout: Decimal) -> Result<Self> {
        let distributable = Decimal::ONE - expenses - masked;
        let dividends = distributable * payout;
        Self::new(expenses, dividends, distributable - dividends, masked)
    }

    /// All income retained and reported.
    pub fn reinvest_all() -> Self {
        IncomeSplit {
            expenses: Decimal::ZERO,
            dividends: Decimal::ZERO,
            reinvestment: Decimal::ONE,
            masked: Decimal::ZERO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.expenses, self.dividends, self.reinvestment, self.masked];
        if parts.iter().any(|p| p.is_sign_negative() && !p.is_zero()) {
            return Err(Error::invalid("income split fractions must be non-negative"));
        }
        let total: Decimal = parts.iter().sum();
        if total != Decimal::ONE {
            return Err(Error::invalid(format!("income split sums to {total}, expected 1")));
        }
        Ok(())
    }

    /// Share of income taxed at the corporate level under the income tax.
    pub fn reported_taxable(&self) -> Decimal {
        self.dividends + self.reinvestment
    }

    /// Share of income that stays with, or reaches, shareholders.
    pub fn to_shareholders(&self) -> Decimal {
        self.dividends + self.reinvestment + self.masked
    }

    /// Payout ratio of distributable income.
    pub fn dividend_policy(&self) -> Decimal {
        let distributable = self.dividends + self.reinvestment;
        if distributable.is_zero() {
            Decimal::ZERO
        } else {
            self.dividends / distributable
        }
    }
}

/// Per-year drift and volatility of the firm's pre-tax capital growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnProcess {
    pub drift: Decimal,
    pub volatility: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Firm {
    pub id: FirmId,
    pub regime: Regime,
    pub shares_outstanding: ShareQuantity,
    pub irs_accrued: ShareQuantity,
    pub price_per_share: Money,
    /// Fundamental (book) value of the firm.
    pub capital: Money,
    pub returns: ReturnProcess,
    pub split: IncomeSplit,
    /// Cumulative after-tax income reinvested per share since inception.
    pub reinvested_per_share: Money,
    /// Reduction of this firm's income tax burden relative to the statutory
    /// rates. Non-zero for favored firms.
    pub burden_discount: Rate,
}

impl Firm {
    pub fn new(id: FirmId, regime: Regime, shares: ShareQuantity, price: Money) -> Self {
        Firm {
            id,
            regime,
            shares_outstanding: shares,
            irs_accrued: ShareQuantity::ZERO,
            price_per_share: price,
            capital: shares.times_price(price),
            returns: ReturnProcess { drift: Decimal::ZERO, volatility: Decimal::ZERO },
            split: IncomeSplit::reinvest_all(),
            reinvested_per_share: Money::ZERO,
            burden_discount: Rate::default(),
        }
    }

    pub fn with_returns(mut self, drift: Decimal, volatility: Decimal) -> Self {
        self.returns = ReturnProcess { drift, volatility };
        self
    }

    pub fn with_split(mut self, split: IncomeSplit) -> Self {
        self.split = split;
        self
    }

    pub fn market_value(&self) -> Money {
        self.shares_outstanding.times_price(self.price_per_share)
    }

    pub fn book_per_share(&self) -> Result<Money> {
        self.capital.per_share(self.shares_outstanding)
    }
}

/// Issue new shares making up `fraction` of the new total. Firm value is
/// conserved: the per-share price drops by the same factor.
pub fn issue_shares(firm: &Firm, fraction: Rate) -> Result<(Firm, ShareQuantity)> {
    let f = fraction.value();
    if f.is_sign_negative() || f >= Decimal::ONE {
        return Err(Error::InvalidRate { value: f, bounds: "[0, 1)" });
    }
    let old = firm.shares_outstanding;
    let new_shares = ShareQuantity::new(div_q(old.value() * f, Decimal::ONE - f)?)?;
    let mut out = firm.clone();
    out.shares_outstanding = old + new_shares;
    out.price_per_share = firm.price_per_share.scale(Decimal::ONE - f);
    Ok((out, new_shares))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareLot {
    pub holder: HolderId,
    pub firm: FirmId,
    pub quantity: ShareQuantity,
    pub purchase_price_per_share: Money,
    pub reinvested_after_acquisition_per_share: Money,
}

impl ShareLot {
    pub fn new(holder: HolderId, firm: FirmId, quantity: ShareQuantity, purchase_price: Money) -> Self {
        ShareLot {
            holder,
            firm,
            quantity,
            purchase_price_per_share: purchase_price,
            reinvested_after_acquisition_per_share: Money::ZERO,
        }
    }

    pub fn basis_per_share(&self) -> Money {
        self.purchase_price_per_share + self.reinvested_after_acquisition_per_share
    }

    /// Restart the lot's basis at `price`, as after a realization.
    pub fn reset_basis(&mut self, price: Money) {
        self.purchase_price_per_share = price;
        self.reinvested_after_acquisition_per_share = Money::ZERO;
    }
}

/// Split `qty` shares off `lot` into a new lot owned by `to`. Both halves keep
/// the source's cost-basis fields.
pub fn transfer_shares(lot: &ShareLot, to: HolderId, qty: ShareQuantity) -> Result<(ShareLot, ShareLot)> {
    if qty > lot.quantity {
        return Err(Error::Oversell { requested: qty.value(), available: lot.quantity.value() });
    }
    let mut remaining = lot.clone();
    remaining.quantity = lot.quantity.checked_sub(qty)?;
    let mut moved = lot.clone();
    moved.holder = to;
    moved.quantity = qty;
    Ok((remaining, moved))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderKind {
    /// Income-taxed investor.
    Individual,
    /// An equity-taxed firm or fund. Its shares in other equity-taxed firms
    /// are outside the accrual base.
    EquityTaxedEntity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holder {
    pub id: HolderId,
    pub kind: HolderKind,
    pub realization: RealizationPolicy,
    /// Dividends received net of tax, minus taxes paid out of pocket.
    pub cash: Money,
}

impl Holder {
    pub fn individual(id: HolderId, realization: RealizationPolicy) -> Self {
        Holder { id, kind: HolderKind::Individual, realization, cash: Money::ZERO }
    }

    pub fn entity(id: HolderId) -> Self {
        Holder { id, kind: HolderKind::EquityTaxedEntity, realization: RealizationPolicy::Annual, cash: Money::ZERO }
    }
}

/// One economy's books: firms, holders, lots and the tax event log.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    firms: BTreeMap<FirmId, Firm>,
    holders: BTreeMap<HolderId, Holder>,
    lots: Vec<ShareLot>,
    log: EventLog,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_holder(&mut self, holder: Holder) {
        self.holders.insert(holder.id, holder);
    }

    /// Register a firm together with its initial lots, which must account for
    /// every outstanding share not held by the IRS.
    pub fn add_firm(&mut self, firm: Firm, lots: Vec<ShareLot>) -> Result<()> {
        let id = firm.id;
        for lot in &lots {
            if lot.firm != id {
                return Err(Error::invalid(format!("lot for {} registered with {id}", lot.firm)));
            }
            if !self.holders.contains_key(&lot.holder) {
                return Err(Error::UnknownHolder(lot.holder.0));
            }
        }
        self.firms.insert(id, firm);
        self.lots.extend(lots);
        self.check_conservation(id)
    }

    pub fn firm(&self, id: FirmId) -> Result<&Firm> {
        self.firms.get(&id).ok_or(Error::UnknownFirm(id.0))
    }

    pub fn firm_mut(&mut self, id: FirmId) -> Result<&mut Firm> {
        self.firms.get_mut(&id).ok_or(Error::UnknownFirm(id.0))
    }

    pub fn firms(&self) -> impl Iterator<Item = &Firm> {
        self.firms.values()
    }

    pub fn firm_ids(&self) -> Vec<FirmId> {
        self.firms.keys().copied().collect()
    }

    pub fn holder(&self, id: HolderId) -> Result<&Holder> {
        self.holders.get(&id).ok_or(Error::UnknownHolder(id.0))
    }

    pub fn holder_mut(&mut self, id: HolderId) -> Result<&mut Holder> {
        self.holders.get_mut(&id).ok_or(Error::UnknownHolder(id.0))
    }

    pub fn holders(&self) -> impl Iterator<Item = &Holder> {
        self.holders.values()
    }

    pub fn lots(&self) -> &[ShareLot] {
        &self.lots
    }

    pub fn lots_of(&self, firm: FirmId) -> impl Iterator<Item = &ShareLot> {
        self.lots.iter().filter(move |l| l.firm == firm)
    }

    pub fn lots_mut(&mut self) -> &mut [ShareLot] {
        &mut self.lots
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn record(&mut self, event: TaxEvent) {
        self.log.push(event);
    }

    pub fn record_all(&mut self, events: impl IntoIterator<Item = TaxEvent>) {
        self.log.extend(events);
    }

    /// Shares of `firm` held by `holder` across all lots.
    pub fn position(&self, holder: HolderId, firm: FirmId) -> ShareQuantity {
        self.lots_of(firm).filter(|l| l.holder == holder).map(|l| l.quantity).sum()
    }

    /// Shares in the equity-tax accrual base: lots not held by equity-taxed
    /// entities.
    pub fn accrual_base(&self, firm: FirmId) -> ShareQuantity {
        self.lots_of(firm)
            .filter(|l| self.holder_kind(l.holder) != Some(HolderKind::EquityTaxedEntity))
            .map(|l| l.quantity)
            .sum()
    }

    fn holder_kind(&self, id: HolderId) -> Option<HolderKind> {
        self.holders.get(&id).map(|h| h.kind)
    }

    /// Move `fraction` of every accrual-base lot of `firm` into the IRS pool.
    /// Returns the total accrued.
    pub fn accrue_to_irs(&mut self, firm: FirmId, fraction: Decimal) -> Result<ShareQuantity> {
        let mut accrued = ShareQuantity::ZERO;
        let kinds: BTreeMap<HolderId, HolderKind> = self.holders.iter().map(|(id, h)| (*id, h.kind)).collect();
        for lot in self.lots.iter_mut().filter(|l| l.firm == firm) {
            if kinds.get(&lot.holder) == Some(&HolderKind::EquityTaxedEntity) {
                continue;
            }
            let take = lot.quantity.scale(fraction)?;
            lot.quantity = lot.quantity.checked_sub(take)?;
            accrued += take;
        }
        let f = self.firm_mut(firm)?;
        f.irs_accrued += accrued;
        self.drop_empty_lots();
        Ok(accrued)
    }

    /// Add shares to `holder`'s position. Equity-taxed firms keep one lot per
    /// holder with a quantity-weighted purchase price, since basis only
    /// matters there again at reconversion, when it is reset anyway.
    pub fn credit_lot(&mut self, lot: ShareLot) -> Result<()> {
        if lot.quantity.is_zero() {
            return Ok(());
        }
        let regime = self.firm(lot.firm)?.regime;
        if !self.holders.contains_key(&lot.holder) {
            return Err(Error::UnknownHolder(lot.holder.0));
        }
        if regime == Regime::EquityTaxed {
            if let Some(existing) = self.lots.iter_mut().find(|l| l.firm == lot.firm && l.holder == lot.holder) {
                let total = existing.quantity + lot.quantity;
                let cost = existing.quantity.times_price(existing.basis_per_share())
                    + lot.quantity.times_price(lot.basis_per_share());
                existing.purchase_price_per_share = cost.per_share(total)?;
                existing.reinvested_after_acquisition_per_share = Money::ZERO;
                existing.quantity = total;
                return Ok(());
            }
        }
        self.lots.push(lot);
        Ok(())
    }

    /// Transfer `qty` shares out of the IRS pool into `holder`'s position at
    /// `price`.
    pub fn release_irs_shares(&mut self, firm: FirmId, holder: HolderId, qty: ShareQuantity, price: Money) -> Result<()> {
        let f = self.firm_mut(firm)?;
        f.irs_accrued = f.irs_accrued.checked_sub(qty)?;
        self.credit_lot(ShareLot::new(holder, firm, qty, price))
    }

    /// Apply `f` to the lots of `firm` held by `holder`.
    pub fn for_lots_of_mut(&mut self, firm: FirmId, mut f: impl FnMut(&mut ShareLot)) {
        for lot in self.lots.iter_mut().filter(|l| l.firm == firm) {
            f(lot);
        }
    }

    pub fn drop_empty_lots(&mut self) {
        self.lots.retain(|l| !l.quantity.is_zero());
    }

    /// Holder lots plus the IRS pool must equal outstanding shares exactly.
    pub fn check_conservation(&self, firm: FirmId) -> Result<()> {
        let f = self.firm(firm)?;
        let held: ShareQuantity = self.lots_of(firm).map(|l| l.quantity).sum();
        let total = held + f.irs_accrued;
        if total != f.shares_outstanding {
            return Err(Error::Invariant(format!(
                "{firm}: lots {held} + irs {} != outstanding {}",
                f.irs_accrued, f.shares_outstanding
            )));
        }
        if f.irs_accrued > f.shares_outstanding {
            return Err(Error::Invariant(format!("{firm}: irs pool exceeds outstanding")));
        }
        Ok(())
    }

    pub fn check_all(&self) -> Result<()> {
        self.firms.keys().try_for_each(|id| self.check_conservation(*id))
    }

    /// Market value of a holder's shares plus cash.
    pub fn holder_wealth(&self, holder: HolderId) -> Result<Money> {
        let mut total = self.holder(holder)?.cash;
        for lot in self.lots.iter().filter(|l| l.holder == holder) {
            total += lot.quantity.times_price(self.firm(lot.firm)?.price_per_share);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    fn firm(shares: u64, price: Decimal) -> Firm {
        Firm::new(FirmId(1), Regime::IncomeTaxed, ShareQuantity::from_int(shares), Money::new(price))
    }

    #[test]
    fn issuance_matches_worked_example() {
        let (after, new) = issue_shares(&firm(2000, dec!(100)), Rate::tax(dec!(0.2)).unwrap()).unwrap();
        assert_eq!(new, ShareQuantity::from_int(500));
        assert_eq!(after.shares_outstanding, ShareQuantity::from_int(2500));
        assert_eq!(after.price_per_share, Money::from_int(80));
        assert_eq!(after.market_value(), Money::from_int(200_000));
    }

    #[test]
    fn zero_fraction_is_identity() {
        let f = firm(1234, dec!(17.5));
        let (after, new) = issue_shares(&f, Rate::tax(Decimal::ZERO).unwrap()).unwrap();
        assert!(new.is_zero());
        assert_eq!(after, f);
    }

    #[test]
    fn third_issuance_conserves_value_to_ledger_precision() {
        let third = Rate::tax(div_q(Decimal::ONE, dec!(3)).unwrap()).unwrap();
        let (after, new) = issue_shares(&firm(1000, dec!(50)), third).unwrap();
        // 1/3 is not a terminating decimal; the rate carries 12 digits.
        assert!((new.value() - dec!(500)).abs() < dec!(0.000000001));
        assert!((after.price_per_share.value() - dec!(33.333333333333)).abs() < dec!(0.000000001));
        let before = dec!(50000);
        assert!((after.market_value().value() - before).abs() < dec!(0.000001));
    }

    #[test]
    fn full_fraction_is_rejected() {
        assert!(issue_shares(&firm(10, dec!(1)), Rate::new_unchecked(dec!(1))).is_err());
        assert!(issue_shares(&firm(10, dec!(1)), Rate::new_unchecked(dec!(1.5))).is_err());
    }

    #[test]
    fn transfers_copy_basis_and_conserve_quantity() {
        let lot = ShareLot::new(HolderId(1), FirmId(1), ShareQuantity::from_int(2000), Money::from_int(75));
        let (rest, moved) = transfer_shares(&lot, HolderId(2), ShareQuantity::from_int(500)).unwrap();
        assert_eq!(rest.quantity, ShareQuantity::from_int(1500));
        assert_eq!(moved.quantity, ShareQuantity::from_int(500));
        assert_eq!(moved.holder, HolderId(2));
        assert_eq!(rest.purchase_price_per_share, Money::from_int(75));
        assert_eq!(moved.purchase_price_per_share, Money::from_int(75));

        let (empty, all) = transfer_shares(&lot, HolderId(2), lot.quantity).unwrap();
        assert!(empty.quantity.is_zero());
        assert_eq!(all.quantity, lot.quantity);

        let (same, nothing) = transfer_shares(&lot, HolderId(2), ShareQuantity::ZERO).unwrap();
        assert_eq!(same, lot);
        assert!(nothing.quantity.is_zero());

        assert!(matches!(
            transfer_shares(&lot, HolderId(2), ShareQuantity::from_int(2001)),
            Err(Error::Oversell { .. })
        ));
    }

    #[test]
    fn split_must_sum_to_one() {
        assert!(IncomeSplit::new(dec!(0.5), dec!(0.2), dec!(0.2), dec!(0.1)).is_ok());
        assert!(IncomeSplit::new(dec!(0.5), dec!(0.2), dec!(0.2), dec!(0.2)).is_err());
        assert!(IncomeSplit::new(dec!(1.1), dec!(0), dec!(0), dec!(-0.1)).is_err());
        let s = IncomeSplit::from_policy(dec!(0.3), dec!(0.15), dec!(0.4)).unwrap();
        assert_eq!(s.dividends, dec!(0.22));
        assert_eq!(s.reinvestment, dec!(0.33));
        assert_eq!(s.dividend_policy(), dec!(0.4));
    }

    #[test]
    fn accrual_skips_cross_owned_lots_and_conserves() {
        let mut ledger = Ledger::new();
        ledger.add_holder(Holder::individual(HolderId(1), RealizationPolicy::Annual));
        ledger.add_holder(Holder::entity(HolderId(2)));
        let f = Firm::new(FirmId(7), Regime::EquityTaxed, ShareQuantity::from_int(1000), Money::from_int(10));
        ledger
            .add_firm(
                f,
                vec![
                    ShareLot::new(HolderId(1), FirmId(7), ShareQuantity::from_int(800), Money::from_int(10)),
                    ShareLot::new(HolderId(2), FirmId(7), ShareQuantity::from_int(200), Money::from_int(10)),
                ],
            )
            .unwrap();
        let accrued = ledger.accrue_to_irs(FirmId(7), dec!(0.02)).unwrap();
        assert_eq!(accrued, ShareQuantity::from_int(16));
        assert_eq!(ledger.position(HolderId(2), FirmId(7)), ShareQuantity::from_int(200));
        ledger.check_conservation(FirmId(7)).unwrap();
    }

    #[test]
    fn registering_unbalanced_lots_fails() {
        let mut ledger = Ledger::new();
        ledger.add_holder(Holder::individual(HolderId(1), RealizationPolicy::Annual));
        let f = Firm::new(FirmId(1), Regime::IncomeTaxed, ShareQuantity::from_int(10), Money::from_int(1));
        let lots = vec![ShareLot::new(HolderId(1), FirmId(1), ShareQuantity::from_int(9), Money::from_int(1))];
        assert!(matches!(ledger.add_firm(f, lots), Err(Error::Invariant(_))));
    }
}
