//! The income-tax and equity-tax regimes.
//!
//! Pure calculators ([`effective_growth`], [`accrual_fraction`],
//! [`income_tax_split`], [`iceberg_equivalence`]) sit next to the step
//! functions that apply a regime to a firm on the [`Ledger`].

use rust_decimal::{Decimal, MathematicalOps};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{
    div_q, pow_dec, Firm, FirmId, HolderKind, Ledger, Money, Rate, Regime, ShareQuantity, TaxEvent, TaxEventKind,
};

/// How often a holder realizes capital gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizationPolicy {
    Annual,
    EveryNYears(u32),
    DeferToHorizon,
}

impl RealizationPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            RealizationPolicy::EveryNYears(0) => Err(Error::invalid("realization period must be at least one year")),
            _ => Ok(()),
        }
    }

    /// Whether a realization falls due at clock `time` (in years).
    pub fn is_due(&self, time: Decimal) -> bool {
        match self {
            RealizationPolicy::Annual => time.fract().is_zero(),
            RealizationPolicy::EveryNYears(n) => (time % Decimal::from(*n)).is_zero(),
            RealizationPolicy::DeferToHorizon => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub income_tax_rate: Rate,
    pub equity_tax_rate: Rate,
    pub capgains_rate: Rate,
    pub dividend_rate: Rate,
}

impl RegimeParams {
    pub fn new(income: Decimal, equity: Decimal, capgains: Decimal, dividend: Decimal) -> Result<Self> {
        Ok(RegimeParams {
            income_tax_rate: Rate::tax(income)?,
            equity_tax_rate: Rate::tax(equity)?,
            capgains_rate: Rate::tax(capgains)?,
            dividend_rate: Rate::tax(dividend)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for r in [self.income_tax_rate, self.equity_tax_rate, self.capgains_rate, self.dividend_rate] {
            Rate::tax(r.value())?;
        }
        Ok(())
    }
}

impl Default for RegimeParams {
    fn default() -> Self {
        use rust_decimal_macros::dec;
        RegimeParams {
            income_tax_rate: Rate::new_unchecked(dec!(0.20)),
            equity_tax_rate: Rate::new_unchecked(dec!(0.02)),
            capgains_rate: Rate::new_unchecked(dec!(0.20)),
            dividend_rate: Rate::new_unchecked(dec!(0.15)),
        }
    }
}

fn deferred_block(g: Decimal, keep: Decimal, years: u32) -> Decimal {
    Decimal::ONE + ((Decimal::ONE + g).powu(years as u64) - Decimal::ONE) * keep
}

/// Growth multiple of a portfolio compounding at `g` whose gains are taxed at
/// `tax` whenever they are realized.
pub fn effective_growth(g: Rate, tax: Rate, years: u32, policy: RealizationPolicy) -> Result<Decimal> {
    policy.validate()?;
    if years == 0 {
        return Ok(Decimal::ONE);
    }
    let g = g.value();
    let keep = tax.complement();
    let multiple = match policy {
        RealizationPolicy::Annual => (Decimal::ONE + g * keep)
            .checked_powu(years as u64)
            .ok_or(Error::Arithmetic("growth overflow"))?,
        RealizationPolicy::DeferToHorizon => deferred_block(g, keep, years),
        RealizationPolicy::EveryNYears(n) => {
            let blocks = years / n;
            let rest = years % n;
            let full = deferred_block(g, keep, n)
                .checked_powu(blocks as u64)
                .ok_or(Error::Arithmetic("growth overflow"))?;
            full * deferred_block(g, keep, rest)
        }
    };
    Ok(multiple)
}

/// Ratio of the deferred-to-horizon multiple to the annually taxed one.
pub fn compounding_gap(g: Rate, tax: Rate, years: u32) -> Result<Decimal> {
    let deferred = effective_growth(g, tax, years, RealizationPolicy::DeferToHorizon)?;
    let annual = effective_growth(g, tax, years, RealizationPolicy::Annual)?;
    deferred.checked_div(annual).ok_or(Error::Arithmetic("zero annual growth"))
}

/// Holder wealth multiple in an equity-taxed firm growing at `g` with all
/// income retained: growth and dilution compound together.
pub fn equity_taxed_growth(g: Rate, tau: Rate, years: Decimal) -> Result<Decimal> {
    if years.is_sign_negative() {
        return Err(Error::invalid("negative horizon"));
    }
    pow_dec((Decimal::ONE + g.value()) * tau.complement(), years)
}

/// Fraction of publicly held shares accrued to the IRS over `dt` years at
/// annual rate `tau`: `1 - (1 - tau)^dt`. Consecutive steps compose exactly.
pub fn accrual_fraction(tau: Rate, dt: Decimal) -> Result<Decimal> {
    if dt.is_sign_negative() && !dt.is_zero() {
        return Err(Error::invalid(format!("negative time step {dt}")));
    }
    Ok(Decimal::ONE - pow_dec(tau.complement(), dt)?)
}

/// Accrue equity tax on `firm` for `dt` years. No money moves; the shares sit
/// in the IRS pool until auctioned.
pub fn equity_tax_step(
    ledger: &mut Ledger,
    firm: FirmId,
    tau: Rate,
    dt: Decimal,
    time: Decimal,
    kind: TaxEventKind,
) -> Result<Vec<TaxEvent>> {
    if ledger.firm(firm)?.regime != Regime::EquityTaxed {
        return Err(Error::WrongRegime(firm.0));
    }
    let fraction = accrual_fraction(tau, dt)?;
    if fraction.is_zero() {
        return Ok(Vec::new());
    }
    let accrued = ledger.accrue_to_irs(firm, fraction)?;
    let events = vec![TaxEvent::shares(time, kind, accrued).for_firm(firm)];
    ledger.record_all(events.clone());
    Ok(events)
}

/// Firm-level amounts of one period's income under the income tax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IncomeTaxOutcome {
    pub corporate_tax: Money,
    /// Dividends paid to shareholders after corporate tax, before their own
    /// dividend tax.
    pub dividends: Money,
    /// After-tax reported reinvestment; enters shareholders' cost basis.
    pub reinvested_after_tax: Money,
    /// Masked income, retained untaxed.
    pub masked: Money,
}

impl IncomeTaxOutcome {
    pub fn retained(&self) -> Money {
        self.reinvested_after_tax + self.masked
    }
}

/// Corporate rate actually borne by `firm`.
pub fn corporate_rate(firm: &Firm, params: &RegimeParams) -> Decimal {
    params.income_tax_rate.value() * firm.burden_discount.complement()
}

/// Corporate income tax on the reported share (dividends and reinvestment)
/// of `income`. Masked income escapes. A loss yields a negative tax.
pub fn income_tax_split(firm: &Firm, income: Money, params: &RegimeParams) -> IncomeTaxOutcome {
    let s = firm.split;
    let t = corporate_rate(firm, params);
    let keep = Decimal::ONE - t;
    let i = income.value();
    IncomeTaxOutcome {
        corporate_tax: Money::new(i * s.reported_taxable() * t),
        dividends: Money::new(i * s.dividends * keep),
        reinvested_after_tax: Money::new(i * s.reinvestment * keep),
        masked: Money::new(i * s.masked),
    }
}

/// Apply one period's `income` to an income-taxed firm: corporate tax,
/// retention, after-tax reinvestment into every lot's basis, and dividends
/// with shareholder dividend tax.
pub fn income_tax_step(
    ledger: &mut Ledger,
    firm_id: FirmId,
    income: Money,
    params: &RegimeParams,
    time: Decimal,
) -> Result<Vec<TaxEvent>> {
    let firm = ledger.firm(firm_id)?.clone();
    if firm.regime != Regime::IncomeTaxed {
        return Err(Error::WrongRegime(firm_id.0));
    }
    let out = income_tax_split(&firm, income, params);
    let mut events = Vec::new();
    if !out.corporate_tax.is_zero() {
        events.push(TaxEvent::money(time, TaxEventKind::IncomeTax, out.corporate_tax).for_firm(firm_id));
    }

    let shares = firm.shares_outstanding;
    let reinvested_ps = out.reinvested_after_tax.per_share(shares)?;
    {
        let f = ledger.firm_mut(firm_id)?;
        f.capital += out.retained();
        f.reinvested_per_share += reinvested_ps;
    }
    ledger.for_lots_of_mut(firm_id, |lot| lot.reinvested_after_acquisition_per_share += reinvested_ps);

    let dividend_tax = pay_dividends(ledger, firm_id, out.dividends, params.dividend_rate, time)?;
    if !dividend_tax.is_zero() {
        events.push(TaxEvent::money(time, TaxEventKind::DividendTax, dividend_tax).for_firm(firm_id));
    }
    ledger.record_all(events.clone());
    Ok(events)
}

/// Pay `total` in dividends pro rata over all outstanding shares. IRS-held
/// shares receive cash (booked as an IRS distribution); individual holders
/// pay `holder_rate` on theirs. Returns total dividend tax withheld.
pub fn pay_dividends(
    ledger: &mut Ledger,
    firm_id: FirmId,
    total: Money,
    holder_rate: Rate,
    time: Decimal,
) -> Result<Money> {
    if total.is_zero() {
        return Ok(Money::ZERO);
    }
    let firm = ledger.firm(firm_id)?.clone();
    let per_share = total.per_share(firm.shares_outstanding)?;

    if !firm.irs_accrued.is_zero() {
        let irs_cash = firm.irs_accrued.times_price(per_share);
        ledger.record(TaxEvent::money(time, TaxEventKind::IrsDistribution, irs_cash).for_firm(firm_id));
    }

    let mut payouts = Vec::new();
    for lot in ledger.lots_of(firm_id) {
        let kind = ledger.holder(lot.holder)?.kind;
        let gross = lot.quantity.times_price(per_share);
        let tax = match kind {
            HolderKind::Individual if firm.regime == Regime::IncomeTaxed => gross.times_rate(holder_rate),
            _ => Money::ZERO,
        };
        payouts.push((lot.holder, gross - tax, tax));
    }
    let mut withheld = Money::ZERO;
    for (holder, net, tax) in payouts {
        ledger.holder_mut(holder)?.cash += net;
        withheld += tax;
    }
    Ok(withheld)
}

/// Realize capital gains on an income-taxed firm's lots held by individuals
/// whose realization falls due at `time`, or on all of them when `force` is
/// set (horizon liquidation). Losses produce a negative tax.
pub fn realize_gains(
    ledger: &mut Ledger,
    firm_id: FirmId,
    params: &RegimeParams,
    time: Decimal,
    force: bool,
) -> Result<Vec<TaxEvent>> {
    let firm = ledger.firm(firm_id)?.clone();
    if firm.regime != Regime::IncomeTaxed {
        return Ok(Vec::new());
    }
    let price = firm.price_per_share;
    let rate = params.capgains_rate;

    let mut charges = Vec::new();
    let holders: Vec<_> = ledger.holders().map(|h| (h.id, h.kind, h.realization)).collect();
    for lot in ledger.lots_mut().iter_mut().filter(|l| l.firm == firm_id) {
        let Some(&(_, kind, policy)) = holders.iter().find(|(id, _, _)| *id == lot.holder) else {
            return Err(Error::UnknownHolder(lot.holder.0));
        };
        if kind != HolderKind::Individual || !(force || policy.is_due(time)) {
            continue;
        }
        let gain = lot.quantity.times_price(price - lot.basis_per_share());
        charges.push((lot.holder, gain.times_rate(rate)));
        lot.reset_basis(price);
    }

    let mut total = Money::ZERO;
    for (holder, tax) in charges {
        ledger.holder_mut(holder)?.cash -= tax;
        total += tax;
    }
    if total.is_zero() {
        return Ok(Vec::new());
    }
    let events = vec![TaxEvent::money(time, TaxEventKind::CapGainsTax, total).for_firm(firm_id)];
    ledger.record_all(events.clone());
    Ok(events)
}

/// One-period expected returns per unit of capital, before and after tax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExpectedReturns {
    pub pretax: Decimal,
    pub net: Decimal,
}

/// Expected annual returns of `firm` under `regime`, valuing holdings at
/// book. Capital gains on masked income are charged as if realized yearly.
pub fn expected_returns(firm: &Firm, regime: Regime, params: &RegimeParams, levy: Option<Rate>) -> ExpectedReturns {
    let mu = firm.returns.drift;
    let s = firm.split;
    let pretax = (Decimal::ONE - s.expenses) * mu;
    let net = match regime {
        Regime::EquityTaxed => {
            let tau = levy.unwrap_or(params.equity_tax_rate);
            tau.complement() * (Decimal::ONE + pretax) - Decimal::ONE
        }
        Regime::IncomeTaxed => {
            let t = corporate_rate(firm, params);
            let corporate = t * s.reported_taxable() * mu;
            let dividend = params.dividend_rate.value() * s.dividends * mu * (Decimal::ONE - t);
            let gains = params.capgains_rate.value() * s.masked * mu;
            pretax - corporate - dividend - gains
        }
    };
    ExpectedReturns { pretax, net }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IcebergResult {
    pub tax_on_price: Money,
    pub tax_on_income: Money,
    /// `price_tax / income_yield`, rounded to ledger precision for display.
    pub equivalent_income_rate: Decimal,
}

/// Tax an asset's price at `price_tax`, or its income at the equivalent
/// income rate. The income path multiplies by `price_tax` and divides by the
/// yield instead of using the rounded equivalent rate, so both paths agree
/// exactly.
pub fn iceberg_equivalence(value: Money, income_yield: Rate, price_tax: Rate) -> Result<IcebergResult> {
    if income_yield.is_zero() {
        return Err(Error::invalid("income yield is zero: no income to tax"));
    }
    let income = value.value() * income_yield.value();
    let tax_on_income = (income * price_tax.value())
        .checked_div(income_yield.value())
        .ok_or(Error::Arithmetic("iceberg division"))?;
    Ok(IcebergResult {
        tax_on_price: Money::new(value.value() * price_tax.value()),
        tax_on_income: Money::new(tax_on_income),
        equivalent_income_rate: div_q(price_tax.value(), income_yield.value())?,
    })
}

/// Shares outstanding times their accrual fraction, without touching a
/// ledger. Convenience for reports.
pub fn accrued_shares(public: ShareQuantity, tau: Rate, dt: Decimal) -> Result<ShareQuantity> {
    public.scale(accrual_fraction(tau, dt)?)
}
