//! Conversion tax between the income-tax and equity-tax regimes.
//!
//! Going to equity tax, the firm issues new shares making up a fraction `t`
//! of the new total. Each lot's cost-basis credit, `t * basis`, bids for them
//! with no price limit; outside bidders buy the rest and the IRS keeps their
//! cash. Going back to income tax, the firm writes the IRS puts on a fraction
//! `t` of its shares struck at the basis it chooses for its shareholders.

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::auction::{clear_auction_with_reserve, AuctionResult, Bid};
use crate::error::{Error, Result};
use crate::ledger::{
    issue_shares, Firm, FirmId, Holder, HolderId, Ledger, Money, Rate, Regime, ShareLot, ShareQuantity, TaxEvent,
    TaxEventKind,
};
use crate::regimes::{equity_tax_step, realize_gains, RealizationPolicy, RegimeParams};

/// Constant-dollar cost basis of a lot: purchase price plus after-tax income
/// reinvested since acquisition, per share, times quantity.
pub fn cost_basis(lot: &ShareLot) -> Money {
    lot.quantity.times_price(lot.basis_per_share())
}

/// Closed form of the credit shares a lot receives when the credit clears at
/// the diluted market price: `t * basis / (market * (1 - t))`.
pub fn credit_shares_closed_form(t: Rate, basis: Money, market_price: Money) -> Result<ShareQuantity> {
    let price = market_price.value() * t.complement();
    let shares = (t.value() * basis.value())
        .checked_div(price)
        .ok_or(Error::Arithmetic("zero post-conversion price"))?;
    ShareQuantity::new(shares)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversionDirection {
    IncomeToEquity,
    EquityToIncome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LotCredit {
    pub holder: HolderId,
    pub basis: Money,
    pub credit: Money,
    pub shares: ShareQuantity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConversionOutcome {
    pub direction: ConversionDirection,
    pub new_shares_issued: ShareQuantity,
    /// New shares sold to outside bidders.
    pub auctioned: ShareQuantity,
    /// New shares nobody bought; they stay with the IRS.
    pub unsold: ShareQuantity,
    pub credit_shares_per_lot: Vec<LotCredit>,
    pub post_price: Money,
    pub clearing_price: Money,
    pub irs_proceeds: Money,
    pub new_cost_basis_per_share: Money,
    #[serde(skip)]
    pub auction: AuctionResult,
}

impl ConversionOutcome {
    pub fn credit_shares(&self) -> ShareQuantity {
        self.credit_shares_per_lot.iter().map(|c| c.shares).sum()
    }
}

fn conversion_rate(t: Rate) -> Result<()> {
    if t.value() <= Decimal::ZERO || t.value() >= Decimal::ONE {
        return Err(Error::InvalidRate { value: t.value(), bounds: "(0, 1)" });
    }
    Ok(())
}

/// Compute the income-to-equity conversion of `firm` owned through `lots`,
/// clearing the new shares against the lots' credit bids and `outside_bids`.
pub fn convert_to_equity(
    firm: &Firm,
    lots: &[ShareLot],
    t: Rate,
    market_price: Money,
    outside_bids: &[Bid],
) -> Result<ConversionOutcome> {
    conversion_rate(t)?;
    if firm.regime != Regime::IncomeTaxed {
        return Err(Error::WrongRegime(firm.id.0));
    }
    if outside_bids.iter().any(Bid::is_credit) {
        return Err(Error::invalid("outside bids must carry a finite price limit"));
    }
    let mut priced = firm.clone();
    priced.price_per_share = market_price;
    let (diluted, new_shares) = issue_shares(&priced, t)?;

    let mut credits = Vec::with_capacity(lots.len());
    let mut bids = Vec::with_capacity(lots.len() + outside_bids.len());
    let mut credit_bid_lot = Vec::new();
    for (i, lot) in lots.iter().enumerate() {
        let basis = cost_basis(lot);
        let credit = basis.times_rate(t);
        credits.push(LotCredit { holder: lot.holder, basis, credit, shares: ShareQuantity::ZERO });
        if credit.value() > Decimal::ZERO {
            bids.push(Bid::credit(lot.holder, credit));
            credit_bid_lot.push(i);
        }
    }
    bids.extend(outside_bids.iter().cloned());

    // The IRS keeps what nobody buys at the diluted market price.
    let auction = clear_auction_with_reserve(new_shares, &bids, Some(diluted.price_per_share))?;
    for (alloc, &lot_index) in auction.allocations.iter().zip(&credit_bid_lot) {
        credits[lot_index].shares = alloc.shares;
    }
    let auctioned = auction.allocations.iter().filter(|a| !a.credit).map(|a| a.shares).sum();

    Ok(ConversionOutcome {
        direction: ConversionDirection::IncomeToEquity,
        new_shares_issued: new_shares,
        auctioned,
        unsold: auction.unsold,
        credit_shares_per_lot: credits,
        post_price: diluted.price_per_share,
        clearing_price: auction.clearing_price,
        irs_proceeds: auction.cash_proceeds(),
        new_cost_basis_per_share: diluted.price_per_share,
        auction,
    })
}

/// Convert `firm_id` on the ledger to equity tax. Every outside bidder must
/// already be a registered holder. Lots restart their basis at the
/// post-conversion price; unsold new shares join the IRS pool.
pub fn apply_conversion_to_equity(
    ledger: &mut Ledger,
    firm_id: FirmId,
    t: Rate,
    outside_bids: &[Bid],
    time: Decimal,
) -> Result<ConversionOutcome> {
    let firm = ledger.firm(firm_id)?.clone();
    let lots: Vec<ShareLot> = ledger.lots_of(firm_id).cloned().collect();
    let outcome = convert_to_equity(&firm, &lots, t, firm.price_per_share, outside_bids)?;
    for bid in outside_bids {
        ledger.holder(bid.bidder)?;
    }

    {
        let f = ledger.firm_mut(firm_id)?;
        f.shares_outstanding += outcome.new_shares_issued;
        f.irs_accrued += outcome.unsold;
        f.price_per_share = outcome.post_price;
        f.regime = Regime::EquityTaxed;
    }
    let mut credit_iter = outcome.credit_shares_per_lot.iter();
    ledger.for_lots_of_mut(firm_id, |lot| {
        if let Some(c) = credit_iter.next() {
            lot.quantity += c.shares;
        }
        lot.reset_basis(outcome.post_price);
    });
    for alloc in outcome.auction.allocations.iter().filter(|a| !a.credit) {
        ledger.credit_lot(ShareLot::new(alloc.bidder, firm_id, alloc.shares, outcome.clearing_price))?;
    }
    if !outcome.irs_proceeds.is_zero() {
        ledger.record(TaxEvent::money(time, TaxEventKind::ConversionTax, outcome.irs_proceeds).for_firm(firm_id));
    }
    ledger.check_conservation(firm_id)?;
    Ok(outcome)
}

/// Puts written to the IRS on reconversion to income tax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PutOptionGrant {
    pub firm: FirmId,
    /// Equals the income tax rate in force at reconversion.
    pub fraction: Rate,
    /// Per-share strike; also the holders' new cost basis.
    pub strike: Money,
    pub covered_shares: ShareQuantity,
    /// Exercise date, in clock years. European exercise only.
    pub expiry: Decimal,
}

impl PutOptionGrant {
    /// Intrinsic value at expiry: the IRS exercises iff the market is below
    /// the strike.
    pub fn exercise_value(&self, market_price: Money) -> Money {
        let per_share = (self.strike - market_price).max(Money::ZERO);
        self.covered_shares.times_price(per_share)
    }
}

/// Grant the IRS puts on a fraction `t` of `firm`'s publicly held shares,
/// struck at `strike`, exercisable at `expiry`.
pub fn convert_to_income(firm: &Firm, t: Rate, strike: Money, expiry: Decimal) -> Result<PutOptionGrant> {
    conversion_rate(t)?;
    if firm.regime != Regime::EquityTaxed {
        return Err(Error::WrongRegime(firm.id.0));
    }
    if strike.is_negative() {
        return Err(Error::invalid("negative strike"));
    }
    let public = firm.shares_outstanding.checked_sub(firm.irs_accrued)?;
    Ok(PutOptionGrant {
        firm: firm.id,
        fraction: t,
        strike,
        covered_shares: public.scale(t.value())?,
        expiry,
    })
}

/// Reconvert `firm_id` to income tax, resetting every lot's basis to the
/// strike.
pub fn apply_conversion_to_income(
    ledger: &mut Ledger,
    firm_id: FirmId,
    t: Rate,
    strike: Money,
    expiry: Decimal,
) -> Result<PutOptionGrant> {
    let grant = convert_to_income(ledger.firm(firm_id)?, t, strike, expiry)?;
    ledger.firm_mut(firm_id)?.regime = Regime::IncomeTaxed;
    ledger.for_lots_of_mut(firm_id, |lot| lot.reset_basis(strike));
    Ok(grant)
}

/// Settle `grant` at `market_price`. Holders bear the payoff pro rata to
/// their positions; it is booked as conversion tax.
pub fn settle_puts(ledger: &mut Ledger, grant: &PutOptionGrant, market_price: Money, time: Decimal) -> Result<Money> {
    let payoff = grant.exercise_value(market_price);
    if payoff.is_zero() {
        return Ok(Money::ZERO);
    }
    let lots: Vec<(HolderId, ShareQuantity)> = ledger.lots_of(grant.firm).map(|l| (l.holder, l.quantity)).collect();
    let public: ShareQuantity = lots.iter().map(|(_, q)| *q).sum();
    let mut charged = Money::ZERO;
    for (i, (holder, qty)) in lots.iter().enumerate() {
        let share = if i + 1 == lots.len() {
            payoff - charged
        } else {
            Money::new(payoff.value() * qty.value() / public.value())
        };
        ledger.holder_mut(*holder)?.cash -= share;
        charged += share;
    }
    ledger.record(TaxEvent::money(time, TaxEventKind::ConversionTax, payoff).for_firm(grant.firm));
    Ok(payoff)
}

/// Strike chosen by a reconverting firm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrikeChoice {
    /// At the money.
    Market,
    /// `multiple * market`; above one inflates the holders' new basis.
    Multiple(Decimal),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundTripReport {
    /// After-tax wealth of the original holders if the firm never converts.
    pub stay_wealth: Money,
    /// After-tax wealth after converting, holding and reconverting.
    pub round_trip_wealth: Money,
    /// `round_trip_wealth - stay_wealth`.
    pub gross_advantage: Money,
    /// Gross advantage of the same trip with every lot's basis at the start
    /// price: the difference between the two regimes over the hold, with no
    /// prior gains to recapture.
    pub holding_difference: Money,
    /// `gross_advantage - holding_difference`: tax saved on gains accrued
    /// before conversion.
    pub advantage: Money,
    /// Advantage over the firm's market value at the start of the path.
    pub advantage_fraction: Decimal,
    pub conversion_proceeds: Money,
    pub put_payoff: Money,
}

const OUTSIDE_BIDDER: HolderId = HolderId(u32::MAX);

/// Compare never converting with converting to equity tax at the start of
/// `price_path`, holding under equity tax `tau` for one year per further path
/// point, and reconverting at the end.
///
/// `price_path` is the firm's value per original share. Both arms liquidate
/// at the last price with gains taxed at `t`. With `recapture` off, the
/// conversion issues no shares and the reconversion writes no puts: the
/// basis step-up is free.
///
/// Equity-taxed holders owe no gains tax, so the hold itself is taxed
/// differently in the two arms. The reported advantage nets that out by
/// rerunning both arms with every basis at the start price.
pub fn roundtrip_recapture_check(
    firm: &Firm,
    lots: &[ShareLot],
    t: Rate,
    tau: Rate,
    price_path: &[Money],
    strike: StrikeChoice,
    recapture: bool,
) -> Result<RoundTripReport> {
    let (&start, _) = price_path.split_first().ok_or_else(|| Error::invalid("empty price path"))?;
    let actual = round_trip_arms(firm, lots, t, tau, price_path, strike, recapture)?;
    let rebased: Vec<ShareLot> = lots
        .iter()
        .map(|l| {
            let mut lot = l.clone();
            lot.purchase_price_per_share = start;
            lot.reinvested_after_acquisition_per_share = Money::ZERO;
            lot
        })
        .collect();
    let twin = round_trip_arms(firm, &rebased, t, tau, price_path, strike, recapture)?;
    let gross_advantage = actual.trip - actual.stay;
    let holding_difference = twin.trip - twin.stay;
    let advantage = gross_advantage - holding_difference;
    let start_value = firm.shares_outstanding.times_price(start);
    Ok(RoundTripReport {
        stay_wealth: actual.stay,
        round_trip_wealth: actual.trip,
        gross_advantage,
        holding_difference,
        advantage,
        advantage_fraction: crate::ledger::div_q(advantage.value(), start_value.value())?,
        conversion_proceeds: actual.proceeds,
        put_payoff: actual.put_payoff,
    })
}

struct Arms {
    stay: Money,
    trip: Money,
    proceeds: Money,
    put_payoff: Money,
}

fn round_trip_arms(
    firm: &Firm,
    lots: &[ShareLot],
    t: Rate,
    tau: Rate,
    price_path: &[Money],
    strike: StrikeChoice,
    recapture: bool,
) -> Result<Arms> {
    let (&start, _) = price_path.split_first().ok_or_else(|| Error::invalid("empty price path"))?;
    let end = *price_path.last().unwrap_or(&start);
    let base_shares = firm.shares_outstanding;
    let params = RegimeParams { income_tax_rate: t, equity_tax_rate: tau, capgains_rate: t, ..RegimeParams::default() };
    let holders: Vec<HolderId> = {
        let mut ids: Vec<HolderId> = lots.iter().map(|l| l.holder).collect();
        ids.sort();
        ids.dedup();
        ids
    };
    let build = || -> Result<Ledger> {
        let mut ledger = Ledger::new();
        for &h in &holders {
            ledger.add_holder(Holder::individual(h, RealizationPolicy::DeferToHorizon));
        }
        ledger.add_holder(Holder::individual(OUTSIDE_BIDDER, RealizationPolicy::DeferToHorizon));
        let mut f = firm.clone();
        f.regime = Regime::IncomeTaxed;
        f.irs_accrued = ShareQuantity::ZERO;
        f.price_per_share = start;
        ledger.add_firm(f, lots.to_vec())?;
        Ok(ledger)
    };
    let wealth = |ledger: &Ledger| -> Result<Money> {
        holders.iter().map(|h| ledger.holder_wealth(*h)).sum::<Result<Money>>()
    };
    let reprice = |ledger: &mut Ledger, per_original_share: Money| -> Result<()> {
        let f = ledger.firm_mut(firm.id)?;
        let value = base_shares.times_price(per_original_share);
        f.price_per_share = value.per_share(f.shares_outstanding)?;
        Ok(())
    };

    let mut stay = build()?;
    reprice(&mut stay, end)?;
    realize_gains(&mut stay, firm.id, &params, Decimal::ZERO, true)?;
    let stay_wealth = wealth(&stay)?;

    let mut trip = build()?;
    let mut conversion_proceeds = Money::ZERO;
    if recapture {
        let (_, new_shares) = issue_shares(&trip.firm(firm.id)?.clone(), t)?;
        let post = start.scale(t.complement());
        let outside = [Bid::new(OUTSIDE_BIDDER, post, new_shares.times_price(post))];
        conversion_proceeds = apply_conversion_to_equity(&mut trip, firm.id, t, &outside, Decimal::ZERO)?.irs_proceeds;
    } else {
        trip.firm_mut(firm.id)?.regime = Regime::EquityTaxed;
        trip.for_lots_of_mut(firm.id, |lot| lot.reset_basis(start));
    }

    let mut clock = Decimal::ZERO;
    for &price in &price_path[1..] {
        clock += Decimal::ONE;
        equity_tax_step(&mut trip, firm.id, tau, Decimal::ONE, clock, TaxEventKind::EquityAccrual)?;
        reprice(&mut trip, price)?;
    }
    reprice(&mut trip, end)?;
    let market = trip.firm(firm.id)?.price_per_share;
    let strike_price = match strike {
        StrikeChoice::Market => market,
        StrikeChoice::Multiple(m) => market.scale(m),
    };
    let mut put_payoff = Money::ZERO;
    if recapture {
        let grant = apply_conversion_to_income(&mut trip, firm.id, t, strike_price, clock)?;
        put_payoff = settle_puts(&mut trip, &grant, market, clock)?;
    } else {
        trip.firm_mut(firm.id)?.regime = Regime::IncomeTaxed;
        trip.for_lots_of_mut(firm.id, |lot| lot.reset_basis(strike_price));
    }
    realize_gains(&mut trip, firm.id, &params, clock, true)?;
    Ok(Arms { stay: stay_wealth, trip: wealth(&trip)?, proceeds: conversion_proceeds, put_payoff })
}

/// One lot of a conversion scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotSpec {
    pub holder: HolderId,
    pub shares: ShareQuantity,
    pub purchase_price: Money,
    #[serde(default)]
    pub reinvested_per_share: Money,
}

/// A firm converting to equity tax, as read from a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversionScenario {
    pub tax_rate: Decimal,
    pub market_price: Money,
    #[serde(rename = "lot")]
    pub lots: Vec<LotSpec>,
    #[serde(rename = "bid", default)]
    pub outside_bids: Vec<Bid>,
}

impl ConversionScenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    /// One holder with 2,000 shares bought at $75, $20 per share reinvested
    /// since, market at $100, tax rate 20%, and an outside bidder offering
    /// $2,000 at up to $80.
    pub fn worked_example() -> Self {
        ConversionScenario {
            tax_rate: Decimal::new(2, 1),
            market_price: Money::from_int(100),
            lots: vec![LotSpec {
                holder: HolderId(1),
                shares: ShareQuantity::from_int(2000),
                purchase_price: Money::from_int(75),
                reinvested_per_share: Money::from_int(20),
            }],
            outside_bids: vec![Bid::new(HolderId(2), Money::from_int(80), Money::from_int(2000))],
        }
    }

    pub fn firm_and_lots(&self) -> (Firm, Vec<ShareLot>) {
        let id = FirmId(1);
        let lots: Vec<ShareLot> = self
            .lots
            .iter()
            .map(|l| {
                let mut lot = ShareLot::new(l.holder, id, l.shares, l.purchase_price);
                lot.reinvested_after_acquisition_per_share = l.reinvested_per_share;
                lot
            })
            .collect();
        let shares = lots.iter().map(|l| l.quantity).sum();
        (Firm::new(id, Regime::IncomeTaxed, shares, self.market_price), lots)
    }

    pub fn run(&self) -> Result<ConversionOutcome> {
        let t = Rate::tax(self.tax_rate).map_err(|_| Error::config(format!("`tax_rate` = {} must lie in (0, 1)", self.tax_rate)))?;
        let (firm, lots) = self.firm_and_lots();
        convert_to_equity(&firm, &lots, t, self.market_price, &self.outside_bids)
    }
}
