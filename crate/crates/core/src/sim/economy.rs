use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::Decimal;
use serde::Serialize;

use super::config::{EconomyConfig, PricingRule};
use crate::auction::{clear_auction, Bid};
use crate::conversion::{
    apply_conversion_to_equity, apply_conversion_to_income, cost_basis, settle_puts, PutOptionGrant,
};
use crate::deferred::{deferred_levy_step, DeferredParams};
use crate::error::{Error, Result};
use crate::ledger::{
    pow_dec, Firm, FirmId, Holder, HolderId, HolderKind, Ledger, Money, Rate, Regime, ShareLot, ShareQuantity,
    TaxEvent, TaxEventKind,
};
use crate::regimes::{
    equity_tax_step, expected_returns, income_tax_step, pay_dividends, realize_gains, RealizationPolicy,
    RegimeParams,
};

/// First holder id of the simulated auction bidders.
pub const BIDDER_BASE: u32 = 1_000_000;
/// First holder id of the cross-owning equity-taxed entities.
pub const ENTITY_BASE: u32 = 2_000_000;
const HOLDERS_PER_FIRM: u32 = 1000;

fn to_f64(v: Decimal) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn from_f64(v: f64) -> Result<Decimal> {
    Decimal::from_f64(v).ok_or(Error::Arithmetic("non-finite value"))
}

/// Gross capital growth factor over `dt` years:
/// `(1 + drift)^dt * exp(volatility * sqrt(dt) * z - volatility^2 * dt / 2)`.
/// Exact in decimals when volatility is zero.
pub fn growth_factor(drift: Decimal, volatility: Decimal, dt: Decimal, z: f64) -> Result<Decimal> {
    let trend = pow_dec(Decimal::ONE + drift, dt)?;
    if volatility.is_zero() {
        return Ok(trend);
    }
    let s = to_f64(volatility);
    let t = to_f64(dt);
    let shock = (s * t.sqrt() * z - 0.5 * s * s * t).exp();
    Ok(trend * from_f64(shock)?)
}

/// Standard normal draw clipped to `[-cap, cap]`.
pub fn clipped_normal<R: Rng + ?Sized>(rng: &mut R, cap: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z.clamp(-cap, cap)
}

/// Apply one period's gross `income` to a firm under its current regime.
/// Equity-taxed firms accrue first, so the IRS pool shares in the period's
/// dividends.
pub fn advance_firm(
    ledger: &mut Ledger,
    firm: FirmId,
    income: Money,
    params: &RegimeParams,
    levy: Option<&DeferredParams>,
    time: Decimal,
    dt: Decimal,
) -> Result<()> {
    match ledger.firm(firm)?.regime {
        Regime::EquityTaxed => {
            equity_tax_step(ledger, firm, params.equity_tax_rate, dt, time, TaxEventKind::EquityAccrual)?;
            let split = ledger.firm(firm)?.split;
            let retained = Money::new(income.value() * (split.reinvestment + split.masked));
            ledger.firm_mut(firm)?.capital += retained;
            let dividends = Money::new(income.value() * split.dividends);
            pay_dividends(ledger, firm, dividends, params.dividend_rate, time)?;
        }
        Regime::IncomeTaxed => {
            income_tax_step(ledger, firm, income, params, time)?;
            if let Some(levy) = levy {
                deferred_levy_step(ledger, firm, levy, dt, time)?;
            }
        }
    }
    Ok(())
}

/// Price per share under `rule`.
pub fn price_firm(firm: &Firm, rule: PricingRule, params: &RegimeParams, interest: Decimal) -> Result<Money> {
    let book = firm.book_per_share()?;
    Ok(match rule {
        PricingRule::Book => book,
        PricingRule::ExpectedReturn => {
            let net = expected_returns(firm, firm.regime, params, None).net;
            Money::new(book.value() * (Decimal::ONE + net) / (Decimal::ONE + interest))
        }
    })
}

/// Holder wealth with every position valued at book.
pub fn book_wealth(ledger: &Ledger, holder: HolderId) -> Result<Money> {
    let mut total = ledger.holder(holder)?.cash;
    for lot in ledger.lots().iter().filter(|l| l.holder == holder) {
        total += lot.quantity.times_price(ledger.firm(lot.firm)?.book_per_share()?);
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct FirmMeta {
    pub class: String,
    pub favored: bool,
    /// Accumulated per-year return advantage of the other regime.
    pub advantage_memory: Decimal,
    pub conversions: u32,
}

/// One row per firm per step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub time: Decimal,
    pub firm: u32,
    pub class: String,
    pub regime: Regime,
    pub price: Money,
    pub book_per_share: Money,
    /// Cash revenue attributed to the firm this step.
    pub tax_paid: Money,
    /// Shares accrued to the IRS this step, valued at the step's price.
    pub accrued_value: Money,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeChange {
    pub time: Decimal,
    pub firm: u32,
    pub to: Regime,
}

/// A running economy: ledger, clock and the seeded random stream.
#[derive(Debug, Clone)]
pub struct EconomyState {
    pub clock: Decimal,
    pub ledger: Ledger,
    pub config: EconomyConfig,
    pub params: RegimeParams,
    pub meta: BTreeMap<FirmId, FirmMeta>,
    pub records: Vec<StepRecord>,
    pub changes: Vec<RegimeChange>,
    pub puts: Vec<PutOptionGrant>,
    levy: Option<DeferredParams>,
    rng: ChaCha8Rng,
}

impl EconomyState {
    pub fn new(config: EconomyConfig) -> Result<Self> {
        config.validate()?;
        let params = config.regime_params()?;
        let levy = config.deferred_params()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut ledger = Ledger::new();
        let mut meta = BTreeMap::new();

        for k in 0..config.bidders.n_bidders {
            ledger.add_holder(Holder::individual(HolderId(BIDDER_BASE + k), RealizationPolicy::DeferToHorizon));
        }
        let discount = Rate::tax(config.favored.burden_discount)
            .map_err(|_| Error::config("`favored.burden_discount` must lie in [0, 1)"))?;
        let mut next_id = 1u32;
        for class in &config.firm_classes {
            let n_favored = (config.favored.fraction * Decimal::from(class.count)).round().to_u32().unwrap_or(0);
            for k in 0..class.count {
                let id = FirmId(next_id);
                next_id += 1;
                let shares = ShareQuantity::new(class.shares)?;
                let price = Money::new(class.price);
                let mut firm = Firm::new(id, class.regime, shares, price)
                    .with_returns(class.drift, class.volatility)
                    .with_split(class.split()?);
                let favored = k < n_favored;
                if favored {
                    firm.burden_discount = discount;
                }
                let basis = price.scale(class.basis_ratio);
                let mut lots = Vec::new();
                let entity_shares = shares.scale(class.cross_owned)?;
                if !entity_shares.is_zero() {
                    let entity = HolderId(ENTITY_BASE + id.0);
                    ledger.add_holder(Holder::entity(entity));
                    lots.push(ShareLot::new(entity, id, entity_shares, basis));
                }
                let public = shares.checked_sub(entity_shares)?;
                let each = public.scale(Decimal::ONE / Decimal::from(class.holders))?;
                let mut assigned = ShareQuantity::ZERO;
                for h in 0..class.holders {
                    let holder = HolderId(id.0 * HOLDERS_PER_FIRM + h);
                    ledger.add_holder(Holder::individual(holder, config.regime.realization));
                    let qty = if h + 1 == class.holders { public.checked_sub(assigned)? } else { each };
                    assigned += qty;
                    lots.push(ShareLot::new(holder, id, qty, basis));
                }
                ledger.add_firm(firm, lots)?;
                meta.insert(
                    id,
                    FirmMeta { class: class.name.clone(), favored, advantage_memory: Decimal::ZERO, conversions: 0 },
                );
            }
        }
        Ok(EconomyState {
            clock: Decimal::ZERO,
            ledger,
            config,
            params,
            meta,
            records: Vec::new(),
            changes: Vec::new(),
            puts: Vec::new(),
            levy,
            rng,
        })
    }

    pub fn is_done(&self) -> bool {
        self.clock >= Decimal::from(self.config.horizon_years)
    }

    /// Advance every firm by `dt`, reprice, run due auctions, transitions and
    /// realizations, then check share conservation. The step reaching the
    /// horizon settles all puts and realizes every gain.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let time = self.clock + dt;
        let log_start = self.ledger.log().len();
        let ids = self.ledger.firm_ids();

        for &id in &ids {
            let z = clipped_normal(&mut self.rng, self.config.max_abs_shock);
            let firm = self.ledger.firm(id)?;
            let g = growth_factor(firm.returns.drift, firm.returns.volatility, dt, z)?;
            let income = Money::new(firm.capital.value() * (g - Decimal::ONE));
            advance_firm(&mut self.ledger, id, income, &self.params, self.levy.as_ref(), time, dt)?;
        }
        self.reprice()?;
        let cadence = self.config.auction_cadence;
        if (time / cadence).floor() > (self.clock / cadence).floor() {
            for &id in &ids {
                self.auction_irs_shares(id, time)?;
            }
        }
        // Gains due this step are taxed before any regime decision, so a
        // conversion never charges again for them.
        for &id in &ids {
            realize_gains(&mut self.ledger, id, &self.params, time, false)?;
        }
        if self.config.transition.enabled && time.fract().is_zero() {
            self.settle_due_puts(time)?;
            for &id in &ids {
                self.consider_switch(id, time)?;
            }
        }
        let horizon = time >= Decimal::from(self.config.horizon_years);
        if horizon {
            self.settle_due_puts(Decimal::MAX)?;
        }
        if horizon {
            for &id in &ids {
                realize_gains(&mut self.ledger, id, &self.params, time, true)?;
            }
        }
        self.ledger.check_all()?;
        self.clock = time;
        self.record_step(log_start)?;
        Ok(())
    }

    fn reprice(&mut self) -> Result<()> {
        for id in self.ledger.firm_ids() {
            let price = price_firm(self.ledger.firm(id)?, self.config.pricing, &self.params, self.config.interest_rate)?;
            self.ledger.firm_mut(id)?.price_per_share = price;
        }
        Ok(())
    }

    fn draw_bids(&mut self, supply: ShareQuantity, reference: Money) -> Result<Vec<Bid>> {
        let disp = self.config.bidders.dispersion;
        let mut bids = Vec::new();
        for k in 0..self.config.bidders.n_bidders {
            let z = clipped_normal(&mut self.rng, self.config.max_abs_shock);
            let limit = reference.scale(from_f64((1.0 + disp * z).max(0.01))?);
            let share: f64 = self.rng.random_range(0.1..0.6);
            let amount = supply.times_price(limit).scale(from_f64(share)?);
            if limit.value() > Decimal::ZERO && amount.value() > Decimal::ZERO {
                bids.push(Bid::new(HolderId(BIDDER_BASE + k), limit, amount));
            }
        }
        Ok(bids)
    }

    /// Sell the IRS pool of `firm` to the simulated bidders.
    fn auction_irs_shares(&mut self, firm: FirmId, time: Decimal) -> Result<()> {
        let f = self.ledger.firm(firm)?;
        let supply = f.irs_accrued;
        if supply.is_zero() {
            return Ok(());
        }
        let bids = self.draw_bids(supply, f.price_per_share)?;
        let result = clear_auction(supply, &bids)?;
        for alloc in result.allocations.iter().filter(|a| !a.shares.is_zero()) {
            self.ledger.release_irs_shares(firm, alloc.bidder, alloc.shares, result.clearing_price)?;
            self.ledger.holder_mut(alloc.bidder)?.cash -= alloc.dollars_paid;
        }
        let proceeds = result.cash_proceeds();
        if !proceeds.is_zero() {
            self.ledger.record(TaxEvent::money(time, TaxEventKind::AuctionProceeds, proceeds).for_firm(firm));
        }
        Ok(())
    }

    fn settle_due_puts(&mut self, time: Decimal) -> Result<()> {
        let (due, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.puts).into_iter().partition(|p| p.expiry <= time);
        self.puts = rest;
        for grant in due {
            let market = self.ledger.firm(grant.firm)?.price_per_share;
            settle_puts(&mut self.ledger, &grant, market, time)?;
        }
        Ok(())
    }

    /// Greedy regime choice with memory: a firm switches once the return
    /// advantage of the other regime, accumulated over consecutive years,
    /// covers the one-time cost of switching.
    fn consider_switch(&mut self, id: FirmId, time: Decimal) -> Result<()> {
        let firm = self.ledger.firm(id)?.clone();
        let eq = expected_returns(&firm, Regime::EquityTaxed, &self.params, None).net;
        let inc = expected_returns(&firm, Regime::IncomeTaxed, &self.params, None).net;
        let (advantage, cost) = match firm.regime {
            Regime::IncomeTaxed => (eq - inc, conversion_cost_fraction(&self.ledger, id, &self.params)?),
            Regime::EquityTaxed => (inc - eq, self.config.transition.reconversion_hurdle),
        };
        let meta = self.meta.get_mut(&id).ok_or(Error::UnknownFirm(id.0))?;
        if advantage <= Decimal::ZERO {
            meta.advantage_memory = Decimal::ZERO;
            return Ok(());
        }
        meta.advantage_memory += advantage;
        if meta.advantage_memory < cost {
            return Ok(());
        }
        meta.advantage_memory = Decimal::ZERO;
        meta.conversions += 1;
        let t = self.params.income_tax_rate;
        match firm.regime {
            Regime::IncomeTaxed => {
                let post = firm.price_per_share.scale(t.complement());
                let (_, new_shares) = crate::ledger::issue_shares(&firm, t)?;
                let bids = self.draw_bids(new_shares, post)?;
                apply_conversion_to_equity(&mut self.ledger, id, t, &bids, time)?;
            }
            Regime::EquityTaxed => {
                let strike = firm.price_per_share;
                let grant = apply_conversion_to_income(&mut self.ledger, id, t, strike, time + Decimal::ONE)?;
                self.puts.push(grant);
            }
        }
        let to = self.ledger.firm(id)?.regime;
        self.changes.push(RegimeChange { time, firm: id.0, to });
        Ok(())
    }

    fn record_step(&mut self, log_start: usize) -> Result<()> {
        let mut cash: BTreeMap<FirmId, Money> = BTreeMap::new();
        let mut accrued: BTreeMap<FirmId, ShareQuantity> = BTreeMap::new();
        for e in &self.ledger.log().events()[log_start..] {
            let Some(f) = e.firm else { continue };
            *cash.entry(f).or_insert(Money::ZERO) += e.revenue();
            if let crate::ledger::TaxAmount::Shares(q) = e.amount {
                *accrued.entry(f).or_insert(ShareQuantity::ZERO) += q;
            }
        }
        for firm in self.ledger.firms() {
            let meta = &self.meta[&firm.id];
            self.records.push(StepRecord {
                time: self.clock,
                firm: firm.id.0,
                class: meta.class.clone(),
                regime: firm.regime,
                price: firm.price_per_share,
                book_per_share: firm.book_per_share()?,
                tax_paid: cash.get(&firm.id).copied().unwrap_or(Money::ZERO),
                accrued_value: accrued.get(&firm.id).copied().unwrap_or(ShareQuantity::ZERO).times_price(firm.price_per_share),
            });
        }
        Ok(())
    }

    /// Individual holders' total wealth at book.
    pub fn holder_book_wealth(&self, kind: HolderKind) -> Result<Money> {
        self.ledger
            .holders()
            .filter(|h| h.kind == kind && h.id.0 < BIDDER_BASE)
            .map(|h| book_wealth(&self.ledger, h.id))
            .sum()
    }

    /// IRS revenue including unsold pool shares valued at market.
    pub fn revenue_with_pool(&self) -> Result<Money> {
        let pool: Money = self.ledger.firms().map(|f| f.irs_accrued.times_price(f.price_per_share)).sum();
        Ok(self.ledger.log().total_revenue() + pool)
    }
}

/// One-time conversion tax as a fraction of market value:
/// `t * (value - basis) / value`, floored at zero.
pub fn conversion_cost_fraction(ledger: &Ledger, firm: FirmId, params: &RegimeParams) -> Result<Decimal> {
    let f = ledger.firm(firm)?;
    let value = f.market_value();
    if value.value() <= Decimal::ZERO {
        return Ok(Decimal::ZERO);
    }
    let basis: Money = ledger.lots_of(firm).map(cost_basis).sum();
    let public = ledger.lots_of(firm).map(|l| l.quantity).sum::<ShareQuantity>().times_price(f.price_per_share);
    let gain = (public - basis).max(Money::ZERO);
    Ok(params.income_tax_rate.value() * gain.value() / value.value())
}
