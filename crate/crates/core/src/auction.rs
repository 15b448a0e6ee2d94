//! Sealed-bid share auctions.
//!
//! [`clear_auction`] runs the uniform-price auction the IRS uses to sell
//! accrued and conversion shares. A bid names a price limit and a dollar
//! amount, so a bidder's demand at price `p` is `amount / p` shares. The
//! clearing price is the highest price at which demand covers supply; it may
//! fall strictly between two submitted limits, where the dollar amounts of
//! the bids above it buy exactly the supply.
//!
//! [`vickrey_option_auction`] is the single-item second-price auction used by
//! the stochastic property tax.

use std::cmp::Ordering;
use std::fmt;

use rust_decimal::Decimal;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ledger::{div_q, HolderId, Money, ShareQuantity};

/// Upper price limit of a bid. `Unbounded` is reserved for cost-basis credit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceLimit {
    Finite(Money),
    Unbounded,
}

impl PriceLimit {
    /// `true` if a bid with this limit accepts `price`.
    pub fn accepts(self, price: Money) -> bool {
        match self {
            PriceLimit::Finite(limit) => limit >= price,
            PriceLimit::Unbounded => true,
        }
    }

    fn finite(self) -> Option<Money> {
        match self {
            PriceLimit::Finite(m) => Some(m),
            PriceLimit::Unbounded => None,
        }
    }
}

impl Serialize for PriceLimit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PriceLimit::Finite(m) => m.serialize(s),
            PriceLimit::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for PriceLimit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct LimitVisitor;

        impl Visitor<'_> for LimitVisitor {
            type Value = PriceLimit;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal price or \"unbounded\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<PriceLimit, E> {
                if v.eq_ignore_ascii_case("unbounded") || v.eq_ignore_ascii_case("inf") {
                    return Ok(PriceLimit::Unbounded);
                }
                v.parse::<Decimal>().map(|d| PriceLimit::Finite(Money::new(d))).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<PriceLimit, E> {
                Ok(PriceLimit::Finite(Money::new(Decimal::from(v))))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<PriceLimit, E> {
                Ok(PriceLimit::Finite(Money::new(Decimal::from(v))))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<PriceLimit, E> {
                Decimal::try_from(v).map(|d| PriceLimit::Finite(Money::new(d))).map_err(E::custom)
            }
        }

        d.deserialize_any(LimitVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bid {
    pub bidder: HolderId,
    pub limit: PriceLimit,
    pub amount: Money,
}

impl Bid {
    pub fn new(bidder: HolderId, limit: Money, amount: Money) -> Self {
        Bid { bidder, limit: PriceLimit::Finite(limit), amount }
    }

    pub fn credit(bidder: HolderId, amount: Money) -> Self {
        Bid { bidder, limit: PriceLimit::Unbounded, amount }
    }

    pub fn is_credit(&self) -> bool {
        self.limit == PriceLimit::Unbounded
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub bidder: HolderId,
    pub shares: ShareQuantity,
    pub dollars_paid: Money,
    pub credit: bool,
}

/// Outcome of a uniform-price auction. `allocations[i]` belongs to the
/// `i`-th submitted bid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionResult {
    pub clearing_price: Money,
    pub allocations: Vec<Allocation>,
    pub unsold: ShareQuantity,
    pub proceeds: Money,
}

impl AuctionResult {
    pub fn allocated(&self) -> ShareQuantity {
        self.allocations.iter().map(|a| a.shares).sum()
    }

    /// Proceeds paid in cash, excluding credit bids.
    pub fn cash_proceeds(&self) -> Money {
        self.allocations.iter().filter(|a| !a.credit).map(|a| a.dollars_paid).sum()
    }

    pub fn credit_shares(&self) -> ShareQuantity {
        self.allocations.iter().filter(|a| a.credit).map(|a| a.shares).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clearing {
    /// Demand meets supply strictly above the given limit (if any); every
    /// bid above that limit fills.
    Interior(Money, Option<Money>),
    /// Clears at a submitted limit; bids exactly at it are rationed.
    AtLimit(Money),
    /// Demand short of supply even at the lowest limit.
    Undersubscribed(Money),
}

fn find_clearing(supply: Decimal, bids: &[Bid], reserve: Option<Money>) -> Result<Clearing> {
    let mut limits: Vec<Money> = bids.iter().filter_map(|b| b.limit.finite()).chain(reserve).collect();
    limits.sort_unstable_by(|a, b| b.cmp(a));
    limits.dedup();

    // Dollars committed by bids accepting every price above the current limit.
    let mut committed: Decimal = bids.iter().filter(|b| b.is_credit()).map(|b| b.amount.value()).sum();
    for &limit in &limits {
        if !committed.is_zero() && committed > limit.value() * supply {
            return Ok(Clearing::Interior(Money::new(div_q(committed, supply)?), Some(limit)));
        }
        committed += bids.iter().filter(|b| b.limit == PriceLimit::Finite(limit)).map(|b| b.amount.value()).sum::<Decimal>();
        if committed >= limit.value() * supply {
            return Ok(Clearing::AtLimit(limit));
        }
    }
    match limits.last() {
        Some(&lowest) => Ok(Clearing::Undersubscribed(lowest)),
        None => Ok(Clearing::Interior(Money::new(div_q(committed, supply)?), None)),
    }
}

/// Clear a uniform-price auction of `supply` shares.
///
/// Bids above the clearing price, and all credit bids, buy `amount / price`
/// shares. Bids exactly at the clearing price share what is left pro rata
/// by dollar amount. Rounding residue goes to the last filled bid in input
/// order so that allocated plus unsold equals supply exactly.
pub fn clear_auction(supply: ShareQuantity, bids: &[Bid]) -> Result<AuctionResult> {
    clear_auction_with_reserve(supply, bids, None)
}

/// As [`clear_auction`], but the price never falls below `reserve`. Bids
/// limited below it get nothing, and shares not demanded at the reserve are
/// left unsold.
pub fn clear_auction_with_reserve(supply: ShareQuantity, bids: &[Bid], reserve: Option<Money>) -> Result<AuctionResult> {
    if reserve.is_some_and(|r| r.value() <= Decimal::ZERO) {
        return Err(Error::invalid("reserve price must be positive"));
    }
    if supply.is_zero() {
        return Err(Error::invalid("auction supply must be positive"));
    }
    if let Some(bad) = bids.iter().find(|b| b.amount.value() <= Decimal::ZERO) {
        return Err(Error::invalid(format!("bid by {} has non-positive amount {}", bad.bidder, bad.amount)));
    }
    if let Some(bad) = bids.iter().find(|b| matches!(b.limit, PriceLimit::Finite(l) if l.value() <= Decimal::ZERO)) {
        return Err(Error::invalid(format!("bid by {} has non-positive price limit", bad.bidder)));
    }
    if bids.is_empty() {
        return Ok(AuctionResult {
            clearing_price: Money::ZERO,
            allocations: Vec::new(),
            unsold: supply,
            proceeds: Money::ZERO,
        });
    }

    let priced_out = |b: &Bid| matches!((b.limit, reserve), (PriceLimit::Finite(l), Some(r)) if l < r);
    let eligible: Vec<Bid> = bids.iter().filter(|b| !priced_out(b)).cloned().collect();
    let clearing = find_clearing(supply.value(), &eligible, reserve)?;
    let price = match clearing {
        Clearing::Interior(p, _) | Clearing::AtLimit(p) | Clearing::Undersubscribed(p) => p,
    };
    let full_fill = |b: &Bid| match (clearing, b.limit) {
        _ if priced_out(b) => false,
        (_, PriceLimit::Unbounded) => true,
        (Clearing::Interior(_, floor), PriceLimit::Finite(l)) => floor.is_none_or(|f| l > f),
        (Clearing::AtLimit(p), PriceLimit::Finite(l)) => l > p,
        (Clearing::Undersubscribed(_), PriceLimit::Finite(_)) => true,
    };

    let mut shares = vec![Decimal::ZERO; bids.len()];
    for (i, b) in bids.iter().enumerate() {
        if full_fill(b) {
            shares[i] = div_q(b.amount.value(), price.value())?;
        }
    }

    let mut unsold = Decimal::ZERO;
    let last_full = bids.iter().rposition(full_fill);
    match clearing {
        Clearing::Undersubscribed(_) => {
            unsold = supply.value() - shares.iter().sum::<Decimal>();
        }
        Clearing::Interior(..) => {
            if let Some(i) = last_full {
                absorb_residual(&mut shares, i, supply.value());
            }
        }
        Clearing::AtLimit(p) => {
            let marginal: Vec<usize> = (0..bids.len()).filter(|&i| bids[i].limit == PriceLimit::Finite(p)).collect();
            let remaining = supply.value() - shares.iter().sum::<Decimal>();
            if marginal.is_empty() && remaining > Decimal::ZERO {
                // Only the reserve sits at the clearing price.
                unsold = remaining;
            } else if remaining <= Decimal::ZERO {
                if let Some(i) = last_full {
                    absorb_residual(&mut shares, i, supply.value());
                }
            } else {
                let marginal_dollars: Decimal = marginal.iter().map(|&i| bids[i].amount.value()).sum();
                for &i in &marginal {
                    shares[i] = div_q(remaining * bids[i].amount.value(), marginal_dollars)?;
                }
                if let Some(&i) = marginal.last() {
                    absorb_residual(&mut shares, i, supply.value());
                }
            }
        }
    }

    let mut allocations = Vec::with_capacity(bids.len());
    for (b, s) in bids.iter().zip(shares) {
        let shares = ShareQuantity::new(s).map_err(|_| Error::Invariant("negative allocation".into()))?;
        allocations.push(Allocation {
            bidder: b.bidder,
            shares,
            dollars_paid: shares.times_price(price),
            credit: b.is_credit(),
        });
    }
    let unsold = ShareQuantity::new(unsold).map_err(|_| Error::Invariant("allocation exceeds supply".into()))?;
    let proceeds = allocations.iter().map(|a| a.dollars_paid).sum();
    Ok(AuctionResult { clearing_price: price, allocations, unsold, proceeds })
}

fn absorb_residual(shares: &mut [Decimal], index: usize, supply: Decimal) {
    let others: Decimal = shares.iter().enumerate().filter(|(j, _)| *j != index).map(|(_, s)| *s).sum();
    shares[index] = supply - others;
}

/// Shares on offer and sealed bids, as read from a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionScenario {
    pub supply: ShareQuantity,
    #[serde(rename = "bid")]
    pub bids: Vec<Bid>,
}

impl AuctionScenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn run(&self) -> Result<AuctionResult> {
        clear_auction(self.supply, &self.bids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VickreyOutcome {
    pub winner: HolderId,
    pub payment: Money,
    /// Bidder whose price set the payment, if anyone else bid.
    pub price_setter: Option<HolderId>,
}

/// Second-price sealed-bid auction for a single item. Highest bid wins, ties
/// go to the lower bidder id, and the winner pays the best losing bid (its
/// own bid when alone). `None` when nobody bids.
pub fn vickrey_option_auction(bids: &[(HolderId, Money)]) -> Option<VickreyOutcome> {
    let mut ranked: Vec<&(HolderId, Money)> = bids.iter().collect();
    ranked.sort_by(|a, b| match b.1.cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    let (winner, own) = **ranked.first()?;
    Some(match ranked.get(1) {
        Some(&&(setter, price)) => VickreyOutcome { winner, payment: price, price_setter: Some(setter) },
        None => VickreyOutcome { winner, payment: own, price_setter: None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    fn money(v: Decimal) -> Money {
        Money::new(v)
    }

    fn shares(v: u64) -> ShareQuantity {
        ShareQuantity::from_int(v)
    }

    #[test]
    fn conversion_auction_from_worked_example() {
        let bids = vec![
            Bid::credit(HolderId(1), money(dec!(38000))),
            Bid::new(HolderId(2), money(dec!(80)), money(dec!(1500))),
            Bid::new(HolderId(3), money(dec!(80)), money(dec!(500))),
        ];
        let r = clear_auction(shares(500), &bids).unwrap();
        assert_eq!(r.clearing_price, Money::from_int(80));
        assert_eq!(r.allocations[0].shares, shares(475));
        assert_eq!(r.allocations[1].shares + r.allocations[2].shares, shares(25));
        assert_eq!(r.cash_proceeds(), Money::from_int(2000));
        assert!(r.unsold.is_zero());
    }

    #[test]
    fn single_bid_meets_supply_exactly() {
        let r = clear_auction(shares(10), &[Bid::new(HolderId(1), money(dec!(10)), money(dec!(100)))]).unwrap();
        assert_eq!(r.clearing_price, Money::from_int(10));
        assert_eq!(r.allocations[0].shares, shares(10));
        assert_eq!(r.proceeds, Money::from_int(100));
    }

    #[test]
    fn higher_limit_has_priority_at_the_clearing_price() {
        // demand(20) = 5 < 10, demand(10) = 20 >= 10: clears at 10, and the
        // bid above the price fills in full before the marginal one.
        let bids = vec![
            Bid::new(HolderId(1), money(dec!(20)), money(dec!(100))),
            Bid::new(HolderId(2), money(dec!(10)), money(dec!(100))),
        ];
        let r = clear_auction(shares(10), &bids).unwrap();
        assert_eq!(r.clearing_price, Money::from_int(10));
        assert_eq!(r.allocations[0].shares, shares(10));
        assert!(r.allocations[1].shares.is_zero());
    }

    #[test]
    fn marginal_bids_are_rationed_pro_rata() {
        let bids = vec![
            Bid::new(HolderId(1), money(dec!(10)), money(dec!(100))),
            Bid::new(HolderId(2), money(dec!(10)), money(dec!(300))),
        ];
        let r = clear_auction(shares(10), &bids).unwrap();
        assert_eq!(r.clearing_price, Money::from_int(10));
        assert_eq!(r.allocations[0].shares, ShareQuantity::new(dec!(2.5)).unwrap());
        assert_eq!(r.allocations[1].shares, ShareQuantity::new(dec!(7.5)).unwrap());
    }

    #[test]
    fn interior_price_between_limits() {
        // $190 at limit 20 covers 10 shares at $19, above the next limit.
        let bids = vec![
            Bid::new(HolderId(1), money(dec!(20)), money(dec!(190))),
            Bid::new(HolderId(2), money(dec!(10)), money(dec!(1))),
        ];
        let r = clear_auction(shares(10), &bids).unwrap();
        assert_eq!(r.clearing_price, Money::from_int(19));
        assert_eq!(r.allocations[0].shares, shares(10));
        assert!(r.allocations[1].shares.is_zero());
    }

    #[test]
    fn undersubscribed_clears_at_lowest_limit() {
        let bids = vec![
            Bid::new(HolderId(1), money(dec!(10)), money(dec!(50))),
            Bid::new(HolderId(2), money(dec!(5)), money(dec!(10))),
        ];
        let r = clear_auction(shares(100), &bids).unwrap();
        assert_eq!(r.clearing_price, Money::from_int(5));
        assert_eq!(r.allocated(), shares(12));
        assert_eq!(r.unsold, shares(88));
    }

    #[test]
    fn credit_only_auction_meets_supply() {
        let bids = vec![Bid::credit(HolderId(1), money(dec!(300))), Bid::credit(HolderId(2), money(dec!(100)))];
        let r = clear_auction(shares(4), &bids).unwrap();
        assert_eq!(r.clearing_price, Money::from_int(100));
        assert_eq!(r.allocations[0].shares, shares(3));
        assert_eq!(r.allocations[1].shares, shares(1));
        assert!(r.cash_proceeds().is_zero());
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let r = clear_auction(shares(5), &[]).unwrap();
        assert_eq!(r.unsold, shares(5));
        assert!(r.proceeds.is_zero());
        assert!(clear_auction(ShareQuantity::ZERO, &[]).is_err());
        assert!(clear_auction(shares(1), &[Bid::new(HolderId(1), money(dec!(1)), Money::ZERO)]).is_err());
        assert!(clear_auction(shares(1), &[Bid::new(HolderId(1), Money::ZERO, money(dec!(1)))]).is_err());
    }

    #[test]
    fn bids_parse_from_json_lines() {
        let credit: Bid = serde_json::from_str(r#"{"bidder": 1, "limit": "unbounded", "amount": "38000"}"#).unwrap();
        assert!(credit.is_credit());
        let outside: Bid = serde_json::from_str(r#"{"bidder": 2, "limit": 80, "amount": 2000}"#).unwrap();
        assert_eq!(outside.limit, PriceLimit::Finite(Money::from_int(80)));
        assert!(serde_json::from_str::<Bid>(r#"{"bidder": 2, "limit": 80, "amount": 1, "x": 0}"#).is_err());
        let text = serde_json::to_string(&credit).unwrap();
        assert_eq!(serde_json::from_str::<Bid>(&text).unwrap(), credit);
    }

    #[test]
    fn vickrey_examples() {
        let out = vickrey_option_auction(&[
            (HolderId(1), Money::from_int(100)),
            (HolderId(2), Money::from_int(90)),
            (HolderId(3), Money::from_int(50)),
        ])
        .unwrap();
        assert_eq!(out.winner, HolderId(1));
        assert_eq!(out.payment, Money::from_int(90));
        assert_eq!(out.price_setter, Some(HolderId(2)));

        let solo = vickrey_option_auction(&[(HolderId(1), Money::from_int(70))]).unwrap();
        assert_eq!((solo.winner, solo.payment), (HolderId(1), Money::from_int(70)));

        assert!(vickrey_option_auction(&[]).is_none());
    }

    #[test]
    fn vickrey_ties_go_to_lower_id_in_any_order() {
        let a = (HolderId(1), Money::from_int(100));
        let b = (HolderId(2), Money::from_int(100));
        for bids in [[a, b], [b, a]] {
            let out = vickrey_option_auction(&bids).unwrap();
            assert_eq!(out.winner, HolderId(1));
            assert_eq!(out.payment, Money::from_int(100));
        }
    }
}
