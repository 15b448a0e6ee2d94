//! Self-assessed property tax with a lottery.
//!
//! The owner posts a price and pays a yearly tax on it. Each year, with a
//! small probability, the IRS auctions the option to buy the property at the
//! posted price in a second-price auction.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::Decimal;
use rust_decimal_macros::dec;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::auction::{vickrey_option_auction, VickreyOutcome};
use crate::error::{Error, Result};
use crate::ledger::{pow_dec, HolderId, Money, Rate, TaxEvent, TaxEventKind};

pub const DEFAULT_TAX_RATE: Rate = Rate::new_unchecked(dec!(0.02));
pub const DEFAULT_LOTTERY_RATE: Rate = Rate::new_unchecked(dec!(0.025));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostedProperty {
    pub owner: HolderId,
    pub posted_price: Money,
    /// Known to the simulation only.
    pub true_value: Money,
    pub tax_rate: Rate,
    pub lottery_rate: Rate,
}

impl PostedProperty {
    pub fn new(owner: HolderId, posted_price: Money, true_value: Money) -> Result<Self> {
        let prop = PostedProperty {
            owner,
            posted_price,
            true_value,
            tax_rate: DEFAULT_TAX_RATE,
            lottery_rate: DEFAULT_LOTTERY_RATE,
        };
        prop.validate()?;
        Ok(prop)
    }

    pub fn with_rates(mut self, tax_rate: Rate, lottery_rate: Rate) -> Result<Self> {
        self.tax_rate = tax_rate;
        self.lottery_rate = lottery_rate;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.posted_price.value() <= Decimal::ZERO {
            return Err(Error::invalid("posted price must be positive"));
        }
        if self.true_value.is_negative() {
            return Err(Error::invalid("negative true value"));
        }
        Rate::tax(self.tax_rate.value())?;
        Rate::tax(self.lottery_rate.value())?;
        if self.lottery_rate.value() < self.tax_rate.value() {
            return Err(Error::invalid("lottery rate below tax rate"));
        }
        Ok(())
    }
}

/// Outside bidders for a triggered option. Private values are
/// `true_value * (1 + dispersion * z)` with standard normal `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidderModel {
    pub n_bidders: u32,
    pub dispersion: f64,
}

impl Default for BidderModel {
    fn default() -> Self {
        BidderModel { n_bidders: 5, dispersion: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptionAuctionTrigger {
    /// `None` when no bidder values the property above the posted price.
    pub auction: Option<VickreyOutcome>,
    pub exercised: bool,
    /// Price paid for the option; IRS revenue.
    pub option_price: Money,
    /// `true_value - posted_price` when exercised; negative when the owner
    /// over-posted and sold above value.
    pub owner_loss: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyStep {
    pub tax: Money,
    /// Expected-value margin of the lottery over the tax, booked as a memo.
    pub margin: Money,
    pub trigger: Option<OptionAuctionTrigger>,
}

impl PropertyStep {
    pub fn events(&self, time: Decimal, owner: HolderId) -> Vec<TaxEvent> {
        let mut out = vec![TaxEvent::money(time, TaxEventKind::PropertyTax, self.tax).for_holder(owner)];
        if !self.margin.is_zero() {
            out.push(TaxEvent::money(time, TaxEventKind::LotteryMargin, self.margin).for_holder(owner));
        }
        if let Some(t) = &self.trigger {
            if !t.option_price.is_zero() {
                out.push(TaxEvent::money(time, TaxEventKind::AuctionProceeds, t.option_price).for_holder(owner));
            }
        }
        out
    }
}

/// Probability of at least one lottery draw within `dt` years.
pub fn trigger_probability(lottery_rate: Rate, dt: Decimal) -> Result<Decimal> {
    Ok(Decimal::ONE - pow_dec(lottery_rate.complement(), dt)?)
}

fn to_f64(v: Decimal) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Draw bidders' private values and run the option auction. The option to
/// buy at `posted` is worth `value - posted` to a bidder, so only bidders
/// valuing the property above the posted price take part.
pub fn run_option_auction<R: Rng + ?Sized>(
    prop: &PostedProperty,
    bidders: &BidderModel,
    rng: &mut R,
) -> Result<OptionAuctionTrigger> {
    let v = to_f64(prop.true_value.value());
    let mut bids = Vec::with_capacity(bidders.n_bidders as usize);
    for k in 0..bidders.n_bidders {
        let z: f64 = StandardNormal.sample(rng);
        let value = Decimal::from_f64(v * (1.0 + bidders.dispersion * z))
            .ok_or(Error::Arithmetic("bidder value out of range"))?;
        let option_value = Money::new(value) - prop.posted_price;
        if option_value.value() > Decimal::ZERO {
            bids.push((HolderId(k), option_value));
        }
    }
    let auction = vickrey_option_auction(&bids);
    let exercised = auction.is_some();
    let option_price = auction.as_ref().map_or(Money::ZERO, |a| a.payment);
    let owner_loss = if exercised { prop.true_value - prop.posted_price } else { Money::ZERO };
    Ok(OptionAuctionTrigger { auction, exercised, option_price, owner_loss })
}

/// One `dt`-year step: linear cash tax on the posted price, and the lottery
/// firing with probability `1 - (1 - lottery_rate)^dt`.
pub fn property_tax_step<R: Rng + ?Sized>(
    prop: &PostedProperty,
    dt: Decimal,
    bidders: &BidderModel,
    rng: &mut R,
) -> Result<PropertyStep> {
    if dt <= Decimal::ZERO {
        return Err(Error::invalid("dt must be positive"));
    }
    prop.validate()?;
    let tax = Money::new(prop.posted_price.value() * prop.tax_rate.value() * dt);
    let margin =
        Money::new(prop.posted_price.value() * (prop.lottery_rate.value() - prop.tax_rate.value()) * dt);
    let p = to_f64(trigger_probability(prop.lottery_rate, dt)?);
    let trigger = if rng.random::<f64>() < p { Some(run_option_auction(prop, bidders, rng)?) } else { None };
    Ok(PropertyStep { tax, margin, trigger })
}

/// Number of lottery draws in each of `ownerships` spans of `years` whole
/// years.
pub fn lottery_takings<R: Rng + ?Sized>(lottery_rate: Rate, years: u32, ownerships: usize, rng: &mut R) -> Vec<u32> {
    let p = to_f64(lottery_rate.value());
    (0..ownerships).map(|_| (0..years).filter(|_| rng.random::<f64>() < p).count() as u32).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyExperiment {
    pub tax_rate: f64,
    pub lottery_rate: f64,
    pub years: u32,
    pub ownerships: usize,
    pub bidders: BidderModel,
}

impl Default for PenaltyExperiment {
    fn default() -> Self {
        PenaltyExperiment { tax_rate: 0.02, lottery_rate: 0.025, years: 40, ownerships: 2000, bidders: BidderModel::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyCost {
    pub multiplier: f64,
    /// Monte Carlo mean yearly cost per dollar of true value.
    pub simulated: f64,
    /// Closed-form expectation of the same quantity.
    pub expected: f64,
    pub tax: f64,
    pub expected_loss: f64,
    pub exercise_probability: f64,
}

fn norm_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Probability that some bidder values the property above `multiplier` times
/// its true value.
pub fn exercise_probability(multiplier: f64, bidders: &BidderModel) -> f64 {
    if bidders.dispersion == 0.0 {
        return if multiplier < 1.0 && bidders.n_bidders > 0 { 1.0 } else { 0.0 };
    }
    1.0 - norm_cdf((multiplier - 1.0) / bidders.dispersion).powi(bidders.n_bidders as i32)
}

/// Closed-form expected yearly cost per dollar of true value when posting at
/// `multiplier` times value: `tax * m + lottery * (1 - m) * P(exercise)`.
pub fn expected_annual_cost(multiplier: f64, exp: &PenaltyExperiment) -> f64 {
    exp.tax_rate * multiplier + exp.lottery_rate * (1.0 - multiplier) * exercise_probability(multiplier, &exp.bidders)
}

/// Monte Carlo cost of each posting multiplier, one shared value scale of 1.
pub fn underpricing_penalty_experiment<R: Rng + ?Sized>(
    multipliers: &[f64],
    exp: &PenaltyExperiment,
    rng: &mut R,
) -> Result<Vec<StrategyCost>> {
    let rate = |v: f64| Decimal::from_f64(v).ok_or_else(|| Error::invalid("rate out of range")).and_then(Rate::tax);
    let (tax_rate, lottery_rate) = (rate(exp.tax_rate)?, rate(exp.lottery_rate)?);
    let true_value = Money::from_int(1_000_000);
    let scale = to_f64(true_value.value());
    let mut out = Vec::with_capacity(multipliers.len());
    for &m in multipliers {
        let posted = Money::new(Decimal::from_f64(m * scale).ok_or_else(|| Error::invalid("multiplier out of range"))?);
        let prop = PostedProperty::new(HolderId(0), posted, true_value)?.with_rates(tax_rate, lottery_rate)?;
        let mut total = Decimal::ZERO;
        let steps = exp.ownerships as u64 * exp.years as u64;
        for _ in 0..steps {
            let step = property_tax_step(&prop, Decimal::ONE, &exp.bidders, rng)?;
            total += step.tax.value();
            if let Some(t) = step.trigger {
                total += t.owner_loss.value();
            }
        }
        let simulated = to_f64(total) / scale / steps.max(1) as f64;
        let pex = exercise_probability(m, &exp.bidders);
        out.push(StrategyCost {
            multiplier: m,
            simulated,
            expected: expected_annual_cost(m, exp),
            tax: exp.tax_rate * m,
            expected_loss: exp.lottery_rate * (1.0 - m) * pex,
            exercise_probability: pex,
        });
    }
    Ok(out)
}

/// Posting multipliers `0.25, 0.5, ..., 2.0`.
pub fn default_multipliers() -> Vec<f64> {
    (1..=8).map(|k| k as f64 * 0.25).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn yearly_tax_on_posted_price() {
        let prop = PostedProperty::new(HolderId(1), Money::from_int(1_000_000), Money::from_int(1_000_000)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = property_tax_step(&prop, Decimal::ONE, &BidderModel::default(), &mut rng).unwrap();
        assert_eq!(step.tax, Money::from_int(20_000));
        assert_eq!(step.margin, Money::from_int(5_000));
        assert!(property_tax_step(&prop, Decimal::ZERO, &BidderModel::default(), &mut rng).is_err());
    }

    #[test]
    fn invariants_rejected() {
        assert!(PostedProperty::new(HolderId(1), Money::ZERO, Money::from_int(1)).is_err());
        let prop = PostedProperty::new(HolderId(1), Money::from_int(5), Money::from_int(5)).unwrap();
        let low = Rate::tax(dec!(0.01)).unwrap();
        assert!(prop.with_rates(DEFAULT_TAX_RATE, low).is_err());
    }

    #[test]
    fn trigger_probability_composes() {
        let half = trigger_probability(DEFAULT_LOTTERY_RATE, dec!(0.5)).unwrap();
        let one = trigger_probability(DEFAULT_LOTTERY_RATE, Decimal::ONE).unwrap();
        assert_eq!(one, dec!(0.025));
        let composed = Decimal::ONE - (Decimal::ONE - half) * (Decimal::ONE - half);
        assert!((composed - one).abs() < dec!(1e-20));
    }

    #[test]
    fn underposting_is_taken_when_triggered() {
        let prop = PostedProperty::new(HolderId(1), Money::from_int(50), Money::from_int(100)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = run_option_auction(&prop, &BidderModel::default(), &mut rng).unwrap();
        assert!(t.exercised);
        assert_eq!(t.owner_loss, Money::from_int(50));
        assert!(t.option_price.value() > dec!(40));

        let over = PostedProperty::new(HolderId(1), Money::from_int(200), Money::from_int(100)).unwrap();
        let t = run_option_auction(&over, &BidderModel::default(), &mut rng).unwrap();
        assert!(!t.exercised);
        assert!(t.owner_loss.is_zero());
    }

    #[test]
    fn closed_form_grid_minimum_is_truthful() {
        let exp = PenaltyExperiment::default();
        let costs: Vec<f64> = default_multipliers().iter().map(|&m| expected_annual_cost(m, &exp)).collect();
        let best = costs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(default_multipliers()[best], 1.0);
        assert!((expected_annual_cost(0.5, &exp) - (0.01 + 0.0125)).abs() < 1e-9);
        assert!(expected_annual_cost(2.0, &exp) > expected_annual_cost(1.0, &exp));
    }
}
