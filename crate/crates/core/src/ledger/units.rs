//! Exact-decimal units: constant dollars, per-year rates and share counts.
//!
//! Every stored balance is a [`Decimal`] quantized to [`LEDGER_SCALE`]
//! fractional digits. Divisions round half-to-even at that scale; sums and
//! differences of quantized values are exact.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use rust_decimal::prelude::*;
use rust_decimal::{MathematicalOps, RoundingStrategy};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional digits kept in ledger balances.
pub const LEDGER_SCALE: u32 = 12;

/// Round to ledger precision with banker's rounding.
pub fn quantize(value: Decimal) -> Decimal {
    value
        .round_dp_with_strategy(LEDGER_SCALE, RoundingStrategy::MidpointNearestEven)
        .normalize()
}

/// Quantized division. Fails on a zero divisor instead of panicking.
pub fn div_q(numerator: Decimal, denominator: Decimal) -> Result<Decimal> {
    numerator
        .checked_div(denominator)
        .map(quantize)
        .ok_or(Error::Arithmetic("division by zero or overflow"))
}

/// `base^exponent` for a non-negative decimal exponent. Integral exponents
/// take the exact repeated-multiplication path.
pub fn pow_dec(base: Decimal, exponent: Decimal) -> Result<Decimal> {
    if exponent.is_zero() {
        return Ok(Decimal::ONE);
    }
    if exponent.fract().is_zero() {
        if let Some(n) = exponent.to_u64() {
            return base
                .checked_powu(n)
                .ok_or(Error::Arithmetic("power overflow"));
        }
    }
    base.checked_powd(exponent)
        .ok_or(Error::Arithmetic("fractional power out of range"))
}

macro_rules! decimal_newtype {
    ($name:ident) => {
        impl $name {
            pub const ZERO: $name = $name(Decimal::ZERO);

            pub fn value(self) -> Decimal {
                self.0
            }

            pub fn is_zero(self) -> bool {
                self.0.is_zero()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(&self.0, f)
            }
        }

        impl From<$name> for Decimal {
            fn from(v: $name) -> Decimal {
                v.0
            }
        }
    };
}

/// An amount of constant dollars. May be negative (refunds, losses).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(Decimal);

decimal_newtype!(Money);

impl Money {
    pub fn new(amount: Decimal) -> Self {
        Money(quantize(amount))
    }

    pub fn from_int(dollars: i64) -> Self {
        Money(Decimal::from(dollars))
    }

    pub fn scale(self, factor: Decimal) -> Money {
        Money::new(self.0 * factor)
    }

    pub fn times_rate(self, rate: Rate) -> Money {
        self.scale(rate.0)
    }

    pub fn per_share(self, shares: ShareQuantity) -> Result<Money> {
        div_q(self.0, shares.0).map(Money)
    }

    pub fn is_negative(self) -> bool {
        self.0.is_sign_negative() && !self.0.is_zero()
    }

    pub fn max(self, other: Money) -> Money {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Rounded to cents, for display.
    pub fn cents(self) -> Decimal {
        self.0.round_dp_with_strategy(2, RoundingStrategy::MidpointNearestEven)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

/// A dimensionless per-year fraction, e.g. `0.02` for 2%.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rate(Decimal);

decimal_newtype!(Rate);

impl Rate {
    /// Unchecked constructor; use [`Rate::tax`] or [`Rate::interest`] at
    /// trust boundaries.
    pub const fn new_unchecked(value: Decimal) -> Self {
        Rate(value)
    }

    /// A tax rate, constrained to `[0, 1)`.
    pub fn tax(value: Decimal) -> Result<Self> {
        if value.is_sign_negative() && !value.is_zero() || value >= Decimal::ONE {
            return Err(Error::InvalidRate { value, bounds: "[0, 1)" });
        }
        Ok(Rate(value))
    }

    /// A non-negative interest or growth rate.
    pub fn interest(value: Decimal) -> Result<Self> {
        if value.is_sign_negative() && !value.is_zero() {
            return Err(Error::InvalidRate { value, bounds: "[0, inf)" });
        }
        Ok(Rate(value))
    }

    pub fn complement(self) -> Decimal {
        Decimal::ONE - self.0
    }
}

/// A non-negative share count. Fractional shares are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShareQuantity(Decimal);

decimal_newtype!(ShareQuantity);

impl ShareQuantity {
    pub fn new(count: Decimal) -> Result<Self> {
        if count.is_sign_negative() && !count.is_zero() {
            return Err(Error::NegativeShares(count));
        }
        Ok(ShareQuantity(quantize(count)))
    }

    pub fn from_int(count: u64) -> Self {
        ShareQuantity(Decimal::from(count))
    }

    pub fn times_price(self, price: Money) -> Money {
        Money::new(self.0 * price.value())
    }

    pub fn scale(self, factor: Decimal) -> Result<ShareQuantity> {
        ShareQuantity::new(self.0 * factor)
    }

    pub fn checked_sub(self, rhs: ShareQuantity) -> Result<ShareQuantity> {
        ShareQuantity::new(self.0 - rhs.0)
    }
}

impl Add for ShareQuantity {
    type Output = ShareQuantity;
    fn add(self, rhs: ShareQuantity) -> ShareQuantity {
        ShareQuantity(self.0 + rhs.0)
    }
}

impl AddAssign for ShareQuantity {
    fn add_assign(&mut self, rhs: ShareQuantity) {
        self.0 += rhs.0;
    }
}

impl Sum for ShareQuantity {
    fn sum<I: Iterator<Item = ShareQuantity>>(iter: I) -> ShareQuantity {
        iter.fold(ShareQuantity::ZERO, Add::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    #[test]
    fn division_rounds_half_even_at_ledger_scale() {
        assert_eq!(div_q(dec!(1), dec!(3)).unwrap(), dec!(0.333333333333));
        assert_eq!(div_q(dec!(2), dec!(3)).unwrap(), dec!(0.666666666667));
        // exact tie at the 13th digit goes to even
        assert_eq!(quantize(dec!(0.0000000000005)), dec!(0));
        assert_eq!(quantize(dec!(0.0000000000015)), dec!(0.000000000002));
        assert!(div_q(dec!(1), Decimal::ZERO).is_err());
    }

    #[test]
    fn rates_are_range_checked() {
        assert!(Rate::tax(dec!(0.02)).is_ok());
        assert!(Rate::tax(Decimal::ZERO).is_ok());
        assert!(Rate::tax(dec!(1)).is_err());
        assert!(Rate::tax(dec!(-0.1)).is_err());
        assert!(Rate::interest(dec!(1.5)).is_ok());
        assert!(Rate::interest(dec!(-0.01)).is_err());
    }

    #[test]
    fn shares_reject_negative_counts() {
        assert!(ShareQuantity::new(dec!(-1)).is_err());
        let a = ShareQuantity::from_int(10);
        assert!(a.checked_sub(ShareQuantity::from_int(11)).is_err());
        assert_eq!(a.checked_sub(a).unwrap(), ShareQuantity::ZERO);
    }

    #[test]
    fn integral_powers_are_exact() {
        assert_eq!(pow_dec(dec!(0.98), dec!(1)).unwrap(), dec!(0.98));
        assert_eq!(pow_dec(dec!(1.07), dec!(2)).unwrap(), dec!(1.1449));
        assert_eq!(pow_dec(dec!(5), Decimal::ZERO).unwrap(), Decimal::ONE);
    }
}
