use std::path::Path;

use rust_decimal::Decimal;
use rust_decimal_macros::dec;
use serde::{Deserialize, Serialize};

use crate::deferred::DeferredParams;
use crate::error::{Error, Result};
use crate::ledger::{IncomeSplit, Rate, Regime};
use crate::proptax::BidderModel;
use crate::regimes::{RealizationPolicy, RegimeParams};

/// How the simulated market prices a share each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingRule {
    /// Book value per share scaled by one period of expected net return
    /// discounted at the interest rate.
    #[default]
    ExpectedReturn,
    /// Book value per share.
    Book,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    #[serde(default = "d::income")]
    pub income_tax_rate: Decimal,
    #[serde(default = "d::equity")]
    pub equity_tax_rate: Decimal,
    #[serde(default = "d::capgains")]
    pub capgains_rate: Decimal,
    #[serde(default = "d::dividend")]
    pub dividend_rate: Decimal,
    #[serde(default = "d::realization")]
    pub realization: RealizationPolicy,
}

impl Default for RegimeSection {
    fn default() -> Self {
        RegimeSection {
            income_tax_rate: d::income(),
            equity_tax_rate: d::equity(),
            capgains_rate: d::capgains(),
            dividend_rate: d::dividend(),
            realization: d::realization(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FavoredSection {
    /// Fraction of each firm class flagged as favored.
    #[serde(default)]
    pub fraction: Decimal,
    /// Cut in the income tax rate borne by favored firms.
    #[serde(default)]
    pub burden_discount: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSection {
    #[serde(default)]
    pub enabled: bool,
    /// Accumulated yearly return advantage an equity-taxed firm needs before
    /// going back to the income tax.
    #[serde(default = "d::hurdle")]
    pub reconversion_hurdle: Decimal,
}

impl Default for TransitionSection {
    fn default() -> Self {
        TransitionSection { enabled: false, reconversion_hurdle: d::hurdle() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeferredSection {
    /// Interest rate `i` of the `t*i` levy on individually held shares of
    /// income-taxed firms.
    pub interest_rate: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmClass {
    pub name: String,
    #[serde(default = "d::one_u32")]
    pub count: u32,
    pub regime: Regime,
    pub drift: Decimal,
    #[serde(default)]
    pub volatility: Decimal,
    #[serde(default = "d::price")]
    pub price: Decimal,
    #[serde(default = "d::shares")]
    pub shares: Decimal,
    /// Initial cost basis over initial price.
    #[serde(default = "d::one")]
    pub basis_ratio: Decimal,
    #[serde(default)]
    pub expenses: Decimal,
    #[serde(default)]
    pub masked: Decimal,
    #[serde(default)]
    pub payout: Decimal,
    #[serde(default = "d::one_u32")]
    pub holders: u32,
    /// Fraction of shares held by an equity-taxed entity.
    #[serde(default)]
    pub cross_owned: Decimal,
}

impl FirmClass {
    pub fn split(&self) -> Result<IncomeSplit> {
        IncomeSplit::from_policy(self.expenses, self.masked, self.payout)
            .map_err(|e| Error::config(format!("firm_class `{}`: {e}", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyConfig {
    pub seed: u64,
    pub horizon_years: u32,
    #[serde(default = "d::one")]
    pub dt: Decimal,
    #[serde(default = "d::interest")]
    pub interest_rate: Decimal,
    #[serde(default = "d::cadence")]
    pub auction_cadence: Decimal,
    #[serde(default)]
    pub pricing: PricingRule,
    /// Normal shocks are clipped to this many standard deviations.
    #[serde(default = "d::shock")]
    pub max_abs_shock: f64,
    #[serde(default)]
    pub regime: RegimeSection,
    #[serde(default)]
    pub bidders: BidderModel,
    #[serde(default)]
    pub favored: FavoredSection,
    #[serde(default)]
    pub transition: TransitionSection,
    #[serde(default)]
    pub deferred: Option<DeferredSection>,
    #[serde(rename = "firm_class")]
    pub firm_classes: Vec<FirmClass>,
}

mod d {
    use super::*;

    pub fn income() -> Decimal {
        dec!(0.30)
    }
    pub fn equity() -> Decimal {
        dec!(0.02)
    }
    pub fn capgains() -> Decimal {
        dec!(0.20)
    }
    pub fn dividend() -> Decimal {
        dec!(0.15)
    }
    pub fn realization() -> RealizationPolicy {
        RealizationPolicy::Annual
    }
    pub fn hurdle() -> Decimal {
        dec!(0.05)
    }
    pub fn one() -> Decimal {
        Decimal::ONE
    }
    pub fn one_u32() -> u32 {
        1
    }
    pub fn price() -> Decimal {
        dec!(100)
    }
    pub fn shares() -> Decimal {
        dec!(10000)
    }
    pub fn interest() -> Decimal {
        dec!(0.05)
    }
    pub fn cadence() -> Decimal {
        dec!(0.25)
    }
    pub fn shock() -> f64 {
        6.0
    }
}

fn in_unit(key: &str, v: Decimal) -> Result<()> {
    if v < Decimal::ZERO || v > Decimal::ONE {
        return Err(Error::config(format!("`{key}` = {v} must lie in [0, 1]")));
    }
    Ok(())
}

fn rate(key: &str, v: Decimal) -> Result<Rate> {
    Rate::tax(v).map_err(|_| Error::config(format!("`{key}` = {v} must lie in [0, 1)")))
}

impl EconomyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: EconomyConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn regime_params(&self) -> Result<RegimeParams> {
        let r = &self.regime;
        Ok(RegimeParams {
            income_tax_rate: rate("regime.income_tax_rate", r.income_tax_rate)?,
            equity_tax_rate: rate("regime.equity_tax_rate", r.equity_tax_rate)?,
            capgains_rate: rate("regime.capgains_rate", r.capgains_rate)?,
            dividend_rate: rate("regime.dividend_rate", r.dividend_rate)?,
        })
    }

    pub fn deferred_params(&self) -> Result<Option<DeferredParams>> {
        self.deferred
            .as_ref()
            .map(|s| {
                Ok(DeferredParams {
                    t: rate("regime.income_tax_rate", self.regime.income_tax_rate)?,
                    i: rate("deferred.interest_rate", s.interest_rate)?,
                })
            })
            .transpose()
    }

    pub fn steps(&self) -> u64 {
        (Decimal::from(self.horizon_years) / self.dt).trunc().try_into().unwrap_or(0)
    }

    // Float checks are written negated so NaN fails them.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.dt <= Decimal::ZERO {
            return Err(Error::config("`dt` must be positive"));
        }
        if !(Decimal::from(self.horizon_years) % self.dt).is_zero() {
            return Err(Error::config(format!("`dt` = {} does not divide `horizon_years`", self.dt)));
        }
        if self.auction_cadence <= Decimal::ZERO {
            return Err(Error::config("`auction_cadence` must be positive"));
        }
        if self.interest_rate < Decimal::ZERO {
            return Err(Error::config("`interest_rate` must be non-negative"));
        }
        if !(self.max_abs_shock > 0.0) {
            return Err(Error::config("`max_abs_shock` must be positive"));
        }
        if self.bidders.n_bidders == 0 || !(self.bidders.dispersion >= 0.0) {
            return Err(Error::config("`bidders` needs n_bidders >= 1 and dispersion >= 0"));
        }
        self.regime_params()?;
        self.deferred_params()?;
        self.regime.realization.validate().map_err(|e| Error::config(format!("`regime.realization`: {e}")))?;
        in_unit("favored.fraction", self.favored.fraction)?;
        in_unit("favored.burden_discount", self.favored.burden_discount)?;
        if self.transition.reconversion_hurdle < Decimal::ZERO {
            return Err(Error::config("`transition.reconversion_hurdle` must be non-negative"));
        }
        let firms: u32 = self.firm_classes.iter().map(|c| c.count).sum();
        if firms >= 1000 || self.firm_classes.iter().any(|c| c.holders > 1000) {
            return Err(Error::config("at most 999 firms and 1000 holders per firm"));
        }
        if self.bidders.n_bidders > 1_000_000 {
            return Err(Error::config("`bidders.n_bidders` is too large"));
        }
        if self.firm_classes.is_empty() {
            return Err(Error::config("at least one `firm_class` is required"));
        }
        for c in &self.firm_classes {
            let key = |k: &str| format!("firm_class.{}.{k}", c.name);
            if c.price <= Decimal::ZERO || c.shares <= Decimal::ZERO {
                return Err(Error::config(format!("`{}` and `{}` must be positive", key("price"), key("shares"))));
            }
            if c.volatility < Decimal::ZERO {
                return Err(Error::config(format!("`{}` must be non-negative", key("volatility"))));
            }
            if c.drift <= dec!(-1) {
                return Err(Error::config(format!("`{}` must exceed -1", key("drift"))));
            }
            if c.basis_ratio < Decimal::ZERO {
                return Err(Error::config(format!("`{}` must be non-negative", key("basis_ratio"))));
            }
            if c.holders == 0 {
                return Err(Error::config(format!("`{}` must be at least 1", key("holders"))));
            }
            in_unit(&key("cross_owned"), c.cross_owned)?;
            in_unit(&key("payout"), c.payout)?;
            c.split()?;
        }
        Ok(())
    }
}
