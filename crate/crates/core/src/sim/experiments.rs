//! Experiments run on the simulated economy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::Decimal;
use rust_decimal_macros::dec;
use serde::{Deserialize, Serialize};

use super::config::{EconomyConfig, PricingRule};
use super::economy::{advance_firm, book_wealth, clipped_normal, growth_factor, EconomyState};
use crate::error::{Error, Result};
use crate::ledger::{
    Firm, FirmId, Holder, HolderId, IncomeSplit, Ledger, Money, Rate, Regime, ShareLot, ShareQuantity,
};
use crate::regimes::{
    compounding_gap, effective_growth, iceberg_equivalence, realize_gains, RealizationPolicy, RegimeParams,
};

const ONE_MILLION: i64 = 1_000_000;

fn single_firm_ledger(regime: Regime, split: IncomeSplit, drift: Decimal, policy: RealizationPolicy) -> Result<Ledger> {
    let mut ledger = Ledger::new();
    ledger.add_holder(Holder::individual(HolderId(1), policy));
    let firm = Firm::new(FirmId(1), regime, ShareQuantity::from_int(10_000), Money::from_int(100))
        .with_returns(drift, Decimal::ZERO)
        .with_split(split);
    let lot = ShareLot::new(HolderId(1), FirmId(1), ShareQuantity::from_int(10_000), Money::from_int(100));
    ledger.add_firm(firm, vec![lot])?;
    Ok(ledger)
}

/// Run one firm through one year of `growth - 1` income, priced at book,
/// with gains realized at year end. Returns the holder's wealth multiple
/// minus one.
fn one_year_net(regime: Regime, split: IncomeSplit, growth: Decimal, params: &RegimeParams) -> Result<Decimal> {
    let mut ledger = single_firm_ledger(regime, split, growth - Decimal::ONE, RealizationPolicy::Annual)?;
    let start = Money::from_int(ONE_MILLION);
    let income = Money::new(start.value() * (growth - Decimal::ONE));
    advance_firm(&mut ledger, FirmId(1), income, params, None, Decimal::ONE, Decimal::ONE)?;
    let book = ledger.firm(FirmId(1))?.book_per_share()?;
    ledger.firm_mut(FirmId(1))?.price_per_share = book;
    realize_gains(&mut ledger, FirmId(1), params, Decimal::ONE, true)?;
    Ok(book_wealth(&ledger, HolderId(1))?.value() / start.value() - Decimal::ONE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeutralityConfig {
    pub seeds: u64,
    pub first_seed: u64,
    /// Points per axis of the dividend-policy x masked-fraction grid.
    pub grid: usize,
    pub params: RegimeParams,
}

impl Default for NeutralityConfig {
    fn default() -> Self {
        NeutralityConfig {
            seeds: 100,
            first_seed: 1,
            grid: 10,
            params: RegimeParams::new(dec!(0.30), dec!(0.02), dec!(0.20), dec!(0.15)).expect("valid defaults"),
        }
    }
}

/// Random pre-tax return landscape over strategies: a base return, a payout
/// bump, a real cost of masking income, and small per-cell noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Landscape {
    pub base: Decimal,
    pub payout_bump: Decimal,
    pub masking_cost: Decimal,
    pub noise: Vec<Decimal>,
    pub grid: usize,
}

impl Landscape {
    pub fn draw(seed: u64, grid: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = |lo: f64, hi: f64| -> Result<Decimal> {
            let v: f64 = rng.random_range(lo..hi);
            Decimal::from_f64(v).map(|x| x.round_dp(8)).ok_or(Error::Arithmetic("draw"))
        };
        let base = d(0.04, 0.12)?;
        let payout_bump = d(-0.04, 0.04)?;
        let masking_cost = d(0.0, 0.06)?;
        let noise = (0..grid * grid).map(|_| d(0.0, 0.0005)).collect::<Result<_>>()?;
        Ok(Landscape { base, payout_bump, masking_cost, noise, grid })
    }

    pub fn axis(&self, k: usize) -> Decimal {
        Decimal::from(k) / Decimal::from(self.grid)
    }

    /// Pre-tax return of dividend policy `p` and masked fraction `m`.
    pub fn drift(&self, i: usize, j: usize) -> Decimal {
        let (p, m) = (self.axis(i), self.axis(j));
        self.base + self.payout_bump * p * (Decimal::ONE - p) * dec!(4) - self.masking_cost * m
            + self.noise[i * self.grid + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub pretax_best: (usize, usize),
    pub equity_best: (usize, usize),
    pub income_best: (usize, usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct NeutralityReport {
    pub outcomes: Vec<SeedOutcome>,
    pub equity_agreement: usize,
    pub income_divergence: usize,
}

fn argmax(values: &[Decimal], grid: usize) -> (usize, usize) {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    (best / grid, best % grid)
}

/// Per seed, find the best strategy by pre-tax return and by holders' net
/// return under each regime, each firm run through the ledger.
pub fn neutrality_experiment(cfg: &NeutralityConfig) -> Result<NeutralityReport> {
    let seeds: Vec<u64> = (cfg.first_seed..cfg.first_seed + cfg.seeds).collect();
    let outcomes = seeds
        .par_iter()
        .map(|&seed| -> Result<SeedOutcome> {
            let land = Landscape::draw(seed, cfg.grid)?;
            let n = cfg.grid;
            let mut pretax = Vec::with_capacity(n * n);
            let mut equity = Vec::with_capacity(n * n);
            let mut income = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let split = IncomeSplit::from_policy(Decimal::ZERO, land.axis(j), land.axis(i))?;
                    let mu = land.drift(i, j);
                    pretax.push(mu);
                    equity.push(one_year_net(Regime::EquityTaxed, split, Decimal::ONE + mu, &cfg.params)?);
                    income.push(one_year_net(Regime::IncomeTaxed, split, Decimal::ONE + mu, &cfg.params)?);
                }
            }
            Ok(SeedOutcome {
                seed,
                pretax_best: argmax(&pretax, n),
                equity_best: argmax(&equity, n),
                income_best: argmax(&income, n),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let equity_agreement = outcomes.iter().filter(|o| o.equity_best == o.pretax_best).count();
    let income_divergence = outcomes.iter().filter(|o| o.income_best != o.pretax_best).count();
    Ok(NeutralityReport { outcomes, equity_agreement, income_divergence })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionPoint {
    pub time: Decimal,
    pub equity_fraction: Decimal,
    pub favored_equity_fraction: Decimal,
    /// Tax paid plus accrued share value over market value, per regime.
    pub burden_equity: Decimal,
    pub burden_income: Decimal,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionReport {
    pub series: Vec<TransitionPoint>,
    pub changes: Vec<super::RegimeChange>,
    pub conversion_revenue: Money,
}

fn ratio(num: Decimal, den: Decimal) -> Decimal {
    if den.is_zero() {
        Decimal::ZERO
    } else {
        num / den
    }
}

/// Run `config` with regime choice switched on and trace the share of firms
/// under the equity tax.
pub fn transition_experiment(config: &EconomyConfig) -> Result<TransitionReport> {
    let mut cfg = config.clone();
    cfg.transition.enabled = true;
    let mut state = EconomyState::new(cfg)?;
    let mut series = Vec::new();
    while !state.is_done() {
        let from = state.records.len();
        state.step()?;
        let mut n = [Decimal::ZERO; 2];
        let mut favored = [Decimal::ZERO; 2];
        let mut paid = [Decimal::ZERO; 2];
        let mut value = [Decimal::ZERO; 2];
        for rec in &state.records[from..] {
            let k = usize::from(rec.regime == Regime::EquityTaxed);
            let firm = state.ledger.firm(FirmId(rec.firm))?;
            n[k] += Decimal::ONE;
            if state.meta[&firm.id].favored {
                favored[k] += Decimal::ONE;
            }
            paid[k] += rec.tax_paid.value() + rec.accrued_value.value();
            value[k] += firm.market_value().value();
        }
        series.push(TransitionPoint {
            time: state.clock,
            equity_fraction: ratio(n[1], n[0] + n[1]),
            favored_equity_fraction: ratio(favored[1], favored[0] + favored[1]),
            burden_equity: ratio(paid[1], value[1]),
            burden_income: ratio(paid[0], value[0]),
        });
    }
    let conversion_revenue =
        state.ledger.log().revenue_where(|e| e.kind == crate::ledger::TaxEventKind::ConversionTax);
    Ok(TransitionReport { series, changes: state.changes, conversion_revenue })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSearch {
    pub tau: Decimal,
    pub baseline_revenue: Money,
    pub reform_revenue: Money,
    pub relative_gap: Decimal,
    pub iterations: u32,
}

fn all_in(config: &EconomyConfig, regime: Regime) -> EconomyConfig {
    let mut cfg = config.clone();
    cfg.transition.enabled = false;
    for c in &mut cfg.firm_classes {
        c.regime = regime;
    }
    cfg
}

fn revenue_of(cfg: &EconomyConfig) -> Result<Money> {
    let mut state = EconomyState::new(cfg.clone())?;
    while !state.is_done() {
        state.step()?;
    }
    state.revenue_with_pool()
}

/// Bisect the equity tax rate until an all-equity economy raises the
/// revenue of the same economy under the income tax, within `tolerance`
/// relative. Pool shares still held by the IRS count at final prices.
pub fn revenue_neutral_rate(config: &EconomyConfig, tolerance: Decimal) -> Result<RateSearch> {
    let baseline = revenue_of(&all_in(config, Regime::IncomeTaxed))?;
    if baseline.value() <= Decimal::ZERO {
        return Err(Error::invalid("baseline income-tax revenue is not positive"));
    }
    let reform = |tau: Decimal| -> Result<Money> {
        let mut cfg = all_in(config, Regime::EquityTaxed);
        cfg.regime.equity_tax_rate = tau;
        revenue_of(&cfg)
    };
    let (mut lo, mut hi) = (Decimal::ZERO, dec!(0.5));
    if reform(hi)? < baseline {
        return Err(Error::invalid("no revenue-neutral equity tax rate below 50%"));
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = ((lo + hi) / Decimal::TWO).round_dp(12);
        let revenue = reform(mid)?;
        let gap = (revenue.value() - baseline.value()) / baseline.value();
        if gap.abs() <= tolerance / Decimal::TEN || iterations >= 60 {
            return Ok(RateSearch { tau: mid, baseline_revenue: baseline, reform_revenue: revenue, relative_gap: gap, iterations });
        }
        if gap < Decimal::ZERO {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolatilityConfig {
    pub seed: u64,
    pub paths: usize,
    pub sigmas: Vec<Decimal>,
    pub drift: Decimal,
    pub income_tax_rate: Decimal,
    pub equity_tax_rate: Decimal,
}

impl Default for VolatilityConfig {
    fn default() -> Self {
        VolatilityConfig {
            seed: 1,
            paths: 10_000,
            sigmas: vec![Decimal::ZERO, dec!(0.1), dec!(0.2), dec!(0.4)],
            drift: dec!(0.08),
            income_tax_rate: dec!(0.30),
            equity_tax_rate: dec!(0.02),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolatilityRow {
    pub sigma: Decimal,
    pub sd_income: f64,
    pub sd_equity: f64,
    /// `None` when both regimes are deterministic.
    pub ratio: Option<f64>,
    /// `(1 - t) / (1 - tau)`.
    pub analytic: f64,
    pub ratio_se: Option<f64>,
    pub burden_income: f64,
    pub burden_equity: f64,
}

struct Moments {
    sd: f64,
    /// Variance of the log sample standard deviation, from the kurtosis.
    log_sd_var: f64,
    mean_tax: f64,
}

fn moments(wealth: &[f64], taxes: &[f64]) -> Moments {
    let n = wealth.len() as f64;
    let mean = wealth.iter().sum::<f64>() / n;
    let m2 = wealth.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    let m4 = wealth.iter().map(|w| (w - mean).powi(4)).sum::<f64>() / n;
    let sd = (m2 * n / (n - 1.0)).sqrt();
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
    Moments { sd, log_sd_var: (kurtosis - 1.0) / (4.0 * n), mean_tax: taxes.iter().sum::<f64>() / n }
}

/// One-year holder wealth per path under `regime`, all income retained and
/// valued at book, no shareholder-level taxes. Each regime draws from its own
/// random stream.
fn volatility_arm(cfg: &VolatilityConfig, sigma: Decimal, regime: Regime, stream: u64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let params = RegimeParams::new(cfg.income_tax_rate, cfg.equity_tax_rate, Decimal::ZERO, Decimal::ZERO)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut wealth = Vec::with_capacity(cfg.paths);
    let mut taxes = Vec::with_capacity(cfg.paths);
    let mut pretax = 0.0;
    for _ in 0..cfg.paths {
        let z = clipped_normal(&mut rng, 8.0);
        let g = growth_factor(cfg.drift, sigma, Decimal::ONE, z)?;
        let mut ledger = single_firm_ledger(regime, IncomeSplit::reinvest_all(), cfg.drift, RealizationPolicy::DeferToHorizon)?;
        let income = Money::new(Decimal::from(ONE_MILLION) * (g - Decimal::ONE));
        advance_firm(&mut ledger, FirmId(1), income, &params, None, Decimal::ONE, Decimal::ONE)?;
        let w = book_wealth(&ledger, HolderId(1))?.value();
        let firm = ledger.firm(FirmId(1))?;
        let irs = firm.irs_accrued.times_price(firm.book_per_share()?).value() + ledger.log().total_revenue().value();
        wealth.push(w.to_f64().unwrap_or(f64::NAN));
        taxes.push(irs.to_f64().unwrap_or(f64::NAN));
        pretax += income.value().to_f64().unwrap_or(f64::NAN);
    }
    Ok((wealth, taxes, pretax / cfg.paths as f64))
}

/// Standard deviation of holder wealth under each regime, per volatility
/// class, with the analytic ratio `(1 - t) / (1 - tau)` for comparison.
pub fn volatility_experiment(cfg: &VolatilityConfig) -> Result<Vec<VolatilityRow>> {
    if cfg.paths < 2 {
        return Err(Error::invalid("need at least two paths"));
    }
    let t = Rate::tax(cfg.income_tax_rate)?;
    let tau = Rate::tax(cfg.equity_tax_rate)?;
    let analytic = (t.complement() / tau.complement()).to_f64().unwrap_or(f64::NAN);
    cfg.sigmas
        .par_iter()
        .enumerate()
        .map(|(k, &sigma)| -> Result<VolatilityRow> {
            let (wi, ti, pi) = volatility_arm(cfg, sigma, Regime::IncomeTaxed, 2 * k as u64)?;
            let (we, te, pe) = volatility_arm(cfg, sigma, Regime::EquityTaxed, 2 * k as u64 + 1)?;
            let (mi, me) = (moments(&wi, &ti), moments(&we, &te));
            let ratio = (me.sd > 0.0).then(|| mi.sd / me.sd);
            let ratio_se = ratio.map(|r| r * (mi.log_sd_var + me.log_sd_var).sqrt());
            Ok(VolatilityRow {
                sigma,
                sd_income: mi.sd,
                sd_equity: me.sd,
                ratio,
                analytic,
                ratio_se,
                burden_income: mi.mean_tax / pi,
                burden_equity: me.mean_tax / pe,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub years: u32,
    pub annual: Decimal,
    pub deferred: Decimal,
    pub ratio: Decimal,
}

/// Growth multiples with gains taxed yearly versus once at the horizon.
pub fn compounding_table(g: Rate, tax: Rate, years: &[u32]) -> Result<Vec<GrowthRow>> {
    years
        .iter()
        .map(|&y| {
            Ok(GrowthRow {
                years: y,
                annual: effective_growth(g, tax, y, RealizationPolicy::Annual)?,
                deferred: effective_growth(g, tax, y, RealizationPolicy::DeferToHorizon)?,
                ratio: compounding_gap(g, tax, y)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcebergRow {
    pub value: Money,
    pub income_yield: Decimal,
    pub price_tax: Decimal,
    pub equivalent_income_rate: Decimal,
    pub tax_on_price: Money,
    pub tax_on_income: Money,
}

/// Price tax versus the equivalent income tax for each yield.
pub fn iceberg_table(value: Money, price_tax: Rate, yields: &[Rate]) -> Result<Vec<IcebergRow>> {
    yields
        .iter()
        .map(|&y| {
            let r = iceberg_equivalence(value, y, price_tax)?;
            Ok(IcebergRow {
                value,
                income_yield: y.value(),
                price_tax: price_tax.value(),
                equivalent_income_rate: r.equivalent_income_rate,
                tax_on_price: r.tax_on_price,
                tax_on_income: r.tax_on_income,
            })
        })
        .collect()
}

/// The economy used by `simulate` when no config file is given: a mixed
/// sector of equity- and income-taxed firms in two volatility classes.
pub fn default_economy(seed: u64) -> EconomyConfig {
    let text = format!(
        r#"
seed = {seed}
horizon_years = 10
dt = 0.25

[[firm_class]]
name = "steady"
count = 3
regime = "equity_taxed"
drift = 0.07
volatility = 0.10
payout = 0.3

[[firm_class]]
name = "steady_income"
count = 3
regime = "income_taxed"
drift = 0.07
volatility = 0.10
payout = 0.3
basis_ratio = 0.8

[[firm_class]]
name = "volatile"
count = 2
regime = "equity_taxed"
drift = 0.10
volatility = 0.35
cross_owned = 0.2
"#
    );
    EconomyConfig::from_toml_str(&text).expect("built-in economy is valid")
}

/// `Book` pricing variant of `config`, for experiments that compare
/// fundamental wealth.
pub fn with_book_pricing(config: &EconomyConfig) -> EconomyConfig {
    let mut cfg = config.clone();
    cfg.pricing = PricingRule::Book;
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_economy_runs_and_conserves() {
        let report = super::super::run_simulation(&default_economy(3)).unwrap();
        assert_eq!(report.summary.steps, 40);
        assert!(report.summary.total_revenue.value() > Decimal::ZERO);
    }

    #[test]
    fn equity_net_is_monotone_in_pretax() {
        let params = RegimeParams::default();
        let split = IncomeSplit::from_policy(Decimal::ZERO, dec!(0.3), dec!(0.5)).unwrap();
        let a = one_year_net(Regime::EquityTaxed, split, dec!(1.05), &params).unwrap();
        let b = one_year_net(Regime::EquityTaxed, split, dec!(1.06), &params).unwrap();
        assert!(b > a);
        // (1 - tau)(1 + g) - 1
        assert!((a - (dec!(0.98) * dec!(1.05) - Decimal::ONE)).abs() < dec!(1e-10));
    }

    #[test]
    fn small_neutrality_run() {
        let cfg = NeutralityConfig { seeds: 5, ..NeutralityConfig::default() };
        let r = neutrality_experiment(&cfg).unwrap();
        assert_eq!(r.equity_agreement, 5);
    }

    #[test]
    fn compounding_table_rows() {
        let g = Rate::tax(dec!(0.1)).unwrap();
        let t = Rate::tax(dec!(0.3)).unwrap();
        let rows = compounding_table(g, t, &[1, 95]).unwrap();
        assert_eq!(rows[0].annual, dec!(1.07));
        assert!(rows[1].ratio > dec!(9.0) && rows[1].ratio < dec!(10.5));
    }
}
