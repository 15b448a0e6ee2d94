//! Do holders pick the same business strategy with and without tax?

use equitax::sim::experiments::{neutrality_experiment, NeutralityConfig};

fn main() -> equitax::Result<()> {
    let report = neutrality_experiment(&NeutralityConfig::default())?;
    let n = report.outcomes.len();
    println!("equity tax keeps the pre-tax best strategy in {}/{n} economies", report.equity_agreement);
    println!("income tax moves it in {}/{n}", report.income_divergence);
    if let Some(o) = report.outcomes.iter().find(|o| o.income_best != o.pretax_best) {
        println!("seed {}: pre-tax best {:?}, income-taxed best {:?}", o.seed, o.pretax_best, o.income_best);
    }
    Ok(())
}
