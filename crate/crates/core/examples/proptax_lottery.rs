//! Self-assessed property tax: 2% of the posted price, plus a 2.5% yearly
//! chance that the option to buy at that price is auctioned.

use equitax::ledger::{HolderId, Money, Rate};
use equitax::proptax::{
    default_multipliers, lottery_takings, property_tax_step, underpricing_penalty_experiment, BidderModel,
    PenaltyExperiment, PostedProperty,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use rust_decimal_macros::dec;

fn main() -> equitax::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let takings = lottery_takings(Rate::tax(dec!(0.025))?, 40, 100_000, &mut rng);
    let mean = takings.iter().map(|&k| k as f64).sum::<f64>() / takings.len() as f64;
    println!("auctions per 40-year ownership: {mean:.3}");

    let underposted = PostedProperty::new(HolderId(1), Money::from_int(80_000), Money::from_int(100_000))?;
    let mut fired = 0;
    for _ in 0..400 {
        let step = property_tax_step(&underposted, Decimal::ONE, &BidderModel::default(), &mut rng)?;
        if let Some(t) = step.trigger.filter(|t| t.exercised) {
            fired += 1;
            if fired == 1 {
                println!("option sold for {}, owner loses {}", t.option_price, t.owner_loss);
            }
        }
    }
    println!("{fired} exercised auctions in 400 years");

    let table = underpricing_penalty_experiment(&default_multipliers(), &PenaltyExperiment::default(), &mut rng)?;
    println!("{:>6} {:>10} {:>10}", "post", "simulated", "expected");
    for r in table {
        println!("{:>6.2} {:>10.5} {:>10.5}", r.multiplier, r.simulated, r.expected);
    }
    Ok(())
}
