//! Holder wealth dispersion under each regime against (1 - t) / (1 - tau).

use equitax::sim::experiments::{volatility_experiment, VolatilityConfig};

fn main() -> equitax::Result<()> {
    let cfg = VolatilityConfig { paths: 4000, ..VolatilityConfig::default() };
    println!("{:>5} {:>12} {:>12} {:>8} {:>8}", "sigma", "sd income", "sd equity", "ratio", "theory");
    for r in volatility_experiment(&cfg)? {
        let ratio = r.ratio.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!("{:>5} {:>12.2} {:>12.2} {:>8} {:>8.4}", r.sigma, r.sd_income, r.sd_equity, ratio, r.analytic);
    }
    Ok(())
}
