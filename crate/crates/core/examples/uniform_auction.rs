//! Sealed-bid uniform-price auction of IRS-held shares: price priority,
//! pro-rata rationing at the clearing limit, unbounded credit bids.

use equitax::auction::{clear_auction, Bid, PriceLimit};
use equitax::ledger::{HolderId, Money, ShareQuantity};

fn main() -> equitax::Result<()> {
    let bids = [
        Bid::credit(HolderId(1), Money::from_int(300)),
        Bid::new(HolderId(2), Money::from_int(12), Money::from_int(240)),
        Bid::new(HolderId(3), Money::from_int(10), Money::from_int(300)),
        Bid::new(HolderId(4), Money::from_int(10), Money::from_int(100)),
        Bid::new(HolderId(5), Money::from_int(8), Money::from_int(1000)),
    ];
    let r = clear_auction(ShareQuantity::from_int(80), &bids)?;
    println!("clearing price {}", r.clearing_price);
    for (b, a) in bids.iter().zip(&r.allocations) {
        let limit = match b.limit {
            PriceLimit::Finite(l) => l.to_string(),
            PriceLimit::Unbounded => "credit".to_string(),
        };
        println!("{:>3} limit {limit:<7} amount {:<6} -> {:>6} shares, paid {}", b.bidder, b.amount, a.shares, a.dollars_paid);
    }
    println!("unsold {}  cash proceeds {}", r.unsold, r.cash_proceeds());
    Ok(())
}
