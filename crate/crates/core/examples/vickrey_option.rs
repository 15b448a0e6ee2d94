//! Second-price auction of the option to buy an underposted property.

use equitax::auction::vickrey_option_auction;
use equitax::ledger::{HolderId, Money};

fn main() {
    let bids = [(HolderId(1), Money::from_int(9_000)), (HolderId(2), Money::from_int(14_000)), (HolderId(3), Money::from_int(11_500))];
    let o = vickrey_option_auction(&bids).expect("bids present");
    println!("winner {} pays {} (set by {:?})", o.winner, o.payment, o.price_setter);
    let alone = vickrey_option_auction(&bids[..1]).expect("one bid");
    println!("lone bidder {} pays own bid {}", alone.winner, alone.payment);
}
