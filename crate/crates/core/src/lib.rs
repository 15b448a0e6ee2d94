//! In-kind corporate taxation engine.
//!
//! Firms either pay income tax or hand the IRS a fixed yearly fraction of
//! their own shares, which it sells in sealed-bid auctions. The crate holds
//! the exact-decimal ledger, both tax regimes, the clearing auctions, the
//! conversion tax between regimes, the stochastic self-assessed property tax,
//! deferred-tax interest, and a seeded Monte Carlo economy that compares the
//! regimes.

pub mod auction;
pub mod cli;
pub mod conversion;
pub mod deferred;
pub mod error;
pub mod ledger;
pub mod proptax;
pub mod regimes;
pub mod sim;

pub use error::{Error, Result};
