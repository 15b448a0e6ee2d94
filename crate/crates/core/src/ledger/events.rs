//! Append-only tax event log. Every revenue figure is a fold over it.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{FirmId, HolderId, Money, ShareQuantity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxEventKind {
    EquityAccrual,
    AuctionProceeds,
    IncomeTax,
    CapGainsTax,
    DividendTax,
    ConversionTax,
    PropertyTax,
    DeferredInterest,
    /// Cash distributions paid on IRS-held, not yet auctioned shares.
    IrsDistribution,
    /// Lottery margin above the property tax rate, booked but not distributed.
    LotteryMargin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "unit", content = "value")]
pub enum TaxAmount {
    Money(Money),
    Shares(ShareQuantity),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxEvent {
    /// Simulation clock in years.
    pub time: Decimal,
    pub kind: TaxEventKind,
    pub amount: TaxAmount,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub firm: Option<FirmId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub holder: Option<HolderId>,
}

impl TaxEvent {
    pub fn money(time: Decimal, kind: TaxEventKind, amount: Money) -> Self {
        TaxEvent { time, kind, amount: TaxAmount::Money(amount), firm: None, holder: None }
    }

    pub fn shares(time: Decimal, kind: TaxEventKind, amount: ShareQuantity) -> Self {
        TaxEvent { time, kind, amount: TaxAmount::Shares(amount), firm: None, holder: None }
    }

    pub fn for_firm(mut self, firm: FirmId) -> Self {
        self.firm = Some(firm);
        self
    }

    pub fn for_holder(mut self, holder: HolderId) -> Self {
        self.holder = Some(holder);
        self
    }

    /// Cash reaching the IRS. Share accruals are not revenue until auctioned,
    /// and the lottery margin is a memo line.
    pub fn revenue(&self) -> Money {
        match (self.kind, self.amount) {
            (TaxEventKind::LotteryMargin, _) => Money::ZERO,
            (_, TaxAmount::Money(m)) => m,
            (_, TaxAmount::Shares(_)) => Money::ZERO,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<TaxEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: TaxEvent) {
        self.events.push(event);
    }

    pub fn extend(&mut self, events: impl IntoIterator<Item = TaxEvent>) {
        self.events.extend(events);
    }

    pub fn events(&self) -> &[TaxEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total_revenue(&self) -> Money {
        self.events.iter().map(TaxEvent::revenue).sum()
    }

    pub fn revenue_by_kind(&self) -> BTreeMap<TaxEventKind, Money> {
        let mut out = BTreeMap::new();
        for e in &self.events {
            *out.entry(e.kind).or_insert(Money::ZERO) += e.revenue();
        }
        out
    }

    pub fn revenue_where(&self, pred: impl Fn(&TaxEvent) -> bool) -> Money {
        self.events.iter().filter(|e| pred(e)).map(TaxEvent::revenue).sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Self> {
        let mut log = EventLog::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(io::Error::other)?;
            log.push(event);
        }
        Ok(log)
    }
}
