//! CSV trade and portfolio files.
//!
//! Trades: `security_id,tick,value,volume`, ticks numbered `1..N` with every
//! security present at every tick. Prices are never a column.
//!
//! Portfolio: `security_id,holding,price_at_t0`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::portfolio::Portfolio;
use crate::trade::{AveragingWindow, TradeSeries, TradeTick};

pub const TRADES_HEADER: [&str; 4] = ["security_id", "tick", "value", "volume"];
pub const PORTFOLIO_HEADER: [&str; 3] = ["security_id", "holding", "price_at_t0"];

#[derive(Debug, Deserialize)]
struct TradeRow {
    security_id: String,
    tick: i64,
    value: f64,
    volume: f64,
}

#[derive(Debug, Deserialize)]
struct HoldingRow {
    security_id: String,
    holding: f64,
    price_at_t0: f64,
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::InvalidRow {
            row: 1,
            reason: format!("expected header '{}', found '{}'", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

/// Reads and validates an aligned trade grid. Securities keep the order of
/// their first appearance.
pub fn read_trades<R: Read>(input: R) -> Result<Vec<TradeSeries>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &TRADES_HEADER)?;

    let mut order: Vec<String> = Vec::new();
    let mut grid: HashMap<String, BTreeMap<usize, TradeTick>> = HashMap::new();
    for (idx, record) in reader.deserialize::<TradeRow>().enumerate() {
        // Header is row 1.
        let row = idx + 2;
        let rec = record.map_err(|e| Error::InvalidRow {
            row,
            reason: e.to_string(),
        })?;
        let bad = |reason: String| Error::InvalidRow { row, reason };
        if rec.security_id.is_empty() {
            return Err(bad("empty security_id".into()));
        }
        if rec.tick < 1 {
            return Err(bad(format!("tick must be >= 1, got {}", rec.tick)));
        }
        if !(rec.value.is_finite() && rec.value > 0.0) {
            return Err(bad(format!("value must be > 0, got {}", rec.value)));
        }
        if !(rec.volume.is_finite() && rec.volume > 0.0) {
            return Err(bad(format!("volume must be > 0, got {}", rec.volume)));
        }
        let tick = TradeTick::new(rec.value, rec.volume).map_err(|e| bad(e.to_string()))?;
        let slots = grid.entry(rec.security_id.clone()).or_insert_with(|| {
            order.push(rec.security_id.clone());
            BTreeMap::new()
        });
        if slots.insert(rec.tick as usize, tick).is_some() {
            return Err(bad(format!(
                "duplicate (security, tick) ({}, {})",
                rec.security_id, rec.tick
            )));
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyWindow);
    }

    let n = grid
        .values()
        .filter_map(|m| m.keys().next_back().copied())
        .max()
        .unwrap_or(0);
    let mut gaps = Vec::new();
    for id in &order {
        let slots = &grid[id];
        gaps.extend((1..=n).filter(|t| !slots.contains_key(t)).map(|t| format!("{id}:{t}")));
    }
    if !gaps.is_empty() {
        return Err(Error::UnalignedGrid(gaps.join(", ")));
    }

    let window = AveragingWindow::with_ticks(n)?;
    order
        .into_iter()
        .map(|id| {
            let ticks: Vec<TradeTick> = grid.remove(&id).unwrap_or_default().into_values().collect();
            TradeSeries::new(id, window.clone(), ticks)
        })
        .collect()
}

pub fn read_trades_csv(path: impl AsRef<Path>) -> Result<Vec<TradeSeries>> {
    read_trades(File::open(path)?)
}

/// Writes series in the trade CSV layout. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_trades<W: Write>(output: W, series: &[TradeSeries]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(TRADES_HEADER)?;
    for s in series {
        for (i, t) in s.ticks().iter().enumerate() {
            writer.write_record([
                s.security_id().to_owned(),
                (i + 1).to_string(),
                t.value().to_string(),
                t.volume().to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_trades_csv(path: impl AsRef<Path>, series: &[TradeSeries]) -> Result<()> {
    write_trades(File::create(path)?, series)
}

pub fn read_portfolio<R: Read>(input: R) -> Result<Portfolio> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &PORTFOLIO_HEADER)?;
    let mut ids = Vec::new();
    let mut holdings = Vec::new();
    let mut prices = Vec::new();
    for (idx, record) in reader.deserialize::<HoldingRow>().enumerate() {
        let row = idx + 2;
        let rec = record.map_err(|e| Error::InvalidRow {
            row,
            reason: e.to_string(),
        })?;
        if ids.contains(&rec.security_id) {
            return Err(Error::InvalidRow {
                row,
                reason: format!("duplicate security '{}'", rec.security_id),
            });
        }
        if !(rec.holding.is_finite() && rec.holding > 0.0) {
            return Err(Error::InvalidRow {
                row,
                reason: format!("holding must be > 0, got {}", rec.holding),
            });
        }
        if !(rec.price_at_t0.is_finite() && rec.price_at_t0 > 0.0) {
            return Err(Error::InvalidRow {
                row,
                reason: format!("price_at_t0 must be > 0, got {}", rec.price_at_t0),
            });
        }
        ids.push(rec.security_id);
        holdings.push(rec.holding);
        prices.push(rec.price_at_t0);
    }
    Portfolio::compose(&ids, &holdings, &prices)
}

pub fn read_portfolio_csv(path: impl AsRef<Path>) -> Result<Portfolio> {
    read_portfolio(File::open(path)?)
}

pub fn write_portfolio<W: Write>(output: W, portfolio: &Portfolio) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(PORTFOLIO_HEADER)?;
    for j in 0..portfolio.len() {
        writer.write_record([
            portfolio.security_ids[j].clone(),
            portfolio.holdings[j].to_string(),
            portfolio.composition_prices[j].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_portfolio_csv(path: impl AsRef<Path>, portfolio: &Portfolio) -> Result<()> {
    write_portfolio(File::create(path)?, portfolio)
}
