//! Sentiment and price CSV readers.
//!
//! Sentiment: `timestamp_utc,symbol,bull_scored_messages,bear_scored_messages`,
//! one row per symbol and day. Prices: `date,symbol,close,high,low`.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ActivitySeries, PriceSeries};

pub const SENTIMENT_COLUMNS: [&str; 4] = ["timestamp_utc", "symbol", "bull_scored_messages", "bear_scored_messages"];
pub const PRICE_COLUMNS: [&str; 5] = ["date", "symbol", "close", "high", "low"];

/// A data row that was skipped, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub series: BTreeMap<String, T>,
    pub rejected: Vec<RejectedRow>,
}

impl<T> Loaded<T> {
    /// Summary of rejected rows, or `None` when every row was accepted.
    pub fn rejection_report(&self) -> Option<String> {
        if self.rejected.is_empty() {
            return None;
        }
        let lines: Vec<String> = self.rejected.iter().map(|r| format!("line {}: {}", r.line, r.reason)).collect();
        Some(lines.join("\n"))
    }
}

/// Accepts `YYYY-MM-DD` optionally followed by a time part (`T…` or ` …`).
pub fn parse_day(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let day = match s.get(..10) {
        Some(d) if s.len() == 10 || matches!(s.as_bytes()[10], b'T' | b' ') => d,
        _ => return None,
    };
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

fn column_indices(headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    let names: Vec<&str> = headers.iter().map(|h| h.trim().trim_start_matches('\u{feff}')).collect();
    let missing: Vec<&str> = wanted.iter().copied().filter(|w| !names.contains(w)).collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("missing column(s): {}", missing.join(", "))));
    }
    Ok(wanted.iter().map(|w| names.iter().position(|n| n == w).unwrap_or_default()).collect())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input)
}

/// Iterate data rows, handing each to `row` with the selected fields; errors
/// from `row` become rejections.
fn scan_rows<R: Read>(
    input: R,
    columns: &[&str],
    what: &str,
    mut row: impl FnMut(u64, &[&str]) -> std::result::Result<(), String>,
) -> Result<Vec<RejectedRow>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Data(format!("empty {what} file")));
    }
    let idx = column_indices(&headers, columns)?;
    let mut rejected = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(line, |p| p.line());
                if record.iter().all(|f| f.is_empty()) {
                    continue;
                }
                if record.len() != headers.len() {
                    rejected.push(RejectedRow { line, reason: format!("expected {} fields, found {}", headers.len(), record.len()) });
                    continue;
                }
                let fields: Vec<&str> = idx.iter().map(|&i| &record[i]).collect();
                if let Err(reason) = row(line, &fields) {
                    rejected.push(RejectedRow { line, reason });
                }
            }
            Err(e) => rejected.push(RejectedRow { line, reason: e.to_string() }),
        }
    }
    Ok(rejected)
}

fn parse_count(s: &str, name: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<i64>() {
        return u64::try_from(v).map_err(|_| format!("{name} is negative ({v})"));
    }
    Err(format!("{name} is not an integer ({s:?})"))
}

fn parse_symbol(s: &str) -> std::result::Result<String, String> {
    if s.is_empty() {
        Err("empty symbol".into())
    } else {
        Ok(s.to_string())
    }
}

/// Parse sentiment rows; rows sharing a date and symbol are summed.
pub fn parse_sentiment<R: Read>(input: R) -> Result<Loaded<ActivitySeries>> {
    let mut days: BTreeMap<String, BTreeMap<NaiveDate, (u64, u64)>> = BTreeMap::new();
    let rejected = scan_rows(input, &SENTIMENT_COLUMNS, "sentiment", |_, f| {
        let date = parse_day(f[0]).ok_or_else(|| format!("unparseable date {:?}", f[0]))?;
        let symbol = parse_symbol(f[1])?;
        let bull = parse_count(f[2], "bull_scored_messages")?;
        let bear = parse_count(f[3], "bear_scored_messages")?;
        let slot = days.entry(symbol).or_default().entry(date).or_default();
        slot.0 = slot.0.checked_add(bull).ok_or("bullish count overflow")?;
        slot.1 = slot.1.checked_add(bear).ok_or("bearish count overflow")?;
        Ok(())
    })?;
    if days.is_empty() {
        return Err(Error::Data(if rejected.is_empty() {
            "sentiment file has no data rows".into()
        } else {
            format!("no valid sentiment rows ({} rejected)", rejected.len())
        }));
    }
    let mut series = BTreeMap::new();
    for (symbol, by_day) in days {
        let (dates, counts): (Vec<NaiveDate>, Vec<(u64, u64)>) = by_day.into_iter().unzip();
        let (bull, bear) = counts.into_iter().unzip();
        series.insert(symbol, ActivitySeries::new(dates, bull, bear)?);
    }
    Ok(Loaded { series, rejected })
}

pub fn load_sentiment_csv(path: &Path) -> Result<Loaded<ActivitySeries>> {
    parse_sentiment(std::fs::File::open(path)?)
}

fn parse_price(s: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{name} is not a number ({s:?})"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("{name} must be positive, got {s}"));
    }
    Ok(v)
}

/// Parse price rows; output is date-sorted per symbol. Bad rows are rejected
/// individually; a duplicated date rejects every row carrying it.
pub fn parse_prices<R: Read>(input: R) -> Result<Loaded<PriceSeries>> {
    type Row = (u64, f64, f64, f64);
    let mut days: BTreeMap<String, BTreeMap<NaiveDate, Vec<Row>>> = BTreeMap::new();
    let mut rejected = scan_rows(input, &PRICE_COLUMNS, "price", |line, f| {
        let date = NaiveDate::parse_from_str(f[0], "%Y-%m-%d").map_err(|_| format!("unparseable date {:?}", f[0]))?;
        let symbol = parse_symbol(f[1])?;
        let close = parse_price(f[2], "close")?;
        let high = parse_price(f[3], "high")?;
        let low = parse_price(f[4], "low")?;
        if high < low {
            return Err(format!("high {high} below low {low}"));
        }
        days.entry(symbol).or_default().entry(date).or_default().push((line, close, high, low));
        Ok(())
    })?;
    let mut series = BTreeMap::new();
    for (symbol, by_day) in days {
        let mut dates = Vec::new();
        let (mut close, mut high, mut low) = (Vec::new(), Vec::new(), Vec::new());
        for (date, rows) in by_day {
            if rows.len() > 1 {
                for (line, ..) in &rows {
                    rejected.push(RejectedRow { line: *line, reason: format!("{symbol}: duplicate date {date}") });
                }
                continue;
            }
            let (_, c, h, l) = rows[0];
            dates.push(date);
            close.push(c);
            high.push(h);
            low.push(l);
        }
        if !dates.is_empty() {
            series.insert(symbol, PriceSeries::new(dates, close, high, low)?);
        }
    }
    rejected.sort_by_key(|r| r.line);
    if series.is_empty() {
        return Err(Error::Data(format!("no valid price rows ({} rejected)", rejected.len())));
    }
    Ok(Loaded { series, rejected })
}

pub fn load_prices_csv(path: &Path) -> Result<Loaded<PriceSeries>> {
    parse_prices(std::fs::File::open(path)?)
}

/// Write sentiment rows in the reader's schema, symbols then dates ascending.
pub fn write_sentiment_csv<W: std::io::Write>(out: W, series: &BTreeMap<String, ActivitySeries>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SENTIMENT_COLUMNS)?;
    for (symbol, a) in series {
        for i in 0..a.len() {
            w.write_record([a.dates[i].to_string(), symbol.clone(), a.bullish[i].to_string(), a.bearish[i].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write price rows in the reader's schema; floats use the shortest
/// round-tripping representation.
pub fn write_prices_csv<W: std::io::Write>(out: W, series: &BTreeMap<String, PriceSeries>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PRICE_COLUMNS)?;
    for (symbol, p) in series {
        for i in 0..p.len() {
            w.write_record([
                p.dates[i].to_string(),
                symbol.clone(),
                p.close[i].to_string(),
                p.high[i].to_string(),
                p.low[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
