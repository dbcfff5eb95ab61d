//! Run outputs: trajectory and fill CSVs, tick-report JSON lines, and
//! the summary metrics JSON. Every emitted format re-parses into equal
//! values, and the headline slippage numbers are recomputable from the
//! fills file alone.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::driver::{DriverTickReport, RunResult};
use crate::error::{Error, Result};
use crate::schedule::{Compliance, FillRecord, Order, Side, Venue};

/// Version stamp carried by the metrics JSON and understood by the
/// readers here.
pub const SCHEMA_VERSION: u32 = 1;

/// One row of the trajectory file: the bands and the realized position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x_min: f64,
    pub x_tgt: f64,
    pub x_max: f64,
    pub x_f: f64,
}

/// Summary metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub schema_version: u32,
    pub strategy: String,
    pub seed: u64,
    pub side: Side,
    pub total_shares: f64,
    pub filled: f64,
    pub avg_fill_price: Option<f64>,
    pub arrival_mid: f64,
    pub market_vwap: Option<f64>,
    /// side-signed (avg fill - arrival mid) / arrival mid, in bp.
    pub shortfall_bps: Option<f64>,
    /// side-signed (avg fill - market VWAP) / market VWAP, in bp.
    pub vwap_slippage_bps: Option<f64>,
    /// Fraction of tick reports with the fill position inside the bands.
    pub band_compliance: f64,
    /// Dark share of the filled quantity.
    pub dark_fill_fraction: f64,
    /// filled / eligible volume (POV runs).
    pub participation_realized: Option<f64>,
    pub completed_at: Option<f64>,
}

/// Signed price deviation in basis points; positive numbers are costs
/// (buys above / sells below the reference).
pub fn slippage_bps(side: Side, avg_price: f64, reference: f64) -> f64 {
    side.sign() * (avg_price - reference) / reference * 1e4
}

/// Quantity-weighted average fill price; `None` without fills.
pub fn average_fill_price(fills: &[FillRecord]) -> Option<f64> {
    let qty: f64 = fills.iter().map(|f| f.qty).sum();
    if qty <= 0.0 {
        return None;
    }
    Some(fills.iter().map(|f| f.qty * f.price).sum::<f64>() / qty)
}

/// Build the summary metrics for a completed (or expired) run.
pub fn compute_metrics(order: &Order, run: &RunResult, strategy: &str, seed: u64) -> Metrics {
    let avg = average_fill_price(&run.state.fills);
    // fold instead of sum: f64::sum of an empty iterator is -0.0, which
    // would leak a negative zero into the serialized metrics.
    let dark_qty: f64 = run
        .state
        .fills
        .iter()
        .filter(|f| f.venue == Venue::Dark)
        .fold(0.0, |acc, f| acc + f.qty);
    let within = run
        .reports
        .iter()
        .filter(|r| r.compliance == Compliance::Within)
        .count();
    let compliance = if run.reports.is_empty() {
        1.0
    } else {
        within as f64 / run.reports.len() as f64
    };
    Metrics {
        schema_version: SCHEMA_VERSION,
        strategy: strategy.to_string(),
        seed,
        side: order.side,
        total_shares: order.total_shares,
        filled: run.state.filled,
        avg_fill_price: avg,
        arrival_mid: run.arrival_mid,
        market_vwap: run.market_vwap,
        shortfall_bps: avg.map(|a| slippage_bps(order.side, a, run.arrival_mid)),
        vwap_slippage_bps: avg
            .and_then(|a| run.market_vwap.map(|v| slippage_bps(order.side, a, v))),
        band_compliance: compliance,
        dark_fill_fraction: if run.state.filled > 0.0 {
            dark_qty / run.state.filled
        } else {
            0.0
        },
        participation_realized: run
            .eligible_volume
            .filter(|&ve| ve > 0.0)
            .map(|ve| run.state.filled / ve),
        completed_at: run.completed_at,
    }
}

/// Trajectory rows from the tick reports.
pub fn trajectory_rows(reports: &[DriverTickReport]) -> Vec<TrajectoryRow> {
    reports
        .iter()
        .map(|r| TrajectoryRow {
            t: r.time,
            x_min: r.bands.x_min,
            x_tgt: r.bands.x_tgt,
            x_max: r.bands.x_max,
            x_f: r.filled,
        })
        .collect()
}

fn csv_err(e: impl std::fmt::Display, what: &str) -> Error {
    Error::Parse {
        path: what.to_string(),
        reason: e.to_string(),
    }
}

pub fn write_trajectory_csv<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)
            .map_err(|e| csv_err(e, "<trajectory csv>"))?;
    }
    wtr.flush().map_err(|e| csv_err(e, "<trajectory csv>"))
}

pub fn read_trajectory_csv<R: std::io::Read>(r: R) -> Result<Vec<TrajectoryRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_err(e, "<trajectory csv>"))
}

pub fn write_fills_csv<W: Write>(w: W, fills: &[FillRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for fill in fills {
        wtr.serialize(fill).map_err(|e| csv_err(e, "<fills csv>"))?;
    }
    wtr.flush().map_err(|e| csv_err(e, "<fills csv>"))
}

pub fn read_fills_csv<R: std::io::Read>(r: R) -> Result<Vec<FillRecord>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_err(e, "<fills csv>"))
}

/// Tick reports as JSON lines, one report per line.
pub fn write_tick_reports_jsonl<W: Write>(mut w: W, reports: &[DriverTickReport]) -> Result<()> {
    for report in reports {
        let line = serde_json::to_string(report).expect("report serializes");
        writeln!(w, "{line}").map_err(|e| Error::Io {
            path: "<ticks jsonl>".into(),
            source: e,
        })?;
    }
    Ok(())
}

pub fn read_tick_reports_jsonl<R: std::io::Read>(r: R) -> Result<Vec<DriverTickReport>> {
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: "<ticks jsonl>".into(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let report = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: "<ticks jsonl>".into(),
            reason: format!("line {i}: {e}"),
        })?;
        out.push(report);
    }
    Ok(out)
}

pub fn write_metrics_json<W: Write>(mut w: W, metrics: &Metrics) -> Result<()> {
    let text = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(|e| Error::Io {
            path: "<metrics json>".into(),
            source: e,
        })
}

pub fn read_metrics_json<R: std::io::Read>(r: R) -> Result<Metrics> {
    let metrics: Metrics = serde_json::from_reader(r).map_err(|e| Error::Parse {
        path: "<metrics json>".into(),
        reason: e.to_string(),
    })?;
    if metrics.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: "<metrics json>".into(),
            reason: format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                metrics.schema_version
            ),
        });
    }
    Ok(metrics)
}
