//! Participation-rate bands driven by eligible-volume accounting.
//!
//! The three trajectories are running integrals of the participation
//! rates against eligible displayed volume, realized as an event-driven
//! sum over trades (exact for step-function rates). Dark block fills
//! shift all trajectories without counting toward eligible volume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{BandSet, Order, Side};

/// Piecewise-constant function of time: `points` holds (from_time, value)
/// pairs sorted by time; the first value also applies before its time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    points: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn constant(value: f64) -> StepFunction {
        StepFunction {
            points: vec![(0.0, value)],
        }
    }

    pub fn new(points: Vec<(f64, f64)>) -> Result<StepFunction> {
        if points.is_empty() {
            return Err(Error::invalid("points", "step function needs >= 1 point"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("points", "times must be strictly increasing"));
        }
        Ok(StepFunction { points })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut value = self.points[0].1;
        for &(from, v) in &self.points {
            if from <= t {
                value = v;
            } else {
                break;
            }
        }
        value
    }

    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(t, _)| t)
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(_, v)| v)
    }
}

/// Minimum / target / maximum participation rates, each in [0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovRates {
    pub p_min: StepFunction,
    pub p_tgt: StepFunction,
    pub p_max: StepFunction,
}

impl PovRates {
    pub fn constant(p_min: f64, p_tgt: f64, p_max: f64) -> Result<PovRates> {
        let rates = PovRates {
            p_min: StepFunction::constant(p_min),
            p_tgt: StepFunction::constant(p_tgt),
            p_max: StepFunction::constant(p_max),
        };
        rates.validate()?;
        Ok(rates)
    }

    /// Client gives a single target rate with a tolerance.
    pub fn from_target(p_tgt: f64, tol: f64) -> Result<PovRates> {
        if tol < 0.0 {
            return Err(Error::invalid("tol", "must be >= 0"));
        }
        Self::constant((p_tgt - tol).max(0.0), p_tgt, p_tgt + tol)
    }

    /// Client gives a range; the target is its midpoint.
    pub fn from_range(p_min: f64, p_max: f64) -> Result<PovRates> {
        Self::constant(p_min, 0.5 * (p_min + p_max), p_max)
    }

    pub fn validate(&self) -> Result<()> {
        for f in [&self.p_min, &self.p_tgt, &self.p_max] {
            if f.values().any(|v| !(0.0..1.0).contains(&v)) {
                return Err(Error::invalid("rates", "each rate must lie in [0, 1)"));
            }
        }
        // Ordering must hold across every rate regime.
        let mut ts: Vec<f64> = self
            .p_min
            .breakpoints()
            .chain(self.p_tgt.breakpoints())
            .chain(self.p_max.breakpoints())
            .collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for t in ts {
            let (lo, mid, hi) = (self.p_min.eval(t), self.p_tgt.eval(t), self.p_max.eval(t));
            if !(lo <= mid && mid <= hi) {
                return Err(Error::invalid(
                    "rates",
                    format!("p_min <= p_tgt <= p_max violated at t={t}: {lo}, {mid}, {hi}"),
                ));
            }
        }
        Ok(())
    }
}

/// Running eligible-volume state for one POV order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EligibleVolumeAccumulator {
    /// Cumulative eligible shares since order start.
    pub v_e: f64,
    pub last_update: f64,
    pub int_min: f64,
    pub int_tgt: f64,
    pub int_max: f64,
    /// Trajectory shift from dark block executions (not eligible volume).
    pub block_offset: f64,
}

impl EligibleVolumeAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Whether a displayed trade counts toward eligible volume: inside
    /// the order's limit price, or unconditionally without a limit.
    pub fn trade_eligible(order: &Order, trade_price: f64) -> bool {
        match (order.limit_price, order.side) {
            (None, _) => true,
            (Some(limit), Side::Buy) => trade_price <= limit,
            (Some(limit), Side::Sell) => trade_price >= limit,
        }
    }

    /// Fold one displayed market trade into the accumulator. Each
    /// trajectory integral advances by `rate(t) * qty`, the Stieltjes sum
    /// for the rate-against-eligible-volume integral.
    pub fn on_market_trade(
        &mut self,
        trade_qty: f64,
        trade_price: f64,
        order: &Order,
        rates: &PovRates,
        t: f64,
    ) {
        debug_assert!(trade_qty > 0.0);
        self.last_update = t;
        if !Self::trade_eligible(order, trade_price) {
            return;
        }
        self.v_e += trade_qty;
        self.int_min += rates.p_min.eval(t) * trade_qty;
        self.int_tgt += rates.p_tgt.eval(t) * trade_qty;
        self.int_max += rates.p_max.eval(t) * trade_qty;
    }

    /// Credit a block execution to every trajectory without touching
    /// eligible volume.
    pub fn apply_block(&mut self, block: f64) -> Result<()> {
        if !(block > 0.0) {
            return Err(Error::invalid("block", "must be > 0"));
        }
        self.block_offset += block;
        Ok(())
    }

    /// Current bands: each trajectory is its rate integral plus the block
    /// offset, capped at the order total.
    pub fn bands_at(&self, x0: f64) -> BandSet {
        let cap = |v: f64| (v + self.block_offset).min(x0).max(0.0);
        BandSet {
            t: self.last_update,
            x_min: cap(self.int_min),
            x_tgt: cap(self.int_tgt),
            x_max: cap(self.int_max),
            x0,
        }
    }
}
