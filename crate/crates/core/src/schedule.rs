//! Band geometry and the aggressive/passive/dark partition of residual
//! shares.
//!
//! A schedule-based strategy publishes three trajectories: a lower band
//! `x_min`, a target `x_tgt`, and an upper band `x_max`. The filled
//! position relative to those trajectories fully determines how many
//! shares go to aggressive orders, passive limit orders, and dark
//! crossing at any instant. Everything here is strategy-agnostic: VWAP,
//! POV, and IS differ only in how they produce the [`BandSet`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    /// +1 for buys, -1 for sells; multiplies price deltas so costs are
    /// positive when execution is worse than the reference.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }
}

/// Venue class of a fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Venue {
    Displayed,
    Dark,
}

/// The parent order being worked.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Order {
    pub side: Side,
    /// Total shares to execute (X0).
    pub total_shares: f64,
    /// Session-clock start of trading, seconds.
    #[serde(default)]
    pub start_time: f64,
    /// Optional hard end time; `None` means trade until done.
    #[serde(default)]
    pub end_time: Option<f64>,
    /// Optional limit price constraining both our fills and POV
    /// eligible-volume accounting.
    #[serde(default)]
    pub limit_price: Option<f64>,
}

impl Order {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_shares > 0.0) {
            return Err(Error::invalid("total_shares", "must be > 0"));
        }
        if let Some(t1) = self.end_time {
            if t1 <= self.start_time {
                return Err(Error::invalid("end_time", "must be after start_time"));
            }
        }
        if let Some(px) = self.limit_price {
            if !(px > 0.0) {
                return Err(Error::invalid("limit_price", "must be > 0"));
            }
        }
        Ok(())
    }
}

/// One execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRecord {
    pub time: f64,
    pub qty: f64,
    pub price: f64,
    pub venue: Venue,
    pub aggressive: bool,
}

/// Running fill state of one order: the realized trajectory X_f.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExecutionState {
    pub filled: f64,
    pub fills: Vec<FillRecord>,
}

impl ExecutionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a fill, keeping `filled` equal to the sum of fill
    /// quantities.
    pub fn add_fill(&mut self, fill: FillRecord) {
        debug_assert!(fill.qty > 0.0 && fill.price > 0.0);
        self.filled += fill.qty;
        self.fills.push(fill);
    }

    /// Quantity-weighted average fill price; `None` before the first fill.
    pub fn avg_price(&self) -> Option<f64> {
        if self.filled <= 0.0 {
            return None;
        }
        let notional: f64 = self.fills.iter().map(|f| f.qty * f.price).sum();
        Some(notional / self.filled)
    }
}

/// The three schedule trajectories evaluated at one time point, with the
/// order total for context. Invariant: 0 <= x_min <= x_tgt <= x_max <= x0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    pub t: f64,
    pub x_min: f64,
    pub x_tgt: f64,
    pub x_max: f64,
    pub x0: f64,
}

impl BandSet {
    pub fn new(t: f64, x_min: f64, x_tgt: f64, x_max: f64, x0: f64) -> Result<Self> {
        let b = BandSet {
            t,
            x_min,
            x_tgt,
            x_max,
            x0,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.x_min
            && self.x_min <= self.x_tgt
            && self.x_tgt <= self.x_max
            && self.x_max <= self.x0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "bands",
                format!(
                    "ordering violated: 0 <= {} <= {} <= {} <= {}",
                    self.x_min, self.x_tgt, self.x_max, self.x0
                ),
            ))
        }
    }

    /// Shift every trajectory up by a block execution, clamping into
    /// [0, x0]. A dark block is credited to the schedule immediately, so
    /// it neither pauses trading (band shift tracks the fill) nor counts
    /// as schedule progress beyond the block itself.
    pub fn with_block_fill(&self, block: f64) -> Result<BandSet> {
        if !(block > 0.0) {
            return Err(Error::invalid("block", "must be > 0"));
        }
        let clamp = |v: f64| v.clamp(0.0, self.x0);
        Ok(BandSet {
            t: self.t,
            x_min: clamp(self.x_min + block),
            x_tgt: clamp(self.x_tgt + block),
            x_max: clamp(self.x_max + block),
            x0: self.x0,
        })
    }
}

/// Position of the filled shares relative to the bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compliance {
    /// Filled lags the lower band: cover the shortfall aggressively.
    BelowMin,
    /// Filled within [x_min, x_max]; boundaries count as within.
    Within,
    /// Filled ahead of the upper band: pause displayed slicing.
    AboveMax,
}

/// Allocation of the order residual at one instant.
///
/// `x_a` covers the lower-band shortfall aggressively, `x_p1` is the
/// additional shortfall to the target (promotable to aggressive under a
/// favorable signal), `x_p2` the remaining passive discretion, and `x_d`
/// the residual above the upper band available only to dark crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharePartition {
    pub x_a: f64,
    pub x_p1: f64,
    pub x_p2: f64,
    pub x_d: f64,
}

impl SharePartition {
    /// Total passive quantity X_P = X_P1 + X_P2.
    pub fn passive(&self) -> f64 {
        self.x_p1 + self.x_p2
    }
}

/// Split the residual shares into aggressive / passive / dark components
/// from the filled position and the current bands:
///
/// ```text
/// X_A  = max(0, x_min - filled)
/// X_P  = max(0, x_max - max(filled, x_min))
/// X_P1 = max(0, x_tgt - max(filled, x_min))
/// X_P2 = X_P - X_P1
/// X_D  = x0 - x_max
/// ```
pub fn compute_partition(bands: &BandSet, filled: f64) -> Result<SharePartition> {
    bands.validate()?;
    if filled < 0.0 || filled > bands.x0 {
        return Err(Error::FilledOutOfRange {
            filled,
            x0: bands.x0,
        });
    }
    let floor = filled.max(bands.x_min);
    let x_a = (bands.x_min - filled).max(0.0);
    let x_p = (bands.x_max - floor).max(0.0);
    let x_p1 = (bands.x_tgt - floor).max(0.0);
    let x_p2 = x_p - x_p1;
    let x_d = bands.x0 - bands.x_max;
    Ok(SharePartition {
        x_a,
        x_p1,
        x_p2,
        x_d,
    })
}

/// Classify the filled position against the bands. Exact boundary values
/// count as `Within` (the band constraints are non-strict).
pub fn band_compliance(bands: &BandSet, filled: f64) -> Compliance {
    if filled < bands.x_min {
        Compliance::BelowMin
    } else if filled > bands.x_max {
        Compliance::AboveMax
    } else {
        Compliance::Within
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bands(x_min: f64, x_tgt: f64, x_max: f64, x0: f64) -> BandSet {
        BandSet::new(0.0, x_min, x_tgt, x_max, x0).unwrap()
    }

    #[test]
    fn partition_interior_case() {
        let p = compute_partition(&bands(100.0, 150.0, 200.0, 1000.0), 50.0).unwrap();
        assert_eq!(p.x_a, 50.0);
        assert_eq!(p.x_p1, 50.0);
        assert_eq!(p.x_p2, 50.0);
        assert_eq!(p.x_d, 800.0);
    }

    #[test]
    fn partition_at_order_start_is_all_dark() {
        let p = compute_partition(&bands(0.0, 0.0, 0.0, 1000.0), 0.0).unwrap();
        assert_eq!(
            p,
            SharePartition {
                x_a: 0.0,
                x_p1: 0.0,
                x_p2: 0.0,
                x_d: 1000.0
            }
        );
    }

    #[test]
    fn partition_filled_at_upper_band() {
        let p = compute_partition(&bands(100.0, 150.0, 200.0, 1000.0), 200.0).unwrap();
        assert_eq!(p.x_a, 0.0);
        assert_eq!(p.x_p1, 0.0);
        assert_eq!(p.x_p2, 0.0);
        assert_eq!(p.x_d, 800.0);
    }

    #[test]
    fn partition_filled_above_upper_band_clamps_passive() {
        let p = compute_partition(&bands(100.0, 150.0, 200.0, 1000.0), 250.0).unwrap();
        assert_eq!(p.x_a, 0.0);
        assert_eq!(p.x_p1, 0.0);
        assert_eq!(p.x_p2, 0.0);
        assert_eq!(p.x_d, 800.0);
    }

    #[test]
    fn partition_rejects_out_of_range_fill() {
        let b = bands(100.0, 150.0, 200.0, 1000.0);
        assert!(compute_partition(&b, -1.0).is_err());
        assert!(compute_partition(&b, 1000.5).is_err());
    }

    #[test]
    fn compliance_boundaries_are_within() {
        let b = bands(100.0, 150.0, 200.0, 1000.0);
        assert_eq!(band_compliance(&b, 100.0), Compliance::Within);
        assert_eq!(band_compliance(&b, 200.0), Compliance::Within);
        assert_eq!(band_compliance(&b, 99.0), Compliance::BelowMin);
        assert_eq!(band_compliance(&b, 201.0), Compliance::AboveMax);
    }

    #[test]
    fn block_fill_shifts_all_trajectories() {
        let b = bands(100.0, 150.0, 200.0, 1000.0)
            .with_block_fill(300.0)
            .unwrap();
        assert_eq!((b.x_min, b.x_tgt, b.x_max), (400.0, 450.0, 500.0));
    }

    #[test]
    fn block_fill_clamps_at_order_total() {
        let b = bands(100.0, 150.0, 200.0, 1000.0)
            .with_block_fill(900.0)
            .unwrap();
        assert_eq!((b.x_min, b.x_tgt, b.x_max), (1000.0, 1000.0, 1000.0));
    }

    #[test]
    fn block_fill_rejects_non_positive_block() {
        let b = bands(0.0, 0.0, 0.0, 1000.0);
        assert!(b.with_block_fill(0.0).is_err());
        assert!(b.with_block_fill(-5.0).is_err());
    }

    #[test]
    fn order_validation() {
        let mut o = Order {
            side: Side::Buy,
            total_shares: 100.0,
            start_time: 0.0,
            end_time: Some(60.0),
            limit_price: None,
        };
        assert!(o.validate().is_ok());
        o.end_time = Some(0.0);
        assert!(o.validate().is_err());
        o.end_time = None;
        o.total_shares = 0.0;
        assert!(o.validate().is_err());
    }

    #[test]
    fn execution_state_tracks_sum_and_avg() {
        let mut st = ExecutionState::new();
        st.add_fill(FillRecord {
            time: 1.0,
            qty: 100.0,
            price: 10.0,
            venue: Venue::Displayed,
            aggressive: true,
        });
        st.add_fill(FillRecord {
            time: 2.0,
            qty: 300.0,
            price: 10.04,
            venue: Venue::Dark,
            aggressive: false,
        });
        assert_eq!(st.filled, 400.0);
        assert!((st.avg_price().unwrap() - 10.03).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn partition_invariants(
            (x0, f0, f1, f2, filled_frac) in (
                1.0..1e7f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64
            )
        ) {
            // Build an ordered band triple from sorted fractions.
            let mut fs = [f0, f1, f2];
            fs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let b = bands(fs[0] * x0, fs[1] * x0, fs[2] * x0, x0);
            let filled = filled_frac * x0;
            let p = compute_partition(&b, filled).unwrap();

            prop_assert!(p.x_a >= 0.0 && p.x_p1 >= 0.0 && p.x_p2 >= 0.0 && p.x_d >= 0.0);
            // Aggressive shares exist iff filled lags the lower band.
            prop_assert_eq!(p.x_a > 0.0, filled < b.x_min);
            // Passive identity.
            let xp = (b.x_max - filled.max(b.x_min)).max(0.0);
            prop_assert!((p.x_p1 + p.x_p2 - xp).abs() <= 1e-9 * b.x0);
            // Dark complement.
            prop_assert!((p.x_d + b.x_max - b.x0).abs() <= 1e-9 * b.x0);

            // Monotonicity: more filled never increases A/P1/P2.
            let filled2 = (filled + 0.1 * x0).min(x0);
            let p2 = compute_partition(&b, filled2).unwrap();
            prop_assert!(p2.x_a <= p.x_a + 1e-9 * x0);
            prop_assert!(p2.x_p1 <= p.x_p1 + 1e-9 * x0);
            prop_assert!(p2.x_p2 <= p.x_p2 + 1e-9 * x0);
        }

        #[test]
        fn block_fill_preserves_width_until_clamp(
            (x0, f0, f2, block_frac) in (1.0..1e7f64, 0.0..1.0f64, 0.0..1.0f64, 0.001..1.0f64)
        ) {
            let (lo, hi) = if f0 <= f2 { (f0, f2) } else { (f2, f0) };
            let b = bands(lo * x0, 0.5 * (lo + hi) * x0, hi * x0, x0);
            let block = block_frac * x0;
            let shifted = b.with_block_fill(block).unwrap();
            shifted.validate().unwrap();
            if shifted.x_max < x0 {
                // No clamp engaged: width is preserved.
                prop_assert!(((shifted.x_max - shifted.x_min) - (b.x_max - b.x_min)).abs() <= 1e-9 * x0);
            } else {
                prop_assert!(shifted.x_max - shifted.x_min <= b.x_max - b.x_min + 1e-9 * x0);
            }
        }
    }
}
