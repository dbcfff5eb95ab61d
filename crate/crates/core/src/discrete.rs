//! Discretized-time scheduling: the trading interval is divided into
//! bins and a short-duration tactical strategy receives, per bin, a
//! quantity, a duration, and a minimum fill. Shortfalls carry forward
//! into the next bin's mandatory component, which keeps clean-up costs
//! at bin ends instead of letting them accumulate to the order end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{BandSet, ExecutionState, FillRecord, Order, Side};
use crate::shortfall::{is_bands_at, IsBandDurations};
use crate::vwap::{VolumeProfile, VwapConfig};

/// Time coordinate the bin grid lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinCoordinate {
    Clock,
    Volume,
    Trade,
}

/// Uniform bin grid over `[tau0, tau1]` in the chosen coordinate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BinGrid {
    pub coordinate: BinCoordinate,
    pub n_bins: usize,
    pub tau0: f64,
    pub tau1: f64,
}

impl BinGrid {
    pub fn new(coordinate: BinCoordinate, n_bins: usize, tau0: f64, tau1: f64) -> Result<BinGrid> {
        if n_bins == 0 {
            return Err(Error::invalid("n_bins", "must be >= 1"));
        }
        if !(tau1 > tau0) {
            return Err(Error::invalid("tau1", "must exceed tau0"));
        }
        Ok(BinGrid {
            coordinate,
            n_bins,
            tau0,
            tau1,
        })
    }

    /// Uniform bin width in the grid coordinate.
    pub fn delta_tau(&self) -> f64 {
        (self.tau1 - self.tau0) / self.n_bins as f64
    }

    /// Grid-coordinate value at boundary `k` (0..=n_bins).
    pub fn tau_at(&self, k: usize) -> f64 {
        if k >= self.n_bins {
            self.tau1
        } else {
            self.tau0 + self.delta_tau() * k as f64
        }
    }

    /// Clock times of the bin boundaries. Clock grids are uniform over
    /// `[t0, t1]`; volume and trade grids detect each boundary from the
    /// market stream (first trade at which cumulative volume or trade
    /// count crosses `k * delta_tau`), so the bin clock widths are
    /// realized rather than forecast. Boundaries never observed before
    /// the stream ends collapse onto `t1`.
    pub fn realized_boundaries(
        &self,
        trades: impl Iterator<Item = (f64, f64)>,
        t0: f64,
        t1: f64,
    ) -> Vec<f64> {
        let n = self.n_bins;
        let mut bounds = Vec::with_capacity(n + 1);
        bounds.push(t0);
        match self.coordinate {
            BinCoordinate::Clock => {
                for k in 1..n {
                    bounds.push(t0 + (t1 - t0) * k as f64 / n as f64);
                }
            }
            BinCoordinate::Volume | BinCoordinate::Trade => {
                let dtau = self.delta_tau();
                let mut cum = self.tau0;
                let mut next_k = 1usize;
                for (time, qty) in trades {
                    if next_k >= n {
                        break;
                    }
                    cum += match self.coordinate {
                        BinCoordinate::Volume => qty,
                        _ => 1.0,
                    };
                    while next_k < n && cum >= self.tau0 + dtau * next_k as f64 {
                        bounds.push(time.clamp(t0, t1));
                        next_k += 1;
                    }
                }
                while next_k < n {
                    bounds.push(t1);
                    next_k += 1;
                }
            }
        }
        bounds.push(t1);
        bounds
    }
}

/// One slice handed to the tactical strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TacticOrder {
    pub qty: f64,
    /// Clock duration of the bin.
    pub duration: f64,
    /// Shares that must be filled before the bin ends.
    pub min_fill: f64,
}

/// Plan the slice for bin `k` from the bands at the bin's end boundary:
/// `qty = max(0, x_max - filled)`, `min_fill = max(0, x_min - filled)`.
/// When the upper band has fallen below the filled position (e.g. after
/// a shrinking-band regime) the slice degenerates to a zero-quantity
/// no-op and the scheduler pauses for the bin.
pub fn plan_bin(k: usize, filled: f64, bands_at_bin_end: &BandSet, duration: f64) -> TacticOrder {
    debug_assert!(k >= 1);
    let qty = (bands_at_bin_end.x_max - filled).max(0.0);
    let min_fill = (bands_at_bin_end.x_min - filled).max(0.0).min(qty);
    TacticOrder {
        qty,
        duration,
        min_fill,
    }
}

/// A band producer evaluated on the grid coordinate.
pub trait BandCurve {
    fn bands_at(&self, tau: f64) -> Result<BandSet>;
}

/// Linear schedule with the lower band trailing the upper by a fixed
/// fraction of the order: the discretized VWAP structure in volume time,
/// where bin k must complete the shares of bin k-1.
#[derive(Debug, Clone, Copy)]
pub struct LaggedLinearCurve {
    pub x0: f64,
    pub tau0: f64,
    pub tau1: f64,
    /// Lag as a fraction of the order (1/N for the one-bin structure).
    pub lag: f64,
}

impl BandCurve for LaggedLinearCurve {
    fn bands_at(&self, tau: f64) -> Result<BandSet> {
        let u = ((tau - self.tau0) / (self.tau1 - self.tau0)).clamp(0.0, 1.0);
        let x_max = self.x0 * u;
        let x_min = (self.x0 * (u - self.lag)).max(0.0);
        BandSet::new(tau, x_min, 0.5 * (x_min + x_max), x_max, self.x0)
    }
}

/// VWAP profile bands on the clock coordinate.
#[derive(Debug, Clone)]
pub struct VwapBandCurve {
    pub profile: VolumeProfile,
    pub cfg: VwapConfig,
    pub x0: f64,
}

impl BandCurve for VwapBandCurve {
    fn bands_at(&self, tau: f64) -> Result<BandSet> {
        self.profile.bands_at(&self.cfg, self.x0, tau)
    }
}

/// Shortfall-schedule bands on the volume-time coordinate.
#[derive(Debug, Clone, Copy)]
pub struct IsBandCurve {
    pub durations: IsBandDurations,
    pub x0: f64,
}

impl BandCurve for IsBandCurve {
    fn bands_at(&self, tau: f64) -> Result<BandSet> {
        Ok(is_bands_at(&self.durations, self.x0, tau))
    }
}

/// Executes tactic orders over clock windows. Implementations must try
/// to honor the min-fill contract within the window; `cover` is the
/// clean-up path for any residue.
pub trait BinExecutor {
    fn execute(&mut self, order: &TacticOrder, window: (f64, f64), side: Side) -> Vec<FillRecord>;
    /// Immediately fill `qty` aggressively at clock time `t`.
    fn cover(&mut self, qty: f64, t: f64, side: Side) -> Vec<FillRecord>;
}

/// Per-bin accounting row emitted for clean-up-cost analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinLedgerRow {
    pub bin: usize,
    pub tau_end: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub qty: f64,
    pub min_fill: f64,
    /// Shares force-filled at the bin end to honor min_fill.
    pub cleanup: f64,
    pub filled_after: f64,
}

/// Result of a discretized run.
#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub state: ExecutionState,
    pub ledger: Vec<BinLedgerRow>,
}

/// Drive the bin loop: plan each bin against the bands at its end
/// boundary, dispatch to the tactic, fold fills back in, and clean up
/// any min-fill residue aggressively before planning the next bin. Stops
/// at completion or at the final boundary.
pub fn run_schedule(
    order: &Order,
    grid: &BinGrid,
    bands: &dyn BandCurve,
    executor: &mut dyn BinExecutor,
    clock_boundaries: &[f64],
) -> Result<ScheduleRun> {
    order.validate()?;
    if clock_boundaries.len() != grid.n_bins + 1 {
        return Err(Error::invalid(
            "clock_boundaries",
            format!(
                "expected {} boundaries, got {}",
                grid.n_bins + 1,
                clock_boundaries.len()
            ),
        ));
    }
    if clock_boundaries.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("clock_boundaries", "must be non-decreasing"));
    }

    let x0 = order.total_shares;
    let eps = 1e-9 * x0;
    let mut state = ExecutionState::new();
    let mut ledger = Vec::with_capacity(grid.n_bins);

    for k in 1..=grid.n_bins {
        let window = (clock_boundaries[k - 1], clock_boundaries[k]);
        let tau_end = grid.tau_at(k);
        let bins_bands = bands.bands_at(tau_end)?;
        bins_bands.validate()?;
        let plan = plan_bin(k, state.filled, &bins_bands, window.1 - window.0);

        let before = state.filled;
        if plan.qty > 0.0 {
            for fill in executor.execute(&plan, window, order.side) {
                state.add_fill(fill);
            }
        }
        debug_assert!(state.filled - before <= plan.qty + eps, "tactic overfilled");

        // Clean up any mandatory residue before the next bin.
        let required = before + plan.min_fill;
        let mut cleanup = 0.0;
        if state.filled + eps < required {
            cleanup = required - state.filled;
            for fill in executor.cover(cleanup, window.1, order.side) {
                state.add_fill(fill);
            }
            if state.filled + eps < required {
                return Err(Error::MinFillBreach {
                    bin: k,
                    required,
                    filled: state.filled,
                });
            }
        }

        ledger.push(BinLedgerRow {
            bin: k,
            tau_end,
            t_start: window.0,
            t_end: window.1,
            qty: plan.qty,
            min_fill: plan.min_fill,
            cleanup,
            filled_after: state.filled,
        });

        if state.filled >= x0 - eps {
            break;
        }
    }

    Ok(ScheduleRun { state, ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Venue;
    use proptest::prelude::*;

    fn test_order(x0: f64) -> Order {
        Order {
            side: Side::Buy,
            total_shares: x0,
            start_time: 0.0,
            end_time: Some(100.0),
            limit_price: None,
        }
    }

    /// Fills min_fill plus a fixed fraction of the discretionary excess.
    struct FractionalExecutor {
        frac: f64,
    }

    impl BinExecutor for FractionalExecutor {
        fn execute(&mut self, order: &TacticOrder, window: (f64, f64), _side: Side) -> Vec<FillRecord> {
            let qty = order.min_fill + self.frac * (order.qty - order.min_fill);
            if qty <= 0.0 {
                return vec![];
            }
            vec![FillRecord {
                time: window.1,
                qty,
                price: 10.0,
                venue: Venue::Displayed,
                aggressive: false,
            }]
        }

        fn cover(&mut self, qty: f64, t: f64, _side: Side) -> Vec<FillRecord> {
            vec![FillRecord {
                time: t,
                qty,
                price: 10.02,
                venue: Venue::Displayed,
                aggressive: true,
            }]
        }
    }

    /// Breaches the min-fill contract and cannot clean up.
    struct BrokenExecutor;

    impl BinExecutor for BrokenExecutor {
        fn execute(&mut self, order: &TacticOrder, window: (f64, f64), _side: Side) -> Vec<FillRecord> {
            let qty = 0.5 * order.min_fill;
            if qty <= 0.0 {
                return vec![];
            }
            vec![FillRecord {
                time: window.1,
                qty,
                price: 10.0,
                venue: Venue::Displayed,
                aggressive: false,
            }]
        }

        fn cover(&mut self, _qty: f64, _t: f64, _side: Side) -> Vec<FillRecord> {
            vec![]
        }
    }

    #[test]
    fn plan_first_bin_of_linear_vwap() {
        // Lagged linear structure: first bin has full discretion.
        let curve = LaggedLinearCurve {
            x0: 1000.0,
            tau0: 0.0,
            tau1: 1.0,
            lag: 0.25,
        };
        let b = curve.bands_at(0.25).unwrap();
        let plan = plan_bin(1, 0.0, &b, 25.0);
        assert_eq!(plan.qty, 250.0);
        assert_eq!(plan.min_fill, 0.0);
        assert_eq!(plan.duration, 25.0);
    }

    #[test]
    fn plan_second_bin_carries_shortfall_forward() {
        let curve = LaggedLinearCurve {
            x0: 1000.0,
            tau0: 0.0,
            tau1: 1.0,
            lag: 0.25,
        };
        let b = curve.bands_at(0.5).unwrap();
        // Filled f after bin 1: qty = 2 X0/N - f, min_fill = X0/N - f.
        let f = 100.0;
        let plan = plan_bin(2, f, &b, 25.0);
        assert_eq!(plan.qty, 500.0 - f);
        assert_eq!(plan.min_fill, 250.0 - f);
    }

    #[test]
    fn plan_degenerates_when_filled_at_upper_band() {
        let b = BandSet::new(0.5, 200.0, 250.0, 300.0, 1000.0).unwrap();
        let plan = plan_bin(3, 300.0, &b, 10.0);
        assert_eq!(plan.qty, 0.0);
        assert_eq!(plan.min_fill, 0.0);
        // Shrinking bands past the filled position also pause.
        let plan = plan_bin(3, 350.0, &b, 10.0);
        assert_eq!(plan.qty, 0.0);
    }

    #[test]
    fn single_bin_grid_is_one_tactic_order() {
        let grid = BinGrid::new(BinCoordinate::Clock, 1, 0.0, 1.0).unwrap();
        let curve = LaggedLinearCurve {
            x0: 1000.0,
            tau0: 0.0,
            tau1: 1.0,
            lag: 0.3,
        };
        let mut exec = FractionalExecutor { frac: 0.5 };
        let run = run_schedule(
            &test_order(1000.0),
            &grid,
            &curve,
            &mut exec,
            &[0.0, 100.0],
        )
        .unwrap();
        assert_eq!(run.ledger.len(), 1);
        let b1 = curve.bands_at(1.0).unwrap();
        assert!(run.state.filled >= b1.x_min - 1e-9);
        assert!(run.state.filled <= b1.x_max + 1e-9);
    }

    #[test]
    fn min_fill_tactic_walks_the_lower_envelope() {
        // Bands: x_min at boundary k is k*X0/4, x_max one bin ahead.
        struct LeadingCurve;
        impl BandCurve for LeadingCurve {
            fn bands_at(&self, tau: f64) -> Result<BandSet> {
                let x0 = 1000.0;
                let x_min = (x0 * tau).clamp(0.0, x0);
                let x_max = (x0 * (tau + 0.25)).clamp(0.0, x0);
                BandSet::new(tau, x_min, x_min, x_max, x0)
            }
        }
        let grid = BinGrid::new(BinCoordinate::Clock, 4, 0.0, 1.0).unwrap();
        let mut exec = FractionalExecutor { frac: 0.0 };
        let run = run_schedule(
            &test_order(1000.0),
            &grid,
            &LeadingCurve,
            &mut exec,
            &[0.0, 25.0, 50.0, 75.0, 100.0],
        )
        .unwrap();
        let path: Vec<f64> = run.ledger.iter().map(|r| r.filled_after).collect();
        assert_eq!(path, vec![250.0, 500.0, 750.0, 1000.0]);
        // Final bin min-fill forces completion because x_min(tau1) = X0.
        assert_eq!(run.state.filled, 1000.0);
    }

    #[test]
    fn full_fill_tactic_tracks_the_upper_envelope() {
        let curve = LaggedLinearCurve {
            x0: 1000.0,
            tau0: 0.0,
            tau1: 1.0,
            lag: 0.25,
        };
        let grid = BinGrid::new(BinCoordinate::Clock, 4, 0.0, 1.0).unwrap();
        let mut exec = FractionalExecutor { frac: 1.0 };
        let run = run_schedule(
            &test_order(1000.0),
            &grid,
            &curve,
            &mut exec,
            &[0.0, 25.0, 50.0, 75.0, 100.0],
        )
        .unwrap();
        for row in &run.ledger {
            let b = curve.bands_at(row.tau_end).unwrap();
            assert!((row.filled_after - b.x_max).abs() < 1e-9);
        }
    }

    #[test]
    fn min_fill_breach_is_a_hard_error() {
        let curve = LaggedLinearCurve {
            x0: 1000.0,
            tau0: 0.0,
            tau1: 1.0,
            lag: 0.25,
        };
        let grid = BinGrid::new(BinCoordinate::Clock, 4, 0.0, 1.0).unwrap();
        let mut exec = BrokenExecutor;
        let err = run_schedule(
            &test_order(1000.0),
            &grid,
            &curve,
            &mut exec,
            &[0.0, 25.0, 50.0, 75.0, 100.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::MinFillBreach { bin: 2, .. }), "{err}");
    }

    #[test]
    fn volume_coordinate_boundaries_from_stream() {
        let grid = BinGrid::new(BinCoordinate::Volume, 4, 0.0, 1000.0).unwrap();
        // Trades of 100 shares each second: boundary k at cum >= 250k.
        let trades = (0..20).map(|i| (i as f64, 100.0));
        let bounds = grid.realized_boundaries(trades, 0.0, 60.0);
        assert_eq!(bounds, vec![0.0, 2.0, 4.0, 7.0, 60.0]);
    }

    #[test]
    fn trade_coordinate_boundaries_from_stream() {
        let grid = BinGrid::new(BinCoordinate::Trade, 2, 0.0, 10.0).unwrap();
        let trades = (0..6).map(|i| (10.0 * i as f64, 1.0));
        let bounds = grid.realized_boundaries(trades, 0.0, 100.0);
        assert_eq!(bounds, vec![0.0, 40.0, 100.0]);
    }

    #[test]
    fn thin_stream_collapses_remaining_boundaries_to_session_end() {
        let grid = BinGrid::new(BinCoordinate::Volume, 4, 0.0, 1000.0).unwrap();
        let trades = std::iter::once((5.0, 300.0));
        let bounds = grid.realized_boundaries(trades, 0.0, 60.0);
        assert_eq!(bounds, vec![0.0, 5.0, 60.0, 60.0, 60.0]);
    }

    proptest! {
        #[test]
        fn boundary_compliance_with_honoring_tactic(
            n in 1usize..12,
            frac in 0.0..=1.0f64,
            lo_fracs in proptest::collection::vec(0.0..1.0f64, 12),
            widths in proptest::collection::vec(0.0..0.4f64, 12),
        ) {
            // Random monotone band path: x_min from sorted fractions,
            // x_max = min(1, x_min + width), both non-decreasing.
            let x0 = 10_000.0;
            let mut lows: Vec<f64> = lo_fracs[..n].to_vec();
            lows.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut highs = Vec::with_capacity(n);
            let mut hprev: f64 = 0.0;
            for k in 0..n {
                hprev = hprev.max((lows[k] + widths[k]).min(1.0)).max(lows[k]);
                highs.push(hprev);
            }
            struct PathCurve {
                x0: f64,
                taus: Vec<f64>,
                lows: Vec<f64>,
                highs: Vec<f64>,
            }
            impl BandCurve for PathCurve {
                fn bands_at(&self, tau: f64) -> Result<BandSet> {
                    let k = self
                        .taus
                        .iter()
                        .position(|&t| (t - tau).abs() < 1e-12)
                        .expect("grid boundary");
                    BandSet::new(
                        tau,
                        self.lows[k] * self.x0,
                        self.lows[k] * self.x0,
                        self.highs[k] * self.x0,
                        self.x0,
                    )
                }
            }
            let grid = BinGrid::new(BinCoordinate::Clock, n, 0.0, 1.0).unwrap();
            let taus: Vec<f64> = (1..=n).map(|k| grid.tau_at(k)).collect();
            let curve = PathCurve { x0, taus, lows, highs };
            let bounds: Vec<f64> = (0..=n).map(|k| k as f64 * 10.0).collect();
            let mut exec = FractionalExecutor { frac };
            let run = run_schedule(&test_order(x0), &grid, &curve, &mut exec, &bounds).unwrap();
            for row in &run.ledger {
                let b = curve.bands_at(row.tau_end).unwrap();
                prop_assert!(row.filled_after >= b.x_min - 1e-6);
                prop_assert!(row.filled_after <= b.x_max + 1e-6);
            }
        }

        #[test]
        fn realized_clock_widths_cover_the_session(
            qtys in proptest::collection::vec(1.0..500.0f64, 1..80),
            n in 1usize..10,
        ) {
            let total: f64 = qtys.iter().sum();
            let grid = BinGrid::new(BinCoordinate::Volume, n, 0.0, total).unwrap();
            let trades = qtys.iter().enumerate().map(|(i, &q)| (i as f64, q));
            let bounds = grid.realized_boundaries(trades, 0.0, 1000.0);
            prop_assert_eq!(bounds.len(), n + 1);
            prop_assert_eq!(bounds[0], 0.0);
            prop_assert_eq!(*bounds.last().unwrap(), 1000.0);
            let width_sum: f64 = bounds.windows(2).map(|w| w[1] - w[0]).sum();
            prop_assert!((width_sum - 1000.0).abs() < 1e-9);
        }
    }
}
