//! The continuous-time tactical driver shared by every schedule-based
//! strategy.
//!
//! Each tick the driver asks the active strategy for its bands, splits
//! the residual into aggressive/passive/dark exposure, applies the alpha
//! overlay, and dispatches simulated child orders. Band violations drive
//! the two enforcement behaviors: a lower-band shortfall is covered
//! aggressively at once, an upper-band breach pauses displayed slicing.
//! Dark block fills are credited to every trajectory before the next
//! partition. The driver itself is strategy-agnostic: VWAP, POV, and IS
//! differ only behind [`StrategyKind`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pov::{EligibleVolumeAccumulator, PovRates};
use crate::schedule::{
    band_compliance, compute_partition, BandSet, Compliance, ExecutionState, Order,
    SharePartition, Venue,
};
use crate::shortfall::{is_bands_at, IsBandDurations};
use crate::sim::{
    aggressive_fill, alpha_signal, apply_alpha_overlay, tape_vwap, window_range, work_window,
    AlphaSignal, EventKind, MarketEvent, PostedExposure, SimConfig,
};
use crate::vwap::{VolumeProfile, VwapConfig};

/// Driver-level knobs, shared across strategies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverConfig {
    /// Fraction of the passive quantity the alpha overlay may move.
    pub overlay_lambda: f64,
    /// Alpha signal lookback, seconds.
    pub alpha_horizon: f64,
    /// Signal level above which the remaining target shortfall X_P1 is
    /// escalated to aggressive execution.
    pub escalation_threshold: f64,
    /// Pause all venues (not just displayed) on an upper-band breach.
    pub pause_all_venues: bool,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            overlay_lambda: 0.25,
            alpha_horizon: 300.0,
            escalation_threshold: 0.5,
            pause_all_venues: false,
        }
    }
}

/// The active strategy for one order.
#[derive(Debug, Clone)]
pub enum StrategyKind {
    AlphaVwap {
        profile: VolumeProfile,
        cfg: VwapConfig,
    },
    AlphaPov {
        rates: PovRates,
        strict: bool,
    },
    AlphaIs {
        durations: IsBandDurations,
        /// Expected daily volume mapping clock trades onto volume time.
        v_d: f64,
    },
}

impl StrategyKind {
    pub fn label(&self) -> &'static str {
        match self {
            StrategyKind::AlphaVwap { .. } => "alpha-vwap",
            StrategyKind::AlphaPov { .. } => "alpha-pov",
            StrategyKind::AlphaIs { .. } => "alpha-is",
        }
    }
}

/// Mutable per-run strategy state behind the uniform band interface.
enum StrategyState<'a> {
    Vwap {
        profile: &'a VolumeProfile,
        cfg: VwapConfig,
        shift: f64,
    },
    Pov {
        rates: &'a PovRates,
        strict: bool,
        acc: EligibleVolumeAccumulator,
    },
    Is {
        durations: IsBandDurations,
        v_d: f64,
        cum_volume: f64,
        shift: f64,
    },
}

impl StrategyState<'_> {
    fn bands_at(&self, x0: f64, t: f64) -> Result<BandSet> {
        match self {
            StrategyState::Vwap { profile, cfg, shift } => {
                let raw = profile.bands_at(cfg, x0, t)?;
                if *shift > 0.0 {
                    raw.with_block_fill(*shift)
                } else {
                    Ok(raw)
                }
            }
            StrategyState::Pov { acc, .. } => {
                let mut b = acc.bands_at(x0);
                b.t = t;
                Ok(b)
            }
            StrategyState::Is {
                durations,
                v_d,
                cum_volume,
                shift,
            } => {
                let mut b = is_bands_at(durations, x0, cum_volume / v_d);
                b.t = t;
                if *shift > 0.0 {
                    b.with_block_fill(*shift)
                } else {
                    Ok(b)
                }
            }
        }
    }

    fn observe_trade(&mut self, qty: f64, price: f64, order: &Order, t: f64) {
        match self {
            StrategyState::Vwap { .. } => {}
            StrategyState::Pov { rates, acc, .. } => {
                acc.on_market_trade(qty, price, order, rates, t);
            }
            StrategyState::Is { cum_volume, .. } => *cum_volume += qty,
        }
    }

    /// Credit a dark block execution to all trajectories.
    fn on_dark_block(&mut self, qty: f64) {
        match self {
            StrategyState::Vwap { shift, .. } | StrategyState::Is { shift, .. } => *shift += qty,
            StrategyState::Pov { acc, .. } => {
                acc.apply_block(qty).expect("positive block");
            }
        }
    }

    /// Whether the dark residual X_D is withheld from crossing.
    fn strict(&self) -> bool {
        match self {
            StrategyState::Vwap { cfg, .. } => cfg.strict,
            StrategyState::Pov { strict, .. } => *strict,
            StrategyState::Is { .. } => false,
        }
    }

    fn eligible_volume(&self) -> Option<f64> {
        match self {
            StrategyState::Pov { acc, .. } => Some(acc.v_e),
            _ => None,
        }
    }
}

/// Integer child order sizes dispatched on one tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChildOrders {
    pub aggressive: f64,
    pub passive: f64,
    pub dark: f64,
}

/// What the driver did on a tick.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TickActions {
    pub aggressive: f64,
    pub passive_posted: f64,
    pub dark_posted: f64,
    pub paused_displayed: bool,
    pub alpha: f64,
}

/// Per-tick record: the band/fill state at the tick open and the actions
/// taken. The partition is the raw band split (before the overlay), so
/// it is recomputable offline from `bands` and `filled`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriverTickReport {
    pub time: f64,
    pub bands: BandSet,
    pub filled: f64,
    pub partition: SharePartition,
    pub compliance: Compliance,
    pub actions: TickActions,
}

/// Pure tick planning: partition, overlay, escalation, and the pause /
/// cover enforcement, emitting whole-share child orders. Aggressive
/// covers round up (a fractional mandatory share is covered, not
/// dropped); discretionary exposures round half to even. A waterfall cap
/// keeps the total posted at or below the unfilled residual.
pub fn plan_child_orders(
    bands: &BandSet,
    filled: f64,
    alpha: AlphaSignal,
    strict: bool,
    cfg: &DriverConfig,
) -> Result<(ChildOrders, SharePartition, Compliance)> {
    let partition = compute_partition(bands, filled)?;
    let compliance = band_compliance(bands, filled);

    let mut worked = apply_alpha_overlay(&partition, alpha, cfg.overlay_lambda);
    if alpha.value > cfg.escalation_threshold {
        worked.x_a += worked.x_p1;
        worked.x_p1 = 0.0;
    }

    let mut remaining = (bands.x0 - filled).floor().max(0.0);
    let mut children = ChildOrders::default();
    let paused = compliance == Compliance::AboveMax;

    if !paused {
        children.aggressive = worked.x_a.ceil().min(remaining).max(0.0);
        remaining -= children.aggressive;
        let passive_cap = (bands.x_max - filled).floor().max(0.0);
        children.passive = (worked.x_p1 + worked.x_p2)
            .round_ties_even()
            .min(passive_cap)
            .min(remaining)
            .max(0.0);
        remaining -= children.passive;
    }
    if !(strict || (paused && cfg.pause_all_venues)) {
        children.dark = worked.x_d.round_ties_even().min(remaining).max(0.0);
    }
    Ok((children, partition, compliance))
}

/// Result of one driven order.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: ExecutionState,
    pub reports: Vec<DriverTickReport>,
    /// Times of dark block fills (band-shift events).
    pub block_times: Vec<f64>,
    pub arrival_mid: f64,
    /// Displayed VWAP of the tape over the order's active window.
    pub market_vwap: Option<f64>,
    /// Final eligible volume (POV only).
    pub eligible_volume: Option<f64>,
    pub completed_at: Option<f64>,
}

/// Drive one order through the session tape, ticking every
/// `tick_interval` seconds from the order start and once more at the end
/// time. Completion or the end time terminates the loop; the end tick
/// has no event window, so it can only cover a remaining lower-band
/// shortfall aggressively.
pub fn run_order(
    kind: &StrategyKind,
    order: &Order,
    events: &[MarketEvent],
    sim_cfg: &SimConfig,
    cfg: &DriverConfig,
) -> Result<RunResult> {
    order.validate()?;
    sim_cfg.validate()?;
    let x0 = order.total_shares;
    let eps = 1e-9 * x0;
    let t0 = order.start_time;
    let t1 = order.end_time.unwrap_or(sim_cfg.session_length);
    if !(t1 > t0) {
        return Err(Error::invalid("end_time", "empty trading window"));
    }

    let mut strategy = match kind {
        StrategyKind::AlphaVwap { profile, cfg } => {
            cfg.validate()?;
            profile.validate()?;
            StrategyState::Vwap {
                profile,
                cfg: *cfg,
                shift: 0.0,
            }
        }
        StrategyKind::AlphaPov { rates, strict } => {
            rates.validate()?;
            StrategyState::Pov {
                rates,
                strict: *strict,
                acc: EligibleVolumeAccumulator::new(),
            }
        }
        StrategyKind::AlphaIs { durations, v_d } => {
            durations.validate()?;
            if !(*v_d > 0.0) {
                return Err(Error::invalid("v_d", "must be > 0"));
            }
            StrategyState::Is {
                durations: *durations,
                v_d: *v_d,
                cum_volume: 0.0,
                shift: 0.0,
            }
        }
    };

    let fallback_quote = (
        sim_cfg.price0 - 0.5 * sim_cfg.spread,
        sim_cfg.price0 + 0.5 * sim_cfg.spread,
    );
    let mut state = ExecutionState::new();
    let mut reports = Vec::new();
    let mut block_times = Vec::new();
    let mut mid_history: Vec<(f64, f64)> = Vec::new();
    let mut current_quote = fallback_quote;
    let mut arrival_mid = None;
    let mut completed_at = None;

    let dt = sim_cfg.tick_interval;
    let mut tick_starts: Vec<f64> = Vec::new();
    let mut t = t0;
    while t < t1 {
        tick_starts.push(t);
        t += dt;
    }

    for (i, &tk) in tick_starts.iter().enumerate() {
        let t_next = tick_starts.get(i + 1).copied().unwrap_or(t1);
        let range = window_range(events, tk, t_next);
        let window = &events[range];

        // Quote in force at the tick open.
        if let Some(q) = window.iter().find_map(|e| match e.kind {
            EventKind::Quote { bid, ask } if e.time <= tk => Some((bid, ask)),
            _ => None,
        }) {
            current_quote = q;
        }
        let mid = 0.5 * (current_quote.0 + current_quote.1);
        mid_history.push((tk, mid));
        arrival_mid.get_or_insert(mid);

        let bands = strategy
            .bands_at(x0, tk)
            .map_err(|e| Error::StrategyFailure {
                t: tk,
                reason: e.to_string(),
            })?;
        let alpha = alpha_signal(&mid_history, tk, order.side, cfg.alpha_horizon, sim_cfg);
        let (children, partition, compliance) =
            plan_child_orders(&bands, state.filled, alpha, strategy.strict(), cfg)?;

        reports.push(DriverTickReport {
            time: tk,
            bands,
            filled: state.filled,
            partition,
            compliance,
            actions: TickActions {
                aggressive: children.aggressive,
                passive_posted: children.passive,
                dark_posted: children.dark,
                paused_displayed: compliance == Compliance::AboveMax,
                alpha: alpha.value,
            },
        });

        if children.aggressive >= 1.0 {
            state.add_fill(aggressive_fill(
                children.aggressive,
                order.side,
                current_quote,
                tk,
                (tk, t_next),
                sim_cfg,
            ));
        }
        for fill in work_window(
            PostedExposure {
                passive: children.passive,
                dark: children.dark,
            },
            order.side,
            current_quote,
            window,
            sim_cfg,
        ) {
            if fill.venue == Venue::Dark {
                strategy.on_dark_block(fill.qty);
                block_times.push(fill.time);
            }
            state.add_fill(fill);
        }

        if state.filled >= x0 - eps {
            // Order done: the rest of this window is not observed, so
            // the terminal bands reflect the stream strictly before the
            // completing tick.
            completed_at = state.fills.last().map(|f| f.time);
            break;
        }

        // Strategies observe the displayed stream regardless of fills.
        for ev in window {
            match ev.kind {
                EventKind::Trade { price, qty } => {
                    strategy.observe_trade(qty, price, order, ev.time)
                }
                EventKind::Quote { bid, ask } => current_quote = (bid, ask),
                EventKind::DarkCross { .. } => {}
            }
        }
    }

    // Closing tick at the end time: cover any remaining mandatory
    // shortfall; no window remains for passive or dark exposure.
    if completed_at.is_none() {
        let bands = strategy
            .bands_at(x0, t1)
            .map_err(|e| Error::StrategyFailure {
                t: t1,
                reason: e.to_string(),
            })?;
        let (children, partition, compliance) = plan_child_orders(
            &bands,
            state.filled,
            AlphaSignal { value: 0.0 },
            strategy.strict(),
            cfg,
        )?;
        reports.push(DriverTickReport {
            time: t1,
            bands,
            filled: state.filled,
            partition,
            compliance,
            actions: TickActions {
                aggressive: children.aggressive,
                passive_posted: 0.0,
                dark_posted: 0.0,
                paused_displayed: compliance == Compliance::AboveMax,
                alpha: 0.0,
            },
        });
        if children.aggressive >= 1.0 {
            state.add_fill(aggressive_fill(
                children.aggressive,
                order.side,
                current_quote,
                t1,
                (t1, t1),
                sim_cfg,
            ));
        }
        if state.filled >= x0 - eps {
            completed_at = state.fills.last().map(|f| f.time);
        }
    }

    // Terminal report: the realized end state, so the emitted trajectory
    // closes on the final filled position.
    let final_time = completed_at.unwrap_or(t1).min(t1);
    let bands = strategy
        .bands_at(x0, final_time)
        .map_err(|e| Error::StrategyFailure {
            t: final_time,
            reason: e.to_string(),
        })?;
    let partition = compute_partition(&bands, state.filled)?;
    reports.push(DriverTickReport {
        time: final_time,
        bands,
        filled: state.filled,
        partition,
        compliance: band_compliance(&bands, state.filled),
        actions: TickActions {
            aggressive: 0.0,
            passive_posted: 0.0,
            dark_posted: 0.0,
            paused_displayed: false,
            alpha: 0.0,
        },
    });

    let horizon_end = completed_at.unwrap_or(t1);
    Ok(RunResult {
        market_vwap: tape_vwap(events, t0, horizon_end),
        eligible_volume: strategy.eligible_volume(),
        state,
        reports,
        block_times,
        arrival_mid: arrival_mid.unwrap_or(sim_cfg.price0),
        completed_at,
    })
}
