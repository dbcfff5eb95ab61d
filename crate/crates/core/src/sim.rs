//! Deterministic synthetic market generator and tactic fill simulator.
//!
//! One seeded run produces the full event tape (quotes, trades, dark
//! crossing opportunities) as a pure function of the configuration, so
//! every backtest is reproducible byte for byte. Fill simulation is
//! deliberately coarse: aggressive slices pay the far touch plus a
//! power-law temporary impact, passive slices fill at the near touch in
//! proportion to concurrent market volume, dark exposure fills at the
//! midpoint on crossing events with no price impact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::discrete::{BinExecutor, TacticOrder};
use crate::error::{Error, Result};
use crate::schedule::{FillRecord, SharePartition, Side, Venue};
use crate::vwap::u_shape_cumulative;

/// Lognormal sigma of the per-tick volume noise around the intraday
/// profile.
const TICK_VOLUME_NOISE: f64 = 0.5;

/// Simulator configuration. The session is one full trading day: a
/// volume duration of 1 maps onto `[0, session_length]` and the per-tick
/// return volatility is `daily_vol * sqrt(tick / session)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    /// Clock length of the simulated day, seconds.
    pub session_length: f64,
    /// Tick (event grid) interval, seconds.
    pub tick_interval: f64,
    /// Quoted bid-ask spread, price units.
    pub spread: f64,
    /// Daily return volatility sigma_D.
    pub daily_vol: f64,
    /// Session open mid price P0.
    pub price0: f64,
    /// Expected daily volume V_D, shares.
    pub daily_volume: f64,
    /// Lognormal sigma of the day-to-day volume factor.
    pub volume_dispersion: f64,
    /// Alpha response coefficient in [-1, 1]; positive selects
    /// mean-reversion, negative trend-following, zero disables the
    /// overlay.
    pub mean_reversion: f64,
    /// Expected dark crossing opportunities per session.
    pub dark_arrival_rate: f64,
    /// Mean dark block size, shares (exponential sizes).
    pub dark_block_mean: f64,
    /// Fraction of concurrent market volume a passive order captures.
    pub passive_fill_coeff: f64,
    /// Amplitude of the U-shaped intraday volume density.
    pub u_shape_amp: f64,
    /// Instantaneous-impact scale used for aggressive fill pricing.
    pub impact_i0: f64,
    /// Instantaneous-impact exponent.
    pub impact_beta: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 42,
            session_length: 23_400.0,
            tick_interval: 1.0,
            spread: 0.02,
            daily_vol: 0.0113,
            price0: 24.7,
            daily_volume: 7e7,
            volume_dispersion: 0.4,
            mean_reversion: 0.5,
            dark_arrival_rate: 12.0,
            dark_block_mean: 20_000.0,
            passive_fill_coeff: 0.1,
            u_shape_amp: 0.75,
            impact_i0: 0.1,
            impact_beta: 0.5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.session_length > 0.0) {
            return Err(Error::invalid("session_length", "must be > 0"));
        }
        if !(self.tick_interval > 0.0 && self.tick_interval <= self.session_length) {
            return Err(Error::invalid("tick_interval", "must be in (0, session_length]"));
        }
        if !(self.spread > 0.0) {
            return Err(Error::invalid("spread", "must be > 0"));
        }
        if !(self.daily_vol >= 0.0) {
            return Err(Error::invalid("daily_vol", "must be >= 0"));
        }
        if !(self.price0 > 0.0) {
            return Err(Error::invalid("price0", "must be > 0"));
        }
        if !(self.daily_volume > 0.0) {
            return Err(Error::invalid("daily_volume", "must be > 0"));
        }
        if !(self.volume_dispersion >= 0.0) {
            return Err(Error::invalid("volume_dispersion", "must be >= 0"));
        }
        if !(-1.0..=1.0).contains(&self.mean_reversion) {
            return Err(Error::invalid("mean_reversion", "must lie in [-1, 1]"));
        }
        if !(self.dark_arrival_rate >= 0.0) {
            return Err(Error::invalid("dark_arrival_rate", "must be >= 0"));
        }
        if !(self.dark_block_mean > 0.0) {
            return Err(Error::invalid("dark_block_mean", "must be > 0"));
        }
        if !(self.passive_fill_coeff > 0.0 && self.passive_fill_coeff <= 1.0) {
            return Err(Error::invalid("passive_fill_coeff", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.u_shape_amp) {
            return Err(Error::invalid("u_shape_amp", "must lie in [0, 1)"));
        }
        if !(self.impact_i0 > 0.0) {
            return Err(Error::invalid("impact_i0", "must be > 0"));
        }
        if !(self.impact_beta > 0.0 && self.impact_beta <= 1.0) {
            return Err(Error::invalid("impact_beta", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn n_ticks(&self) -> usize {
        ((self.session_length / self.tick_interval).round() as usize).max(1)
    }

    /// Expected displayed volume in a clock window from the intraday
    /// profile (ignores the unobservable day factor).
    pub fn expected_window_volume(&self, t0: f64, t1: f64) -> f64 {
        let s = self.session_length;
        let lo = (t0 / s).clamp(0.0, 1.0);
        let hi = (t1 / s).clamp(0.0, 1.0);
        self.daily_volume
            * (u_shape_cumulative(hi, self.u_shape_amp) - u_shape_cumulative(lo, self.u_shape_amp))
    }

    /// Temporary impact J of an aggressive slice: the power-law
    /// instantaneous impact at the slice's implied participation of the
    /// window's expected volume, capped at full participation.
    pub fn temporary_impact(&self, qty: f64, window: (f64, f64)) -> f64 {
        let ev = self.expected_window_volume(window.0, window.1).max(1.0);
        let participation = (qty / ev).min(1.0);
        self.impact_i0 * self.daily_vol * self.price0 * participation.powf(self.impact_beta)
    }
}

/// One event on the simulated tape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketEvent {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Quote { bid: f64, ask: f64 },
    Trade { price: f64, qty: f64 },
    DarkCross { max_qty: f64, price: f64 },
}

/// Short-term price signal in [-1, +1]; positive means conditions favor
/// immediate execution of the order's side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSignal {
    pub value: f64,
}

/// Generate the full session tape for a configuration. Same seed, same
/// stream.
pub fn generate_market(cfg: &SimConfig) -> Result<Vec<MarketEvent>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_ticks();
    let dt = cfg.tick_interval;
    let sigma_tick = cfg.daily_vol * (dt / cfg.session_length).sqrt();

    let day_factor = if cfg.volume_dispersion > 0.0 {
        let s = cfg.volume_dispersion;
        LogNormal::new(-0.5 * s * s, s)
            .expect("valid lognormal")
            .sample(&mut rng)
    } else {
        1.0
    };
    let tick_noise = LogNormal::new(
        -0.5 * TICK_VOLUME_NOISE * TICK_VOLUME_NOISE,
        TICK_VOLUME_NOISE,
    )
    .expect("valid lognormal");
    let block_size = Exp::new(1.0 / cfg.dark_block_mean).expect("valid exponential");
    let p_dark = (cfg.dark_arrival_rate * dt / cfg.session_length).min(1.0);

    let mut events = Vec::with_capacity(2 * n + 16);
    let mut mid = cfg.price0;
    for k in 0..n {
        let t = k as f64 * dt;
        if k > 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            mid *= (sigma_tick * z - 0.5 * sigma_tick * sigma_tick).exp();
        }
        let bid = mid - 0.5 * cfg.spread;
        let ask = mid + 0.5 * cfg.spread;
        events.push(MarketEvent {
            time: t,
            kind: EventKind::Quote { bid, ask },
        });

        let frac0 = k as f64 / n as f64;
        let frac1 = (k + 1) as f64 / n as f64;
        let expected = cfg.daily_volume
            * (u_shape_cumulative(frac1, cfg.u_shape_amp)
                - u_shape_cumulative(frac0, cfg.u_shape_amp));
        let qty = (expected * day_factor * tick_noise.sample(&mut rng)).round();
        let price_frac: f64 = rng.gen();
        if qty >= 1.0 {
            events.push(MarketEvent {
                time: t,
                kind: EventKind::Trade {
                    price: bid + price_frac * (ask - bid),
                    qty,
                },
            });
        }

        if p_dark > 0.0 && rng.gen::<f64>() < p_dark {
            let max_qty = block_size.sample(&mut rng).ceil().max(1.0);
            events.push(MarketEvent {
                time: t,
                kind: EventKind::DarkCross { max_qty, price: mid },
            });
        }
    }
    Ok(events)
}

/// Latest quote in force at or before `t`.
pub fn quote_at(events: &[MarketEvent], t: f64) -> Option<(f64, f64)> {
    let mut quote = None;
    for ev in events {
        if ev.time > t {
            break;
        }
        if let EventKind::Quote { bid, ask } = ev.kind {
            quote = Some((bid, ask));
        }
    }
    quote
}

/// Index range of events with time in `[t0, t1)`.
pub fn window_range(events: &[MarketEvent], t0: f64, t1: f64) -> std::ops::Range<usize> {
    let start = events.partition_point(|e| e.time < t0);
    let end = events.partition_point(|e| e.time < t1);
    start..end
}

fn near_touch(side: Side, bid: f64, ask: f64) -> f64 {
    match side {
        Side::Buy => bid,
        Side::Sell => ask,
    }
}

fn far_touch(side: Side, bid: f64, ask: f64) -> f64 {
    match side {
        Side::Buy => ask,
        Side::Sell => bid,
    }
}

/// Immediate aggressive fill at the far touch plus temporary impact.
pub fn aggressive_fill(
    qty: f64,
    side: Side,
    quote: (f64, f64),
    t: f64,
    window: (f64, f64),
    cfg: &SimConfig,
) -> FillRecord {
    debug_assert!(qty > 0.0);
    let j = cfg.temporary_impact(qty, window);
    let base = far_touch(side, quote.0, quote.1);
    FillRecord {
        time: t,
        qty,
        price: base + side.sign() * j,
        venue: Venue::Displayed,
        aggressive: true,
    }
}

/// Posted exposures worked over one event window.
#[derive(Debug, Clone, Copy, Default)]
pub struct PostedExposure {
    pub passive: f64,
    pub dark: f64,
}

/// Work passive and dark exposure over an event window. Passive shares
/// fill at the near touch at `passive_fill_coeff` times each concurrent
/// trade's volume; dark shares fill at the crossing price up to the
/// event's size. Quantities fill in whole shares.
pub fn work_window(
    posted: PostedExposure,
    side: Side,
    init_quote: (f64, f64),
    events: &[MarketEvent],
    cfg: &SimConfig,
) -> Vec<FillRecord> {
    let mut fills = Vec::new();
    let mut passive_left = posted.passive;
    let mut dark_left = posted.dark;
    let (mut bid, mut ask) = init_quote;
    for ev in events {
        match ev.kind {
            EventKind::Quote { bid: b, ask: a } => {
                bid = b;
                ask = a;
            }
            EventKind::Trade { qty, .. } => {
                if passive_left >= 1.0 {
                    let take = (cfg.passive_fill_coeff * qty)
                        .round_ties_even()
                        .min(passive_left.floor());
                    if take >= 1.0 {
                        passive_left -= take;
                        fills.push(FillRecord {
                            time: ev.time,
                            qty: take,
                            price: near_touch(side, bid, ask),
                            venue: Venue::Displayed,
                            aggressive: false,
                        });
                    }
                }
            }
            EventKind::DarkCross { max_qty, price } => {
                if dark_left >= 1.0 {
                    let take = max_qty.min(dark_left.floor());
                    if take >= 1.0 {
                        dark_left -= take;
                        fills.push(FillRecord {
                            time: ev.time,
                            qty: take,
                            price,
                            venue: Venue::Dark,
                            aggressive: false,
                        });
                    }
                }
            }
        }
    }
    fills
}

/// Simulate one displayed tactic slice over a window: the quantity works
/// passively, and any min-fill residue is force-filled aggressively at
/// the window end.
pub fn simulate_tactic(
    tactic: &TacticOrder,
    side: Side,
    init_quote: (f64, f64),
    events: &[MarketEvent],
    window: (f64, f64),
    cfg: &SimConfig,
) -> Vec<FillRecord> {
    if tactic.qty < 1.0 {
        return Vec::new();
    }
    let mut fills = work_window(
        PostedExposure {
            passive: tactic.qty,
            dark: 0.0,
        },
        side,
        init_quote,
        events,
        cfg,
    );
    let filled: f64 = fills.iter().map(|f| f.qty).sum();
    if filled < tactic.min_fill {
        let shortfall = (tactic.min_fill - filled).ceil();
        let quote = last_quote(events, init_quote);
        fills.push(aggressive_fill(shortfall, side, quote, window.1, window, cfg));
    }
    fills
}

/// Simulate one partition-shaped slice over a window: the aggressive
/// component fills immediately at the window-open quote, passive and
/// dark exposures work the window. Mandatory shares round up,
/// discretionary ones half to even.
pub fn simulate_partition(
    part: &SharePartition,
    side: Side,
    init_quote: (f64, f64),
    events: &[MarketEvent],
    window: (f64, f64),
    cfg: &SimConfig,
) -> Vec<FillRecord> {
    let mut fills = Vec::new();
    let aggressive = part.x_a.ceil();
    if aggressive >= 1.0 {
        fills.push(aggressive_fill(
            aggressive, side, init_quote, window.0, window, cfg,
        ));
    }
    fills.extend(work_window(
        PostedExposure {
            passive: (part.x_p1 + part.x_p2).round_ties_even(),
            dark: part.x_d.round_ties_even(),
        },
        side,
        init_quote,
        events,
        cfg,
    ));
    fills
}

fn last_quote(events: &[MarketEvent], init: (f64, f64)) -> (f64, f64) {
    events
        .iter()
        .rev()
        .find_map(|e| match e.kind {
            EventKind::Quote { bid, ask } => Some((bid, ask)),
            _ => None,
        })
        .unwrap_or(init)
}

/// Evaluate the short-term alpha signal from the trailing mid-price
/// return over `horizon` seconds: `s = clamp(-side_sign * k_mr * r /
/// r_scale)`, where `r_scale` is a one-sigma move over the horizon.
/// Positive `mean_reversion` buys into dips and sells into spikes;
/// negative chases the trend.
pub fn alpha_signal(
    mid_history: &[(f64, f64)],
    t: f64,
    side: Side,
    horizon: f64,
    cfg: &SimConfig,
) -> AlphaSignal {
    if cfg.mean_reversion == 0.0 || mid_history.is_empty() {
        return AlphaSignal { value: 0.0 };
    }
    let now = mid_history
        .iter()
        .rev()
        .find(|(ht, _)| *ht <= t)
        .map(|&(_, m)| m);
    let past = mid_history
        .iter()
        .rev()
        .find(|(ht, _)| *ht <= t - horizon)
        .map(|&(_, m)| m)
        .or_else(|| mid_history.first().map(|&(_, m)| m));
    let (Some(now), Some(past)) = (now, past) else {
        return AlphaSignal { value: 0.0 };
    };
    if past <= 0.0 {
        return AlphaSignal { value: 0.0 };
    }
    let r = now / past - 1.0;
    let r_scale = cfg.daily_vol * (horizon / cfg.session_length).sqrt();
    if r_scale <= 0.0 {
        return AlphaSignal { value: 0.0 };
    }
    let s = -side.sign() * cfg.mean_reversion * r / r_scale;
    AlphaSignal {
        value: s.clamp(-1.0, 1.0),
    }
}

/// Apply the alpha overlay to a partition. A positive signal promotes
/// `s * lambda * X_P` passive shares to aggressive, draining the target
/// shortfall X_P1 first; a negative signal withholds `|s| * lambda *
/// X_P` from the posted passive quantity (discretionary X_P2 first)
/// without changing the band accounting.
pub fn apply_alpha_overlay(part: &SharePartition, s: AlphaSignal, lambda: f64) -> SharePartition {
    let lambda = lambda.clamp(0.0, 1.0);
    let mut out = *part;
    let xp = part.x_p1 + part.x_p2;
    if s.value > 0.0 {
        let move_qty = (s.value * lambda * xp).min(xp);
        let from_p1 = move_qty.min(out.x_p1);
        out.x_p1 -= from_p1;
        let from_p2 = (move_qty - from_p1).min(out.x_p2);
        out.x_p2 -= from_p2;
        out.x_a += from_p1 + from_p2;
    } else if s.value < 0.0 {
        let hold = ((-s.value) * lambda * xp).min(xp);
        let from_p2 = hold.min(out.x_p2);
        out.x_p2 -= from_p2;
        let from_p1 = (hold - from_p2).min(out.x_p1);
        out.x_p1 -= from_p1;
    }
    out
}

/// Write a tape as CSV (`time,kind,a,b`): quote rows carry bid/ask,
/// trade rows price/qty, dark rows max_qty/price.
pub fn write_tape_csv<W: std::io::Write>(w: W, events: &[MarketEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Parse {
        path: "<tape csv>".into(),
        reason: e.to_string(),
    };
    wtr.write_record(["time", "kind", "a", "b"]).map_err(csv_err)?;
    for ev in events {
        let (kind, a, b) = match ev.kind {
            EventKind::Quote { bid, ask } => ("quote", bid, ask),
            EventKind::Trade { price, qty } => ("trade", price, qty),
            EventKind::DarkCross { max_qty, price } => ("dark", max_qty, price),
        };
        wtr.write_record([
            format!("{}", ev.time),
            kind.to_string(),
            format!("{a}"),
            format!("{b}"),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Io {
        path: "<tape csv>".into(),
        source: e,
    })?;
    Ok(())
}

/// Read a tape written by [`write_tape_csv`] (or an external tape in the
/// same schema).
pub fn read_tape_csv<R: std::io::Read>(r: R) -> Result<Vec<MarketEvent>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut events = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: "<tape csv>".into(),
            reason: format!("row {i}: {e}"),
        })?;
        let parse = |idx: usize| -> Result<f64> {
            rec.get(idx)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    path: "<tape csv>".into(),
                    reason: format!("row {i}: bad numeric field {idx}"),
                })
        };
        let time = parse(0)?;
        let a = parse(2)?;
        let b = parse(3)?;
        let kind = match rec.get(1).unwrap_or("") {
            "quote" => EventKind::Quote { bid: a, ask: b },
            "trade" => EventKind::Trade { price: a, qty: b },
            "dark" => EventKind::DarkCross { max_qty: a, price: b },
            other => {
                return Err(Error::Parse {
                    path: "<tape csv>".into(),
                    reason: format!("row {i}: unknown kind `{other}`"),
                })
            }
        };
        events.push(MarketEvent { time, kind });
    }
    Ok(events)
}

/// Tape-driven executor for the discretized scheduler.
pub struct TapeExecutor<'a> {
    pub cfg: &'a SimConfig,
    pub events: &'a [MarketEvent],
}

impl TapeExecutor<'_> {
    fn fallback_quote(&self) -> (f64, f64) {
        (
            self.cfg.price0 - 0.5 * self.cfg.spread,
            self.cfg.price0 + 0.5 * self.cfg.spread,
        )
    }
}

impl BinExecutor for TapeExecutor<'_> {
    fn execute(&mut self, order: &TacticOrder, window: (f64, f64), side: Side) -> Vec<FillRecord> {
        let range = window_range(self.events, window.0, window.1);
        let quote = quote_at(self.events, window.0).unwrap_or_else(|| self.fallback_quote());
        simulate_tactic(order, side, quote, &self.events[range], window, self.cfg)
    }

    fn cover(&mut self, qty: f64, t: f64, side: Side) -> Vec<FillRecord> {
        let qty = qty.ceil();
        if qty < 1.0 {
            return Vec::new();
        }
        let quote = quote_at(self.events, t).unwrap_or_else(|| self.fallback_quote());
        vec![aggressive_fill(qty, side, quote, t, (t, t), self.cfg)]
    }
}

/// Displayed VWAP of the tape over `[t0, t1]`.
pub fn tape_vwap(events: &[MarketEvent], t0: f64, t1: f64) -> Option<f64> {
    let mut notional = 0.0;
    let mut volume = 0.0;
    for ev in events {
        if ev.time < t0 || ev.time > t1 {
            continue;
        }
        if let EventKind::Trade { price, qty } = ev.kind {
            notional += price * qty;
            volume += qty;
        }
    }
    (volume > 0.0).then(|| notional / volume)
}
