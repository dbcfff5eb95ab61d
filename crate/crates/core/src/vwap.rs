//! VWAP schedule targets and uncertainty bands from an intraday volume
//! curve model.
//!
//! The volume curve is the normalized cumulative fraction of daily volume
//! traded by each time point. A historical ensemble of such curves gives
//! a pointwise mean (the schedule target) and either a standard-deviation
//! confidence band or empirical quantile bands around it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::BandSet;

/// How the band half-widths are derived from the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Symmetric eta-sigma confidence interval around the target.
    Symmetric,
    /// Empirical quantiles of the curve ensemble at levels q and 1-q.
    Quantile,
}

/// VWAP strategy parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VwapConfig {
    /// Discretion in standard-deviation units (Symmetric mode).
    pub eta: f64,
    /// Quantile level in (0, 0.5); smaller q means wider bands.
    pub q: f64,
    pub mode: BandMode,
    /// Strict VWAP withholds the dark residual X_D from crossing.
    pub strict: bool,
}

impl Default for VwapConfig {
    fn default() -> Self {
        VwapConfig {
            eta: 1.0,
            q: 0.1,
            mode: BandMode::Symmetric,
            strict: false,
        }
    }
}

impl VwapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) {
            return Err(Error::invalid("eta", "must be >= 0"));
        }
        if !(self.q > 0.0 && self.q < 0.5) {
            return Err(Error::invalid("q", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Pointwise statistics of the normalized volume curve on a uniform
/// intraday grid of `n_bins + 1` points spanning `[t0, t1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeProfile {
    pub t0: f64,
    pub t1: f64,
    pub u_mean: Vec<f64>,
    pub u_std: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_quantile_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_quantile_hi: Option<Vec<f64>>,
    /// Level the stored quantiles were computed at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile_level: Option<f64>,
}

/// Default grid: 78 five-minute bins over a 6.5-hour session.
pub const DEFAULT_BINS: usize = 78;

/// Result of building a profile from history, with any non-fatal
/// warnings (quantile fallback, clamped quantiles).
#[derive(Debug, Clone)]
pub struct ProfileBuild {
    pub profile: VolumeProfile,
    pub warnings: Vec<String>,
}

/// Normalize a raw cumulative volume curve onto [0, 1]:
/// `u = (U - U(t0)) / (U(t1) - U(t0))`.
pub fn normalize_curve(u_raw: &[f64]) -> Result<Vec<f64>> {
    if u_raw.len() < 2 {
        return Err(Error::invalid("u_raw", "need at least two samples"));
    }
    if u_raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("u_raw", "samples must be finite"));
    }
    let first = u_raw[0];
    let last = *u_raw.last().unwrap();
    let span = last - first;
    if span <= 0.0 {
        return Err(Error::invalid(
            "u_raw",
            format!("flat curve: U(t1) - U(t0) = {span}"),
        ));
    }
    let mut prev = f64::NEG_INFINITY;
    for &v in u_raw {
        if v < prev {
            return Err(Error::invalid("u_raw", "must be non-decreasing"));
        }
        prev = v;
    }
    Ok(u_raw.iter().map(|&v| (v - first) / span).collect())
}

/// Linear-interpolation quantile of a sorted sample (the common
/// order-statistics definition: h = (n-1)p).
fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Minimum ensemble size for empirical quantile bands.
pub const QUANTILE_MIN_HISTORY: usize = 20;

/// Build a [`VolumeProfile`] from an ensemble of normalized daily curves
/// sharing one grid. Pointwise sample mean and standard deviation use
/// divisor H-1; empirical quantiles at `quantile_level` / its complement
/// are attached when the history is deep enough (H >= 20).
pub fn build_profile(
    t0: f64,
    t1: f64,
    curves: &[Vec<f64>],
    quantile_level: Option<f64>,
) -> Result<ProfileBuild> {
    let h = curves.len();
    if h < 2 {
        return Err(Error::invalid("curves", "need at least 2 historical curves"));
    }
    if t1 <= t0 {
        return Err(Error::invalid("t1", "must be after t0"));
    }
    let m = curves[0].len();
    if m < 2 {
        return Err(Error::invalid("curves", "need at least 2 grid points"));
    }
    for (i, c) in curves.iter().enumerate() {
        if c.len() != m {
            return Err(Error::invalid(
                "curves",
                format!("curve {i} has {} points, expected {m}", c.len()),
            ));
        }
        if c[0].abs() > 1e-9 || (c[m - 1] - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "curves",
                format!("curve {i} is not normalized to u(t0)=0, u(t1)=1"),
            ));
        }
    }

    let mut warnings = Vec::new();
    let mut u_mean = vec![0.0; m];
    let mut u_std = vec![0.0; m];
    for k in 0..m {
        let mean = curves.iter().map(|c| c[k]).sum::<f64>() / h as f64;
        let var = curves
            .iter()
            .map(|c| (c[k] - mean).powi(2))
            .sum::<f64>()
            / (h - 1) as f64;
        u_mean[k] = mean;
        u_std[k] = var.sqrt();
    }
    for k in 1..m {
        if u_mean[k] < u_mean[k - 1] {
            return Err(Error::invalid(
                "curves",
                format!("ensemble mean decreases at grid point {k}"),
            ));
        }
    }

    let (u_quantile_lo, u_quantile_hi, quantile_level) = match quantile_level {
        Some(q) => {
            if !(q > 0.0 && q < 0.5) {
                return Err(Error::invalid("quantile_level", "must lie in (0, 0.5)"));
            }
            if h < QUANTILE_MIN_HISTORY {
                warnings.push(format!(
                    "history depth {h} < {QUANTILE_MIN_HISTORY}: quantile bands unavailable, \
                     band evaluation will fall back to symmetric mode"
                ));
                (None, None, None)
            } else {
                let mut lo = vec![0.0; m];
                let mut hi = vec![0.0; m];
                let mut clamped = 0usize;
                let mut col = vec![0.0; h];
                for k in 0..m {
                    for (i, c) in curves.iter().enumerate() {
                        col[i] = c[k];
                    }
                    col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let ql = sample_quantile(&col, q);
                    let qh = sample_quantile(&col, 1.0 - q);
                    // Keep lo <= mean <= hi so band ordering holds.
                    if ql > u_mean[k] || qh < u_mean[k] {
                        clamped += 1;
                    }
                    lo[k] = ql.min(u_mean[k]);
                    hi[k] = qh.max(u_mean[k]);
                }
                if clamped > 0 {
                    warnings.push(format!(
                        "quantiles crossed the ensemble mean at {clamped} grid points; clamped"
                    ));
                }
                (Some(lo), Some(hi), Some(q))
            }
        }
        None => (None, None, None),
    };

    Ok(ProfileBuild {
        profile: VolumeProfile {
            t0,
            t1,
            u_mean,
            u_std,
            u_quantile_lo,
            u_quantile_hi,
            quantile_level,
        },
        warnings,
    })
}

/// Cumulative fraction of a U-shaped intraday volume density
/// `w(x) = 1 + amp*cos(2*pi*x)` at session fraction `x` in [0, 1].
pub fn u_shape_cumulative(x: f64, amp: f64) -> f64 {
    x + amp * (2.0 * std::f64::consts::PI * x).sin() / (2.0 * std::f64::consts::PI)
}

impl VolumeProfile {
    /// Synthetic U-shaped profile: target from the parametric density,
    /// dispersion with a Brownian-bridge shape `disp*sqrt(u*(1-u))` so the
    /// band pins to zero width at both session ends.
    pub fn u_shaped(n_bins: usize, t0: f64, t1: f64, amp: f64, dispersion: f64) -> VolumeProfile {
        let n = n_bins.max(1);
        let mut u_mean = Vec::with_capacity(n + 1);
        let mut u_std = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let u = u_shape_cumulative(k as f64 / n as f64, amp);
            u_mean.push(u);
            u_std.push(dispersion * (u * (1.0 - u)).max(0.0).sqrt());
        }
        VolumeProfile {
            t0,
            t1,
            u_mean,
            u_std,
            u_quantile_lo: None,
            u_quantile_hi: None,
            quantile_level: None,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.u_mean.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.u_mean.len();
        if m < 2 || self.u_std.len() != m {
            return Err(Error::invalid("profile", "grid arrays too short or mismatched"));
        }
        if self.t1 <= self.t0 {
            return Err(Error::invalid("profile", "t1 must be after t0"));
        }
        if self.u_mean[0].abs() > 1e-9 || (self.u_mean[m - 1] - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("profile", "u_mean must run from 0 to 1"));
        }
        if self.u_std[0].abs() > 1e-9 || self.u_std[m - 1].abs() > 1e-9 {
            return Err(Error::invalid("profile", "u_std must vanish at the endpoints"));
        }
        for k in 1..m {
            if self.u_mean[k] < self.u_mean[k - 1] {
                return Err(Error::invalid("profile", "u_mean must be non-decreasing"));
            }
        }
        Ok(())
    }

    /// Convex blend of the historical target with an intraday estimate:
    /// `u = (1-w)*u_hist + w*u_today`. Dispersion is kept from history.
    pub fn blend_with_today(&self, u_today: &[f64], w: f64) -> Result<VolumeProfile> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid("blend_weight", "must lie in [0, 1]"));
        }
        if u_today.len() != self.u_mean.len() {
            return Err(Error::invalid("u_today", "grid length mismatch"));
        }
        let mut blended = self.clone();
        for (b, (&h, &t)) in blended
            .u_mean
            .iter_mut()
            .zip(self.u_mean.iter().zip(u_today.iter()))
        {
            *b = (1.0 - w) * h + w * t;
        }
        blended.validate()?;
        Ok(blended)
    }

    /// Linearly interpolate a grid column at time `t`.
    fn interp(&self, values: &[f64], t: f64) -> f64 {
        let n = values.len() - 1;
        let pos = (t - self.t0) / (self.t1 - self.t0) * n as f64;
        let lo = (pos.floor() as usize).min(n - 1);
        let frac = pos - lo as f64;
        values[lo] + frac * (values[lo + 1] - values[lo])
    }

    /// Evaluate the schedule target and uncertainty bands at time `t`.
    ///
    /// Symmetric mode: `x_tgt = u_mean*x0`, bands at `eta` standard
    /// deviations, clamped into `[0, x0]`. Quantile mode: bands from the
    /// stored empirical quantiles (falling back to symmetric when the
    /// profile carries none).
    pub fn bands_at(&self, cfg: &VwapConfig, x0: f64, t: f64) -> Result<BandSet> {
        cfg.validate()?;
        self.validate()?;
        if t < self.t0 || t > self.t1 {
            return Err(Error::OutOfWindow {
                t,
                t0: self.t0,
                t1: self.t1,
            });
        }
        let u = self.interp(&self.u_mean, t);
        let x_tgt = (u * x0).clamp(0.0, x0);

        let quantiles = match (cfg.mode, &self.u_quantile_lo, &self.u_quantile_hi) {
            (BandMode::Quantile, Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        };
        let (x_min, x_max) = match quantiles {
            Some((lo, hi)) => {
                let ql = self.interp(lo, t);
                let qh = self.interp(hi, t);
                ((ql * x0).clamp(0.0, x_tgt), (qh * x0).clamp(x_tgt, x0))
            }
            None => {
                let half = cfg.eta * self.interp(&self.u_std, t) * x0;
                ((x_tgt - half).max(0.0), (x_tgt + half).min(x0))
            }
        };
        BandSet::new(t, x_min, x_tgt, x_max, x0)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("profile serializes");
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_json(path: &std::path::Path) -> Result<VolumeProfile> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let profile: VolumeProfile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Read historical daily curves from CSV: one row per day, first column a
/// date tag, then the cumulative volume fractions on the common grid.
/// Each row is normalized via [`normalize_curve`].
pub fn load_history_csv<R: std::io::Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut curves = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: "<history csv>".into(),
            reason: format!("row {i}: {e}"),
        })?;
        let mut raw = Vec::with_capacity(record.len().saturating_sub(1));
        for field in record.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: "<history csv>".into(),
                reason: format!("row {i}: non-numeric field `{field}`"),
            })?;
            raw.push(v);
        }
        curves.push(normalize_curve(&raw)?);
    }
    Ok(curves)
}
