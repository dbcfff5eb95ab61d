//! Mean-variance implementation-shortfall machinery: power-law residual
//! schedules, impact and timing-risk cost functionals, the closed-form
//! optimal duration, numerical shape optimization, the power-law
//! decay-kernel cost, and volume-uncertainty band durations.
//!
//! All durations are in volume time: T = 1 is one full trading day of
//! volume. Costs are in currency units for the whole order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{gamma, golden_min};
use crate::schedule::BandSet;

/// Upper edge of the shape-parameter search domain.
pub const NU_MAX: f64 = 10.0;
/// Absolute tolerance of the shape search.
pub const NU_TOL: f64 = 1e-4;

/// Market-impact model parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactParams {
    /// Dimensionless instantaneous-impact scale.
    pub i0: f64,
    /// Impact exponent in (0, 1].
    pub beta: f64,
    /// Daily return volatility.
    pub sigma_d: f64,
    /// Reference price.
    pub p0: f64,
    /// Expected daily volume, shares.
    pub v_d: f64,
    /// Decay-kernel scale.
    pub g0: f64,
    /// Decay exponent in (0, 1).
    pub gamma: f64,
}

impl ImpactParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("i0", self.i0),
            ("beta", self.beta),
            ("sigma_d", self.sigma_d),
            ("p0", self.p0),
            ("v_d", self.v_d),
            ("g0", self.g0),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(field, format!("must be positive, got {v}")));
            }
        }
        if self.beta > 1.0 {
            return Err(Error::invalid("beta", "must lie in (0, 1]"));
        }
        if self.gamma >= 1.0 {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Risk-aversion parameters: the dimensionless aversion A and its
/// currency-scaled form rho = sigma_D * X0 * P0 / A.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RiskParams {
    pub aversion: f64,
    pub rho: f64,
}

impl RiskParams {
    pub fn new(aversion: f64, sigma_d: f64, x0: f64, p0: f64) -> Result<RiskParams> {
        if !(aversion > 0.0) {
            return Err(Error::invalid("aversion", "must be > 0"));
        }
        let rho = sigma_d * x0 * p0 / aversion;
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid("rho", format!("derived rho invalid: {rho}")));
        }
        Ok(RiskParams { aversion, rho })
    }

    pub fn from_impact(p: &ImpactParams, aversion: f64, x0: f64) -> Result<RiskParams> {
        Self::new(aversion, p.sigma_d, x0, p.p0)
    }
}

/// Residual trajectory Y(t) = X0 * (1 - t/T)^nu over a volume duration T.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerLawSchedule {
    pub x0: f64,
    pub t_dur: f64,
    pub nu: f64,
}

impl PowerLawSchedule {
    pub fn new(x0: f64, t_dur: f64, nu: f64) -> Result<PowerLawSchedule> {
        if !(x0 > 0.0) {
            return Err(Error::invalid("x0", "must be > 0"));
        }
        if !(t_dur > 0.0) {
            return Err(Error::invalid("t_dur", "must be > 0"));
        }
        if !(nu >= 1.0) {
            return Err(Error::invalid("nu", "must be >= 1"));
        }
        Ok(PowerLawSchedule { x0, t_dur, nu })
    }

    /// Unexecuted shares at volume time `t`; zero once the schedule ends.
    pub fn residual(&self, t: f64) -> f64 {
        residual(self, t)
    }
}

/// Lognormal model of the daily volume: V_D ~ LogN(mu_z, sigma_z^2).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeDistribution {
    pub mu_z: f64,
    pub sigma_z: f64,
}

impl VolumeDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_z > 0.0) {
            return Err(Error::invalid("sigma_z", "must be > 0"));
        }
        Ok(())
    }
}

/// Schedule durations for the target and the two uncertainty bands, with
/// the shared shape parameter and the discretion that produced them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IsBandDurations {
    pub t_min: f64,
    pub t_tgt: f64,
    pub t_max: f64,
    pub nu: f64,
    pub eta: f64,
}

impl IsBandDurations {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min <= self.t_tgt && self.t_tgt <= self.t_max) {
            return Err(Error::invalid(
                "durations",
                format!(
                    "need 0 < t_min <= t_tgt <= t_max, got {}, {}, {}",
                    self.t_min, self.t_tgt, self.t_max
                ),
            ));
        }
        if !(self.nu >= 1.0) {
            return Err(Error::invalid("nu", "must be >= 1"));
        }
        Ok(())
    }
}

/// Result of the numerical shape optimization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShapeOptimum {
    pub nu: f64,
    /// The minimum landed on the nu upper bound; callers should treat the
    /// value as a saturated, not interior, optimum.
    pub at_boundary: bool,
}

/// Y(t) = x0 * (1 - t/T)^nu for t < T, else 0.
pub fn residual(sched: &PowerLawSchedule, t: f64) -> f64 {
    if t >= sched.t_dur {
        0.0
    } else if t <= 0.0 {
        sched.x0
    } else {
        sched.x0 * (1.0 - t / sched.t_dur).powf(sched.nu)
    }
}

/// Shape factor nu^(b+1) / (1 + (nu-1)(b+1)) of the impact cost.
fn impact_shape_factor(nu: f64, beta: f64) -> f64 {
    nu.powf(beta + 1.0) / (1.0 + (nu - 1.0) * (beta + 1.0))
}

/// Expected implementation shortfall of the power-law schedule under the
/// instantaneous (delta) decay kernel:
///
/// ```text
/// I(T; nu, beta) = [nu^(b+1) / (1 + (nu-1)(b+1))]
///                  * I0 * sigma_D * X0 * P0 * (X0 / (T V_D))^beta
/// ```
pub fn impact_cost(t_dur: f64, nu: f64, p: &ImpactParams, x0: f64) -> Result<f64> {
    p.validate()?;
    if !(t_dur > 0.0) {
        return Err(Error::invalid("t_dur", "must be > 0"));
    }
    if !(nu >= 1.0) {
        return Err(Error::invalid("nu", "must be >= 1"));
    }
    Ok(impact_shape_factor(nu, p.beta)
        * p.i0
        * p.sigma_d
        * x0
        * p.p0
        * (x0 / (t_dur * p.v_d)).powf(p.beta))
}

/// Timing risk squared: R^2(T; nu) = sigma_D^2 X0^2 P0^2 T / (2 nu + 1).
pub fn timing_risk_sq(t_dur: f64, nu: f64, p: &ImpactParams, x0: f64) -> Result<f64> {
    p.validate()?;
    if !(t_dur > 0.0) {
        return Err(Error::invalid("t_dur", "must be > 0"));
    }
    if !(nu >= 0.0) {
        return Err(Error::invalid("nu", "must be >= 0"));
    }
    Ok(p.sigma_d.powi(2) * x0.powi(2) * p.p0.powi(2) * t_dur / (2.0 * nu + 1.0))
}

/// Risk-adjusted total cost C = I + R^2 / (2 rho).
pub fn total_cost(t_dur: f64, nu: f64, p: &ImpactParams, r: &RiskParams, x0: f64) -> Result<f64> {
    let impact = impact_cost(t_dur, nu, p, x0)?;
    let risk_sq = timing_risk_sq(t_dur, nu, p, x0)?;
    Ok(impact + risk_sq / (2.0 * r.rho))
}

/// Closed-form optimal volume duration for the linear (nu = 1) schedule:
/// T_opt = (6 beta I0 / A)^(1/(b+1)) * (X0 / V_D)^(b/(b+1)).
pub fn optimal_duration(p: &ImpactParams, aversion: f64, x0: f64) -> Result<f64> {
    p.validate()?;
    if !(aversion > 0.0) {
        return Err(Error::invalid("aversion", "must be > 0"));
    }
    if !(x0 > 0.0) {
        return Err(Error::invalid("x0", "must be > 0"));
    }
    let inv = 1.0 / (p.beta + 1.0);
    Ok((6.0 * p.beta * p.i0 / aversion).powf(inv) * (x0 / p.v_d).powf(p.beta * inv))
}

/// Average participation rate of the optimal schedule:
/// p_opt = X0 / (T_opt V_D) = (A / (6 beta I0))^(1/(b+1)) (X0/V_D)^(1/(b+1)).
pub fn optimal_participation(p: &ImpactParams, aversion: f64, x0: f64) -> Result<f64> {
    p.validate()?;
    if !(aversion > 0.0) {
        return Err(Error::invalid("aversion", "must be > 0"));
    }
    let inv = 1.0 / (p.beta + 1.0);
    Ok((aversion / (6.0 * p.beta * p.i0)).powf(inv) * (x0 / p.v_d).powf(inv))
}

/// Minimize the total cost over the shape parameter on (1, NU_MAX] by
/// golden-section search at fixed duration.
pub fn optimal_shape(t_dur: f64, p: &ImpactParams, r: &RiskParams, x0: f64) -> Result<ShapeOptimum> {
    p.validate()?;
    if !(t_dur > 0.0) {
        return Err(Error::invalid("t_dur", "must be > 0"));
    }
    let objective = |nu: f64| {
        impact_shape_factor(nu, p.beta) * p.i0 * p.sigma_d * x0 * p.p0
            * (x0 / (t_dur * p.v_d)).powf(p.beta)
            + p.sigma_d.powi(2) * x0.powi(2) * p.p0.powi(2) * t_dur
                / ((2.0 * nu + 1.0) * 2.0 * r.rho)
    };
    let res = golden_min(objective, 1.0 + 1e-9, NU_MAX, NU_TOL);
    Ok(ShapeOptimum {
        nu: res.x,
        at_boundary: res.at_upper_bound,
    })
}

/// Expected shortfall of the optimal schedule (the impact cost evaluated
/// at T_opt):
///
/// ```text
/// I(T_opt) = (A/(6 I0 beta))^(b/(b+1)) * shape(nu)
///            * I0 sigma_D P0 X0 * (X0/V_D)^(b/(b+1))
/// ```
pub fn optimal_shortfall(p: &ImpactParams, aversion: f64, x0: f64, nu: f64) -> Result<f64> {
    p.validate()?;
    if !(aversion > 0.0) {
        return Err(Error::invalid("aversion", "must be > 0"));
    }
    if !(nu >= 1.0) {
        return Err(Error::invalid("nu", "must be >= 1"));
    }
    let w = p.beta / (p.beta + 1.0);
    Ok((aversion / (6.0 * p.i0 * p.beta)).powf(w)
        * impact_shape_factor(nu, p.beta)
        * p.i0
        * p.sigma_d
        * p.p0
        * x0
        * (x0 / p.v_d).powf(w))
}

/// Expected cost of trading against the power-law decay kernel
/// G(t-s) = g0 / |t-s|^gamma:
///
/// ```text
/// I_pl = T^(1-gamma-beta) I0 sigma_D g0 X0 P0 (X0/V_D)^beta
///        * nu^(b+1) * Gamma(1-gamma) Gamma(nu)
///        / [(2 - gamma + (b+1)(nu-1)) * Gamma(1 - gamma + nu)]
/// ```
///
/// At gamma + beta = 1 the T exponent vanishes and the cost becomes
/// duration-independent (the square-root law regime).
pub fn powerlaw_kernel_cost(t_dur: f64, nu: f64, p: &ImpactParams, x0: f64) -> Result<f64> {
    p.validate()?;
    if !(t_dur > 0.0) {
        return Err(Error::invalid("t_dur", "must be > 0"));
    }
    if !(nu >= 1.0) {
        return Err(Error::invalid("nu", "must be >= 1"));
    }
    if p.gamma >= 1.0 {
        return Err(Error::invalid("gamma", "kernel integral diverges for gamma >= 1"));
    }
    let denom = 2.0 - p.gamma + (p.beta + 1.0) * (nu - 1.0);
    if !(denom > 0.0) {
        return Err(Error::invalid(
            "nu",
            format!("2 - gamma + (beta+1)(nu-1) must be > 0, got {denom}"),
        ));
    }
    Ok(t_dur.powf(1.0 - p.gamma - p.beta)
        * p.i0
        * p.sigma_d
        * p.g0
        * x0
        * p.p0
        * (x0 / p.v_d).powf(p.beta)
        * nu.powf(p.beta + 1.0)
        * gamma(1.0 - p.gamma)
        * gamma(nu)
        / (denom * gamma(1.0 - p.gamma + nu)))
}

/// Mean and standard deviation of V_D^(-omega) when V_D is lognormal:
/// V_D^(-omega) ~ LogN(-omega mu_z, (omega sigma_z)^2), so
/// mean = exp(-omega mu_z + (omega sigma_z)^2 / 2) and
/// std  = sqrt(exp((omega sigma_z)^2) - 1) * mean.
pub fn lognormal_moments(dist: &VolumeDistribution, omega: f64) -> Result<(f64, f64)> {
    dist.validate()?;
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", "must be > 0"));
    }
    let s = omega * dist.sigma_z;
    let mean = (-omega * dist.mu_z + 0.5 * s * s).exp();
    let std = ((s * s).exp() - 1.0).sqrt() * mean;
    Ok((mean, std))
}

/// Duration scale c = X0^omega * (6 beta I0 / A)^(1/(beta+1)), so that
/// T = c * V_D^(-omega) recovers the closed-form optimal duration when
/// omega = beta/(beta+1).
pub fn duration_scale(p: &ImpactParams, aversion: f64, x0: f64, omega: f64) -> f64 {
    x0.powf(omega) * (6.0 * p.beta * p.i0 / aversion).powf(1.0 / (p.beta + 1.0))
}

/// Band durations from an explicit scale and explicit moments of
/// V_D^(-omega): t_tgt = c*mean, t_min = c*(mean - eta*std),
/// t_max = c*(mean + eta*std).
pub fn band_durations_from_moments(
    scale: f64,
    mean: f64,
    std: f64,
    eta: f64,
    nu: f64,
) -> Result<IsBandDurations> {
    if !(eta >= 0.0) {
        return Err(Error::invalid("eta", "must be >= 0"));
    }
    if !(mean > 0.0 && std >= 0.0 && scale > 0.0) {
        return Err(Error::invalid("moments", "need mean > 0, std >= 0, scale > 0"));
    }
    let lo = mean - eta * std;
    if !(lo > 0.0) {
        return Err(Error::invalid(
            "eta",
            format!("band collapses: mean - eta*std = {lo} <= 0; discretion too large"),
        ));
    }
    let d = IsBandDurations {
        t_min: scale * lo,
        t_tgt: scale * mean,
        t_max: scale * (mean + eta * std),
        nu,
        eta,
    };
    d.validate()?;
    Ok(d)
}

/// Band durations anchored to a known target duration (typically the
/// closed-form T_opt): the uncertainty scales the target by the relative
/// dispersion of V_D^(-omega), i.e. scale = t_tgt / mean.
pub fn band_durations_anchored(
    t_tgt: f64,
    mean: f64,
    std: f64,
    eta: f64,
    nu: f64,
) -> Result<IsBandDurations> {
    if !(t_tgt > 0.0) {
        return Err(Error::invalid("t_tgt", "must be > 0"));
    }
    band_durations_from_moments(t_tgt / mean, mean, std, eta, nu)
}

/// Band durations from the volume distribution with the exponent tied to
/// the impact model, omega = beta/(beta+1). The shape parameter is the
/// numerical optimum at the target duration.
pub fn band_durations(
    p: &ImpactParams,
    aversion: f64,
    x0: f64,
    dist: &VolumeDistribution,
    eta: f64,
) -> Result<IsBandDurations> {
    p.validate()?;
    let omega = p.beta / (p.beta + 1.0);
    let (mean, std) = lognormal_moments(dist, omega)?;
    let scale = duration_scale(p, aversion, x0, omega);
    let t_tgt = scale * mean;
    let r = RiskParams::from_impact(p, aversion, x0)?;
    let nu = optimal_shape(t_tgt, p, &r, x0)?.nu;
    band_durations_from_moments(scale, mean, std, eta, nu)
}

/// Cumulative schedule X(t; T) = x0 - Y(t; T) for one duration.
fn filled_on_schedule(x0: f64, t_dur: f64, nu: f64, t: f64) -> f64 {
    if t >= t_dur {
        x0
    } else if t <= 0.0 {
        0.0
    } else {
        x0 * (1.0 - (1.0 - t / t_dur).powf(nu))
    }
}

/// Uncertainty bands of the shortfall schedule at volume time `t`. The
/// fastest schedule (duration t_min) bounds filled shares from above, the
/// slowest (t_max) from below.
pub fn is_bands_at(dur: &IsBandDurations, x0: f64, t: f64) -> BandSet {
    let t_clamped = t.max(0.0);
    BandSet {
        t,
        x_min: filled_on_schedule(x0, dur.t_max, dur.nu, t_clamped),
        x_tgt: filled_on_schedule(x0, dur.t_tgt, dur.nu, t_clamped),
        x_max: filled_on_schedule(x0, dur.t_min, dur.nu, t_clamped),
        x0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference inputs used across the tests: a 1M-share buy at 24.7
    /// against 70M daily volume.
    pub(crate) fn reference_params() -> ImpactParams {
        ImpactParams {
            i0: 0.1,
            beta: 0.5,
            sigma_d: 0.0113,
            p0: 24.7,
            v_d: 7e7,
            g0: 1.0,
            gamma: 0.5,
        }
    }

    const X0: f64 = 1e6;
    const AVERSION: f64 = 5.0;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn residual_endpoints_and_linear_midpoint() {
        let s = PowerLawSchedule::new(1e6, 0.04, 1.0).unwrap();
        assert_eq!(s.residual(0.0), 1e6);
        assert_eq!(s.residual(0.02), 5e5);
        assert_eq!(s.residual(0.04), 0.0);
        assert_eq!(s.residual(1.0), 0.0);
    }

    #[test]
    fn residual_power_evaluation() {
        let s = PowerLawSchedule::new(1e6, 0.037, 1.65).unwrap();
        let v = s.residual(0.0185);
        // Independent route: exp(nu * ln(1/2)).
        let expect = 1e6 * (1.65 * 0.5f64.ln()).exp();
        assert!(rel_err(v, expect) < 1e-12);
        assert!((v - 318_800.0).abs() < 200.0);
    }

    #[test]
    fn impact_shape_factor_is_one_for_linear() {
        let p = reference_params();
        let i = impact_cost(0.25, 1.0, &p, X0).unwrap();
        let bare = p.i0 * p.sigma_d * X0 * p.p0 * (X0 / (0.25 * p.v_d)).powf(p.beta);
        assert!(rel_err(i, bare) < 1e-14);
    }

    #[test]
    fn impact_reference_value() {
        let p = reference_params();
        let i = impact_cost(0.037, 1.0, &p, X0).unwrap();
        assert!(rel_err(i, 17_343.051_538_859_494) < 1e-9);
        assert!(impact_cost(0.0, 1.0, &p, X0).is_err());
        assert!(impact_cost(-0.1, 1.0, &p, X0).is_err());
    }

    #[test]
    fn timing_risk_linear_and_scaling() {
        let p = reference_params();
        let r1 = timing_risk_sq(0.2, 1.0, &p, X0).unwrap();
        let direct = p.sigma_d.powi(2) * X0 * X0 * p.p0 * p.p0 * 0.2 / 3.0;
        assert!(rel_err(r1, direct) < 1e-14);
        let r2 = timing_risk_sq(0.4, 1.0, &p, X0).unwrap();
        assert!(rel_err(r2, 2.0 * r1) < 1e-14);
    }

    #[test]
    fn total_cost_risk_neutral_limit() {
        // rho -> infinity (aversion -> 0) leaves only the impact term.
        let p = reference_params();
        let r = RiskParams::new(1e-9, p.sigma_d, X0, p.p0).unwrap();
        let c = total_cost(0.05, 1.3, &p, &r, X0).unwrap();
        let i = impact_cost(0.05, 1.3, &p, X0).unwrap();
        assert!(rel_err(c, i) < 1e-6);
    }

    #[test]
    fn total_cost_diverges_as_duration_shrinks() {
        let p = reference_params();
        let r = RiskParams::from_impact(&p, AVERSION, X0).unwrap();
        let c1 = total_cost(1e-3, 1.0, &p, &r, X0).unwrap();
        let c2 = total_cost(1e-6, 1.0, &p, &r, X0).unwrap();
        assert!(c2 > 10.0 * c1);
    }

    #[test]
    fn optimal_duration_reference_and_scaling() {
        let p = reference_params();
        let t = optimal_duration(&p, AVERSION, X0).unwrap();
        assert!((t - 0.037).abs() < 0.0005);
        assert!(rel_err(t, 0.037_187_885_654_465_624) < 1e-12);
        // beta = 0.5: multiplying X0 by 8 doubles T_opt.
        let t8 = optimal_duration(&p, AVERSION, 8.0 * X0).unwrap();
        assert!(rel_err(t8, 2.0 * t) < 1e-12);
        // Doubling aversion divides T_opt by 2^(1/(beta+1)).
        let t2 = optimal_duration(&p, 2.0 * AVERSION, X0).unwrap();
        assert!(rel_err(t2, t / 2f64.powf(1.0 / 1.5)) < 1e-12);
    }

    #[test]
    fn optimal_participation_reference_and_identity() {
        let p = reference_params();
        let rate = optimal_participation(&p, AVERSION, X0).unwrap();
        assert!((rate - 0.38).abs() < 0.005);
        let t = optimal_duration(&p, AVERSION, X0).unwrap();
        assert!(rel_err(rate * t * p.v_d, X0) < 1e-12);
        assert!(rel_err(rate, X0 / (t * p.v_d)) < 1e-12);
    }

    #[test]
    fn optimal_shape_reference_value() {
        let p = reference_params();
        let r = RiskParams::from_impact(&p, AVERSION, X0).unwrap();
        let t_opt = optimal_duration(&p, AVERSION, X0).unwrap();
        let shape = optimal_shape(t_opt, &p, &r, X0).unwrap();
        assert!(!shape.at_boundary);
        assert!((shape.nu - 1.65).abs() < 0.05, "nu = {}", shape.nu);
    }

    #[test]
    fn optimal_shape_limits() {
        let p = reference_params();
        let t = 0.05;
        // Impact-only limit (rho -> infinity): the shape factor is
        // increasing in nu, so the minimizer saturates at the lower edge.
        let neutral = RiskParams::new(1e-12, p.sigma_d, X0, p.p0).unwrap();
        let lo = optimal_shape(t, &p, &neutral, X0).unwrap();
        assert!(lo.nu < 1.01, "nu = {}", lo.nu);
        // Risk-dominated limit (rho -> 0): pushes nu to the upper bound.
        let averse = RiskParams::new(1e12, p.sigma_d, X0, p.p0).unwrap();
        let hi = optimal_shape(t, &p, &averse, X0).unwrap();
        assert!(hi.at_boundary);
        assert!(hi.nu > NU_MAX - 1e-2);
    }

    #[test]
    fn optimal_shortfall_equals_impact_at_optimal_duration() {
        let p = reference_params();
        for nu in [1.0, 1.65, 2.5] {
            let t_opt = optimal_duration(&p, AVERSION, X0).unwrap();
            let a = optimal_shortfall(&p, AVERSION, X0, nu).unwrap();
            let b = impact_cost(t_opt, nu, &p, X0).unwrap();
            assert!(rel_err(a, b) < 1e-12, "nu={nu}");
        }
    }

    #[test]
    fn optimal_shortfall_per_share_volume_scaling() {
        // At beta = 0.5 the per-share cost scales as (X0/V_D)^(1/3);
        // fit the exponent from two order sizes.
        let p = reference_params();
        let c1 = optimal_shortfall(&p, AVERSION, X0, 1.0).unwrap() / X0;
        let c2 = optimal_shortfall(&p, AVERSION, 8.0 * X0, 1.0).unwrap() / (8.0 * X0);
        let fitted = (c2 / c1).ln() / 8f64.ln();
        assert!((fitted - 1.0 / 3.0).abs() < 1e-6, "exponent {fitted}");
    }

    #[test]
    fn optimal_shortfall_impact_scale_sensitivity() {
        // I(T_opt) ~ I0^(1 - beta/(beta+1)) = I0^(1/(beta+1)).
        let p = reference_params();
        let mut p2 = p;
        p2.i0 *= 2.0;
        let a = optimal_shortfall(&p, AVERSION, X0, 1.0).unwrap();
        let b = optimal_shortfall(&p2, AVERSION, X0, 1.0).unwrap();
        assert!(rel_err(b / a, 2f64.powf(1.0 / 1.5)) < 1e-12);
    }

    #[test]
    fn powerlaw_cost_duration_free_when_exponent_cancels() {
        // gamma + beta = 1 kills the T dependence.
        let p = reference_params();
        let a = powerlaw_kernel_cost(0.1, 1.4, &p, X0).unwrap();
        let b = powerlaw_kernel_cost(1.7, 1.4, &p, X0).unwrap();
        assert!(rel_err(a, b) < 1e-12);
    }

    #[test]
    fn powerlaw_cost_hand_value_linear_schedule() {
        // nu=1, gamma=beta=0.5: the Gamma block reduces to 4/3.
        let mut p = reference_params();
        p.g0 = 0.3;
        let v = powerlaw_kernel_cost(0.25, 1.0, &p, X0).unwrap();
        let expect = p.i0 * p.sigma_d * 0.3 * X0 * p.p0 * (X0 / p.v_d).sqrt() * (4.0 / 3.0);
        assert!(rel_err(v, expect) < 1e-12);
    }

    #[test]
    fn powerlaw_cost_rejects_divergent_kernel() {
        let mut p = reference_params();
        p.gamma = 1.0;
        assert!(powerlaw_kernel_cost(0.1, 1.0, &p, X0).is_err());
        p.gamma = 1.3;
        assert!(powerlaw_kernel_cost(0.1, 1.0, &p, X0).is_err());
    }

    #[test]
    fn lognormal_moments_degenerate_and_reference() {
        let tight = VolumeDistribution {
            mu_z: 18.0,
            sigma_z: 1e-12,
        };
        let (mean, std) = lognormal_moments(&tight, 0.5).unwrap();
        assert!(rel_err(mean, (-9.0f64).exp()) < 1e-9);
        assert!(std < 1e-12 * mean.max(1.0));

        let dist = VolumeDistribution {
            mu_z: 18.0,
            sigma_z: 0.4,
        };
        let (mean, std) = lognormal_moments(&dist, 0.5).unwrap();
        assert!(rel_err(mean, 1.259_028_475_016_698_4e-4) < 1e-12);
        assert!((mean - 1.3e-4).abs() / 1.3e-4 < 0.05);
        assert!(rel_err(std, 2.543_448_622_186_055_5e-5) < 1e-12);
    }

    #[test]
    fn band_durations_zero_discretion_collapses() {
        let p = reference_params();
        let dist = VolumeDistribution {
            mu_z: 18.0,
            sigma_z: 0.4,
        };
        let d = band_durations(&p, AVERSION, X0, &dist, 0.0).unwrap();
        assert_eq!(d.t_min, d.t_tgt);
        assert_eq!(d.t_max, d.t_tgt);
    }

    #[test]
    fn band_durations_formula_path_matches_closed_form_in_tight_limit() {
        // As sigma_z -> 0, the target duration equals the closed-form
        // T_opt evaluated at V_D = exp(mu_z).
        let mut p = reference_params();
        p.v_d = 18.0f64.exp();
        let dist = VolumeDistribution {
            mu_z: 18.0,
            sigma_z: 1e-6,
        };
        let d = band_durations(&p, AVERSION, X0, &dist, 1.0).unwrap();
        let t_opt = optimal_duration(&p, AVERSION, X0).unwrap();
        assert!(rel_err(d.t_tgt, t_opt) < 1e-6);
    }

    #[test]
    fn band_durations_anchored_reference_values() {
        let p = reference_params();
        let t_opt = optimal_duration(&p, AVERSION, X0).unwrap();
        let d = band_durations_anchored(t_opt, 1.3e-4, 0.4e-4, 1.0, 1.65).unwrap();
        assert!((d.t_min - 0.025).abs() < 0.001, "t_min = {}", d.t_min);
        assert!((d.t_max - 0.049).abs() < 0.001, "t_max = {}", d.t_max);
        assert!(rel_err(d.t_tgt, t_opt) < 1e-12);
    }

    #[test]
    fn band_durations_reject_collapsing_band() {
        let err = band_durations_from_moments(100.0, 1.0e-4, 0.4e-4, 3.0, 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn is_bands_endpoints() {
        let d = IsBandDurations {
            t_min: 0.025,
            t_tgt: 0.037,
            t_max: 0.049,
            nu: 1.65,
            eta: 1.0,
        };
        let b0 = is_bands_at(&d, X0, 0.0);
        assert_eq!((b0.x_min, b0.x_tgt, b0.x_max), (0.0, 0.0, 0.0));
        let b1 = is_bands_at(&d, X0, 0.049);
        assert_eq!((b1.x_min, b1.x_tgt, b1.x_max), (X0, X0, X0));
        let b2 = is_bands_at(&d, X0, 0.12);
        assert_eq!(b2.x_min, X0);
    }

    #[test]
    fn is_bands_regression_anchor() {
        // Hand evaluation of the three schedules at t = 0.02 via exp/ln.
        let d = IsBandDurations {
            t_min: 0.025,
            t_tgt: 0.037,
            t_max: 0.049,
            nu: 1.65,
            eta: 1.0,
        };
        let b = is_bands_at(&d, X0, 0.02);
        let by_hand = |t_dur: f64| X0 * (1.0 - (1.65 * (1.0 - 0.02 / t_dur).ln()).exp());
        assert!(rel_err(b.x_max, by_hand(0.025)) < 1e-12);
        assert!(rel_err(b.x_tgt, by_hand(0.037)) < 1e-12);
        assert!(rel_err(b.x_min, by_hand(0.049)) < 1e-12);
    }

    proptest! {
        #[test]
        fn is_bands_always_ordered(t in 0.0..0.08f64, eta in 0.0..2.0f64, nu in 1.0..4.0f64) {
            let d = band_durations_anchored(0.037, 1.3e-4, 0.4e-4, eta, nu).unwrap();
            let b = is_bands_at(&d, X0, t);
            b.validate().unwrap();
        }

        #[test]
        fn impact_cost_dimensional_scaling(
            t in 0.01..1.0f64, nu in 1.0..4.0f64, scale in 1.1..5.0f64
        ) {
            // Linear in P0 and sigma_D.
            let p = reference_params();
            let base = impact_cost(t, nu, &p, X0).unwrap();
            let mut pp = p; pp.p0 *= scale;
            prop_assert!(rel_err(impact_cost(t, nu, &pp, X0).unwrap(), scale * base) < 1e-12);
            let mut ps = p; ps.sigma_d *= scale;
            prop_assert!(rel_err(impact_cost(t, nu, &ps, X0).unwrap(), scale * base) < 1e-12);
            // Timing risk is quadratic in both.
            let rbase = timing_risk_sq(t, nu, &p, X0).unwrap();
            prop_assert!(rel_err(timing_risk_sq(t, nu, &pp, X0).unwrap(), scale * scale * rbase) < 1e-12);
            prop_assert!(rel_err(timing_risk_sq(t, nu, &ps, X0).unwrap(), scale * scale * rbase) < 1e-12);
        }
    }
}
