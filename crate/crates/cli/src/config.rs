//! Run configuration: JSON schemas, presets, and the derivation of the
//! shortfall schedule from its inputs. Unknown keys are rejected
//! everywhere so a typo fails loudly instead of silently using a
//! default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bandsched::discrete::BinCoordinate;
use bandsched::driver::DriverConfig;
use bandsched::pov::PovRates;
use bandsched::schedule::{Order, Side};
use bandsched::shortfall::{
    band_durations_anchored, band_durations_from_moments, duration_scale, impact_cost,
    lognormal_moments, optimal_duration, optimal_participation, optimal_shape,
    powerlaw_kernel_cost, timing_risk_sq, ImpactParams, IsBandDurations, RiskParams,
    VolumeDistribution,
};
use bandsched::sim::SimConfig;
use bandsched::vwap::{build_profile, load_history_csv, VolumeProfile, VwapConfig};

use crate::CliError;

/// Top-level configuration for the `run-*` subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub order: Order,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub driver: DriverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vwap: Option<VwapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pov: Option<PovSection>,
    #[serde(default, rename = "is", skip_serializing_if = "Option::is_none")]
    pub shortfall: Option<IsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteSection>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.order
            .validate()
            .and_then(|_| self.sim.validate())
            .map_err(|e| CliError::validation(e.to_string()))
    }
}

/// Where the VWAP volume profile comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ProfileSpec {
    /// Parametric U-shaped profile.
    UShaped {
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default = "default_amp")]
        amp: f64,
        #[serde(default = "default_dispersion")]
        dispersion: f64,
    },
    /// Historical daily curves, one CSV row per day (date, then the
    /// cumulative fractions on the grid).
    HistoryCsv {
        path: PathBuf,
        #[serde(default)]
        quantile_level: Option<f64>,
    },
    /// A previously persisted profile.
    Json { path: PathBuf },
}

fn default_bins() -> usize {
    bandsched::vwap::DEFAULT_BINS
}
fn default_amp() -> f64 {
    0.75
}
fn default_dispersion() -> f64 {
    0.08
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VwapSection {
    #[serde(default)]
    pub config: VwapConfig,
    pub profile: ProfileSpec,
}

impl VwapSection {
    /// Materialize the profile over the session window, printing any
    /// profile-builder warnings to stderr.
    pub fn build_profile(&self, t0: f64, t1: f64) -> Result<VolumeProfile, CliError> {
        match &self.profile {
            ProfileSpec::UShaped {
                bins,
                amp,
                dispersion,
            } => Ok(VolumeProfile::u_shaped(*bins, t0, t1, *amp, *dispersion)),
            ProfileSpec::HistoryCsv {
                path,
                quantile_level,
            } => {
                let file = std::fs::File::open(path).map_err(|e| {
                    CliError::validation(format!("cannot open {}: {e}", path.display()))
                })?;
                let curves =
                    load_history_csv(file).map_err(|e| CliError::validation(e.to_string()))?;
                let built = build_profile(t0, t1, &curves, *quantile_level)
                    .map_err(|e| CliError::validation(e.to_string()))?;
                for w in &built.warnings {
                    eprintln!("warning: {w}");
                }
                Ok(built.profile)
            }
            ProfileSpec::Json { path } => {
                VolumeProfile::load_json(path).map_err(|e| CliError::validation(e.to_string()))
            }
        }
    }
}

/// Constant participation rates, given either as an explicit triple, a
/// range, or a target with a tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_tgt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub strict: bool,
}

impl PovSection {
    pub fn rates(&self) -> Result<PovRates, CliError> {
        let rates = match (self.p_min, self.p_tgt, self.p_max, self.tolerance) {
            (Some(lo), Some(mid), Some(hi), None) => PovRates::constant(lo, mid, hi),
            (Some(lo), None, Some(hi), None) => PovRates::from_range(lo, hi),
            (None, Some(tgt), None, Some(tol)) => PovRates::from_target(tgt, tol),
            _ => {
                return Err(CliError::validation(
                    "pov: give p_min/p_tgt/p_max, p_min/p_max, or p_tgt with tolerance",
                ))
            }
        };
        rates.map_err(|e| CliError::validation(e.to_string()))
    }
}

/// Explicit moments of V_D^-omega, as printed in a research report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuotedMoments {
    pub mean: f64,
    pub std: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
}

fn default_omega() -> f64 {
    0.5
}

/// Shortfall optimizer inputs. When `quoted_moments` is present the band
/// durations are anchored at the closed-form optimal duration and scaled
/// by the quoted relative dispersion; otherwise the lognormal moment
/// formulas at omega = beta/(beta+1) produce them directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsSection {
    pub impact: ImpactParams,
    pub aversion: f64,
    pub volume: VolumeDistribution,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quoted_moments: Option<QuotedMoments>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscreteSection {
    pub n_bins: usize,
    pub coordinate: BinCoordinate,
}

impl Default for DiscreteSection {
    fn default() -> Self {
        DiscreteSection {
            n_bins: 13,
            coordinate: BinCoordinate::Clock,
        }
    }
}

/// Standalone optimizer configuration for `optimize-is`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub x0: f64,
    pub aversion: f64,
    pub impact: ImpactParams,
    pub volume: VolumeDistribution,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quoted_moments: Option<QuotedMoments>,
}

/// Where the band-duration moments came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandMomentsReport {
    pub source: String,
    pub omega: f64,
    pub mean: f64,
    pub std: f64,
}

/// Optimizer output, emitted as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub schema_version: u32,
    pub x0: f64,
    pub aversion: f64,
    pub t_opt: f64,
    pub p_opt: f64,
    pub nu_opt: f64,
    pub nu_at_boundary: bool,
    pub t_min: f64,
    pub t_tgt: f64,
    pub t_max: f64,
    pub eta: f64,
    pub band_moments: BandMomentsReport,
    /// Lognormal moments of V_D^-omega recomputed at the quoted omega
    /// for comparison against externally supplied values.
    pub lognormal_moments_check: BandMomentsReport,
    pub impact_cost: f64,
    pub timing_risk: f64,
    pub risk_cost: f64,
    pub total_cost: f64,
    pub cost_per_share: f64,
    pub cost_bps: f64,
    /// Cost under the power-law decay kernel at the same (T, nu),
    /// reported alongside the delta-kernel figures.
    pub powerlaw_kernel_cost: f64,
}

/// Run the optimizer pipeline: closed-form duration and participation,
/// numerical shape, band durations, and the cost block.
pub fn derive_is(
    impact: &ImpactParams,
    aversion: f64,
    x0: f64,
    volume: &VolumeDistribution,
    eta: f64,
    quoted: Option<QuotedMoments>,
) -> Result<(IsBandDurations, OptimizeReport), CliError> {
    let fail = |e: bandsched::Error| CliError::validation(e.to_string());
    impact.validate().map_err(fail)?;
    let t_opt = optimal_duration(impact, aversion, x0).map_err(fail)?;
    let p_opt = optimal_participation(impact, aversion, x0).map_err(fail)?;
    let risk = RiskParams::from_impact(impact, aversion, x0).map_err(fail)?;
    let shape = optimal_shape(t_opt, impact, &risk, x0).map_err(fail)?;

    let omega_formula = impact.beta / (impact.beta + 1.0);
    let (durations, band_moments) = match quoted {
        Some(q) => {
            let durations =
                band_durations_anchored(t_opt, q.mean, q.std, eta, shape.nu).map_err(fail)?;
            let moments = BandMomentsReport {
                source: "quoted".into(),
                omega: q.omega,
                mean: q.mean,
                std: q.std,
            };
            (durations, moments)
        }
        None => {
            let (mean, std) = lognormal_moments(volume, omega_formula).map_err(fail)?;
            let scale = duration_scale(impact, aversion, x0, omega_formula);
            let durations =
                band_durations_from_moments(scale, mean, std, eta, shape.nu).map_err(fail)?;
            let moments = BandMomentsReport {
                source: "lognormal".into(),
                omega: omega_formula,
                mean,
                std,
            };
            (durations, moments)
        }
    };

    let check_omega = quoted.map(|q| q.omega).unwrap_or(omega_formula);
    let (check_mean, check_std) = lognormal_moments(volume, check_omega).map_err(fail)?;

    let impact_at_opt = impact_cost(t_opt, shape.nu, impact, x0).map_err(fail)?;
    let risk_sq = timing_risk_sq(t_opt, shape.nu, impact, x0).map_err(fail)?;
    let risk_cost = risk_sq / (2.0 * risk.rho);
    let kernel_cost = powerlaw_kernel_cost(t_opt, shape.nu, impact, x0).map_err(fail)?;
    let notional = x0 * impact.p0;

    let report = OptimizeReport {
        schema_version: bandsched::report::SCHEMA_VERSION,
        x0,
        aversion,
        t_opt,
        p_opt,
        nu_opt: shape.nu,
        nu_at_boundary: shape.at_boundary,
        t_min: durations.t_min,
        t_tgt: durations.t_tgt,
        t_max: durations.t_max,
        eta,
        band_moments,
        lognormal_moments_check: BandMomentsReport {
            source: "lognormal".into(),
            omega: check_omega,
            mean: check_mean,
            std: check_std,
        },
        impact_cost: impact_at_opt,
        timing_risk: risk_sq.sqrt(),
        risk_cost,
        total_cost: impact_at_opt + risk_cost,
        cost_per_share: impact_at_opt / x0,
        cost_bps: impact_at_opt / notional * 1e4,
        powerlaw_kernel_cost: kernel_cost,
    };
    Ok((durations, report))
}

/// The built-in optimizer preset reproducing the worked 1M-share
/// example: quoted moments of V_D^-0.5 with one-sigma discretion.
pub fn paper_example_optimize() -> OptimizeConfig {
    OptimizeConfig {
        x0: 1e6,
        aversion: 5.0,
        impact: ImpactParams {
            i0: 0.1,
            beta: 0.5,
            sigma_d: 0.0113,
            p0: 24.7,
            v_d: 7e7,
            g0: 1.0,
            gamma: 0.5,
        },
        volume: VolumeDistribution {
            mu_z: 18.0,
            sigma_z: 0.4,
        },
        eta: 1.0,
        quoted_moments: Some(QuotedMoments {
            mean: 1.3e-4,
            std: 0.4e-4,
            omega: 0.5,
        }),
    }
}

fn demo_sim(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        session_length: 1800.0,
        tick_interval: 1.0,
        daily_volume: 2e6,
        dark_arrival_rate: 5.0,
        dark_block_mean: 3_000.0,
        ..SimConfig::default()
    }
}

fn demo_order(x0: f64, t1: f64) -> Order {
    Order {
        side: Side::Buy,
        total_shares: x0,
        start_time: 0.0,
        end_time: Some(t1),
        limit_price: None,
    }
}

/// Built-in run presets: small, fast sessions exercising each strategy.
pub fn demo_run_config(strategy: &str, seed: u64) -> Option<RunConfig> {
    let sim = demo_sim(seed);
    let base = RunConfig {
        order: demo_order(50_000.0, sim.session_length),
        sim,
        driver: DriverConfig::default(),
        vwap: None,
        pov: None,
        shortfall: None,
        discrete: None,
    };
    match strategy {
        "vwap" => Some(RunConfig {
            vwap: Some(VwapSection {
                config: VwapConfig::default(),
                profile: ProfileSpec::UShaped {
                    bins: 26,
                    amp: 0.75,
                    dispersion: 0.08,
                },
            }),
            ..base
        }),
        "pov" => Some(RunConfig {
            order: demo_order(1_000_000.0, base.sim.session_length),
            pov: Some(PovSection {
                p_min: Some(0.05),
                p_tgt: Some(0.10),
                p_max: Some(0.15),
                tolerance: None,
                strict: false,
            }),
            ..base
        }),
        "is" => Some(RunConfig {
            order: demo_order(50_000.0, base.sim.session_length),
            shortfall: Some(IsSection {
                impact: ImpactParams {
                    i0: 0.1,
                    beta: 0.5,
                    sigma_d: 0.0113,
                    p0: 24.7,
                    v_d: 2e6,
                    g0: 1.0,
                    gamma: 0.5,
                },
                // Patient enough that the optimal participation stays
                // below the passive capture rate.
                aversion: 0.3,
                volume: VolumeDistribution {
                    mu_z: (2e6f64).ln(),
                    sigma_z: 0.4,
                },
                eta: 1.0,
                quoted_moments: None,
            }),
            ..base
        }),
        "discrete" => Some(RunConfig {
            vwap: Some(VwapSection {
                config: VwapConfig::default(),
                profile: ProfileSpec::UShaped {
                    bins: 26,
                    amp: 0.75,
                    dispersion: 0.08,
                },
            }),
            discrete: Some(DiscreteSection {
                n_bins: 13,
                coordinate: BinCoordinate::Clock,
            }),
            ..base
        }),
        _ => None,
    }
}

/// Load a JSON config file into any deserializable config type.
pub fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}
