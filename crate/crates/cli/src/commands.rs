//! Subcommand bodies: optimizer runs, strategy backtests, the
//! discretized scheduler, and tape generation.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use bandsched::discrete::{run_schedule, BandCurve, BinGrid, ScheduleRun, VwapBandCurve};
use bandsched::driver::{run_order, StrategyKind};
use bandsched::report::{
    average_fill_price, compute_metrics, slippage_bps, trajectory_rows, write_fills_csv,
    write_metrics_json, write_tick_reports_jsonl, write_trajectory_csv, Metrics, SCHEMA_VERSION,
};
use bandsched::schedule::Order;
use bandsched::sim::{
    generate_market, quote_at, tape_vwap, write_tape_csv, EventKind, MarketEvent, SimConfig,
    TapeExecutor,
};

use crate::config::{derive_is, OptimizeConfig, RunConfig};
use crate::CliError;

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))
}

fn create(out: &Path, name: &str) -> Result<File, CliError> {
    let path = out.join(name);
    File::create(&path)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::runtime(e.to_string())
}

pub fn cmd_optimize_is(cfg: &OptimizeConfig, out: &Path) -> Result<(), CliError> {
    let (_, report) = derive_is(
        &cfg.impact,
        cfg.aversion,
        cfg.x0,
        &cfg.volume,
        cfg.eta,
        cfg.quoted_moments,
    )?;
    ensure_out_dir(out)?;
    let mut file = create(out, "optimize_report.json")?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    file.write_all(text.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(runtime)?;
    println!(
        "optimize-is: T_opt={:.4} p_opt={:.4} nu_opt={:.4} T_min={:.4} T_max={:.4}",
        report.t_opt, report.p_opt, report.nu_opt, report.t_min, report.t_max
    );
    println!(
        "  impact ${:.0} ({:.2} bp), risk ${:.0}, kernel ${:.0}; report: {}",
        report.impact_cost,
        report.cost_bps,
        report.risk_cost,
        report.powerlaw_kernel_cost,
        out.join("optimize_report.json").display()
    );
    Ok(())
}

/// Build the strategy for a `run-*` subcommand from its config section.
fn build_strategy(strategy: &str, cfg: &RunConfig) -> Result<StrategyKind, CliError> {
    let t0 = cfg.order.start_time;
    let t1 = cfg.order.end_time.unwrap_or(cfg.sim.session_length);
    match strategy {
        "vwap" => {
            let section = cfg
                .vwap
                .as_ref()
                .ok_or_else(|| CliError::validation("run-vwap needs a `vwap` config section"))?;
            section
                .config
                .validate()
                .map_err(|e| CliError::validation(e.to_string()))?;
            Ok(StrategyKind::AlphaVwap {
                profile: section.build_profile(t0, t1)?,
                cfg: section.config,
            })
        }
        "pov" => {
            let section = cfg
                .pov
                .as_ref()
                .ok_or_else(|| CliError::validation("run-pov needs a `pov` config section"))?;
            Ok(StrategyKind::AlphaPov {
                rates: section.rates()?,
                strict: section.strict,
            })
        }
        "is" => {
            let section = cfg.shortfall.as_ref().ok_or_else(|| {
                CliError::validation("run-is needs an `is` config section")
            })?;
            let (durations, report) = derive_is(
                &section.impact,
                section.aversion,
                cfg.order.total_shares,
                &section.volume,
                section.eta,
                section.quoted_moments,
            )?;
            println!(
                "run-is schedule: T_min={:.4} T_tgt={:.4} T_max={:.4} nu={:.4}",
                report.t_min, report.t_tgt, report.t_max, report.nu_opt
            );
            Ok(StrategyKind::AlphaIs {
                durations,
                v_d: cfg.sim.daily_volume,
            })
        }
        other => Err(CliError::validation(format!("unknown strategy `{other}`"))),
    }
}

pub fn cmd_run(strategy: &str, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let kind = build_strategy(strategy, cfg)?;
    let events = generate_market(&cfg.sim).map_err(|e| CliError::validation(e.to_string()))?;
    let run = run_order(&kind, &cfg.order, &events, &cfg.sim, &cfg.driver).map_err(runtime)?;
    let metrics = compute_metrics(&cfg.order, &run, kind.label(), cfg.sim.seed);

    ensure_out_dir(out)?;
    write_trajectory_csv(create(out, "trajectory.csv")?, &trajectory_rows(&run.reports))
        .map_err(runtime)?;
    write_fills_csv(create(out, "fills.csv")?, &run.state.fills).map_err(runtime)?;
    write_tick_reports_jsonl(create(out, "ticks.jsonl")?, &run.reports).map_err(runtime)?;
    write_metrics_json(create(out, "metrics.json")?, &metrics).map_err(runtime)?;

    println!(
        "{}: filled {}/{} shares, avg px {:.4}, shortfall {:.2} bp, vwap slip {} bp, \
         compliance {:.4}, dark {:.3}",
        kind.label(),
        metrics.filled,
        metrics.total_shares,
        metrics.avg_fill_price.unwrap_or(f64::NAN),
        metrics.shortfall_bps.unwrap_or(f64::NAN),
        metrics
            .vwap_slippage_bps
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "n/a".into()),
        metrics.band_compliance,
        metrics.dark_fill_fraction
    );
    println!("  outputs in {}", out.display());
    Ok(())
}

pub fn cmd_run_discrete(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let section = cfg.discrete.unwrap_or_default();
    let vwap = cfg.vwap.as_ref().ok_or_else(|| {
        CliError::validation("run-discrete needs a `vwap` config section for its band curve")
    })?;
    let t0 = cfg.order.start_time;
    let t1 = cfg.order.end_time.unwrap_or(cfg.sim.session_length);
    let events = generate_market(&cfg.sim).map_err(|e| CliError::validation(e.to_string()))?;

    // Grid coordinate range: clock grids span the window directly;
    // volume and trade grids span the expected session totals and their
    // boundaries are detected from the stream.
    let trades = || {
        events.iter().filter_map(|e| match e.kind {
            EventKind::Trade { qty, .. } => Some((e.time, qty)),
            _ => None,
        })
    };
    let (tau1, curve): (f64, Box<dyn BandCurve>) = match section.coordinate {
        bandsched::discrete::BinCoordinate::Clock => (
            t1,
            Box::new(VwapBandCurve {
                profile: vwap.build_profile(t0, t1)?,
                cfg: vwap.config,
                x0: cfg.order.total_shares,
            }),
        ),
        bandsched::discrete::BinCoordinate::Volume => (
            cfg.sim.daily_volume,
            Box::new(bandsched::discrete::LaggedLinearCurve {
                x0: cfg.order.total_shares,
                tau0: 0.0,
                tau1: cfg.sim.daily_volume,
                lag: 1.0 / section.n_bins as f64,
            }),
        ),
        bandsched::discrete::BinCoordinate::Trade => {
            let n_trades = trades().count() as f64;
            (
                n_trades,
                Box::new(bandsched::discrete::LaggedLinearCurve {
                    x0: cfg.order.total_shares,
                    tau0: 0.0,
                    tau1: n_trades,
                    lag: 1.0 / section.n_bins as f64,
                }),
            )
        }
    };
    let grid = BinGrid::new(section.coordinate, section.n_bins, 0.0, tau1)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let bounds = grid.realized_boundaries(trades(), t0, t1);
    let mut exec = TapeExecutor {
        cfg: &cfg.sim,
        events: &events,
    };
    let run = run_schedule(&cfg.order, &grid, curve.as_ref(), &mut exec, &bounds)
        .map_err(runtime)?;
    let metrics = discrete_metrics(&cfg.order, &run, &events, curve.as_ref(), &cfg.sim, t0, t1);

    ensure_out_dir(out)?;
    write_bin_ledger_csv(create(out, "bins.csv")?, &run)?;
    write_fills_csv(create(out, "fills.csv")?, &run.state.fills).map_err(runtime)?;
    write_metrics_json(create(out, "metrics.json")?, &metrics).map_err(runtime)?;
    println!(
        "run-discrete: {} bins ({:?}), filled {}/{} shares, cleanup {:.0} shares",
        run.ledger.len(),
        section.coordinate,
        run.state.filled,
        cfg.order.total_shares,
        run.ledger.iter().map(|r| r.cleanup).sum::<f64>()
    );
    println!("  outputs in {}", out.display());
    Ok(())
}

fn write_bin_ledger_csv(file: File, run: &ScheduleRun) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(file);
    for row in &run.ledger {
        wtr.serialize(row).map_err(runtime)?;
    }
    wtr.flush().map_err(runtime)
}

fn discrete_metrics(
    order: &Order,
    run: &ScheduleRun,
    events: &[MarketEvent],
    curve: &dyn BandCurve,
    sim: &SimConfig,
    t0: f64,
    t1: f64,
) -> Metrics {
    let avg = average_fill_price(&run.state.fills);
    let arrival_mid = quote_at(events, t0)
        .map(|(b, a)| 0.5 * (b + a))
        .unwrap_or(sim.price0);
    let completed = run.state.filled >= order.total_shares - 1e-9;
    let end = if completed {
        run.state.fills.last().map(|f| f.time).unwrap_or(t1)
    } else {
        t1
    };
    let market_vwap = tape_vwap(events, t0, end);
    let within = run
        .ledger
        .iter()
        .filter(|row| {
            curve
                .bands_at(row.tau_end)
                .map(|b| row.filled_after >= b.x_min - 1e-9 && row.filled_after <= b.x_max + 1e-9)
                .unwrap_or(false)
        })
        .count();
    Metrics {
        schema_version: SCHEMA_VERSION,
        strategy: "discrete".into(),
        seed: sim.seed,
        side: order.side,
        total_shares: order.total_shares,
        filled: run.state.filled,
        avg_fill_price: avg,
        arrival_mid,
        market_vwap,
        shortfall_bps: avg.map(|a| slippage_bps(order.side, a, arrival_mid)),
        vwap_slippage_bps: avg.and_then(|a| market_vwap.map(|v| slippage_bps(order.side, a, v))),
        band_compliance: if run.ledger.is_empty() {
            1.0
        } else {
            within as f64 / run.ledger.len() as f64
        },
        dark_fill_fraction: 0.0,
        participation_realized: None,
        completed_at: completed.then_some(end),
    }
}

pub fn cmd_gen_market(sim: &SimConfig, out: &Path) -> Result<(), CliError> {
    let events = generate_market(sim).map_err(|e| CliError::validation(e.to_string()))?;
    ensure_out_dir(out)?;
    write_tape_csv(create(out, "tape.csv")?, &events).map_err(runtime)?;
    println!(
        "gen-market: {} events over {:.0} s written to {}",
        events.len(),
        sim.session_length,
        out.join("tape.csv").display()
    );
    Ok(())
}
