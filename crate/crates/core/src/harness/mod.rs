//! Seeded Monte-Carlo experiments.
//!
//! A [`Config`] describes the radio setting, the synthetic world and the
//! exam. For every seed the harness draws a world and a channel, runs the
//! exam against `M0`, then lets each method allocate power, uploads the
//! resulting whole frames and grades three questions per placed object
//! against `M0` plus the uploads.

mod config;
mod run;
mod world;

use std::io::Write;

pub use config::{Backend, BaseMemorySpec, Config, Placement, WorldConfig, DEFAULT_OBJECTS, DEFAULT_SWEEP_MW};
pub use run::{
    allocate, build_scenario, evaluate, gae_scores, gae_table, oracle_accuracy, prepare_run, run_campaign, run_once,
    run_prepared, run_sweep, Aggregate, Campaign, CampaignOptions, GaeBackend, GaeRow, Method, PreparedRun, RunFailure,
    RunMetrics, RunOptions, RunRecord, Scenario, Stat,
};
pub use world::{build_world, PlacedObject, World};

use crate::error::Result;

pub const CSV_COLUMNS: [&str; 9] =
    ["method", "seed", "p_sum_mw", "eqa_accuracy", "qom", "sum_rate_mbps", "connected_drones", "solver_iters", "wall_ms"];

/// Writes the per-run table. Failed runs keep their identity columns and leave the metrics empty.
pub fn write_runs_csv<W: Write>(out: W, campaigns: &[Campaign]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for campaign in campaigns {
        for row in &campaign.rows {
            match row {
                RunRecord::Ok(m) => w.write_record([
                    m.method.name().to_string(),
                    m.seed.to_string(),
                    m.p_sum_mw.to_string(),
                    m.eqa_accuracy.to_string(),
                    m.qom.to_string(),
                    m.sum_rate_mbps.to_string(),
                    m.connected_drones.to_string(),
                    m.solver_iters.to_string(),
                    m.wall_ms.to_string(),
                ])?,
                RunRecord::Failed(f) => w.write_record([
                    f.method.name().to_string(),
                    f.seed.to_string(),
                    f.p_sum_mw.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-method means and standard errors, one line per (budget, method).
pub fn write_summary<W: Write>(mut out: W, campaigns: &[Campaign]) -> Result<()> {
    writeln!(out, "{:>8} {:<10} {:>5} {:>17} {:>17} {:>19} {:>13}", "p_sum_mw", "method", "runs", "accuracy", "qom", "sum_rate_mbps", "connected")?;
    for c in campaigns {
        for a in c.aggregates() {
            writeln!(
                out,
                "{:>8} {:<10} {:>5} {:>8.4} ± {:<6.4} {:>8.4} ± {:<6.4} {:>9.2} ± {:<7.2} {:>5.2} ± {:<5.2}",
                a.p_sum_mw,
                a.method.name(),
                a.runs,
                a.eqa_accuracy.mean,
                a.eqa_accuracy.std_err,
                a.qom.mean,
                a.qom.std_err,
                a.sum_rate_mbps.mean,
                a.sum_rate_mbps.std_err,
                a.connected_drones.mean,
                a.connected_drones.std_err,
            )?;
            if a.failures > 0 {
                writeln!(out, "{:>8} {:<10} {} failed runs", "", a.method.name(), a.failures)?;
            }
        }
    }
    Ok(())
}

pub fn write_gae_csv<W: Write>(out: W, rows: &[GaeRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["robot", "gae_mean", "gae_stderr", "accuracy_mean", "accuracy_stderr"])?;
    for r in rows {
        w.write_record([
            r.robot.to_string(),
            r.gae.mean.to_string(),
            r.gae.std_err.to_string(),
            r.accuracy.mean.to_string(),
            r.accuracy.std_err.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line per (method, robot) for a single allocation.
pub fn write_allocation_csv<W: Write>(out: W, prepared: &PreparedRun, runs: &[RunMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "seed", "robot", "power_mw", "gae", "lambda", "frames"])?;
    for m in runs {
        for k in 0..m.powers_w.len() {
            w.write_record([
                m.method.name().to_string(),
                m.seed.to_string(),
                k.to_string(),
                (m.powers_w[k] * 1e3).to_string(),
                prepared.gae.scores[k].to_string(),
                prepared.params.lambda[k].to_string(),
                m.frames[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
