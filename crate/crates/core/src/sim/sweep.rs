use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_sim_with, DelayStats, Scheduler, SimConfig, SimError, SimOptions, Trigger};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub load_mbps: f64,
    pub scheduler: Scheduler,
    pub seed: u64,
    pub stats: DelayStats,
}

/// Runs both schedulers at every BG load. The two runs at one load share a
/// seed, so they see identical arrivals.
pub fn sweep(base: &SimConfig, loads_mbps: &[f64], trigger: &Trigger<'_>) -> Result<Vec<SweepRow>, SimError> {
    let jobs: Vec<(usize, Scheduler)> = (0..loads_mbps.len())
        .flat_map(|i| [(i, Scheduler::Fifo), (i, Scheduler::VrPriority)])
        .collect();
    jobs.par_iter()
        .map(|&(i, scheduler)| {
            let seed = derive_seed(base.seed, i as u64);
            let cfg = SimConfig {
                bg_load_mbps: loads_mbps[i],
                scheduler,
                seed,
                ..base.clone()
            };
            let options = SimOptions {
                trigger: *trigger,
                ..SimOptions::default()
            };
            let out = run_sim_with(&cfg, &options)?;
            Ok(SweepRow {
                load_mbps: loads_mbps[i],
                scheduler,
                seed,
                stats: out.stats,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("load_mbps,scheduler,class,count,mean_ms,median_ms,p99_ms,max_ms,served_bytes,unstable\n");
    for r in rows {
        for (class, c) in [("vr", &r.stats.vr), ("bg", &r.stats.bg)] {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
                r.load_mbps,
                r.scheduler,
                class,
                c.count,
                c.mean_ms,
                c.median_ms,
                c.p99_ms,
                c.max_ms,
                c.served_bytes,
                r.stats.unstable
            );
        }
    }
    s
}

/// Per-load comparison of the two schedulers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub load_mbps: f64,
    pub vr_p99_fifo_ms: f64,
    pub vr_p99_priority_ms: f64,
    pub bg_p99_fifo_ms: f64,
    pub bg_p99_priority_ms: f64,
}

impl SweepSummary {
    /// Pairs up fifo and priority rows by load, in the order loads first
    /// appear.
    pub fn from_rows(rows: &[SweepRow]) -> Vec<SweepSummary> {
        let mut loads: Vec<f64> = Vec::new();
        for r in rows {
            if !loads.contains(&r.load_mbps) {
                loads.push(r.load_mbps);
            }
        }
        loads
            .into_iter()
            .filter_map(|load| {
                let find = |s: Scheduler| rows.iter().find(|r| r.load_mbps == load && r.scheduler == s);
                let (f, p) = (find(Scheduler::Fifo)?, find(Scheduler::VrPriority)?);
                Some(SweepSummary {
                    load_mbps: load,
                    vr_p99_fifo_ms: f.stats.vr.p99_ms,
                    vr_p99_priority_ms: p.stats.vr.p99_ms,
                    bg_p99_fifo_ms: f.stats.bg.p99_ms,
                    bg_p99_priority_ms: p.stats.bg.p99_ms,
                })
            })
            .collect()
    }

    /// How many times lower VR tail delay is under priority.
    pub fn vr_improvement(&self) -> f64 {
        self.vr_p99_fifo_ms / self.vr_p99_priority_ms
    }

    /// How many times higher BG tail delay is under priority.
    pub fn bg_penalty(&self) -> f64 {
        self.bg_p99_priority_ms / self.bg_p99_fifo_ms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> SimConfig {
        SimConfig {
            duration_s: 3.0,
            warmup_s: 1.0,
            seed: 11,
            ..SimConfig::default()
        }
    }

    #[test]
    fn rows_cover_loads_and_schedulers() {
        let rows = sweep(&short(), &[100.0, 300.0], &Trigger::Oracle).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].seed, rows[1].seed);
        assert_ne!(rows[0].seed, rows[2].seed);
        // same arrivals under both schedulers
        assert_eq!(rows[0].stats.bg.arrived, rows[1].stats.bg.arrived);
        assert_eq!(rows[0].stats.vr.arrived, rows[1].stats.vr.arrived);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 1 + 8);
        assert_eq!(SweepSummary::from_rows(&rows).len(), 2);
    }

    #[test]
    fn fifo_vr_tail_grows_with_load() {
        let p99: Vec<f64> = [50.0, 200.0, 400.0]
            .iter()
            .map(|&load| {
                let cfg = SimConfig {
                    bg_load_mbps: load,
                    scheduler: Scheduler::Fifo,
                    duration_s: 10.0,
                    ..short()
                };
                super::super::run_sim(&cfg).unwrap().vr.p99_ms
            })
            .collect();
        assert!(p99.windows(2).all(|w| w[0] <= w[1]), "{p99:?}");
    }
}
