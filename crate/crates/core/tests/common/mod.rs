#![allow(dead_code)]

use vrqos::sim::{
    run_sim_with, Arrivals, DelayStats, Scheduler, SimConfig, SimError, SimOptions, SimOutput, TrafficClass,
};

/// BG arrivals 1.0, 1.2, 1.4 ms and VR arrivals 1.5, 1.6 ms, 1500 B each,
/// 1 ms service, no overhead, no aggregation.
pub fn hand_scenario(scheduler: Scheduler) -> (SimConfig, SimOptions<'static>) {
    let cfg = SimConfig {
        phy_rate_vr_mbps: 12.0,
        phy_rate_bg_mbps: 12.0,
        per_frame_overhead_us: 0,
        aggregation_limit_packets: 1,
        scheduler,
        classify_after_ms: 0.0,
        duration_s: 1.0,
        warmup_s: 0.0,
        ..SimConfig::default()
    };
    let opts = SimOptions {
        arrivals: Arrivals::Explicit {
            vr: vec![(1_500_000, 1500), (1_600_000, 1500)],
            bg: vec![(1_000_000, 1500), (1_200_000, 1500), (1_400_000, 1500)],
        },
        record_log: true,
        record_packets: true,
        ..SimOptions::default()
    };
    (cfg, opts)
}

/// Expected delays (ms) per class in arrival order: (vr, bg).
pub fn hand_expected(scheduler: Scheduler) -> ([f64; 2], [f64; 3]) {
    match scheduler {
        Scheduler::Fifo => ([3.5, 4.4], [1.0, 1.8, 2.6]),
        Scheduler::VrPriority => ([1.5, 2.4], [1.0, 3.8, 4.6]),
    }
}

pub fn delays_ms(out: &SimOutput, class: TrafficClass) -> Vec<f64> {
    let mut v: Vec<(u64, f64)> = out
        .packets
        .iter()
        .filter(|p| p.class == class)
        .map(|p| (p.arrival_ns, (p.completion_ns - p.arrival_ns) as f64 / 1e6))
        .collect();
    v.sort_by_key(|x| x.0);
    v.into_iter().map(|x| x.1).collect()
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Checks the engine invariants on one recorded run; returns the first
/// violation.
pub fn check_invariants(cfg: &SimConfig, out: &SimOutput) -> Result<(), String> {
    let s = &out.stats;
    for (name, c) in [("vr", &s.vr), ("bg", &s.bg)] {
        if c.arrived != c.served + c.queued_at_end {
            return Err(format!("{name}: arrived {} != served {} + queued {}", c.arrived, c.served, c.queued_at_end));
        }
    }
    if out.packets.len() != s.vr.served + s.bg.served {
        return Err("packet records disagree with served counts".into());
    }
    for e in &out.log {
        if e.vr_waiting + e.bg_waiting > 0 && !e.busy {
            return Err(format!("idle with {} packets waiting at {} ns", e.vr_waiting + e.bg_waiting, e.time_ns));
        }
        if e.priority {
            if let Some((TrafficClass::Bg, _)) = e.started {
                if e.vr_waiting > 0 {
                    return Err(format!("BG served while VR waited at {} ns", e.time_ns));
                }
            }
        }
        if let Some((_, n)) = e.started {
            if n == 0 || n > cfg.aggregation_limit_packets {
                return Err(format!("opportunity of {n} packets"));
            }
        }
    }
    for p in &out.packets {
        if !(p.arrival_ns <= p.start_ns && p.start_ns < p.completion_ns) {
            return Err(format!("bad packet timing {p:?}"));
        }
    }
    // one class at a time on the medium, never overlapping
    let mut spans: Vec<(u64, u64)> = out.packets.iter().map(|p| (p.start_ns, p.completion_ns)).collect();
    spans.sort();
    spans.dedup();
    if spans.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err("overlapping transmissions".into());
    }
    // within a class, service follows arrival order
    for class in [TrafficClass::Vr, TrafficClass::Bg] {
        let mut v: Vec<(u64, u64)> = out
            .packets
            .iter()
            .filter(|p| p.class == class)
            .map(|p| (p.arrival_ns, p.start_ns))
            .collect();
        v.sort();
        if v.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(format!("{class} served out of arrival order"));
        }
    }
    Ok(())
}

/// Runs `cfg` under fifo with both classes and again with every packet
/// relabeled BG; with equal PHY rates and no aggregation the completion
/// times must agree.
pub fn fifo_class_blind(cfg: &SimConfig, vr: Vec<(u64, u32)>, bg: Vec<(u64, u32)>) -> Result<bool, SimError> {
    let cfg = SimConfig {
        scheduler: Scheduler::Fifo,
        phy_rate_bg_mbps: cfg.phy_rate_vr_mbps,
        aggregation_limit_packets: 1,
        ..cfg.clone()
    };
    let mut merged: Vec<(u64, u8, u32)> = vr.iter().map(|&(t, s)| (t, 0, s)).chain(bg.iter().map(|&(t, s)| (t, 1, s))).collect();
    merged.sort_by_key(|m| (m.0, m.1));
    let two = run_sim_with(
        &cfg,
        &SimOptions {
            arrivals: Arrivals::Explicit { vr, bg },
            record_packets: true,
            ..SimOptions::default()
        },
    )?;
    let one = run_sim_with(
        &cfg,
        &SimOptions {
            arrivals: Arrivals::Explicit {
                vr: Vec::new(),
                bg: merged.iter().map(|m| (m.0, m.2)).collect(),
            },
            record_packets: true,
            ..SimOptions::default()
        },
    )?;
    let times = |o: &SimOutput| {
        let mut v: Vec<(u64, u64)> = o.packets.iter().map(|p| (p.arrival_ns, p.completion_ns)).collect();
        v.sort();
        v
    };
    Ok(times(&two) == times(&one))
}

/// Generated arrivals of a short run, VR and BG, as explicit lists.
pub fn explicit_from(cfg: &SimConfig) -> (Vec<(u64, u32)>, Vec<(u64, u32)>) {
    let out = run_sim_with(
        &SimConfig {
            scheduler: Scheduler::Fifo,
            ..cfg.clone()
        },
        &SimOptions {
            record_packets: true,
            ..SimOptions::default()
        },
    )
    .expect("valid config");
    let mut vr = Vec::new();
    let mut bg = Vec::new();
    for p in &out.packets {
        match p.class {
            TrafficClass::Vr => vr.push((p.arrival_ns, p.size_bytes)),
            TrafficClass::Bg => bg.push((p.arrival_ns, p.size_bytes)),
        }
    }
    vr.sort();
    bg.sort();
    (vr, bg)
}

/// Run-to-run equality that treats the NaN of an empty class as equal.
pub fn same_stats(a: &DelayStats, b: &DelayStats) -> bool {
    format!("{a:?}") == format!("{b:?}")
}
