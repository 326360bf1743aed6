mod common;

use proptest::prelude::*;
use vrqos::sim::{run_sim, run_sim_with, Scheduler, SimConfig, SimOptions, TrafficClass};

use common::*;

#[test]
fn hand_scenario_delay_tables() {
    for scheduler in [Scheduler::Fifo, Scheduler::VrPriority] {
        let (cfg, opts) = hand_scenario(scheduler);
        let out = run_sim_with(&cfg, &opts).unwrap();
        let (vr, bg) = hand_expected(scheduler);
        assert!(close(&delays_ms(&out, TrafficClass::Vr), &vr, 1e-9), "{scheduler}");
        assert!(close(&delays_ms(&out, TrafficClass::Bg), &bg, 1e-9), "{scheduler}");
        check_invariants(&cfg, &out).unwrap();
    }
}

#[test]
fn hand_scenario_is_class_blind_under_fifo() {
    let (cfg, _) = hand_scenario(Scheduler::Fifo);
    let vr = vec![(1_500_000, 1500), (1_600_000, 1500)];
    let bg = vec![(1_000_000, 1500), (1_200_000, 1500), (1_400_000, 1500)];
    assert!(fifo_class_blind(&cfg, vr, bg).unwrap());
}

#[test]
fn light_load_is_stable() {
    for scheduler in [Scheduler::Fifo, Scheduler::VrPriority] {
        let cfg = SimConfig {
            bg_load_mbps: 100.0,
            duration_s: 5.0,
            warmup_s: 1.0,
            scheduler,
            ..SimConfig::default()
        };
        assert!(!run_sim(&cfg).unwrap().unstable);
    }
}

#[test]
fn overload_is_flagged() {
    let cfg = SimConfig {
        bg_load_mbps: 1200.0,
        duration_s: 3.0,
        warmup_s: 0.5,
        scheduler: Scheduler::Fifo,
        ..SimConfig::default()
    };
    assert!(run_sim(&cfg).unwrap().unstable);
}

#[test]
fn misclassification_keeps_fifo() {
    // a priority run whose classifier never fires behaves exactly like fifo
    let base = SimConfig {
        duration_s: 3.0,
        warmup_s: 0.5,
        classify_after_ms: 10_000.0,
        ..SimConfig::default()
    };
    let late = run_sim(&SimConfig { scheduler: Scheduler::VrPriority, ..base.clone() }).unwrap();
    let fifo = run_sim(&SimConfig { scheduler: Scheduler::Fifo, ..base }).unwrap();
    assert!(late.priority_from_ms.is_none());
    assert_eq!(late.vr, fifo.vr);
    assert_eq!(late.bg, fifo.bg);
}

fn fuzz_config() -> impl Strategy<Value = SimConfig> {
    (
        0.0f64..700.0,
        prop::sample::select(vec![300.0, 600.5, 1201.0]),
        prop::sample::select(vec![240.0, 480.4, 960.8]),
        0u32..300,
        1usize..64,
        prop::bool::ANY,
        0.0f64..800.0,
        any::<u64>(),
    )
        .prop_map(|(load, vr, bg, oh, agg, prio, after, seed)| SimConfig {
            bg_load_mbps: load,
            phy_rate_vr_mbps: vr,
            phy_rate_bg_mbps: bg,
            per_frame_overhead_us: oh,
            aggregation_limit_packets: agg,
            scheduler: if prio { Scheduler::VrPriority } else { Scheduler::Fifo },
            classify_after_ms: after,
            duration_s: 1.5,
            warmup_s: 0.2,
            seed,
            ..SimConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn fuzzed_configs_hold_invariants(cfg in fuzz_config()) {
        let opts = SimOptions { record_log: true, record_packets: true, ..SimOptions::default() };
        let out = run_sim_with(&cfg, &opts).unwrap();
        prop_assert_eq!(check_invariants(&cfg, &out), Ok(()));
        let again = run_sim_with(&cfg, &opts).unwrap();
        prop_assert!(same_stats(&out.stats, &again.stats));
        prop_assert_eq!(&out.log, &again.log);
        let (vr, bg) = explicit_from(&SimConfig { duration_s: 0.3, warmup_s: 0.0, ..cfg.clone() });
        prop_assert!(fifo_class_blind(&cfg, vr, bg).unwrap());
    }
}
