//! Discrete-event model of an AP downlink shared by a VR station and a
//! background (BG) station.
//!
//! One non-preemptive server. A transmission opportunity serves up to
//! `aggregation_limit_packets` consecutive head packets of one station and
//! costs `Σ size·8 / phy_rate + per_frame_overhead_us`. Times are integer
//! nanoseconds so event order is exact.

mod engine;
mod stats;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::TrainedModel;
use crate::features::{extract_features, window_packets, ExtractionConfig, Label};
use crate::ingest::PacketRecord;
use crate::synth::VrProfile;

pub use engine::{run_sim, run_sim_with, Arrivals, LogEntry, PacketDelay, SimOptions, SimOutput};
pub use stats::{percentile, ClassStats, DelayStats};
pub use sweep::{sweep, sweep_csv, SweepRow, SweepSummary};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("explicit arrivals must be sorted by time ({class} list, index {index})")]
    UnsortedArrivals { class: TrafficClass, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficClass {
    Vr,
    Bg,
}

impl TrafficClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClass::Vr => "vr",
            TrafficClass::Bg => "bg",
        }
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    Fifo,
    /// FIFO until the classifier fires and labels the VR flow as VR, then
    /// strict (non-preemptive) priority for the VR station.
    VrPriority,
}

impl Scheduler {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheduler::Fifo => "fifo",
            Scheduler::VrPriority => "priority",
        }
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheduler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fifo" => Ok(Scheduler::Fifo),
            "priority" | "vr_priority" => Ok(Scheduler::VrPriority),
            other => Err(format!("unknown scheduler {other:?} (expected fifo or priority)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub vr_profile: VrProfile,
    pub bg_load_mbps: f64,
    pub bg_on_mean_ms: f64,
    pub bg_off_mean_ms: f64,
    pub bg_packet_bytes: u32,
    pub phy_rate_vr_mbps: f64,
    pub phy_rate_bg_mbps: f64,
    pub per_frame_overhead_us: u32,
    pub aggregation_limit_packets: usize,
    pub scheduler: Scheduler,
    pub classify_after_ms: f64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub seed: u64,
}

/// Two spatial streams, 80 MHz: 1024-QAM 5/6 and 256-QAM 5/6.
pub const DEFAULT_PHY_VR_MBPS: f64 = 1201.0;
pub const DEFAULT_PHY_BG_MBPS: f64 = 960.8;
/// EDCA contention (AIFS + mean backoff ≈ 110 µs), HE preamble, SIFS and
/// block-ack, rounded.
pub const DEFAULT_OVERHEAD_US: u32 = 200;
pub const DEFAULT_AGGREGATION_LIMIT: usize = 32;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            vr_profile: VrProfile::default(),
            bg_load_mbps: 400.0,
            bg_on_mean_ms: 70.0,
            bg_off_mean_ms: 30.0,
            bg_packet_bytes: 1500,
            phy_rate_vr_mbps: DEFAULT_PHY_VR_MBPS,
            phy_rate_bg_mbps: DEFAULT_PHY_BG_MBPS,
            per_frame_overhead_us: DEFAULT_OVERHEAD_US,
            aggregation_limit_packets: DEFAULT_AGGREGATION_LIMIT,
            scheduler: Scheduler::VrPriority,
            classify_after_ms: 500.0,
            duration_s: 60.0,
            warmup_s: 2.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(self.bg_load_mbps >= 0.0 && self.bg_load_mbps.is_finite()) {
            return bad("bg_load_mbps must be >= 0");
        }
        if !pos(self.bg_on_mean_ms) || !pos(self.bg_off_mean_ms) {
            return bad("ON/OFF means must be > 0");
        }
        if self.bg_packet_bytes == 0 {
            return bad("bg_packet_bytes must be > 0");
        }
        if !pos(self.phy_rate_vr_mbps) || !pos(self.phy_rate_bg_mbps) {
            return bad("PHY rates must be > 0");
        }
        if self.aggregation_limit_packets == 0 {
            return bad("aggregation_limit_packets must be >= 1");
        }
        if !pos(self.duration_s) {
            return bad("duration_s must be > 0");
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return bad("warmup_s must lie in [0, duration_s)");
        }
        if !(self.classify_after_ms >= 0.0 && self.classify_after_ms.is_finite()) {
            return bad("classify_after_ms must be >= 0");
        }
        self.vr_profile
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    /// Airtime of one packet, nanoseconds.
    pub fn airtime_ns(&self, class: TrafficClass, size_bytes: u32) -> u64 {
        let rate = match class {
            TrafficClass::Vr => self.phy_rate_vr_mbps,
            TrafficClass::Bg => self.phy_rate_bg_mbps,
        };
        // bits / (Mbit/s) = µs; ×1000 → ns
        (size_bytes as f64 * 8.0 * 1000.0 / rate).round() as u64
    }

    /// Fraction of airtime the offered load would need without any
    /// per-opportunity overhead.
    pub fn raw_utilization(&self) -> f64 {
        self.vr_profile.bitrate_mbps / self.phy_rate_vr_mbps + self.bg_load_mbps / self.phy_rate_bg_mbps
    }
}

/// How the priority flip decides whether the VR flow really is VR.
#[derive(Debug, Clone, Copy, Default)]
pub enum Trigger<'a> {
    /// Always label the VR station as VR.
    #[default]
    Oracle,
    /// Classify the first window of the VR station's traffic.
    Model {
        model: &'a TrainedModel,
        extraction: ExtractionConfig,
    },
}

/// Outcome of the classification step that gates prioritization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TriggerDecision {
    pub label: Label,
    /// `false` when no model was available and the oracle answer was used.
    pub from_model: bool,
}

/// Extracts features from the first window of `packets` (a station's
/// traffic, both directions) and classifies them. Without a model the
/// station is labeled VR, as an oracle would.
pub fn classify_trigger_hook(packets: &[PacketRecord], trigger: &Trigger<'_>) -> TriggerDecision {
    match trigger {
        Trigger::Oracle => TriggerDecision {
            label: Label::Vr,
            from_model: false,
        },
        Trigger::Model { model, extraction } => {
            let label = window_packets(packets, extraction)
                .first()
                .filter(|s| s.index == 0)
                .and_then(|s| model.predict(&extract_features(s, extraction).values).ok())
                .and_then(Label::from_u8)
                .unwrap_or(Label::NonVr);
            TriggerDecision {
                label,
                from_model: true,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airtime_closed_form() {
        let cfg = SimConfig {
            phy_rate_vr_mbps: 600.0,
            ..SimConfig::default()
        };
        // 1490·8 / 600e6 s = 19.8667 µs
        assert_eq!(cfg.airtime_ns(TrafficClass::Vr, 1490), 19_867);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = SimConfig {
            warmup_s: 60.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            aggregation_limit_packets: 0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scheduler_names() {
        assert_eq!("priority".parse::<Scheduler>().unwrap(), Scheduler::VrPriority);
        assert_eq!("fifo".parse::<Scheduler>().unwrap(), Scheduler::Fifo);
        assert!("edf".parse::<Scheduler>().is_err());
    }

    #[test]
    fn oracle_and_empty_traffic() {
        assert_eq!(classify_trigger_hook(&[], &Trigger::Oracle).label, Label::Vr);
    }
}
