//! Seeded generators for VR-like and Non-VR-like packet traces.
//!
//! VR: one DL batch per video frame (max-size fragments plus a residual),
//! periodic UL tracking packets, and one small UL feedback packet per
//! received frame. Non-VR: either on/off video streaming or a steady
//! bidirectional meeting call.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Label;
use crate::ingest::{emit_canonical_csv, Direction, FlowKey, PacketRecord, Protocol};
use crate::rng::{derive_seed, derived_rng};

const VR_FLOW: FlowKey = FlowKey {
    src_ip: Ipv4Addr::new(10, 0, 0, 1),
    src_port: 9944,
    dst_ip: Ipv4Addr::new(10, 0, 0, 2),
    dst_port: 9944,
    protocol: Protocol::Udp,
};
const STREAMING_FLOW: FlowKey = FlowKey {
    src_ip: Ipv4Addr::new(10, 0, 1, 1),
    src_port: 443,
    dst_ip: Ipv4Addr::new(10, 0, 0, 3),
    dst_port: 50000,
    protocol: Protocol::Tcp,
};
const MEETING_FLOW: FlowKey = FlowKey {
    src_ip: Ipv4Addr::new(10, 0, 2, 1),
    src_port: 8801,
    dst_ip: Ipv4Addr::new(10, 0, 0, 4),
    dst_port: 50001,
    protocol: Protocol::Udp,
};

/// Client (station) address of each generated flow kind.
pub const VR_CLIENT: Ipv4Addr = VR_FLOW.dst_ip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrProfile {
    pub fps: u32,
    pub bitrate_mbps: f64,
    pub dl_fragment_bytes: u32,
    pub ul_tracking_bytes: u32,
    pub ul_interval_ms: f64,
    /// Frame size is drawn uniformly from `mean * (1 ± jitter)`.
    pub frame_size_jitter: f64,
    /// Spacing of a frame's fragments; 0 delivers the frame as one burst.
    pub intra_batch_gap_us: u32,
    /// Per-frame UL feedback packet of `base + per_fragment * fragments`
    /// bytes (a receive report for the frame); both 0 disables it.
    pub ul_feedback_base_bytes: u32,
    pub ul_feedback_per_fragment_bytes: u32,
    /// Feedback is sent this long after the last fragment of a batch.
    pub feedback_delay_us: u32,
    /// Each frame tick is delayed by a uniform draw in `[0, jitter]`.
    pub frame_timing_jitter_us: u32,
}

impl VrProfile {
    pub fn new(fps: u32, bitrate_mbps: f64) -> Self {
        VrProfile {
            fps,
            bitrate_mbps,
            dl_fragment_bytes: 1490,
            ul_tracking_bytes: 254,
            ul_interval_ms: 2.0,
            frame_size_jitter: 0.10,
            intra_batch_gap_us: 0,
            ul_feedback_base_bytes: 60,
            ul_feedback_per_fragment_bytes: 2,
            feedback_delay_us: 1_000,
            frame_timing_jitter_us: 2_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fps > 0
            && self.bitrate_mbps > 0.0
            && self.bitrate_mbps.is_finite()
            && self.dl_fragment_bytes > 1
            && self.ul_interval_ms > 0.0
            && (0.0..1.0).contains(&self.frame_size_jitter);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid VR profile {self:?}")))
        }
    }

    pub fn mean_frame_bytes(&self) -> f64 {
        self.bitrate_mbps * 1e6 / 8.0 / self.fps as f64
    }

    pub fn name(&self) -> String {
        format!("vr_{}fps_{}mbps", self.fps, self.bitrate_mbps)
    }
}

impl Default for VrProfile {
    fn default() -> Self {
        VrProfile::new(90, 100.0)
    }
}

/// The nine VR profiles: {60, 90, 120} fps × {40, 50, 100} Mbps.
pub fn default_vr_profiles() -> Vec<VrProfile> {
    let mut out = Vec::new();
    for fps in [60, 90, 120] {
        for rate in [40.0, 50.0, 100.0] {
            out.push(VrProfile::new(fps, rate));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonVrKind {
    Streaming,
    Meeting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonVrProfile {
    pub kind: NonVrKind,
    pub dl_packet_bytes: u32,
    pub ul_packet_bytes: u32,
    /// Streaming: length of each DL chunk burst.
    pub burst_ms: f64,
    /// Streaming: quiet time after each burst.
    pub idle_ms: f64,
    /// Streaming: DL rate while a burst is on.
    pub burst_rate_mbps: f64,
    /// Streaming: per-burst rate drawn from `rate * (1 ± jitter)`.
    pub rate_jitter: f64,
    /// Streaming: UL requests sent at the start of each cycle, 10 ms apart.
    pub requests_per_cycle: u32,
    /// Streaming: time from the first request to the start of the burst.
    pub request_lead_ms: f64,
    /// Meeting: Poisson packet rates per direction.
    pub dl_pps: f64,
    pub ul_pps: f64,
}

impl NonVrProfile {
    pub fn streaming() -> Self {
        NonVrProfile {
            kind: NonVrKind::Streaming,
            dl_packet_bytes: 1290,
            ul_packet_bytes: 80,
            burst_ms: 200.0,
            idle_ms: 800.0,
            burst_rate_mbps: 25.0,
            rate_jitter: 0.2,
            requests_per_cycle: 2,
            request_lead_ms: 100.0,
            dl_pps: 0.0,
            ul_pps: 0.0,
        }
    }

    pub fn meeting() -> Self {
        NonVrProfile {
            kind: NonVrKind::Meeting,
            dl_packet_bytes: 1290,
            ul_packet_bytes: 80,
            burst_ms: 0.0,
            idle_ms: 0.0,
            burst_rate_mbps: 0.0,
            rate_jitter: 0.0,
            requests_per_cycle: 0,
            request_lead_ms: 0.0,
            dl_pps: 200.0,
            ul_pps: 150.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dl_packet_bytes > 0
            && self.ul_packet_bytes > 0
            && match self.kind {
                NonVrKind::Streaming => {
                    self.burst_ms > 0.0
                        && self.idle_ms > 0.0
                        && self.request_lead_ms >= 0.0
                        && self.burst_rate_mbps > 0.0
                        && (0.0..1.0).contains(&self.rate_jitter)
                }
                NonVrKind::Meeting => self.dl_pps > 0.0 && self.ul_pps > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Non-VR profile {self:?}")))
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            NonVrKind::Streaming => "nonvr_streaming".into(),
            NonVrKind::Meeting => "nonvr_meeting".into(),
        }
    }
}

pub fn default_nonvr_profiles() -> Vec<NonVrProfile> {
    vec![NonVrProfile::streaming(), NonVrProfile::meeting()]
}

/// One video frame as sent on the DL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBatch {
    pub start_us: u64,
    pub frame_bytes: u32,
    /// Fragment sizes in send order; the residual, if any, is last.
    pub fragments: Vec<u32>,
}

fn packet(ts: u64, direction: Direction, size: u32, dl_flow: FlowKey) -> PacketRecord {
    PacketRecord {
        timestamp_us: ts,
        direction,
        size_bytes: size,
        flow: match direction {
            Direction::Dl => dl_flow,
            Direction::Ul => dl_flow.reversed(),
        },
    }
}

fn finish(mut records: Vec<PacketRecord>) -> Vec<PacketRecord> {
    records.sort_by_key(|r| (r.timestamp_us, r.direction == Direction::Ul));
    records
}

/// Frame batches whose tick falls inside `[0, duration)`.
pub fn gen_vr_frames(profile: &VrProfile, duration_ms: u64, seed: u64) -> Vec<FrameBatch> {
    let mut size_rng = derived_rng(seed, 1);
    let mut time_rng = derived_rng(seed, 2);
    let duration_us = duration_ms * 1000;
    let period_us = 1e6 / profile.fps as f64;
    let mean = profile.mean_frame_bytes();
    let frag = profile.dl_fragment_bytes;
    let mut out = Vec::new();
    for k in 0u64.. {
        let tick = (k as f64 * period_us).round() as u64;
        if tick >= duration_us {
            break;
        }
        let factor = if profile.frame_size_jitter > 0.0 {
            1.0 + size_rng.random_range(-profile.frame_size_jitter..=profile.frame_size_jitter)
        } else {
            1.0
        };
        let frame_bytes = ((mean * factor).round() as u32).max(1);
        let offset = if profile.frame_timing_jitter_us > 0 {
            time_rng.random_range(0..=profile.frame_timing_jitter_us) as u64
        } else {
            0
        };
        let mut fragments = vec![frag; (frame_bytes / frag) as usize];
        if frame_bytes % frag != 0 {
            fragments.push(frame_bytes % frag);
        }
        out.push(FrameBatch {
            start_us: tick + offset,
            frame_bytes,
            fragments,
        });
    }
    out
}

pub fn gen_vr_trace(profile: &VrProfile, duration_ms: u64, seed: u64) -> Vec<PacketRecord> {
    let duration_us = duration_ms * 1000;
    let gap = profile.intra_batch_gap_us as u64;
    let mut records = Vec::new();
    for batch in gen_vr_frames(profile, duration_ms, seed) {
        for (i, &size) in batch.fragments.iter().enumerate() {
            records.push(packet(batch.start_us + i as u64 * gap, Direction::Dl, size, VR_FLOW));
        }
        let n = batch.fragments.len() as u32;
        let feedback = profile.ul_feedback_base_bytes + profile.ul_feedback_per_fragment_bytes * n;
        if feedback > 0 {
            let last = batch.start_us + (n as u64 - 1) * gap;
            let ts = last + profile.feedback_delay_us as u64;
            records.push(packet(ts, Direction::Ul, feedback, VR_FLOW));
        }
    }
    let interval_us = profile.ul_interval_ms * 1000.0;
    for k in 0u64.. {
        let ts = (k as f64 * interval_us).round() as u64;
        if ts >= duration_us {
            break;
        }
        records.push(packet(ts, Direction::Ul, profile.ul_tracking_bytes, VR_FLOW));
    }
    finish(records)
}

pub fn gen_nonvr_trace(profile: &NonVrProfile, duration_ms: u64, seed: u64) -> Vec<PacketRecord> {
    let duration_us = duration_ms * 1000;
    let mut rng = derived_rng(seed, 3);
    let mut records = Vec::new();
    match profile.kind {
        NonVrKind::Streaming => {
            let cycle_us = ((profile.burst_ms + profile.idle_ms) * 1000.0).round() as u64;
            let burst_us = (profile.burst_ms * 1000.0).round() as u64;
            let request_gap = 10_000u64;
            let lead = (profile.request_lead_ms * 1000.0).round() as u64;
            let mut start = 0u64;
            while start < duration_us {
                for r in 0..profile.requests_per_cycle as u64 {
                    records.push(packet(start + r * request_gap, Direction::Ul, profile.ul_packet_bytes, STREAMING_FLOW));
                }
                let rate = profile.burst_rate_mbps
                    * if profile.rate_jitter > 0.0 {
                        1.0 + rng.random_range(-profile.rate_jitter..=profile.rate_jitter)
                    } else {
                        1.0
                    };
                let spacing = profile.dl_packet_bytes as f64 * 8.0 / rate; // µs
                let burst_start = start + lead;
                let mut t = 0.0f64;
                while (t as u64) < burst_us {
                    records.push(packet(burst_start + t.round() as u64, Direction::Dl, profile.dl_packet_bytes, STREAMING_FLOW));
                    t += spacing;
                }
                start += cycle_us;
            }
        }
        NonVrKind::Meeting => {
            for (direction, pps, size) in [
                (Direction::Dl, profile.dl_pps, profile.dl_packet_bytes),
                (Direction::Ul, profile.ul_pps, profile.ul_packet_bytes),
            ] {
                let gaps = Exp::new(pps / 1e6).expect("positive rate");
                let mut t = gaps.sample(&mut rng);
                while t < duration_us as f64 {
                    records.push(packet(t as u64, direction, size, MEETING_FLOW));
                    t += gaps.sample(&mut rng);
                }
            }
        }
    }
    finish(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum TraceProfile {
    Vr(VrProfile),
    Nonvr(NonVrProfile),
}

impl TraceProfile {
    pub fn label(&self) -> Label {
        match self {
            TraceProfile::Vr(_) => Label::Vr,
            TraceProfile::Nonvr(_) => Label::NonVr,
        }
    }

    pub fn name(&self) -> String {
        match self {
            TraceProfile::Vr(p) => p.name(),
            TraceProfile::Nonvr(p) => p.name(),
        }
    }

    pub fn generate(&self, duration_ms: u64, seed: u64) -> Vec<PacketRecord> {
        match self {
            TraceProfile::Vr(p) => gen_vr_trace(p, duration_ms, seed),
            TraceProfile::Nonvr(p) => gen_nonvr_trace(p, duration_ms, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    /// 1 = VR, 0 = Non-VR.
    pub label: u8,
    pub seed: u64,
    pub duration_ms: u64,
    pub profile: TraceProfile,
    /// Trace file, relative to the manifest's directory.
    pub path: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn regenerate(&self) -> Vec<PacketRecord> {
        self.profile.generate(self.duration_ms, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub vr: Vec<Vec<PacketRecord>>,
    pub nonvr: Vec<Vec<PacketRecord>>,
    /// VR entries first, in profile order, then Non-VR entries.
    pub manifest: Vec<ManifestEntry>,
}

/// One trace per profile; trace `i` (VR first) uses `derive_seed(seed, i)`.
pub fn gen_labeled_corpus(
    vr_profiles: &[VrProfile],
    nonvr_profiles: &[NonVrProfile],
    duration_ms: u64,
    seed: u64,
) -> Result<Corpus> {
    let profiles: Vec<TraceProfile> = vr_profiles
        .iter()
        .cloned()
        .map(TraceProfile::Vr)
        .chain(nonvr_profiles.iter().cloned().map(TraceProfile::Nonvr))
        .collect();
    for p in &profiles {
        match p {
            TraceProfile::Vr(v) => v.validate()?,
            TraceProfile::Nonvr(n) => n.validate()?,
        }
    }
    let manifest: Vec<ManifestEntry> = profiles
        .into_iter()
        .enumerate()
        .map(|(i, profile)| ManifestEntry {
            name: format!("{:02}_{}", i, profile.name()),
            label: profile.label().as_u8(),
            seed: derive_seed(seed, i as u64),
            duration_ms,
            profile,
            path: None,
        })
        .collect();
    let traces: Vec<Vec<PacketRecord>> = manifest.par_iter().map(ManifestEntry::regenerate).collect();
    let mut vr = Vec::new();
    let mut nonvr = Vec::new();
    for (entry, trace) in manifest.iter().zip(traces) {
        match entry.profile {
            TraceProfile::Vr(_) => vr.push(trace),
            TraceProfile::Nonvr(_) => nonvr.push(trace),
        }
    }
    Ok(Corpus { vr, nonvr, manifest })
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Corpus {
    /// Writes each trace as canonical CSV plus `manifest.json` into `dir`.
    /// `header` lines (already `#`-prefixed) are prepended to every trace.
    pub fn write(&mut self, dir: &Path, header: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let traces = self.vr.iter().chain(&self.nonvr);
        for (entry, trace) in self.manifest.iter_mut().zip(traces) {
            let file = PathBuf::from(format!("{}.csv", entry.name));
            let path = dir.join(&file);
            let ctx = || path.display().to_string();
            let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(ctx(), e))?);
            out.write_all(header.as_bytes()).map_err(|e| Error::io(ctx(), e))?;
            emit_canonical_csv(trace, &mut out).map_err(|e| Error::io(ctx(), e))?;
            entry.path = Some(file);
        }
        let path = dir.join(MANIFEST_FILE);
        let body = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, body + "\n").map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
