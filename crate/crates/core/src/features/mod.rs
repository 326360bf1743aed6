//! Windowed feature extraction.
//!
//! A directed packet stream is cut into samples of `omega_ms`; each sample
//! becomes a 23-value [`FeatureVector`]: packet counts, byte totals, size and
//! inter-arrival statistics per direction, the DL/UL ratios and the Pearson
//! correlation of per-sub-sample byte totals.

mod dataset;
mod stats;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorKind;
use crate::ingest::{Direction, PacketRecord};

pub use dataset::{balance_dataset, emit_dataset_csv, load_dataset_csv, read_dataset_csv, write_dataset_csv};
pub use stats::{direction_stats, pearson_cc, subsample_bytes, DirectionStats, SubsampleVectors};

pub const FEATURE_COUNT: usize = 23;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "NoPDL",
    "NoPUL",
    "TBDL",
    "TBUL",
    "MinPSDL",
    "MinPSUL",
    "MaxPSDL",
    "MaxPSUL",
    "MeanPSDL",
    "MeanPSUL",
    "StdPSDL",
    "StdPSUL",
    "MinPIATDL",
    "MinPIATUL",
    "MaxPIATDL",
    "MaxPIATUL",
    "MeanPIATDL",
    "MeanPIATUL",
    "StdPIATDL",
    "StdPIATUL",
    "RoNoP",
    "RoTB",
    "CC",
];

/// Index of a feature by its column name.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
    #[error("cannot build a two-class dataset: {0}")]
    EmptyClass(&'static str),
    #[error("dataset header mismatch: missing columns {missing:?}, unexpected columns {extra:?}")]
    Header { missing: Vec<String>, extra: Vec<String> },
    #[error("dataset line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("dataset I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl DatasetError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            DatasetError::LengthMismatch(..)
            | DatasetError::InvalidConfig(_)
            | DatasetError::EmptyClass(_) => ErrorKind::Contract,
            DatasetError::Header { .. } | DatasetError::Row { .. } => ErrorKind::Parse,
            DatasetError::Io(_) => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NonVr = 0,
    Vr = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(value: u8) -> Option<Self> {
        match value {
            0 => Some(Label::NonVr),
            1 => Some(Label::Vr),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::NonVr => "Non-VR",
            Label::Vr => "VR",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub omega_ms: u32,
    pub n_subsamples: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            omega_ms: 500,
            n_subsamples: 20,
        }
    }
}

impl ExtractionConfig {
    pub fn new(omega_ms: u32, n_subsamples: usize) -> Result<Self, DatasetError> {
        let config = ExtractionConfig {
            omega_ms,
            n_subsamples,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.omega_ms < 1 {
            return Err(DatasetError::InvalidConfig("omega_ms must be >= 1".into()));
        }
        if self.n_subsamples < 2 {
            return Err(DatasetError::InvalidConfig("n_subsamples must be >= 2".into()));
        }
        Ok(())
    }

    pub fn omega_us(&self) -> u64 {
        self.omega_ms as u64 * 1000
    }

    /// Sub-sample duration in milliseconds.
    pub fn tau_ms(&self) -> f64 {
        self.omega_ms as f64 / self.n_subsamples as f64
    }
}

/// The packets of one window, split by direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    /// Window ordinal `k` of `[k*omega, (k+1)*omega)`.
    pub index: u64,
    pub dl_packets: Vec<(u64, u32)>,
    pub ul_packets: Vec<(u64, u32)>,
    pub window_start_us: u64,
    pub window_end_us: u64,
}

impl Sample {
    pub fn packet_count(&self) -> usize {
        self.dl_packets.len() + self.ul_packets.len()
    }
}

/// Groups packets into `[k*omega, (k+1)*omega)` windows, dropping empty ones.
pub fn window_packets(records: &[PacketRecord], config: &ExtractionConfig) -> Vec<Sample> {
    let omega = config.omega_us();
    let mut windows: BTreeMap<u64, Sample> = BTreeMap::new();
    for r in records {
        let k = r.timestamp_us / omega;
        let sample = windows.entry(k).or_insert_with(|| Sample {
            index: k,
            dl_packets: Vec::new(),
            ul_packets: Vec::new(),
            window_start_us: k * omega,
            window_end_us: (k + 1) * omega,
        });
        let packet = (r.timestamp_us, r.size_bytes);
        match r.direction {
            Direction::Dl => sample.dl_packets.push(packet),
            Direction::Ul => sample.ul_packets.push(packet),
        }
    }
    windows
        .into_values()
        .map(|mut s| {
            s.dl_packets.sort_by_key(|p| p.0);
            s.ul_packets.sort_by_key(|p| p.0);
            s
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub label: Option<Label>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }
}

/// Denominator-1 convention for empty UL.
fn ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator == 0.0 {
        numerator
    } else {
        numerator / denominator
    }
}

pub fn extract_features(sample: &Sample, config: &ExtractionConfig) -> FeatureVector {
    let dl = direction_stats(&sample.dl_packets);
    let ul = direction_stats(&sample.ul_packets);
    let sub = subsample_bytes(sample, config);
    let cc = pearson_cc(&sub.dl, &sub.ul).expect("sub-sample vectors share length");
    let (nd, nu) = (dl.count as f64, ul.count as f64);
    let (td, tu) = (dl.total_bytes as f64, ul.total_bytes as f64);
    let values = [
        nd,
        nu,
        td,
        tu,
        dl.size_min,
        ul.size_min,
        dl.size_max,
        ul.size_max,
        dl.size_mean,
        ul.size_mean,
        dl.size_std,
        ul.size_std,
        dl.iat_min_ms,
        ul.iat_min_ms,
        dl.iat_max_ms,
        ul.iat_max_ms,
        dl.iat_mean_ms,
        ul.iat_mean_ms,
        dl.iat_std_ms,
        ul.iat_std_ms,
        ratio(nd, nu),
        ratio(td, tu),
        cc,
    ];
    FeatureVector { values, label: None }
}

/// Windows a trace and extracts one feature vector per non-empty sample.
pub fn extract_trace(
    records: &[PacketRecord],
    config: &ExtractionConfig,
    label: Option<Label>,
) -> Vec<FeatureVector> {
    window_packets(records, config)
        .par_iter()
        .map(|s| extract_features(s, config).with_label(label))
        .collect()
}
