use super::{DatasetError, ExtractionConfig, Sample};

/// Count, bytes, size and inter-arrival statistics of one direction.
///
/// Standard deviations are population deviations. Inter-arrival times are
/// successive timestamp differences in milliseconds; fewer than two packets
/// give all-zero IAT statistics and an empty direction gives all zeros.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DirectionStats {
    pub count: usize,
    pub total_bytes: u64,
    pub size_min: f64,
    pub size_max: f64,
    pub size_mean: f64,
    pub size_std: f64,
    pub iat_min_ms: f64,
    pub iat_max_ms: f64,
    pub iat_mean_ms: f64,
    pub iat_std_ms: f64,
}

fn summary(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for v in values.clone() {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (min, max, mean, var.sqrt())
}

pub fn direction_stats(packets: &[(u64, u32)]) -> DirectionStats {
    let (size_min, size_max, size_mean, size_std) = summary(packets.iter().map(|p| p.1 as f64));
    let iats = packets
        .windows(2)
        .map(|w| w[1].0.saturating_sub(w[0].0) as f64 / 1000.0);
    let (iat_min_ms, iat_max_ms, iat_mean_ms, iat_std_ms) = summary(iats);
    DirectionStats {
        count: packets.len(),
        total_bytes: packets.iter().map(|p| p.1 as u64).sum(),
        size_min,
        size_max,
        size_mean,
        size_std,
        iat_min_ms,
        iat_max_ms,
        iat_mean_ms,
        iat_std_ms,
    }
}

/// Per-sub-sample byte totals of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleVectors {
    pub dl: Vec<f64>,
    pub ul: Vec<f64>,
}

/// Sub-sample `n` (0-based) holds packets with
/// `n*omega/N <= t - start < (n+1)*omega/N`, evaluated in exact integer
/// arithmetic on microseconds.
pub fn subsample_bytes(sample: &Sample, config: &ExtractionConfig) -> SubsampleVectors {
    let n = config.n_subsamples;
    let omega = config.omega_us();
    let bucket = |ts: u64| -> usize {
        let offset = ts.saturating_sub(sample.window_start_us);
        (((offset as u128) * n as u128 / omega as u128) as usize).min(n - 1)
    };
    let fill = |packets: &[(u64, u32)]| {
        let mut v = vec![0.0; n];
        for &(ts, size) in packets {
            v[bucket(ts)] += size as f64;
        }
        v
    };
    SubsampleVectors {
        dl: fill(&sample.dl_packets),
        ul: fill(&sample.ul_packets),
    }
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Pearson correlation of two equal-length vectors, clamped to `[-1, 1]`.
/// A constant vector has no measurable correlation and yields 0.
pub fn pearson_cc(d: &[f64], u: &[f64]) -> Result<f64, DatasetError> {
    if d.len() != u.len() {
        return Err(DatasetError::LengthMismatch(d.len(), u.len()));
    }
    if d.len() < 2 || is_constant(d) || is_constant(u) {
        return Ok(0.0);
    }
    let n = d.len() as f64;
    let mean_d = d.iter().sum::<f64>() / n;
    let mean_u = u.iter().sum::<f64>() / n;
    let (mut sdu, mut sdd, mut suu) = (0.0, 0.0, 0.0);
    for (&x, &y) in d.iter().zip(u) {
        let (dx, dy) = (x - mean_d, y - mean_u);
        sdu += dx * dy;
        sdd += dx * dx;
        suu += dy * dy;
    }
    let denom = (sdd * suu).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((sdu / denom).clamp(-1.0, 1.0))
}
