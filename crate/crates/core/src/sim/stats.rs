use serde::Serialize;

/// Percentile `p ∈ [0, 1]` of sorted data with linear interpolation
/// between closest ranks (rank = p·(n−1)). Empty input yields NaN.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let rank = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = rank - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

/// Delay summary of one traffic class over packets that arrived after the
/// warmup and completed service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassStats {
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub served_bytes: u64,
    /// All arrivals of the run, warmup included.
    pub arrived: usize,
    /// All completed packets of the run, warmup included.
    pub served: usize,
    /// Waiting or in service when the run ended.
    pub queued_at_end: usize,
}

impl ClassStats {
    pub(crate) fn from_delays(mut delays_ms: Vec<f64>, served_bytes: u64, arrived: usize, served: usize, queued_at_end: usize) -> Self {
        delays_ms.sort_by(f64::total_cmp);
        let count = delays_ms.len();
        let mean_ms = if count == 0 {
            f64::NAN
        } else {
            delays_ms.iter().sum::<f64>() / count as f64
        };
        ClassStats {
            count,
            mean_ms,
            median_ms: percentile(&delays_ms, 0.5),
            p99_ms: percentile(&delays_ms, 0.99),
            max_ms: delays_ms.last().copied().unwrap_or(f64::NAN),
            served_bytes,
            arrived,
            served,
            queued_at_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayStats {
    pub vr: ClassStats,
    pub bg: ClassStats,
    /// Time-averaged number of queued packets (both classes, in service
    /// included).
    pub mean_queue: f64,
    /// Set when the backlog at the end is out of proportion to the run's
    /// average, i.e. the queue was still growing.
    pub unstable: bool,
    /// Time at which strict priority took effect, if it did.
    pub priority_from_ms: Option<f64>,
}
