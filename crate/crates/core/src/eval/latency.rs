use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(samples_ms: &[f64]) -> Result<Self> {
        if samples_ms.is_empty() {
            return Err(Error::NoUsers);
        }
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Ok(Self {
            n: sorted.len(),
            mean_ms: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p95_ms: sorted[rank - 1],
        })
    }
}

/// Wall-clock of `call` on each user, run one after another on the
/// current thread.
pub fn measure_latency<U>(users: &[U], mut call: impl FnMut(&U) -> Result<()>) -> Result<LatencyStats> {
    if users.is_empty() {
        return Err(Error::NoUsers);
    }
    let mut samples = Vec::with_capacity(users.len());
    for u in users {
        let start = Instant::now();
        call(u)?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    LatencyStats::from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_user_set_is_an_error() {
        let none: [u8; 0] = [];
        assert!(matches!(measure_latency(&none, |_| Ok(())), Err(Error::NoUsers)));
    }

    #[test]
    fn percentile_and_mean() {
        let s: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let l = LatencyStats::from_samples(&s).unwrap();
        assert_eq!(l.p95_ms, 95.0);
        assert_eq!(l.mean_ms, 50.5);
    }

    #[test]
    fn measures_positive_time() {
        let l = measure_latency(&[1u64, 2, 3], |&u| {
            std::hint::black_box((0..10_000 * u).sum::<u64>());
            Ok(())
        })
        .unwrap();
        assert_eq!(l.n, 3);
        assert!(l.mean_ms > 0.0);
    }
}
