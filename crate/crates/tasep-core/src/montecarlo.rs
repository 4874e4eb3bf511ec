//! Continuous-time Monte Carlo estimator for the stationary correlation
//! function: draw a uniform N-particle configuration, record the site-1
//! indicator, run the exclusion dynamics for time t with an event-driven
//! update, record the site-m indicator, and average the product.
//!
//! Streams are split per sample (ChaCha `set_stream`), so estimates are
//! reproducible for a given seed independent of thread count.

use crate::combinat::RingShape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum McError {
    #[error("sample count must be positive")]
    NoSamples,
    #[error("site index m = 0 is invalid (sites are 1-based)")]
    ZeroSite,
    #[error("negative time {t}")]
    NegativeTime { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub shape: RingShape,
    pub samples: u64,
    pub t: f64,
    /// Site whose occupation is probed at time t (1-based, periodic).
    pub m: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    /// Standard error of the mean for the 0/1 indicator product.
    pub std_error: f64,
    pub samples: u64,
}

/// Simulate one trajectory from `mask` for duration `t`.
///
/// Exponential clocks: each particle with an empty right neighbour hops
/// at unit rate, so the total rate is the number of mobile particles and
/// the waiting time is Exp(rate).
fn evolve_mask(mut mask: u64, shape: RingShape, t: f64, rng: &mut ChaCha8Rng) -> u64 {
    let m = shape.m;
    let mut remaining = t;
    let mut mobile: Vec<usize> = Vec::with_capacity(shape.n);
    loop {
        mobile.clear();
        for k in 0..m {
            let next = (k + 1) % m;
            if mask & (1 << k) != 0 && mask & (1 << next) == 0 {
                mobile.push(k);
            }
        }
        if mobile.is_empty() {
            return mask; // fully jammed (N = 0 or N = M)
        }
        let rate = mobile.len() as f64;
        let wait = -rng.gen::<f64>().ln() / rate;
        if wait >= remaining {
            return mask;
        }
        remaining -= wait;
        let k = mobile[rng.gen_range(0..mobile.len())];
        mask = (mask & !(1 << k)) | (1 << ((k + 1) % m));
    }
}

/// Estimate <n-empty(1) at 0, n-empty(m) at t> over the uniform
/// stationary measure.
pub fn estimate_correlation(cfg: McConfig) -> Result<McEstimate, McError> {
    if cfg.samples == 0 {
        return Err(McError::NoSamples);
    }
    if cfg.m == 0 {
        return Err(McError::ZeroSite);
    }
    if cfg.t < 0.0 {
        return Err(McError::NegativeTime { t: cfg.t });
    }
    let shape = cfg.shape;
    let dim = shape.dim();
    let m_bit = (cfg.m - 1) % shape.m;

    // The indicator product is 0/1, so the mean is an exact integer
    // count divided by n and order of accumulation cannot matter.
    let hits: u64 = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i);
            let rank = rng.gen_range(0..dim);
            let mask = crate::combinat::unrank(rank, shape).expect("rank < dim");
            if mask & 1 != 0 {
                return 0u64; // site 1 occupied at time zero
            }
            let final_mask = evolve_mask(mask, shape, cfg.t, &mut rng);
            u64::from(final_mask & (1 << m_bit) == 0)
        })
        .sum();

    let n = cfg.samples as f64;
    let mean = hits as f64 / n;
    // Bernoulli sample variance with the n-1 correction.
    let var = if cfg.samples > 1 {
        mean * (1.0 - mean) * n / (n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples: cfg.samples,
    })
}
