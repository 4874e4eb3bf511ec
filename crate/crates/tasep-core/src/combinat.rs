//! Configuration space of `N` hard-core particles on an `M`-site ring.
//!
//! Configurations are bitmasks: site `k` (1-based, `1..=M`) maps to bit
//! `k-1`, a set bit meaning the site is occupied. Ranking is
//! colexicographic on the set of occupied sites, which gives O(N)
//! rank/unrank via binomial sums.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CombinatError {
    #[error("binomial ({n}, {k}) exceeds the representable range")]
    BinomialOverflow { n: u64, k: u64 },
    #[error("invalid ring shape: M = {m}, N = {n} (need 1 <= M, 0 <= N <= M)")]
    BadShape { m: usize, n: usize },
    #[error("configuration {mask:#b} has {got} particles, expected {expected}")]
    WrongPopulation { mask: u64, got: u32, expected: usize },
    #[error("rank {rank} out of range for a sector of dimension {dim}")]
    RankOutOfRange { rank: usize, dim: usize },
    #[error("site {site} out of range [1, {m}]")]
    SiteOutOfRange { site: usize, m: usize },
}

/// Exact binomial coefficient C(n, k). Returns 0 for `k < 0` is expressed
/// by taking `k: u64`; `k > n` yields 0. Errors on overflow past `u64`.
pub fn binomial(n: u64, k: u64) -> Result<u64, CombinatError> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(CombinatError::BinomialOverflow { n, k })?
            / (i + 1) as u128;
    }
    u64::try_from(acc).map_err(|_| CombinatError::BinomialOverflow { n, k })
}

/// Ring geometry: `M` sites, `N` particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RingShape {
    pub m: usize,
    pub n: usize,
}

impl RingShape {
    pub fn new(m: usize, n: usize) -> Result<Self, CombinatError> {
        if m == 0 || m > 63 || n > m {
            return Err(CombinatError::BadShape { m, n });
        }
        Ok(Self { m, n })
    }

    /// Sector dimension C(M, N).
    pub fn dim(&self) -> usize {
        binomial(self.m as u64, self.n as u64).expect("M <= 63") as usize
    }

    /// Z_N = C(M, N), the number of equal-weight configurations in the
    /// steady state.
    pub fn z(&self) -> f64 {
        self.dim() as f64
    }
}

/// An N-particle configuration together with its colexicographic rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Configuration {
    pub occupied: u64,
    pub rank: usize,
}

/// Colexicographic rank of an occupancy bitmask.
pub fn rank(mask: u64, shape: RingShape) -> Result<usize, CombinatError> {
    let pop = mask.count_ones();
    if pop as usize != shape.n || mask >> shape.m != 0 {
        return Err(CombinatError::WrongPopulation {
            mask,
            got: pop,
            expected: shape.n,
        });
    }
    let mut r = 0u64;
    let mut idx = 0u64;
    let mut rest = mask;
    while rest != 0 {
        let bit = rest.trailing_zeros() as u64;
        r += binomial(bit, idx + 1)?;
        idx += 1;
        rest &= rest - 1;
    }
    Ok(r as usize)
}

/// Inverse of [`rank`]: the bitmask at a given colexicographic rank.
pub fn unrank(r: usize, shape: RingShape) -> Result<u64, CombinatError> {
    let dim = shape.dim();
    if r >= dim {
        return Err(CombinatError::RankOutOfRange { rank: r, dim });
    }
    let mut mask = 0u64;
    let mut rem = r as u64;
    let mut hi = shape.m as u64;
    for i in (1..=shape.n as u64).rev() {
        // largest b with C(b, i) <= rem
        let mut b = i - 1;
        while b + 1 < hi && binomial(b + 1, i).unwrap() <= rem {
            b += 1;
        }
        rem -= binomial(b, i).unwrap();
        mask |= 1 << b;
        hi = b;
    }
    debug_assert_eq!(rem, 0);
    Ok(mask)
}

/// Iterator over all configurations of the sector in rank order.
pub fn configurations(shape: RingShape) -> impl Iterator<Item = Configuration> {
    (0..shape.dim()).map(move |r| Configuration {
        occupied: unrank(r, shape).unwrap(),
        rank: r,
    })
}

/// The unnormalized steady state |S_N>: every configuration with weight 1.
pub fn steady_state_vector(shape: RingShape) -> Vec<f64> {
    vec![1.0; shape.dim()]
}

/// Apply the empty-site projector s_k: zero every component whose
/// configuration occupies `site`.
pub fn apply_projector(
    vec: &[f64],
    site: usize,
    shape: RingShape,
) -> Result<Vec<f64>, CombinatError> {
    if site == 0 || site > shape.m {
        return Err(CombinatError::SiteOutOfRange { site, m: shape.m });
    }
    let bit = 1u64 << (site - 1);
    let mut out = vec.to_vec();
    for (r, x) in out.iter_mut().enumerate() {
        if unrank(r, shape)? & bit != 0 {
            *x = 0.0;
        }
    }
    Ok(out)
}
