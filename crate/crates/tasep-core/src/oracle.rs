//! Brute-force ground truth: the sector Markov generator, its spectrum,
//! the semigroup action by uniformization, and the direct correlation
//! function.

use crate::combinat::{self, CombinatError, RingShape};
use ndarray::Array2;
use ndarray_linalg::Eig;
use num_complex::Complex64;
use thiserror::Error;

/// Sectors larger than this are refused unless the caller overrides.
pub const DEFAULT_DIM_CAP: usize = 20_000;

/// Poisson tail mass at which the uniformization series is truncated.
const UNIFORMIZATION_TAIL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Combinat(#[from] CombinatError),
    #[error("sector dimension {dim} exceeds the cap {cap}; pass an explicit override")]
    DimensionCap { dim: usize, cap: usize },
    #[error("negative time {t}; callers must supply |t|")]
    NegativeTime { t: f64 },
    #[error("vector length {got} does not match sector dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("eigensolver failed on the {dim}x{dim} generator: {source}")]
    Eig {
        dim: usize,
        source: ndarray_linalg::error::LinalgError,
    },
}

/// The Hamiltonian H restricted to the N-particle sector. `-H` generates
/// the stochastic semigroup: columns sum to zero, off-diagonal entries
/// are 0 or -1.
#[derive(Debug, Clone)]
pub struct MarkovGenerator {
    pub shape: RingShape,
    pub matrix: Array2<f64>,
    /// Largest diagonal entry, the uniformization rate.
    pub lambda_max: f64,
}

/// Full spectrum of a sector generator.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Sorted by (real part, imaginary part).
    pub eigenvalues: Vec<Complex64>,
    /// Index of the unique zero eigenvalue.
    pub zero_index: usize,
    /// Smallest positive real part (relaxation gap).
    pub gap: f64,
}

pub fn build_generator(shape: RingShape) -> Result<MarkovGenerator, OracleError> {
    build_generator_capped(shape, DEFAULT_DIM_CAP)
}

pub fn build_generator_capped(
    shape: RingShape,
    cap: usize,
) -> Result<MarkovGenerator, OracleError> {
    let dim = shape.dim();
    if dim > cap {
        return Err(OracleError::DimensionCap { dim, cap });
    }
    // integer entries first so column sums are exactly zero
    let mut entries: Vec<Vec<(usize, i64)>> = vec![Vec::new(); dim];
    for cfg in combinat::configurations(shape) {
        let mask = cfg.occupied;
        let mut diag = 0i64;
        for j in 0..shape.m {
            let next = (j + 1) % shape.m;
            if mask & (1 << j) != 0 && mask & (1 << next) == 0 {
                let moved = (mask & !(1 << j)) | (1 << next);
                let dst = combinat::rank(moved, shape)?;
                entries[cfg.rank].push((dst, -1));
                diag += 1;
            }
        }
        entries[cfg.rank].push((cfg.rank, diag));
    }
    let mut matrix = Array2::zeros((dim, dim));
    let mut lambda_max = 0.0f64;
    for (col, list) in entries.iter().enumerate() {
        for &(row, v) in list {
            matrix[[row, col]] += v as f64;
        }
        lambda_max = lambda_max.max(matrix[[col, col]]);
    }
    Ok(MarkovGenerator {
        shape,
        matrix,
        lambda_max,
    })
}

pub fn spectrum(gen: &MarkovGenerator) -> Result<SpectrumReport, OracleError> {
    let dim = gen.matrix.nrows();
    if dim == 1 {
        return Ok(SpectrumReport {
            eigenvalues: vec![Complex64::new(gen.matrix[[0, 0]], 0.0)],
            zero_index: 0,
            gap: f64::INFINITY,
        });
    }
    let (vals, _) = gen
        .matrix
        .eig()
        .map_err(|source| OracleError::Eig { dim, source })?;
    let mut eigenvalues: Vec<Complex64> = vals.to_vec();
    eigenvalues.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    let zero_index = eigenvalues
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.norm().partial_cmp(&b.norm()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let gap = eigenvalues
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != zero_index)
        .map(|(_, e)| e.re)
        .fold(f64::INFINITY, f64::min);
    Ok(SpectrumReport {
        eigenvalues,
        zero_index,
        gap,
    })
}

/// e^{-tH} vec by uniformization: with P = I - H/Lambda substochastic,
/// e^{-tH} = sum_k Poisson(Lambda t, k) P^k. Long horizons are split so
/// the leading Poisson weight never underflows.
pub fn evolve(gen: &MarkovGenerator, vec: &[f64], t: f64) -> Result<Vec<f64>, OracleError> {
    if t < 0.0 {
        return Err(OracleError::NegativeTime { t });
    }
    let dim = gen.matrix.nrows();
    if vec.len() != dim {
        return Err(OracleError::DimensionMismatch {
            got: vec.len(),
            expected: dim,
        });
    }
    let lambda = gen.lambda_max;
    if t == 0.0 || lambda == 0.0 {
        return Ok(vec.to_vec());
    }
    let steps = (lambda * t / 500.0).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut state = vec.to_vec();
    for _ in 0..steps {
        state = uniformization_step(gen, &state, dt);
    }
    Ok(state)
}

fn uniformization_step(gen: &MarkovGenerator, vec: &[f64], t: f64) -> Vec<f64> {
    let lambda = gen.lambda_max;
    let dim = vec.len();
    let mu = lambda * t;
    let mut weight = (-mu).exp(); // Poisson(mu, 0)
    let mut covered = weight;
    let mut power = vec.to_vec(); // P^k vec
    let mut out: Vec<f64> = power.iter().map(|x| x * weight).collect();
    let mut k = 0usize;
    while 1.0 - covered > UNIFORMIZATION_TAIL {
        // power <- P power with P = I - H/lambda
        let mut next = vec![0.0; dim];
        for col in 0..dim {
            let x = power[col];
            if x == 0.0 {
                continue;
            }
            for row in 0..dim {
                let h = gen.matrix[[row, col]];
                if h != 0.0 {
                    next[row] -= h / lambda * x;
                }
            }
            next[col] += x;
        }
        power = next;
        k += 1;
        weight *= mu / k as f64;
        covered += weight;
        for (o, p) in out.iter_mut().zip(&power) {
            *o += weight * p;
        }
    }
    out
}

/// (1/Z_N) <S_N| s_1 e^{-tH} s_m |S_N>, evaluated directly.
pub fn direct_correlation(shape: RingShape, m: usize, t: f64) -> Result<f64, OracleError> {
    let gen = build_generator(shape)?;
    direct_correlation_with(&gen, m, t)
}

/// Same as [`direct_correlation`] but reusing a prebuilt generator.
pub fn direct_correlation_with(
    gen: &MarkovGenerator,
    m: usize,
    t: f64,
) -> Result<f64, OracleError> {
    let shape = gen.shape;
    let ones = combinat::steady_state_vector(shape);
    let masked = combinat::apply_projector(&ones, m, shape)?;
    let evolved = evolve(gen, &masked, t)?;
    let projected = combinat::apply_projector(&evolved, 1, shape)?;
    Ok(projected.iter().sum::<f64>() / shape.z())
}
