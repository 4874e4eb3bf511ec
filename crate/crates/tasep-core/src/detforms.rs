//! Determinant families of the model: scalar products (Q), steady-state
//! projections (V, Vtilde), form-factors (the same matrices on an M-1
//! lattice), and on-shell norms (Qtilde).
//!
//! Everything that only involves even powers of the rapidities is
//! evaluated in u^2 (equivalently w = u^{-2}), which removes square-root
//! branches. The generic scalar product genuinely involves odd powers, so
//! it takes the u values themselves; callers that start from w must fix
//! principal roots once and reuse them consistently ([`u_from_w`]).

use crate::bethe;
use crate::combinat::{binomial, RingShape};
use crate::linalg::{lu_det, LogComplex};
use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

type C64 = Complex64;

/// Relative threshold below which two squared parameters count as equal.
const COINCIDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DetError {
    #[error("zero spectral parameter")]
    ZeroParameter,
    #[error("coinciding parameters within one set; for equal rapidity sets use norm_squared")]
    CoincidingParameters,
    #[error("collision v^2 = u^2 between the two parameter sets")]
    CrossCollision,
    #[error("w = 1 is a pole of the formula")]
    PoleAtOne,
    #[error("off-shell rapidities: Bethe residual {residual:.3e} exceeds {tol:.3e}")]
    OffShell { residual: f64, tol: f64 },
}

/// Which determinant family a matrix instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetKind {
    Q,
    QTilde,
    V,
    VTilde,
}

/// One assembled determinant-formula matrix, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct DetForm {
    pub kind: DetKind,
    pub order: usize,
    pub lattice_m: usize,
    pub matrix: Array2<C64>,
}

impl DetForm {
    /// Determinant in log form plus the pivot-ratio conditioning estimate.
    ///
    /// An exactly singular matrix yields the exact zero `LogComplex::ZERO`
    /// (several form-factor determinants legitimately vanish on-shell);
    /// the pivot ratio is infinite in that case.
    pub fn det(&self) -> Result<(LogComplex, f64), DetError> {
        let lu = lu_det(&self.matrix);
        Ok((lu.det, lu.pivot_ratio))
    }
}

/// Principal branch u = sqrt(1/w); the same root must be used on both
/// sides of any pairing.
pub fn u_from_w(w: C64) -> C64 {
    w.inv().sqrt()
}

fn check_nonzero(set: &[C64]) -> Result<(), DetError> {
    if set.iter().any(|u| u.norm() == 0.0) {
        return Err(DetError::ZeroParameter);
    }
    Ok(())
}

fn check_distinct_squares(set: &[C64]) -> Result<(), DetError> {
    for (i, a) in set.iter().enumerate() {
        for b in &set[i + 1..] {
            let (a2, b2) = (a * a, b * b);
            if (a2 - b2).norm() <= COINCIDENCE_TOL * a2.norm().max(b2.norm()) {
                return Err(DetError::CoincidingParameters);
            }
        }
    }
    Ok(())
}

/// Alternating binomial coefficient (-1)^n C(m, n) as f64 (exact for
/// m <= 63).
fn signed_binomial(m: usize, n: usize) -> f64 {
    let b = binomial(m as u64, n as u64).expect("desk-scale binomial") as f64;
    if n % 2 == 0 {
        b
    } else {
        -b
    }
}

fn horner(coeffs: &[f64], x: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Tail row shared by V (row N) and Vtilde (row 1):
/// -sum_{p=1}^{mm-N+1} (-1)^{p+N-1} C(mm, p+N-1) (1/y)^p.
///
/// The sum starts at p = 1 (no constant term). Starting it at p = 0
/// looks equally plausible but fails two independent checks:
/// the overlap it produces no longer annihilates on-shell rapidity sets
/// (the steady state must be orthogonal to every relaxing eigenvector),
/// and it disagrees with the direct construction of the states for
/// generic rapidities.
fn tail_coeffs(mm: usize, n: usize) -> Vec<f64> {
    let pmax = (mm + 1).saturating_sub(n);
    let mut coeffs: Vec<f64> = vec![0.0];
    for p in 1..=pmax {
        coeffs.push(-signed_binomial(mm, p + n - 1));
    }
    coeffs
}

/// The V^(mm) matrix of the steady-state projection: rows 1..N-1 are the
/// truncated alternating binomial polynomials in u^2, row N is the tail
/// series in u^{-2}. Entries are functions of u^2 only.
pub fn build_v_matrix(u_sq: &[C64], mm: usize) -> DetForm {
    let n = u_sq.len();
    let mut matrix = Array2::zeros((n, n));
    for j in 1..=n {
        if j < n {
            // sum_{i=0}^{j-1} (-1)^{j-1-i} C(mm, j-1-i) y^i
            let coeffs: Vec<f64> = (0..j).map(|i| signed_binomial(mm, j - 1 - i)).collect();
            for (k, &y) in u_sq.iter().enumerate() {
                matrix[[j - 1, k]] = horner(&coeffs, y);
            }
        } else {
            let coeffs = tail_coeffs(mm, n);
            for (k, &y) in u_sq.iter().enumerate() {
                matrix[[j - 1, k]] = horner(&coeffs, y.inv());
            }
        }
    }
    DetForm {
        kind: DetKind::V,
        order: n,
        lattice_m: mm,
        matrix,
    }
}

/// The Vtilde^(mm) matrix of the reversed projection: row 1 is the tail
/// series, rows 2..N the truncated polynomials.
pub fn build_vtilde_matrix(u_sq: &[C64], mm: usize) -> DetForm {
    let n = u_sq.len();
    let mut matrix = Array2::zeros((n, n));
    for j in 1..=n {
        if j == 1 {
            let coeffs = tail_coeffs(mm, n);
            for (k, &y) in u_sq.iter().enumerate() {
                matrix[[0, k]] = horner(&coeffs, y.inv());
            }
        } else {
            // sum_{i=0}^{N-j} (-1)^{N-j-i} C(mm, N-j-i) y^i
            let coeffs: Vec<f64> = (0..=n - j).map(|i| signed_binomial(mm, n - j - i)).collect();
            for (k, &y) in u_sq.iter().enumerate() {
                matrix[[j - 1, k]] = horner(&coeffs, y);
            }
        }
    }
    DetForm {
        kind: DetKind::VTilde,
        order: n,
        lattice_m: mm,
        matrix,
    }
}

/// The Q matrix of the generic scalar product; entries take the u and v
/// values themselves.
pub fn build_q_matrix(v_set: &[C64], u_set: &[C64], m: usize) -> DetForm {
    let n = u_set.len();
    let mi = m as i32;
    let mut matrix = Array2::zeros((n, n));
    for (j, &v) in v_set.iter().enumerate() {
        for (k, &u) in u_set.iter().enumerate() {
            let x = u / v;
            let delta_u = (u - u.inv()).powi(mi);
            let delta_v = (v - v.inv()).powi(mi);
            let num = v.powi(mi) * delta_u * x.powi(n as i32 - 1)
                - u.powi(mi) * delta_v * x.powi(1 - n as i32);
            matrix[[j, k]] = num / (x - x.inv());
        }
    }
    DetForm {
        kind: DetKind::Q,
        order: n,
        lattice_m: m,
        matrix,
    }
}

/// The on-shell Qtilde matrix of the norm formula, in w = u^{-2}.
pub fn build_qtilde_matrix(w: &[C64], shape: RingShape) -> DetForm {
    let n = w.len();
    let (mf, nf) = (shape.m as f64, shape.n as f64);
    let mut matrix = Array2::from_elem((n, n), C64::new(-1.0, 0.0));
    for (j, &wj) in w.iter().enumerate() {
        matrix[[j, j]] = ((nf - 1.0) + (mf - nf + 1.0) * wj) / (C64::new(1.0, 0.0) - wj);
    }
    DetForm {
        kind: DetKind::QTilde,
        order: n,
        lattice_m: shape.m,
        matrix,
    }
}

/// <Psi(v)|Psi(u)> on an m-site lattice via the det Q representation.
pub fn scalar_product(v_set: &[C64], u_set: &[C64], m: usize) -> Result<C64, DetError> {
    assert_eq!(v_set.len(), u_set.len());
    let n = u_set.len();
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    check_nonzero(v_set)?;
    check_nonzero(u_set)?;
    check_distinct_squares(v_set)?;
    check_distinct_squares(u_set)?;
    for &v in v_set {
        for &u in u_set {
            let (v2, u2) = (v * v, u * u);
            if (v2 - u2).norm() <= COINCIDENCE_TOL * v2.norm().max(u2.norm()) {
                return Err(DetError::CrossCollision);
            }
        }
    }
    let mut pre = LogComplex::ONE;
    for (&v, &u) in v_set.iter().zip(u_set) {
        pre = pre.mul((LogComplex::from_c64(v * u)).powi(-(m as i32 - 1)));
    }
    for j in 1..n {
        for k in 0..j {
            pre = pre.mul_c64(v_set[j] * v_set[k]);
            pre = pre.div_c64(v_set[k] * v_set[k] - v_set[j] * v_set[j]);
            // note the opposite order to the v pairs: u_l^2 - u_n^2, l > n
            pre = pre.mul_c64(u_set[j] * u_set[k]);
            pre = pre.div_c64(u_set[j] * u_set[j] - u_set[k] * u_set[k]);
        }
    }
    let (det, _cond) = build_q_matrix(v_set, u_set, m).det()?;
    Ok(pre.mul(det).value())
}

/// Shared prefactor prod u_k^2 * prod 1/(u_l^2 - u_n^2) over ordered
/// pairs; `reversed` flips every pair difference (the n > l convention).
fn overlap_prefactor(u_sq: &[C64], reversed: bool) -> Result<LogComplex, DetError> {
    let n = u_sq.len();
    let mut pre = LogComplex::ONE;
    for &y in u_sq {
        pre = pre.mul_c64(y);
    }
    for l in 1..n {
        for k in 0..l {
            let d = if reversed {
                u_sq[k] - u_sq[l]
            } else {
                u_sq[l] - u_sq[k]
            };
            pre = pre.div_c64(d);
        }
    }
    Ok(pre)
}

/// <S_N|Psi(u)>, as a function of the squared rapidities.
pub fn steady_overlap_right(u_sq: &[C64], m: usize) -> Result<C64, DetError> {
    if u_sq.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    check_nonzero(u_sq)?;
    check_distinct(u_sq)?;
    let pre = overlap_prefactor(u_sq, false)?;
    let (det, _) = build_v_matrix(u_sq, m).det()?;
    Ok(pre.mul(det).value())
}

/// <Psi(u)|S_N>.
pub fn steady_overlap_left(u_sq: &[C64], m: usize) -> Result<C64, DetError> {
    if u_sq.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    check_nonzero(u_sq)?;
    check_distinct(u_sq)?;
    let pre = overlap_prefactor(u_sq, true)?;
    let (det, _) = build_vtilde_matrix(u_sq, m).det()?;
    Ok(pre.mul(det).value())
}

fn check_distinct(u_sq: &[C64]) -> Result<(), DetError> {
    for (i, a) in u_sq.iter().enumerate() {
        for b in &u_sq[i + 1..] {
            if (a - b).norm() <= COINCIDENCE_TOL * a.norm().max(b.norm()) {
                return Err(DetError::CoincidingParameters);
            }
        }
    }
    Ok(())
}

/// <S_N| s_1 |Psi(u)>: the V determinant on the M-1 lattice.
pub fn form_factor_s1_right(u_sq: &[C64], m: usize) -> Result<C64, DetError> {
    if u_sq.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    check_nonzero(u_sq)?;
    check_distinct(u_sq)?;
    let mut pre = LogComplex::ONE;
    for &y in u_sq {
        pre = pre.mul_c64(y - 1.0);
    }
    let n = u_sq.len();
    for l in 1..n {
        for k in 0..l {
            pre = pre.div_c64(u_sq[l] - u_sq[k]);
        }
    }
    let (det, _) = build_v_matrix(u_sq, m - 1).det()?;
    Ok(pre.mul(det).value())
}

/// <Psi(u)| s_1 |S_N>: the Vtilde determinant on the M-1 lattice.
pub fn form_factor_s1_left(u_sq: &[C64], m: usize) -> Result<C64, DetError> {
    if u_sq.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    check_nonzero(u_sq)?;
    check_distinct(u_sq)?;
    let pre = overlap_prefactor(u_sq, true)?;
    let (det, _) = build_vtilde_matrix(u_sq, m - 1).det()?;
    Ok(pre.mul(det).value())
}

/// <Psi(v)| s_1 |Psi(u)> for generic parameters: proportional to the
/// scalar product on the M-1 lattice.
pub fn form_factor_s1_generic(v_set: &[C64], u_set: &[C64], m: usize) -> Result<C64, DetError> {
    let mut factor = C64::new(1.0, 0.0);
    for &u in u_set {
        factor *= C64::new(1.0, 0.0) - (u * u).inv();
    }
    Ok(factor * scalar_product(v_set, u_set, m - 1)?)
}

/// On-shell norm <Psi(u)|Psi(u)> via det Qtilde, in w variables. The
/// formula is only valid on solutions of the Bethe equations, so the
/// residual is checked first.
pub fn norm_squared(w: &[C64], shape: RingShape, tol: f64) -> Result<C64, DetError> {
    let n = w.len();
    assert_eq!(n, shape.n);
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    if w.iter().any(|x| x.norm() == 0.0) {
        return Err(DetError::ZeroParameter);
    }
    if w.iter().any(|x| (x - 1.0).norm() <= COINCIDENCE_TOL) {
        return Err(DetError::PoleAtOne);
    }
    let residual = bethe::bethe_residual_w(w, shape);
    if residual > tol {
        return Err(DetError::OffShell { residual, tol });
    }
    let u_sq: Vec<C64> = w.iter().map(|x| x.inv()).collect();
    check_distinct(&u_sq)?;
    // U^{2N} prod_{l != n} 1/(u_l^2 - u_n^2)
    let mut pre = LogComplex::ONE;
    for &y in &u_sq {
        pre = pre.mul((LogComplex::from_c64(y)).powi(n as i32));
    }
    for l in 0..n {
        for k in 0..n {
            if l != k {
                pre = pre.div_c64(u_sq[l] - u_sq[k]);
            }
        }
    }
    let (det, _) = build_qtilde_matrix(w, shape).det()?;
    Ok(pre.mul(det).value())
}
