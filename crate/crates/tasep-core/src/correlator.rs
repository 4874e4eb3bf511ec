//! Spectral assembly of the stationary correlation function
//! (1/Z_N) <S_N| s_1 e^{-tH} s_m |S_N> from the Bethe catalog:
//!
//!   ((M-N)/M)^2  +  (1/Z_N) * sum over nontrivial solutions of
//!   e^{-tE} / U^{2N} * prod_j (u_j^2 - 1) u_j^2 / (1 - u_j^{-2})^{m-1}
//!     * det Vtilde^(M-1) det V^(M-1) / det Qtilde.
//!
//! Each relaxing term is <S|s_1|psi><psi|s_m|S> / N^2(psi) from the
//! resolution of the identity, divided by the same Z_N that normalizes
//! the whole correlation; the stationary term has its copy folded into
//! ((M-N)/M)^2.
//!
//! Every factor is evaluated in w = u^{-2}, so the assembly is free of
//! square-root branches.

use crate::bethe::{bethe_residual_w, BetheSolution, SolutionCatalog};
use crate::combinat::RingShape;
use crate::detforms::{build_qtilde_matrix, build_v_matrix, build_vtilde_matrix};
use crate::linalg::LogComplex;
use num_complex::Complex64;
use thiserror::Error;

type C64 = Complex64;

/// Imaginary parts of the assembled sum must cancel between conjugate
/// solution pairs to this level.
pub const IMAG_LEAK_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CorrelatorError {
    #[error("catalog rejected: {0}")]
    BadCatalog(String),
    #[error("site index m = 0 is invalid (sites are 1-based)")]
    ZeroSite,
    #[error("negative time {t}; callers must supply |t|")]
    NegativeTime { t: f64 },
    #[error(
        "imaginary leak {leak:.3e} exceeds {tol:.3e} at m = {m}, t = {t}; \
         a conjugate solution is missing or a determinant sign is wrong"
    )]
    ImagLeak { leak: f64, tol: f64, m: usize, t: f64 },
    #[error("w = 1 pole in translation factor")]
    PoleAtOne,
    #[error("singular Qtilde determinant")]
    SingularNorm,
}

/// The assembled correlation value with per-solution diagnostics.
#[derive(Debug, Clone)]
pub struct CorrelationResult {
    /// Site index reduced into [1, M].
    pub m: usize,
    pub t: f64,
    pub value: f64,
    /// ((M-N)/M)^2, the t -> infinity limit.
    pub stationary_term: f64,
    /// (index into the catalog, complex contribution) per solution.
    pub terms: Vec<(usize, C64)>,
    /// |imaginary part| of the assembled sum.
    pub imag_leak: f64,
    /// Worst pivot-ratio conditioning estimate over all determinants.
    pub max_pivot_ratio: f64,
}

/// Translation factor prod_j (1 - u_j^{-2})^{1-m} = Theta(1)^{m-1}.
pub fn translation_factor(sol: &BetheSolution, m_site: usize) -> Result<C64, CorrelatorError> {
    if m_site == 0 {
        return Err(CorrelatorError::ZeroSite);
    }
    if sol.w.iter().any(|w| (w - 1.0).norm() < 1e-14) {
        return Err(CorrelatorError::PoleAtOne);
    }
    Ok(sol.theta1.powu(m_site as u32 - 1))
}

fn validate_catalog(catalog: &SolutionCatalog) -> Result<(), CorrelatorError> {
    let expected = catalog.shape.dim() - 1;
    if catalog.solutions.len() != expected {
        return Err(CorrelatorError::BadCatalog(format!(
            "{} nontrivial solutions, expected {}",
            catalog.solutions.len(),
            expected
        )));
    }
    for (i, sol) in catalog.solutions.iter().enumerate() {
        let res = bethe_residual_w(&sol.w, catalog.shape);
        if res > 1e-8 {
            return Err(CorrelatorError::BadCatalog(format!(
                "solution {i} has residual {res:.3e}"
            )));
        }
    }
    Ok(())
}

/// One spectral term (without the e^{-tE} time factor), in w variables:
/// (prod w)^N prod_j (1 - w_j)^{2 - m} w_j^{-2}
///   * det Vtilde^(M-1) det V^(M-1) / det Qtilde.
fn solution_weight(
    sol: &BetheSolution,
    shape: RingShape,
    m_site: usize,
) -> Result<(C64, f64), CorrelatorError> {
    let n = shape.n;
    let u_sq: Vec<C64> = sol.w.iter().map(|w| w.inv()).collect();
    let mut acc = LogComplex::ONE;
    for &w in &sol.w {
        acc = acc.mul(LogComplex::from_c64(w).powi(n as i32));
        acc = acc.mul(LogComplex::from_c64(C64::new(1.0, 0.0) - w).powi(2 - m_site as i32));
        acc = acc.mul(LogComplex::from_c64(w).powi(-2));
    }
    let (det_vt, cond_vt) = build_vtilde_matrix(&u_sq, shape.m - 1)
        .det()
        .map_err(|_| CorrelatorError::SingularNorm)?;
    let (det_v, cond_v) = build_v_matrix(&u_sq, shape.m - 1)
        .det()
        .map_err(|_| CorrelatorError::SingularNorm)?;
    let (det_qt, cond_qt) = build_qtilde_matrix(&sol.w, shape)
        .det()
        .map_err(|_| CorrelatorError::SingularNorm)?;
    // the norm appears in the denominator; a vanishing norm determinant
    // would make the spectral term ill-defined
    if det_qt.is_zero() {
        return Err(CorrelatorError::SingularNorm);
    }
    // a vanishing form factor makes the whole term exactly zero
    if det_vt.is_zero() || det_v.is_zero() {
        return Ok((C64::new(0.0, 0.0), cond_qt));
    }
    acc = acc.mul(det_vt).mul(det_v);
    acc = acc.mul(LogComplex {
        log_mag: -det_qt.log_mag,
        phase: -det_qt.phase,
    });
    Ok((acc.value(), cond_vt.max(cond_v).max(cond_qt)))
}

/// Evaluate the correlation function at site m and time t from a
/// validated catalog.
pub fn correlation(
    shape: RingShape,
    m_site: usize,
    t: f64,
    catalog: &SolutionCatalog,
) -> Result<CorrelationResult, CorrelatorError> {
    if m_site == 0 {
        return Err(CorrelatorError::ZeroSite);
    }
    if t < 0.0 {
        return Err(CorrelatorError::NegativeTime { t });
    }
    if catalog.shape != shape {
        return Err(CorrelatorError::BadCatalog(
            "catalog shape does not match the request".into(),
        ));
    }
    validate_catalog(catalog)?;
    // site index is periodic with period M
    let m_reduced = (m_site - 1) % shape.m + 1;

    let stationary_term =
        ((shape.m - shape.n) as f64 / shape.m as f64).powi(2);

    // the relaxing terms carry the same 1/Z_N as the whole correlation;
    // the stationary term absorbed its copy into ((M-N)/M)^2 already
    let inv_z = 1.0 / shape.z();
    let mut terms: Vec<(usize, C64)> = Vec::with_capacity(catalog.solutions.len());
    let mut max_pivot_ratio: f64 = 1.0;
    for (idx, sol) in catalog.solutions.iter().enumerate() {
        let (weight, cond) = solution_weight(sol, shape, m_reduced)?;
        max_pivot_ratio = max_pivot_ratio.max(cond);
        let contribution = (-sol.energy * t).exp() * weight * inv_z;
        terms.push((idx, contribution));
    }

    // compensated accumulation, largest contributions first
    terms.sort_by(|a, b| b.1.norm().partial_cmp(&a.1.norm()).unwrap());
    let mut sum = C64::new(stationary_term, 0.0);
    let mut comp = C64::new(0.0, 0.0);
    for &(_, c) in &terms {
        let y = c - comp;
        let t_sum = sum + y;
        comp = (t_sum - sum) - y;
        sum = t_sum;
    }

    let imag_leak = sum.im.abs();
    if imag_leak > IMAG_LEAK_TOL {
        return Err(CorrelatorError::ImagLeak {
            leak: imag_leak,
            tol: IMAG_LEAK_TOL,
            m: m_reduced,
            t,
        });
    }
    Ok(CorrelationResult {
        m: m_reduced,
        t,
        value: sum.re,
        stationary_term,
        terms,
        imag_leak,
        max_pivot_ratio,
    })
}

/// t = 0 sum rule: the spectral value against the combinatorial count
/// C(M-2, N)/C(M, N) (or (M-N)/M for m = 1).
pub fn sum_rule_t0(
    shape: RingShape,
    m_site: usize,
    catalog: &SolutionCatalog,
) -> Result<(f64, f64), CorrelatorError> {
    let lhs = correlation(shape, m_site, 0.0, catalog)?.value;
    let m_reduced = (m_site - 1) % shape.m + 1;
    let rhs = if m_reduced == 1 {
        (shape.m - shape.n) as f64 / shape.m as f64
    } else {
        crate::combinat::binomial(shape.m as u64 - 2, shape.n as u64).unwrap() as f64 / shape.z()
    };
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::{self, DEFAULT_TOL};
    use approx::assert_abs_diff_eq;

    fn shape(m: usize, n: usize) -> RingShape {
        RingShape::new(m, n).unwrap()
    }

    #[test]
    fn empty_ring_is_one() {
        let s = shape(4, 0);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        for m in 1..=4 {
            for &t in &[0.0, 0.3, 2.0] {
                let r = correlation(s, m, t, &cat).unwrap();
                assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn static_values_m4_n2() {
        let s = shape(4, 2);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        let r = correlation(s, 3, 0.0, &cat).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 / 6.0, epsilon = 1e-10);
        let r = correlation(s, 1, 0.0, &cat).unwrap();
        assert_abs_diff_eq!(r.value, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn sum_rule_examples() {
        let s = shape(4, 2);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        let (lhs, rhs) = sum_rule_t0(s, 2, &cat).unwrap();
        assert_abs_diff_eq!(rhs, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);

        let s = shape(2, 1);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        let (lhs, rhs) = sum_rule_t0(s, 2, &cat).unwrap();
        assert_abs_diff_eq!(rhs, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lhs, 0.0, epsilon = 1e-10);

        let s = shape(6, 3);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        let (lhs, rhs) = sum_rule_t0(s, 1, &cat).unwrap();
        assert_abs_diff_eq!(rhs, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn matches_oracle_m2() {
        // closed form: value(m=2, t) = 1/4 - e^{-2t}/4
        let s = shape(2, 1);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        for &t in &[0.0, 0.5, 1.0, 3.0] {
            let r = correlation(s, 2, t, &cat).unwrap();
            assert_abs_diff_eq!(r.value, 0.25 - (-2.0 * t).exp() / 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn translation_factor_properties() {
        let s = shape(3, 1);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        for sol in &cat.solutions {
            assert_eq!(translation_factor(sol, 1).unwrap(), C64::new(1.0, 0.0));
            // period M in the exponent
            let f1 = translation_factor(sol, 1).unwrap();
            let f4 = translation_factor(sol, 4).unwrap();
            assert!((f1 - f4).norm() < 1e-10);
            // w = 1 - omega has Theta = omega^2
            if (sol.w[0] - (C64::new(1.0, 0.0) - omega)).norm() < 1e-10 {
                let f2 = translation_factor(sol, 2).unwrap();
                assert!((f2 - omega * omega).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn periodicity_in_m() {
        let s = shape(5, 2);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        for m in 1..=5usize {
            let a = correlation(s, m, 0.8, &cat).unwrap().value;
            let b = correlation(s, m + 5, 0.8, &cat).unwrap().value;
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn approach_to_stationary_value() {
        // every relaxing term decays at least as fast as e^{-gap t}
        // (the slowest modes are complex, so the deviation oscillates
        // inside this envelope rather than following it exactly)
        let s = shape(5, 2);
        let cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        let gen = crate::oracle::build_generator(s).unwrap();
        let gap = crate::oracle::spectrum(&gen).unwrap().gap;
        let stat = (3.0f64 / 5.0).powi(2);
        let c0: f64 = correlation(s, 3, 0.0, &cat)
            .unwrap()
            .terms
            .iter()
            .map(|(_, z)| z.norm())
            .sum();
        let mut prev_bound = f64::INFINITY;
        for &t in &[1.0, 2.0, 4.0, 8.0] {
            let dev = (correlation(s, 3, t, &cat).unwrap().value - stat).abs();
            let bound = c0 * (-gap * t).exp();
            assert!(
                dev <= bound * (1.0 + 1e-9) + 1e-12,
                "t={t}: dev {dev} vs envelope {bound}"
            );
            assert!(bound < prev_bound);
            prev_bound = bound;
        }
        // and the deviation does go to zero
        let late = (correlation(s, 3, 20.0, &cat).unwrap().value - stat).abs();
        assert!(late < 1e-6, "t=20 deviation {late}");
    }

    #[test]
    fn rejects_truncated_catalog() {
        let s = shape(4, 2);
        let mut cat = bethe::solve_all(s, DEFAULT_TOL).unwrap();
        cat.solutions.pop();
        assert!(matches!(
            correlation(s, 2, 0.5, &cat),
            Err(CorrelatorError::BadCatalog(_))
        ));
    }
}
