//! Enumeration of all Bethe-equation solutions for a sector (M, N).
//!
//! In the branch-free variable w = u^{-2} the Bethe equations become
//! w_n^N = B (1 - w_n)^M with the self-consistency constant
//! B = (-1)^{N-1} prod_j w_j. For fixed B the left equation is a degree-M
//! polynomial; a solution is a choice of N of its roots whose product
//! reproduces B. The solver fixes canonical root labels at a reference
//! B0, then runs a damped fixed-point iteration on B for every N-subset
//! of labels, tracking roots by continuity, and polishes with a
//! multivariate Newton step on the original system.

use crate::combinat::{self, binomial, RingShape};
use crate::linalg::lu_solve;
use ndarray::Array2;
use ndarray_linalg::Eig;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

type C64 = Complex64;

/// Default residual tolerance of the solver.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Fixed points with |B| at or below this are the stationary direction
/// (all w -> 0) and are discarded; the stationary solution is handled
/// analytically.
const STATIONARY_B_CUTOFF: f64 = 1e-8;

const MAX_FIXED_POINT_ITERS: usize = 120;
const MAX_NEWTON_B_ITERS: usize = 80;
const MAX_RETRIES: usize = 4;

#[derive(Debug, Error)]
pub enum BetheError {
    #[error("solve_all requires 0 <= N <= M (got M = {m}, N = {n})")]
    BadSector { m: usize, n: usize },
    #[error("companion-matrix eigensolver failed: {0}")]
    Eig(#[from] ndarray_linalg::error::LinalgError),
    #[error(
        "catalog incomplete for M = {m}, N = {n}: found {found} nontrivial solutions, \
         expected {expected}; {failed} subsets failed to converge"
    )]
    CountMismatch {
        m: usize,
        n: usize,
        found: usize,
        expected: usize,
        failed: usize,
    },
    #[error("solution violates catalog invariant: {0}")]
    InvariantViolation(String),
}

/// One nontrivial solution of the Bethe equations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetheSolution {
    /// The N roots w_j = u_j^{-2}, sorted by (re, im).
    pub w: Vec<C64>,
    /// Self-consistency constant B = (-1)^{N-1} prod w_j.
    pub b_const: C64,
    /// Eigenenergy E = sum_j w_j / (w_j - 1).
    pub energy: C64,
    /// prod u_j^2 = prod 1/w_j.
    pub u2: C64,
    /// Shift eigenvalue Theta(1) = prod 1/(1 - w_j); an M-th root of unity.
    pub theta1: C64,
    /// Max rescaled violation of the Bethe equations.
    pub residual: f64,
    /// Root-label subset (at the reference B0) that produced the solution.
    pub subset_id: Vec<usize>,
}

/// Solver bookkeeping surfaced for diagnostics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub retried_subsets: usize,
    pub failed_subsets: usize,
    pub discarded_stationary: usize,
    pub merged_duplicates: usize,
}

/// All solutions for one sector. The stationary solution (all u infinite,
/// all w = 0) is a flag, never a numerical entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionCatalog {
    pub shape: RingShape,
    pub solutions: Vec<BetheSolution>,
    pub includes_stationary: bool,
    pub diagnostics: SolveDiagnostics,
}

/// Relative Bethe residual: max_n of |lhs_n - B| / max(|lhs_n|, |B|)
/// with lhs_n = w_n^N (1 - w_n)^{-M}. The fully relative scale matters:
/// near the stationary direction both sides shrink together, and an
/// absolute measure would accept half-collapsed root sets as converged.
/// Roots at the poles w = 0, 1 report an infinite residual.
pub fn bethe_residual_w(w: &[C64], shape: RingShape) -> f64 {
    let n = w.len();
    debug_assert_eq!(n, shape.n);
    if w.iter()
        .any(|x| x.norm() == 0.0 || (x - 1.0).norm() == 0.0)
    {
        return f64::INFINITY;
    }
    let sign = if shape.n % 2 == 1 { 1.0 } else { -1.0 };
    let b: C64 = w.iter().product::<C64>() * sign;
    let mut worst: f64 = 0.0;
    for &wn in w {
        let lhs = wn.powu(n as u32) * (C64::new(1.0, 0.0) - wn).powi(-(shape.m as i32));
        let scale = lhs.norm().max(b.norm()).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - b).norm() / scale);
    }
    worst
}

/// Residual of one catalog entry (spec-level wrapper).
pub fn residual(sol: &BetheSolution, shape: RingShape) -> f64 {
    bethe_residual_w(&sol.w, shape)
}

/// Transfer-matrix eigenvalue Theta_N(v, {u}) of a solution, evaluated in
/// w variables.
pub fn transfer_eigenvalue(
    sol: &BetheSolution,
    v: C64,
    shape: RingShape,
) -> Result<C64, BetheError> {
    let v2 = v * v;
    let one = C64::new(1.0, 0.0);
    let mut first = one;
    let mut second = one;
    for &w in &sol.w {
        let d = one - v2 * w; // u_j^2 - v^2 rescaled by w_j
        if d.norm() < 1e-14 * (v2 * w).norm().max(1.0) {
            return Err(BetheError::InvariantViolation(format!(
                "pole v^2 = u_j^2 at v = {v}"
            )));
        }
        first /= d;
        second *= v2 * w / (v2 * w - one);
    }
    Ok(first + (one - v2.inv()).powi(shape.m as i32) * second)
}

fn energy_of(w: &[C64]) -> C64 {
    w.iter().map(|&x| x / (x - 1.0)).sum()
}

fn theta1_of(w: &[C64]) -> C64 {
    w.iter().map(|&x| (C64::new(1.0, 0.0) - x).inv()).product()
}

/// All M roots of p_B(w) = w^N - B (1 - w)^M via the companion matrix,
/// each polished with one Newton step.
fn polynomial_roots(b: C64, shape: RingShape) -> Result<Vec<C64>, BetheError> {
    let (m, n) = (shape.m, shape.n);
    // coefficients of w^k: [k == N] - B (-1)^k C(M, k)
    let mut coeffs: Vec<C64> = (0..=m)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let c = binomial(m as u64, k as u64).unwrap() as f64;
            let mut v = -b * sign * c;
            if k == n {
                v += 1.0;
            }
            v
        })
        .collect();
    let lead = coeffs[m];
    for c in &mut coeffs {
        *c /= lead;
    }
    let mut companion: Array2<C64> = Array2::zeros((m, m));
    for i in 1..m {
        companion[[i, i - 1]] = C64::new(1.0, 0.0);
    }
    for i in 0..m {
        companion[[i, m - 1]] = -coeffs[i];
    }
    let (vals, _) = companion.eig()?;
    let p = |w: C64| w.powu(n as u32) - b * (C64::new(1.0, 0.0) - w).powu(m as u32);
    let dp = |w: C64| {
        C64::new(n as f64, 0.0) * w.powu(n as u32 - 1)
            + b * C64::new(m as f64, 0.0) * (C64::new(1.0, 0.0) - w).powu(m as u32 - 1)
    };
    Ok(vals
        .iter()
        .map(|&w0| {
            let mut w = w0;
            for _ in 0..2 {
                let d = dp(w);
                if d.norm() > 0.0 {
                    w -= p(w) / d;
                }
            }
            w
        })
        .collect())
}

/// Canonical labeling at the reference constant: sort by principal
/// argument, ties by modulus.
fn canonical_sort(roots: &mut [C64]) {
    roots.sort_by(|a, b| {
        (a.arg(), a.norm())
            .partial_cmp(&(b.arg(), b.norm()))
            .expect("finite roots")
    });
}

/// Reorder `new` so that new[i] is the root nearest old[i] (greedy global
/// matching; labels propagate by continuity as B moves).
fn match_by_continuity(old: &[C64], new: &[C64]) -> Vec<C64> {
    let m = old.len();
    let mut taken_new = vec![false; m];
    let mut taken_old = vec![false; m];
    let mut out = vec![C64::new(0.0, 0.0); m];
    for _ in 0..m {
        let mut best = (0usize, 0usize, f64::INFINITY);
        for i in 0..m {
            if taken_old[i] {
                continue;
            }
            for j in 0..m {
                if taken_new[j] {
                    continue;
                }
                let d = (old[i] - new[j]).norm();
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        taken_old[best.0] = true;
        taken_new[best.1] = true;
        out[best.0] = new[best.1];
    }
    out
}

/// Damped multivariate Newton polish on F_n = w_n^N - B(w) (1 - w_n)^M,
/// B(w) = (-1)^{N-1} prod w_j.
fn newton_polish(w: &mut [C64], shape: RingShape, tol: f64) -> bool {
    let (m, n) = (shape.m as f64, w.len());
    let sign = if shape.n % 2 == 1 { 1.0 } else { -1.0 };
    let one = C64::new(1.0, 0.0);
    for _ in 0..50 {
        if bethe_residual_w(w, shape) < tol * 1e-2 {
            return true;
        }
        let b: C64 = w.iter().product::<C64>() * sign;
        let mut jac = Array2::zeros((n, n));
        let mut f = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let wi = w[i];
            let pow = (one - wi).powu(shape.m as u32);
            f[i] = wi.powu(n as u32) - b * pow;
            for j in 0..n {
                let mut entry = -pow * b / w[j];
                if i == j {
                    entry += C64::new(n as f64, 0.0) * wi.powu(n as u32 - 1)
                        + b * C64::new(m, 0.0) * (one - wi).powu(shape.m as u32 - 1);
                }
                jac[[i, j]] = entry;
            }
        }
        match lu_solve(&jac, &f) {
            Some(step) => {
                for (wi, s) in w.iter_mut().zip(step) {
                    *wi -= s;
                }
            }
            None => return false,
        }
    }
    bethe_residual_w(w, shape) < tol
}

enum SubsetOutcome {
    Solution(BetheSolution),
    Stationary,
    Failed,
}

/// Solutions with (near-)coincident roots are excluded: the wavefunction
/// is antisymmetric in the rapidities, so they do not label eigenstates
/// (and the determinant formulas would be singular there).
fn roots_distinct(w: &[C64]) -> bool {
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            let scale = w[i].norm().max(w[j].norm()).max(1.0);
            if (w[i] - w[j]).norm() <= 1e-6 * scale {
                return false;
            }
        }
    }
    true
}

/// Package a polished root multiset into a catalog entry; `None` when the
/// candidate is inadmissible (stationary collapse, poles, coincident
/// roots) or misses the residual tolerance.
fn finish_solution(
    mut w: Vec<C64>,
    shape: RingShape,
    subset: &[usize],
    tol: f64,
) -> Option<BetheSolution> {
    if w.iter()
        .any(|x| x.norm() < 1e-6 || (x - 1.0).norm() < 1e-9)
    {
        return None;
    }
    if !roots_distinct(&w) {
        return None;
    }
    let res = bethe_residual_w(&w, shape);
    if res >= tol {
        return None;
    }
    w.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let sign = if shape.n % 2 == 1 { 1.0 } else { -1.0 };
    let b_final: C64 = w.iter().product::<C64>() * sign;
    Some(BetheSolution {
        b_const: b_final,
        energy: energy_of(&w),
        u2: w.iter().map(|x| x.inv()).product(),
        theta1: theta1_of(&w),
        residual: res,
        subset_id: subset.to_vec(),
        w,
    })
}

/// d(g_S)/dB for g_S(B) = sign * prod_{i in S} w_i(B), via implicit
/// differentiation of p_B(w_i) = 0: dw/dB = (1 - w)^M / p_B'(w).
fn subset_deriv(subset: &[usize], roots: &[C64], b: C64, g: C64, shape: RingShape) -> C64 {
    let (m, n) = (shape.m, shape.n);
    let one = C64::new(1.0, 0.0);
    let mut total = C64::new(0.0, 0.0);
    for &i in subset {
        let w = roots[i];
        let dp = C64::new(n as f64, 0.0) * w.powu(n as u32 - 1)
            + b * C64::new(m as f64, 0.0) * (one - w).powu(m as u32 - 1);
        if dp.norm() == 0.0 || w.norm() == 0.0 {
            return C64::new(f64::NAN, 0.0);
        }
        total += (one - w).powu(m as u32) / (dp * w);
    }
    g * total
}

fn run_subset(
    shape: RingShape,
    subset: &[usize],
    b0: C64,
    labeled_roots0: &[C64],
    tol: f64,
) -> SubsetOutcome {
    let sign = if shape.n % 2 == 1 { 1.0 } else { -1.0 };
    let mut b = b0;
    let mut roots = labeled_roots0.to_vec();
    let mut shrinking = 0usize;

    let track_to = |roots: &[C64], b_next: C64| -> Option<Vec<C64>> {
        polynomial_roots(b_next, shape)
            .ok()
            .map(|fresh| match_by_continuity(roots, &fresh))
    };

    // Phase 1: damped self-consistency iteration B <- g_S(B). This only
    // has to carry B into the right neighbourhood, so it runs few steps
    // at a loose tolerance.
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let g: C64 = subset.iter().map(|&i| roots[i]).product::<C64>() * sign;
        if !g.re.is_finite() || !g.im.is_finite() {
            return SubsetOutcome::Failed;
        }
        let delta = (g - b).norm();
        if delta <= 1e-5 * b.norm().max(1.0) {
            break;
        }
        let b_next = b * 0.5 + g * 0.5;
        // the stationary direction contracts to B = 0 ever more slowly;
        // bail out once the drift is unmistakable
        if b_next.norm() < b.norm() {
            shrinking += 1;
        } else {
            shrinking = 0;
        }
        if b_next.norm() <= STATIONARY_B_CUTOFF
            || (shrinking >= 25 && b_next.norm() < 1e-3)
        {
            return SubsetOutcome::Stationary;
        }
        roots = match track_to(&roots, b_next) {
            Some(r) => r,
            None => return SubsetOutcome::Failed,
        };
        b = b_next;
    }

    // Phase 2: Newton on h(B) = g_S(B) - B. Unlike plain iteration this
    // also converges onto repelling fixed points (|g'| > 1), which do
    // occur in degenerate sectors.
    let mut converged = false;
    for _ in 0..MAX_NEWTON_B_ITERS {
        let g: C64 = subset.iter().map(|&i| roots[i]).product::<C64>() * sign;
        let h = g - b;
        if h.norm() <= 1e-12 * b.norm().max(1.0) {
            converged = true;
            break;
        }
        let gp = subset_deriv(subset, &roots, b, g, shape);
        let denom = gp - 1.0;
        if !denom.re.is_finite() || !denom.im.is_finite() || denom.norm() < 1e-14 {
            return SubsetOutcome::Failed;
        }
        let mut step = -h / denom;
        // trust region: never move by more than half the current scale
        let cap = 0.5 * b.norm().max(0.5);
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        let b_next = b + step;
        if b_next.norm() <= STATIONARY_B_CUTOFF {
            return SubsetOutcome::Stationary;
        }
        roots = match track_to(&roots, b_next) {
            Some(r) => r,
            None => return SubsetOutcome::Failed,
        };
        b = b_next;
    }
    if !converged {
        return SubsetOutcome::Failed;
    }

    let mut w: Vec<C64> = subset.iter().map(|&i| roots[i]).collect();
    if !newton_polish(&mut w, shape, tol) {
        return SubsetOutcome::Failed;
    }
    if w.iter().any(|x| x.norm() < 1e-6) {
        return SubsetOutcome::Stationary;
    }
    match finish_solution(w, shape, subset, tol) {
        Some(sol) => SubsetOutcome::Solution(sol),
        None => SubsetOutcome::Failed,
    }
}

fn push_if_new(
    solutions: &mut Vec<BetheSolution>,
    sol: BetheSolution,
    tol: f64,
    diagnostics: &mut SolveDiagnostics,
) -> bool {
    if solutions
        .iter()
        .any(|s| same_multiset(&s.w, &sol.w, 10.0 * tol))
    {
        diagnostics.merged_duplicates += 1;
        false
    } else {
        solutions.push(sol);
        true
    }
}

fn conjugate_closure(
    solutions: &mut Vec<BetheSolution>,
    shape: RingShape,
    tol: f64,
    diagnostics: &mut SolveDiagnostics,
) {
    let mut i = 0;
    while i < solutions.len() {
        let conj: Vec<C64> = solutions[i].w.iter().map(|x| x.conj()).collect();
        let missing = !solutions
            .iter()
            .any(|s| same_multiset(&conj, &s.w, 10.0 * tol));
        if missing {
            let mut w = conj;
            if newton_polish(&mut w, shape, tol) {
                if let Some(sol) = finish_solution(w, shape, &[], tol) {
                    push_if_new(solutions, sol, tol, diagnostics);
                }
            }
        }
        i += 1;
    }
}

fn random_recovery(
    solutions: &mut Vec<BetheSolution>,
    shape: RingShape,
    tol: f64,
    expected: usize,
    diagnostics: &mut SolveDiagnostics,
) {
    use rand::{Rng, SeedableRng};
    // seed depends only on the sector, so catalogs stay reproducible
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
        0x4265_7468_6500_0000 ^ ((shape.m as u64) << 8) ^ shape.n as u64,
    );
    let budget = 2000 * expected.max(40);
    for _ in 0..budget {
        if solutions.len() >= expected {
            return;
        }
        // log-uniform radius: root moduli spread over orders of magnitude
        let mut w: Vec<C64> = (0..shape.n)
            .map(|_| {
                let r = rng.gen_range(0.02f64.ln()..30.0f64.ln()).exp();
                C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        if !newton_polish(&mut w, shape, tol) {
            continue;
        }
        if let Some(sol) = finish_solution(w, shape, &[], tol) {
            push_if_new(solutions, sol, tol, diagnostics);
        }
    }
}

fn same_multiset(a: &[C64], b: &[C64], tol: f64) -> bool {
    // sorted by (re, im) already; allow for reorderings caused by ties
    let mut used = vec![false; b.len()];
    'outer: for x in a {
        for (j, y) in b.iter().enumerate() {
            if !used[j] && (x - y).norm() <= tol {
                used[j] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Enumerate every nontrivial solution for the sector and certify the
/// catalog (count, residuals, shift-eigenvalue and energy invariants).
pub fn solve_all(shape: RingShape, tol: f64) -> Result<SolutionCatalog, BetheError> {
    let (m, n) = (shape.m, shape.n);
    if n > m {
        return Err(BetheError::BadSector { m, n });
    }
    if n == 0 || n == m {
        return Ok(SolutionCatalog {
            shape,
            solutions: Vec::new(),
            includes_stationary: true,
            diagnostics: SolveDiagnostics::default(),
        });
    }
    let expected = shape.dim() - 1;

    let subsets: Vec<Vec<usize>> = (0..shape.dim())
        .map(|r| {
            let mask = combinat::unrank(r, shape).unwrap();
            (0..m).filter(|i| mask & (1 << i) != 0).collect()
        })
        .collect();

    // Reference constants for the continuation, slightly off the real
    // axis to avoid discriminant zeros. The first pass covers most of the
    // spectrum; further passes start from other regions of the B plane to
    // reach basins (notably negative real B) the first one misses.
    let b0_schedule: [C64; 5] = [
        C64::from_polar(0.4, 0.17),
        C64::from_polar(3.0, 3.0),
        C64::from_polar(1.2, -2.0),
        C64::from_polar(0.08, 1.1),
        C64::from_polar(8.0, 2.6),
    ];

    let mut diagnostics = SolveDiagnostics::default();
    let mut solutions: Vec<BetheSolution> = Vec::new();

    for (pass, &b0_base) in b0_schedule.iter().enumerate() {
        if pass > 0 && solutions.len() >= expected {
            break;
        }
        let results: Vec<(SubsetOutcome, usize)> = subsets
            .par_iter()
            .map(|subset| {
                let mut retries = 0usize;
                loop {
                    // retries walk B0 along the ray and rotate it a little
                    let b0 = b0_base
                        * C64::from_polar(1.3f64.powi(retries as i32), 0.23 * retries as f64);
                    let mut roots0 = match polynomial_roots(b0, shape) {
                        Ok(r) => r,
                        Err(_) => return (SubsetOutcome::Failed, retries),
                    };
                    canonical_sort(&mut roots0);
                    let outcome = run_subset(shape, subset, b0, &roots0, tol);
                    match outcome {
                        SubsetOutcome::Failed if retries < MAX_RETRIES => retries += 1,
                        other => return (other, retries),
                    }
                }
            })
            .collect();

        for (outcome, retries) in results {
            if retries > 0 {
                diagnostics.retried_subsets += 1;
            }
            match outcome {
                SubsetOutcome::Solution(sol) => {
                    push_if_new(&mut solutions, sol, tol, &mut diagnostics);
                }
                SubsetOutcome::Stationary => diagnostics.discarded_stationary += 1,
                SubsetOutcome::Failed => {
                    if pass == 0 {
                        diagnostics.failed_subsets += 1;
                    }
                }
            }
        }

        // The equations have real coefficients, so solutions come in
        // conjugate pairs; a pair broken by a convergence failure is
        // repaired directly.
        conjugate_closure(&mut solutions, shape, tol, &mut diagnostics);
    }

    // Last resort for basins the subset continuation misses: seeded
    // random-start Newton on the full system. Deterministic for a fixed
    // sector, and a no-op when the catalog is already complete.
    if solutions.len() < expected {
        random_recovery(&mut solutions, shape, tol, expected, &mut diagnostics);
        conjugate_closure(&mut solutions, shape, tol, &mut diagnostics);
    }

    if solutions.len() != expected {
        return Err(BetheError::CountMismatch {
            m,
            n,
            found: solutions.len(),
            expected,
            failed: diagnostics.failed_subsets,
        });
    }

    for sol in &solutions {
        let theta_m = sol.theta1.powu(m as u32);
        if (theta_m - 1.0).norm() > 1e-8 {
            return Err(BetheError::InvariantViolation(format!(
                "Theta(1)^M = {theta_m} is not an M-th root of unity (w = {:?})",
                sol.w
            )));
        }
        if sol.energy.re < -1e-8 {
            return Err(BetheError::InvariantViolation(format!(
                "negative relaxation rate E = {}",
                sol.energy
            )));
        }
    }

    solutions.sort_by(|a, b| {
        let ka = (a.energy.re, a.energy.im);
        let kb = (b.energy.re, b.energy.im);
        ka.partial_cmp(&kb).unwrap().then_with(|| {
            for (x, y) in a.w.iter().zip(&b.w) {
                match (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap() {
                    std::cmp::Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            std::cmp::Ordering::Equal
        })
    });

    Ok(SolutionCatalog {
        shape,
        solutions,
        includes_stationary: true,
        diagnostics,
    })
}
