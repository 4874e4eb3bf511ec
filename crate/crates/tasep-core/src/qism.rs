//! Literal transfer-matrix construction on the full 2^M tensor space.
//!
//! This module exists as a validator: every determinant formula and
//! commutation relation the fast path relies on is checked here against
//! direct linear algebra on small rings. Site k (1-based) maps to bit
//! k-1 of the basis index; bit 0 means empty, bit 1 occupied; the vacuum
//! |Omega> is index 0.

use crate::combinat::{self, RingShape};
use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

/// Full 2^M matrices get expensive fast; callers must stay at or below
/// this ring size.
pub const DEFAULT_M_CAP: usize = 10;

type C64 = Complex64;

#[derive(Debug, Error)]
pub enum QismError {
    #[error("ring size M = {m} exceeds the full-space cap {cap}")]
    CapExceeded { m: usize, cap: usize },
    #[error("spectral parameter u = 0 is singular (u^-1 appears in the L-operator)")]
    ZeroParameter,
    #[error("R-matrix pole: u^2 = v^2 (u = {u}, v = {v})")]
    RMatrixPole { u: C64, v: C64 },
    #[error("site {site} out of range [1, {m}]")]
    SiteOutOfRange { site: usize, m: usize },
}

fn check_m(m: usize) -> Result<(), QismError> {
    if m == 0 || m > DEFAULT_M_CAP {
        return Err(QismError::CapExceeded { m, cap: DEFAULT_M_CAP });
    }
    Ok(())
}

/// f(v,u) = u^2 / (u^2 - v^2), the diagonal R-matrix weight.
pub fn r_f(v: C64, u: C64) -> C64 {
    u * u / (u * u - v * v)
}

/// g(v,u) = uv / (u^2 - v^2).
pub fn r_g(v: C64, u: C64) -> C64 {
    u * v / (u * u - v * v)
}

/// The crystal-base R-matrix as a scalar 4x4 array, rows/cols ordered
/// (11, 12, 21, 22).
pub fn r_matrix(u: C64, v: C64) -> Result<[[C64; 4]; 4], QismError> {
    if (u * u - v * v).norm() == 0.0 {
        return Err(QismError::RMatrixPole { u, v });
    }
    let f = r_f(v, u);
    let g = r_g(v, u);
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    Ok([
        [f, z, z, z],
        [z, g, one, z],
        [z, z, g, z],
        [z, z, z, f],
    ])
}

/// A 2x2 local operator acting on one site: entries indexed
/// [out_bit][in_bit] with bit 0 = empty.
#[derive(Clone, Copy)]
struct Local([[C64; 2]; 2]);

impl Local {
    fn zero() -> Self {
        Local([[C64::new(0.0, 0.0); 2]; 2])
    }

    /// Empty-site projector s.
    fn s() -> Self {
        let mut l = Self::zero();
        l.0[0][0] = C64::new(1.0, 0.0);
        l
    }

    /// sigma^-: creates a particle (|0> -> |1>).
    fn sigma_minus() -> Self {
        let mut l = Self::zero();
        l.0[1][0] = C64::new(1.0, 0.0);
        l
    }

    /// sigma^+: annihilates a particle (|1> -> |0>).
    fn sigma_plus() -> Self {
        let mut l = Self::zero();
        l.0[0][1] = C64::new(1.0, 0.0);
        l
    }

    fn scaled(self, z: C64) -> Self {
        let mut l = self;
        for row in &mut l.0 {
            for e in row {
                *e *= z;
            }
        }
        l
    }

    fn add(self, other: Self) -> Self {
        let mut l = self;
        for (r, or) in l.0.iter_mut().zip(other.0) {
            for (e, oe) in r.iter_mut().zip(or) {
                *e += oe;
            }
        }
        l
    }

    /// u*I - u^-1*s, the D-position entry of the L-operator.
    fn d_entry(u: C64) -> Self {
        let mut ident = Self::zero();
        ident.0[0][0] = u;
        ident.0[1][1] = u;
        ident.add(Self::s().scaled(-u.inv()))
    }
}

/// Apply a local operator at `site` to a column vector on 2^M states.
fn apply_local(op: &Local, site: usize, m: usize, vec: &[C64]) -> Vec<C64> {
    let bit = 1usize << (site - 1);
    let dim = 1usize << m;
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for (i, &x) in vec.iter().enumerate() {
        if x.norm_sqr() == 0.0 {
            continue;
        }
        let b_in = usize::from(i & bit != 0);
        for b_out in 0..2usize {
            let amp = op.0[b_out][b_in];
            if amp.norm_sqr() != 0.0 {
                let j = (i & !bit) | if b_out == 1 { bit } else { 0 };
                out[j] += amp * x;
            }
        }
    }
    out
}

/// Apply a local operator at `site` to a row vector (multiplication from
/// the right: out = row * op).
fn apply_local_row(op: &Local, site: usize, m: usize, row: &[C64]) -> Vec<C64> {
    let bit = 1usize << (site - 1);
    let dim = 1usize << m;
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for (i, &x) in row.iter().enumerate() {
        if x.norm_sqr() == 0.0 {
            continue;
        }
        let b_out = usize::from(i & bit != 0);
        for b_in in 0..2usize {
            let amp = op.0[b_out][b_in];
            if amp.norm_sqr() != 0.0 {
                let j = (i & !bit) | if b_in == 1 { bit } else { 0 };
                out[j] += amp * x;
            }
        }
    }
    out
}

/// Dense 2^M matrix of a local operator at `site`.
fn local_matrix(op: &Local, site: usize, m: usize) -> Array2<C64> {
    let dim = 1usize << m;
    let bit = 1usize << (site - 1);
    let mut out = Array2::zeros((dim, dim));
    for i in 0..dim {
        let b_in = usize::from(i & bit != 0);
        for b_out in 0..2usize {
            let amp = op.0[b_out][b_in];
            if amp.norm_sqr() != 0.0 {
                let j = (i & !bit) | if b_out == 1 { bit } else { 0 };
                out[[j, i]] += amp;
            }
        }
    }
    out
}

/// The four entries of the L-operator at site n: [[u s_n, sigma_n^-],
/// [sigma_n^+, u I - u^-1 s_n]].
fn l_entries(u: C64) -> [[Local; 2]; 2] {
    [
        [Local::s().scaled(u), Local::sigma_minus()],
        [Local::sigma_plus(), Local::d_entry(u)],
    ]
}

/// The four operator blocks of L(n|u) as dense 2^M matrices.
pub fn build_l(n: usize, u: C64, m: usize) -> Result<[Array2<C64>; 4], QismError> {
    check_m(m)?;
    if u.norm() == 0.0 {
        return Err(QismError::ZeroParameter);
    }
    if n == 0 || n > m {
        return Err(QismError::SiteOutOfRange { site: n, m });
    }
    let e = l_entries(u);
    Ok([
        local_matrix(&e[0][0], n, m),
        local_matrix(&e[0][1], n, m),
        local_matrix(&e[1][0], n, m),
        local_matrix(&e[1][1], n, m),
    ])
}

/// The monodromy matrix T(u) = L(M|u) ... L(1|u) as its four dense
/// blocks (A, B, C, D).
pub struct Monodromy {
    pub a: Array2<C64>,
    pub b: Array2<C64>,
    pub c: Array2<C64>,
    pub d: Array2<C64>,
}

pub fn build_monodromy(u: C64, m: usize) -> Result<Monodromy, QismError> {
    check_m(m)?;
    if u.norm() == 0.0 {
        return Err(QismError::ZeroParameter);
    }
    let [mut a, mut b, mut c, mut d] = build_l(1, u, m)?;
    for n in 2..=m {
        let [la, lb, lc, ld] = build_l(n, u, m)?;
        // left-multiply by L(n|u)
        let na = la.dot(&a) + lb.dot(&c);
        let nb = la.dot(&b) + lb.dot(&d);
        let nc = lc.dot(&a) + ld.dot(&c);
        let nd = lc.dot(&b) + ld.dot(&d);
        a = na;
        b = nb;
        c = nc;
        d = nd;
    }
    Ok(Monodromy { a, b, c, d })
}

/// Block selector for [`apply_monodromy_block`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    A,
    B,
    C,
    D,
}

/// T(u)_block |psi> without materializing the full monodromy: the 2x2
/// operator-valued product is tracked as four vectors.
pub fn apply_monodromy_block(
    u: C64,
    m: usize,
    block: Block,
    psi: &[C64],
) -> Result<Vec<C64>, QismError> {
    check_m(m)?;
    if u.norm() == 0.0 {
        return Err(QismError::ZeroParameter);
    }
    let e = l_entries(u);
    let zero = vec![C64::new(0.0, 0.0); psi.len()];
    // v[a][b] = (L(k)...L(1))_{ab} |psi>
    let mut v = [[psi.to_vec(), zero.clone()], [zero.clone(), psi.to_vec()]];
    v[0][1] = zero.clone();
    v[1][0] = zero;
    for k in 1..=m {
        let mut next = [
            [
                vec![C64::new(0.0, 0.0); psi.len()],
                vec![C64::new(0.0, 0.0); psi.len()],
            ],
            [
                vec![C64::new(0.0, 0.0); psi.len()],
                vec![C64::new(0.0, 0.0); psi.len()],
            ],
        ];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let term = apply_local(&e[a][c], k, m, &v[c][b]);
                    for (t, s) in next[a][b].iter_mut().zip(term) {
                        *t += s;
                    }
                }
            }
        }
        v = next;
    }
    let (a, b) = match block {
        Block::A => (0, 0),
        Block::B => (0, 1),
        Block::C => (1, 0),
        Block::D => (1, 1),
    };
    Ok(std::mem::take(&mut v[a][b]))
}

/// <psi| T(u)_block as a row vector.
pub fn apply_monodromy_block_row(
    u: C64,
    m: usize,
    block: Block,
    psi: &[C64],
) -> Result<Vec<C64>, QismError> {
    check_m(m)?;
    if u.norm() == 0.0 {
        return Err(QismError::ZeroParameter);
    }
    let e = l_entries(u);
    let zero = vec![C64::new(0.0, 0.0); psi.len()];
    // w[a][b] = <psi| (L(M)...L(k))_{ab}, built from the left
    let mut w = [[psi.to_vec(), zero.clone()], [zero.clone(), psi.to_vec()]];
    w[0][1] = zero.clone();
    w[1][0] = zero;
    for k in (1..=m).rev() {
        let mut next = [
            [
                vec![C64::new(0.0, 0.0); psi.len()],
                vec![C64::new(0.0, 0.0); psi.len()],
            ],
            [
                vec![C64::new(0.0, 0.0); psi.len()],
                vec![C64::new(0.0, 0.0); psi.len()],
            ],
        ];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let term = apply_local_row(&e[c][b], k, m, &w[a][c]);
                    for (t, s) in next[a][b].iter_mut().zip(term) {
                        *t += s;
                    }
                }
            }
        }
        w = next;
    }
    let (a, b) = match block {
        Block::A => (0, 0),
        Block::B => (0, 1),
        Block::C => (1, 0),
        Block::D => (1, 1),
    };
    Ok(std::mem::take(&mut w[a][b]))
}

/// Which side of the pairing a Bethe state lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// prod u_i^{-(M-1)} B(u_i) |Omega>
    Right,
    /// <Omega| prod u_i^{-(M-1)} C(u_i), returned as a plain vector
    Left,
}

/// Bethe state vector on the full 2^M space.
pub fn build_state(u_set: &[C64], side: Side, m: usize) -> Result<Vec<C64>, QismError> {
    check_m(m)?;
    let dim = 1usize << m;
    let mut vec = vec![C64::new(0.0, 0.0); dim];
    vec[0] = C64::new(1.0, 0.0); // |Omega>
    for &u in u_set {
        if u.norm() == 0.0 {
            return Err(QismError::ZeroParameter);
        }
        let scale = u.powi(-(m as i32 - 1));
        vec = match side {
            Side::Right => apply_monodromy_block(u, m, Block::B, &vec)?,
            Side::Left => apply_monodromy_block_row(u, m, Block::C, &vec)?,
        };
        for x in &mut vec {
            *x *= scale;
        }
    }
    Ok(vec)
}

/// Bilinear pairing <.|.> between left and right vectors, with no
/// complex conjugation.
pub fn pair(left: &[C64], right: &[C64]) -> C64 {
    left.iter().zip(right).map(|(l, r)| l * r).sum()
}

/// Apply the empty-site projector s_k to a full-space vector.
pub fn apply_projector_full(vec: &[C64], site: usize, m: usize) -> Result<Vec<C64>, QismError> {
    if site == 0 || site > m {
        return Err(QismError::SiteOutOfRange { site, m });
    }
    let bit = 1usize << (site - 1);
    let mut out = vec.to_vec();
    for (i, x) in out.iter_mut().enumerate() {
        if i & bit != 0 {
            *x = C64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// The steady state |S_N> on the full space: weight 1 on every
/// N-particle basis state.
pub fn steady_state_full(m: usize, n: usize) -> Vec<C64> {
    let dim = 1usize << m;
    (0..dim)
        .map(|i| {
            if (i as u64).count_ones() as usize == n {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// The transfer matrix tau(u) = u^{-M} (A(u) + D(u)).
pub fn transfer_matrix(u: C64, m: usize) -> Result<Array2<C64>, QismError> {
    let t = build_monodromy(u, m)?;
    Ok((t.a + t.d) * u.powi(-(m as i32)))
}

/// Max-norm residual of the RTT relation
/// R(u,v) (T(u) x T(v)) - (T(v) x T(u)) R(u,v),
/// normalized by the largest entry of either side so the figure is
/// scale-invariant in u and v.
pub fn rtt_residual(u: C64, v: C64, m: usize) -> Result<f64, QismError> {
    check_m(m)?;
    let r = r_matrix(u, v)?;
    let tu = build_monodromy(u, m)?;
    let tv = build_monodromy(v, m)?;
    let blocks = |t: &Monodromy| [[&t.a, &t.b], [&t.c, &t.d]].map(|row| row.map(|x| x.clone()));
    let bu = blocks(&tu);
    let bv = blocks(&tv);
    let dim = 1usize << m;
    // (T(u) x T(v))[(a,c)][(b,d)] = T(u)_{ab} T(v)_{cd}
    let kron = |x: &[[Array2<C64>; 2]; 2], y: &[[Array2<C64>; 2]; 2]| {
        let mut out: Vec<Vec<Array2<C64>>> = Vec::new();
        for a in 0..2 {
            for c in 0..2 {
                let mut row = Vec::new();
                for b in 0..2 {
                    for d in 0..2 {
                        row.push(x[a][b].dot(&y[c][d]));
                    }
                }
                out.push(row);
            }
        }
        out
    };
    let uv = kron(&bu, &bv);
    let vu = kron(&bv, &bu);
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let mut lhs = Array2::<C64>::zeros((dim, dim));
            let mut rhs = Array2::<C64>::zeros((dim, dim));
            for k in 0..4 {
                if r[i][k].norm_sqr() != 0.0 {
                    lhs = lhs + uv[k][j].clone() * r[i][k];
                }
                if r[k][j].norm_sqr() != 0.0 {
                    rhs = rhs + vu[i][k].clone() * r[k][j];
                }
            }
            for (a, b) in lhs.iter().zip(rhs.iter()) {
                residual = residual.max((a - b).norm());
                scale = scale.max(a.norm()).max(b.norm());
            }
        }
    }
    Ok(residual / scale.max(f64::MIN_POSITIVE))
}

/// The cyclic shift tau = Pi_12 Pi_23 ... Pi_{M-1,M} as a permutation
/// matrix on the 2^M basis.
pub fn shift_operator(m: usize) -> Result<Array2<C64>, QismError> {
    check_m(m)?;
    let dim = 1usize << m;
    // compose the transpositions right to left on basis indices
    let swap_bits = |i: usize, a: usize, b: usize| -> usize {
        let ba = (i >> a) & 1;
        let bb = (i >> b) & 1;
        if ba == bb {
            i
        } else {
            i ^ ((1 << a) | (1 << b))
        }
    };
    let mut out = Array2::zeros((dim, dim));
    for i in 0..dim {
        // rightmost factor Pi_{M-1,M} acts first
        let mut j = i;
        for k in (1..m).rev() {
            j = swap_bits(j, k - 1, k);
        }
        out[[j, i]] = C64::new(1.0, 0.0);
    }
    Ok(out)
}

/// The Hamiltonian recovered from the transfer matrix:
/// H = -1/2 tau(1)^{-1} d/du tau(u) |_{u=1}, with a central difference.
pub fn hamiltonian_from_transfer(m: usize) -> Result<Array2<C64>, QismError> {
    hamiltonian_from_transfer_with_step(m, 1e-5)
}

pub fn hamiltonian_from_transfer_with_step(m: usize, h: f64) -> Result<Array2<C64>, QismError> {
    check_m(m)?;
    let plus = transfer_matrix(C64::new(1.0 + h, 0.0), m)?;
    let minus = transfer_matrix(C64::new(1.0 - h, 0.0), m)?;
    let deriv = (plus - minus) / C64::new(2.0 * h, 0.0);
    // tau(1) is the shift permutation; its inverse is its transpose
    let tau_inv = shift_operator(m)?.t().to_owned();
    Ok(tau_inv.dot(&deriv) * C64::new(-0.5, 0.0))
}

/// The Hamiltonian built directly from its Pauli-operator definition.
pub fn hamiltonian_direct(m: usize) -> Result<Array2<C64>, QismError> {
    check_m(m)?;
    let dim = 1usize << m;
    let mut out = Array2::zeros((dim, dim));
    for i in 0..dim {
        let mut diag = 0.0;
        for j in 0..m {
            let next = (j + 1) % m;
            if i & (1 << j) != 0 && i & (1 << next) == 0 {
                let moved = (i & !(1 << j)) | (1 << next);
                out[[moved, i]] += C64::new(-1.0, 0.0);
                diag += 1.0;
            }
        }
        out[[i, i]] += C64::new(diag, 0.0);
    }
    Ok(out)
}

/// Restrict a full-space operator to the N-particle sector in rank order.
pub fn restrict_to_sector(op: &Array2<C64>, shape: RingShape) -> Array2<C64> {
    let masks: Vec<usize> = combinat::configurations(shape)
        .map(|c| c.occupied as usize)
        .collect();
    let dim = masks.len();
    let mut out = Array2::zeros((dim, dim));
    for (r, &mr) in masks.iter().enumerate() {
        for (c, &mc) in masks.iter().enumerate() {
            out[[r, c]] = op[[mr, mc]];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn vacuum(m: usize) -> Vec<C64> {
        let mut v = vec![c(0.0, 0.0); 1 << m];
        v[0] = c(1.0, 0.0);
        v
    }

    #[test]
    fn r_weights() {
        assert!((r_f(c(2.0, 0.0), c(1.0, 0.0)) - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(r_matrix(c(1.0, 0.0), c(1.0, 0.0)).is_err());
        assert!(r_matrix(c(1.0, 0.0), c(-1.0, 0.0)).is_err()); // u^2 = v^2 pole
    }

    #[test]
    fn l_operator_rejects_zero_u() {
        assert!(build_l(1, c(0.0, 0.0), 2).is_err());
    }

    #[test]
    fn vacuum_eigenvalues() {
        for m in 1..=5usize {
            let u = c(1.3, 0.4);
            let t = build_monodromy(u, m).unwrap();
            let omega = vacuum(m);
            let a_omega: Vec<C64> = t.a.dot(&ndarray::Array1::from(omega.clone())).to_vec();
            let alpha = u.powi(m as i32);
            assert!((a_omega[0] - alpha).norm() < 1e-12 * alpha.norm());
            let d_omega: Vec<C64> = t.d.dot(&ndarray::Array1::from(omega.clone())).to_vec();
            let delta = (u - u.inv()).powi(m as i32);
            assert!((d_omega[0] - delta).norm() < 1e-12 * delta.norm().max(1.0));
            // C(u)|Omega> = 0
            let c_omega = apply_monodromy_block(u, m, Block::C, &omega).unwrap();
            assert!(c_omega.iter().all(|x| x.norm() < 1e-14));
            // <Omega| B(u) = 0
            let b_row = apply_monodromy_block_row(u, m, Block::B, &omega).unwrap();
            assert!(b_row.iter().all(|x| x.norm() < 1e-14));
        }
    }

    #[test]
    fn fast_block_application_matches_dense_monodromy() {
        let m = 4;
        let u = c(0.8, -0.3);
        let t = build_monodromy(u, m).unwrap();
        let dim = 1usize << m;
        let psi: Vec<C64> = (0..dim).map(|i| c(1.0 / (i + 1) as f64, 0.1 * i as f64)).collect();
        for (block, mat) in [
            (Block::A, &t.a),
            (Block::B, &t.b),
            (Block::C, &t.c),
            (Block::D, &t.d),
        ] {
            let fast = apply_monodromy_block(u, m, block, &psi).unwrap();
            let dense = mat.dot(&ndarray::Array1::from(psi.clone()));
            for (f, d) in fast.iter().zip(dense.iter()) {
                assert!((f - d).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rtt_relation_holds() {
        for m in 1..=4usize {
            let res = rtt_residual(c(1.3, 0.0), c(0.7, 0.2), m).unwrap();
            assert!(res < 1e-12, "M={m}: residual {res}");
        }
    }

    #[test]
    fn b_operators_commute() {
        let m = 4;
        let (u, v) = (c(1.1, 0.3), c(0.6, -0.2));
        let omega = vacuum(m);
        let bu = apply_monodromy_block(u, m, Block::B, &omega).unwrap();
        let bvu = apply_monodromy_block(v, m, Block::B, &bu).unwrap();
        let bv = apply_monodromy_block(v, m, Block::B, &omega).unwrap();
        let buv = apply_monodromy_block(u, m, Block::B, &bv).unwrap();
        for (a, b) in bvu.iter().zip(&buv) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cb_commutation_relation() {
        // C(u)B(v)|Omega> = g(u,v) {A(u)D(v) - A(v)D(u)} |Omega>
        let m = 3;
        let (u, v) = (c(1.4, 0.1), c(0.9, -0.4));
        let omega = vacuum(m);
        let bv = apply_monodromy_block(v, m, Block::B, &omega).unwrap();
        let cbv = apply_monodromy_block(u, m, Block::C, &bv).unwrap();
        let g = r_g(u, v); // uv / (v^2 - u^2)
        let alpha = |w: C64| w.powi(m as i32);
        let delta = |w: C64| (w - w.inv()).powi(m as i32);
        let expected = g * (alpha(u) * delta(v) - alpha(v) * delta(u));
        assert!((cbv[0] - expected).norm() < 1e-12 * expected.norm().max(1.0));
        for (i, x) in cbv.iter().enumerate().skip(1) {
            assert!(x.norm() < 1e-12, "component {i}");
        }
    }

    #[test]
    fn state_sector_support_and_permutation_invariance() {
        let m = 5;
        let us = [c(1.2, 0.2), c(0.7, -0.5), c(1.6, 0.1)];
        let state = build_state(&us, Side::Right, m).unwrap();
        let norm: f64 = state.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(norm > 0.0);
        for (i, x) in state.iter().enumerate() {
            if (i as u32).count_ones() != 3 {
                assert!(x.norm() < 1e-14 * norm, "component {i} outside sector");
            }
        }
        let perm = [us[2], us[0], us[1]];
        let state2 = build_state(&perm, Side::Right, m).unwrap();
        for (a, b) in state.iter().zip(&state2) {
            assert!((a - b).norm() < 1e-10 * norm);
        }
    }

    #[test]
    fn empty_state_is_vacuum() {
        let state = build_state(&[], Side::Right, 3).unwrap();
        assert_eq!(state, vacuum(3));
    }

    #[test]
    fn shift_operator_properties() {
        for m in 2..=5usize {
            let tau = shift_operator(m).unwrap();
            // tau^M = I exactly
            let mut p = tau.clone();
            for _ in 1..m {
                p = tau.dot(&p);
            }
            let dim = 1usize << m;
            for i in 0..dim {
                for j in 0..dim {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(p[[i, j]], c(want, 0.0));
                }
            }
            // tau(1) from the monodromy equals the permutation product
            let t1 = transfer_matrix(c(1.0, 0.0), m).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    assert!((t1[[i, j]] - tau[[i, j]]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shift_conjugates_site_operators() {
        // tau sigma_1^- tau^-1 = sigma_2^-
        let m = 3;
        let tau = shift_operator(m).unwrap();
        let s1 = local_matrix(&Local::sigma_minus(), 1, m);
        let s2 = local_matrix(&Local::sigma_minus(), 2, m);
        let conj = tau.dot(&s1).dot(&tau.t().to_owned());
        for (a, b) in conj.iter().zip(s2.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn transfer_matrices_commute() {
        let m = 4;
        let (u, v) = (c(1.2, 0.3), c(0.8, -0.6));
        let tu = transfer_matrix(u, m).unwrap();
        let tv = transfer_matrix(v, m).unwrap();
        let comm = tu.dot(&tv) - tv.dot(&tu);
        let scale: f64 = tu.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for e in comm.iter() {
            assert!(e.norm() < 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn hamiltonian_from_transfer_matches_direct() {
        for m in 2..=5usize {
            let from_tau = hamiltonian_from_transfer(m).unwrap();
            let direct = hamiltonian_direct(m).unwrap();
            for (a, b) in from_tau.iter().zip(direct.iter()) {
                assert!((a - b).norm() < 1e-8, "M={m}");
            }
        }
    }

    #[test]
    fn derivative_step_halving_agrees() {
        // Richardson check on the finite-difference step
        let m = 3;
        let h1 = hamiltonian_from_transfer_with_step(m, 1e-5).unwrap();
        let h2 = hamiltonian_from_transfer_with_step(m, 5e-6).unwrap();
        for (a, b) in h1.iter().zip(h2.iter()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn sector_restriction_matches_oracle_generator() {
        for (m, n) in [(2, 1), (3, 1), (4, 2), (5, 2)] {
            let shape = RingShape::new(m, n).unwrap();
            let full = hamiltonian_direct(m).unwrap();
            let sector = restrict_to_sector(&full, shape);
            let gen = oracle::build_generator(shape).unwrap();
            for r in 0..shape.dim() {
                for cidx in 0..shape.dim() {
                    assert!(
                        (sector[[r, cidx]] - c(gen.matrix[[r, cidx]], 0.0)).norm() < 1e-14,
                        "M={m} N={n} ({r},{cidx})"
                    );
                }
            }
        }
    }

    #[test]
    fn hamiltonian_annihilates_steady_state() {
        for m in 2..=5usize {
            let h = hamiltonian_direct(m).unwrap();
            for n in 0..=m {
                let s = steady_state_full(m, n);
                let hs = h.dot(&ndarray::Array1::from(s));
                for x in hs.iter() {
                    assert!(x.norm() < 1e-12);
                }
            }
        }
    }
}
