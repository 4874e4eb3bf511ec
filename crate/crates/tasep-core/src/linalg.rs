//! Small complex dense kernels shared by the determinant formulas and the
//! Bethe Newton polish: LU with partial pivoting, determinants kept in
//! log-magnitude/phase form, and a direct solve.

use ndarray::Array2;
use num_complex::Complex64;

/// A nonzero complex number stored as (log of magnitude, phase).
///
/// Products of many factors whose individual magnitudes overflow or
/// underflow `f64` stay representable; the value is materialized only
/// once at the end.
#[derive(Debug, Clone, Copy)]
pub struct LogComplex {
    pub log_mag: f64,
    pub phase: f64,
}

impl LogComplex {
    pub const ONE: LogComplex = LogComplex {
        log_mag: 0.0,
        phase: 0.0,
    };

    /// Exact zero, represented as log-magnitude -inf.
    pub const ZERO: LogComplex = LogComplex {
        log_mag: f64::NEG_INFINITY,
        phase: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    pub fn from_c64(z: Complex64) -> Self {
        Self {
            log_mag: z.norm().ln(),
            phase: z.arg(),
        }
    }

    pub fn mul(self, other: LogComplex) -> Self {
        Self {
            log_mag: self.log_mag + other.log_mag,
            phase: self.phase + other.phase,
        }
    }

    pub fn mul_c64(self, z: Complex64) -> Self {
        self.mul(Self::from_c64(z))
    }

    pub fn div_c64(self, z: Complex64) -> Self {
        Self {
            log_mag: self.log_mag - z.norm().ln(),
            phase: self.phase - z.arg(),
        }
    }

    pub fn powi(self, k: i32) -> Self {
        Self {
            log_mag: self.log_mag * k as f64,
            phase: self.phase * k as f64,
        }
    }

    pub fn value(self) -> Complex64 {
        Complex64::from_polar(self.log_mag.exp(), self.phase)
    }
}

/// Result of an LU factorization: determinant in log form plus a cheap
/// conditioning estimate (ratio of largest to smallest pivot magnitude).
pub struct LuDet {
    pub det: LogComplex,
    pub pivot_ratio: f64,
}

/// Determinant of a complex matrix via LU with partial pivoting.
pub fn lu_det(a: &Array2<Complex64>) -> LuDet {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return LuDet {
            det: LogComplex::ONE,
            pivot_ratio: 1.0,
        };
    }
    let mut m = a.clone();
    let mut det = LogComplex::ONE;
    let mut sign = 1.0f64;
    let mut max_piv = 0.0f64;
    let mut min_piv = f64::INFINITY;
    for k in 0..n {
        let mut p = k;
        let mut best = m[[k, k]].norm();
        for i in k + 1..n {
            let v = m[[i, k]].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return LuDet {
                det: LogComplex::ZERO,
                pivot_ratio: f64::INFINITY,
            };
        }
        if p != k {
            for j in 0..n {
                let tmp = m[[k, j]];
                m[[k, j]] = m[[p, j]];
                m[[p, j]] = tmp;
            }
            sign = -sign;
        }
        let piv = m[[k, k]];
        max_piv = max_piv.max(best);
        min_piv = min_piv.min(best);
        det = det.mul_c64(piv);
        for i in k + 1..n {
            let f = m[[i, k]] / piv;
            m[[i, k]] = f;
            for j in k + 1..n {
                let sub = f * m[[k, j]];
                m[[i, j]] -= sub;
            }
        }
    }
    if sign < 0.0 {
        det.phase += std::f64::consts::PI;
    }
    LuDet {
        det,
        pivot_ratio: max_piv / min_piv,
    }
}

/// Solve `a x = b` in place via LU with partial pivoting. Returns `None`
/// when a pivot vanishes.
pub fn lu_solve(a: &Array2<Complex64>, b: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let mut p = k;
        let mut best = m[[k, k]].norm();
        for i in k + 1..n {
            let v = m[[i, k]].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = m[[k, j]];
                m[[k, j]] = m[[p, j]];
                m[[p, j]] = tmp;
            }
            x.swap(k, p);
        }
        let piv = m[[k, k]];
        for i in k + 1..n {
            let f = m[[i, k]] / piv;
            for j in k + 1..n {
                let sub = f * m[[k, j]];
                m[[i, j]] -= sub;
            }
            let sub = f * x[k];
            x[i] -= sub;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[[i, j]] * x[j];
        }
        x[i] = s / m[[i, i]];
    }
    Some(x)
}
