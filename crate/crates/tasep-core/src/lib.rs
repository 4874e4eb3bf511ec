//! Exact-solution engine for the totally asymmetric simple exclusion
//! process (TASEP) on a periodic ring.
//!
//! The crate computes the time-dependent stationary two-point correlation
//! function of the empty-site projector along three independent routes:
//!
//! * [`correlator`] — the Bethe-ansatz spectral sum built from determinant
//!   formulas ([`bethe`] enumerates the rapidity sets, [`detforms`]
//!   evaluates the determinants),
//! * [`oracle`] — brute-force evolution under the sector Markov generator,
//! * [`montecarlo`] — event-driven continuous-time simulation.
//!
//! [`qism`] realizes the underlying transfer-matrix construction on the
//! full `2^M` space for small rings; it exists to cross-validate every
//! algebraic identity the fast path relies on.

pub mod bethe;
pub mod combinat;
pub mod correlator;
pub mod detforms;
mod linalg;
pub mod montecarlo;
pub mod oracle;
pub mod qism;

pub use combinat::RingShape;
pub use num_complex::Complex64;
