//! Dense simulation of bosonic-qudit processors: truncated Fock registers,
//! cavity-native gates, closed and open-system dynamics, and the three
//! application workloads (lattice gauge dynamics, qudit QAOA coloring with
//! noise-directed remapping, and oscillator reservoir computing) together
//! with numerical gate synthesis.
//!
//! Basis ordering everywhere is row-major mixed radix with site 0 the most
//! significant digit.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod gates;
pub mod hilbert;
pub mod linalg;
pub mod qaoa;
pub mod reservoir;
pub mod rng;
pub mod sqed;
pub mod synth;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;

/// Largest Hilbert-space dimension for which dense D×D matrices
/// (eigendecompositions, density matrices) are built.
pub const DENSE_LIMIT: usize = 4096;

/// Largest state-vector length handled by the term-wise kernels.
pub const STATE_LIMIT: usize = 1 << 22;
