//! Exact time propagation of driven Hubbard models.
//!
//! The many-body Hamiltonian of a rectangular Hubbard lattice with a
//! Peierls-phase drive has the structure
//!
//! ```text
//! H(t) = H_diag + c(t) H_symm + i s(t) H_anti,    f(t) = c(t) + i s(t),
//! ```
//!
//! with three constant real matrices. The integrators in this crate
//! (commutator-free Magnus schemes, classical fourth-order Magnus, the
//! Magnus–Strang splitting and a Dormand–Prince baseline) exploit this
//! structure: every exponent they need is a short linear combination of the
//! three stored matrices or of their commutators, applied matrix-free, and
//! every matrix exponential is evaluated with an adaptive Lanczos method.
//!
//! Module map:
//!
//! * [`basis`] – bit-mask occupation basis and fermionic hopping signs.
//! * [`pulse`], [`model`] – the drive, the three matrices, observables.
//! * [`sparse`] – CSR storage, complex vector kernels, the matvec tally.
//! * [`krylov`] – Lanczos exponential with an a-posteriori error bound.
//! * [`generator`] – matrix-free skew-Hermitian exponents and the
//!   truncated Fréchet-derivative series used by the defect estimators.
//! * [`cfm`], [`magnus_strang`], [`rk`] – one-step methods.
//! * [`control`] – adaptive and equidistant propagation loops.
//! * [`experiments`], [`io`] – the experiment harness and file formats.

pub mod basis;
pub mod cfm;
pub mod control;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod generator;
pub mod io;
pub mod krylov;
pub mod magnus_strang;
pub mod method;
pub mod model;
pub mod pulse;
pub mod rk;
pub mod sparse;

pub use basis::{Basis, SpinMask};
pub use error::{Error, Result};
pub use method::Method;
pub use model::{Geometry, HubbardModel};
pub use pulse::{Drive, PulseParams, PulseValue};

/// Complex scalar used for all state vectors.
pub type C64 = num_complex::Complex64;

/// Krylov tolerance used by the propagation experiments.
pub const DEFAULT_KRYLOV_TOL: f64 = 1e-12;
