#![forbid(unsafe_code)]
//! Numerical toolkit for turning power-bounded operators into isometries and
//! bounded group/semigroup representations into unitary or isometric ones,
//! by ergodic averaging with certified bounds.
//!
//! The crate is organised around five public modules:
//!
//! - [`linalg`]: dense complex matrices and the Hermitian spectral kernel
//!   everything else routes through.
//! - [`cesaro`]: running Gram averages of operator powers, divergence and
//!   lower-bound diagnostics, and similarity certificates for single
//!   operators (isometry, expansive, and two-sided unitary variants).
//! - [`folner`]: finitely generated groups and semigroups with built-in
//!   averaging set families, and the combinatorial checks (translation
//!   ratios, symmetry, doubling, covering) those families satisfy.
//! - [`reps`]: finite-dimensional representations given by generator images,
//!   Gram averages over the set families, and unitarization/isometrization
//!   certificates.
//! - [`derivations`]: Leibniz maps over a unitary representation, their
//!   boundedness scans, and extraction of inner implementations.
//!
//! [`synth`] generates seeded test fixtures (random unitaries, conjugations,
//! representations) shared by the test suites and benchmarks.

mod averaging;
pub mod cesaro;
pub mod derivations;
pub mod folner;
pub mod linalg;
pub mod reps;
pub mod synth;

pub use linalg::{Complex64, ComplexMatrix, HermitianMatrix, LinalgError, SpectralDecomposition};
