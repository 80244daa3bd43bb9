//! Exact-diagonalization and space-time contour toolkit for electron-phonon
//! lattice models on finite hypercubic lattices.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: finite lattices `Λ ⊂ Z^d`, the periodic-time space-time
//!   lattice, elementary cubes and their connectivity.
//! - [`fock`]: truncated electron-phonon Fock bases, fermionic sign
//!   bookkeeping and sparse operator assembly.
//! - [`linalg`]: dense Hermitian eigensolves (LAPACK-backed) and matrix
//!   exponentials used everywhere else.
//! - [`model`]: Hubbard / Holstein-Hubbard Hamiltonians, the Lang-Firsov
//!   transformation and the phase-dressed effective Hamiltonian.
//! - [`classical`]: the classical phase diagram, ground-state configurations,
//!   the Peierls gap and numeric assumption checkers.
//! - [`boson_corr`]: Gaussian vacuum/thermal correlation functions of
//!   products of `e^{iφ(f)}` with a truncated-Fock brute-force oracle.
//! - [`thermo`]: sector-blocked thermal states and observables.
//! - [`contour`]: the space-time contour representation of the partition
//!   function and exact numeric contour activities.
//! - [`bounds`]: numeric audits of the activity bounds and their derivative
//!   estimates.

pub mod boson_corr;
pub mod bounds;
pub mod classical;
pub mod contour;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod thermo;

pub use error::CoreError;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
