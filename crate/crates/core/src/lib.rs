//! Open-system dynamics of the Tavis-Cummings model.
//!
//! `N` spin-½ particles with inhomogeneous frequencies and couplings share a
//! single truncated cavity mode. The crate builds the Hamiltonian and the
//! noise channels (thermal GKSL, squeezed generalized amplitude damping,
//! phase-covariant eternal non-Markovian, non-Markovian amplitude damping,
//! semi-Markov dephasing), integrates the master equation with signed,
//! time-dependent rates, and evaluates
//!
//! - spin quasi-probability distributions (W, P, Q) through multipole
//!   expansions built from exact Wigner 3j symbols, and
//! - cavity photon statistics: photon number, spin excitation, g²(0),
//!   g²(τ) through quantum regression, Mandel Q.
//!
//! Data-parallel loops (propagator row blocks, heatmap points, τ sweeps) run
//! on rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise. Results never depend on the execution mode.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod channels;
pub mod error;
pub mod evolver;
pub mod hilbert;
pub mod linalg;
pub mod observables;
pub mod par;
pub mod quadrature;
pub mod quasiprob;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use par::Execution;
