//! Numerical laboratory for the level statistics of the discrete Anderson
//! model on periodic cubes.
//!
//! * [`model`]: lattice cubes, i.i.d. disorder, Hamiltonian assembly.
//! * [`eigen`]: dense symmetric eigensolver, banded fast path, Sturm counts
//!   and closed-form Dirichlet oracles.
//! * [`stats`]: density of states, rescaled level processes and the Monte
//!   Carlo estimators (Wegner, Minami, decorrelation, Poisson, independence).
//! * [`localization`] and [`perturbation`]: localization centres, box
//!   matching and first/second order eigenvalue perturbation identities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod localization;
pub mod model;
pub mod perturbation;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
