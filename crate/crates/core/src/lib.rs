//! k-contraction analysis and k-contractive feedback design.
//!
//! A system is k-contractive when its flow shrinks k-dimensional volumes
//! exponentially. For linear systems this reduces to a sign condition on the
//! sum of the k largest eigenvalue real parts; for nonlinear systems it is
//! certified by a pair of constant metrics with prescribed inertia that
//! satisfy generalized Lyapunov inequalities on a box.
//!
//! The crate is organized bottom-up:
//!
//! - [`numkernel`]: eigenvalues, symmetric inertia, Lyapunov solves.
//! - [`compound`]: multiplicative and additive matrix compounds.
//! - [`lin_contraction`]: eigenvalue tests and inertia certificates for LTI systems.
//! - [`lin_synthesis`]: Kalman staircase, stabilizability and gain synthesis.
//! - [`nl_verify`]: Jacobian envelopes and nonlinear certificate checks.
//! - [`sim`]: trajectories, compound dynamics, volumes, equilibria.
//! - [`expr`], [`model`], [`certificate`]: model and certificate ingestion.
//! - [`reproduce`], [`cli`]: example bundles and the command-line driver.

pub mod certificate;
pub mod cli;
pub mod compound;
pub mod error;
pub mod expr;
pub mod lin_contraction;
pub mod lin_synthesis;
pub mod model;
pub mod nl_verify;
pub mod numkernel;
pub mod report;
pub mod reproduce;
pub mod sim;

pub use error::{Error, Result};
pub use numkernel::{DenseMatrix, Inertia, Spectrum};
