//! Blind identification and equalization of single-input multiple-output
//! (SIMO) Wiener systems.
//!
//! A SIMO Wiener system feeds one source signal through P parallel branches,
//! each consisting of an FIR filter followed by a memoryless monotone
//! nonlinearity. Given only the P observed outputs, this crate estimates the
//! filters, the inverse nonlinearities and finally the source itself.
//!
//! The estimation alternates between two generalized eigenvalue problems:
//! canonical correlation analysis (CCA) over delay-embedded intermediate
//! signals updates the filters, and a regularized kernel CCA over low-rank
//! Gaussian-kernel factors updates the inverse nonlinearities. Module map:
//!
//! * [`linalg`] — symmetric-definite generalized eigensolver, rank-1
//!   Kronecker factorization, incomplete Cholesky decomposition.
//! * [`signals`] — ground-truth simulator: sources, FIR channels, the
//!   built-in nonlinearities, noise, CSV import/export.
//! * [`kernels`] — Gaussian kernel, Silverman bandwidth, centered low-rank
//!   kernel factors and kernel expansions.
//! * [`cca`] — delay embeddings and the linear-stage (multi-channel) CCA
//!   and least-squares blind channel estimators.
//! * [`alternating`] — the alternating CCA/KCCA identification loop with
//!   its initializers and cost bookkeeping.
//! * [`equalizer`] — zero-forcing / MMSE source recovery and scale-aligned
//!   evaluation metrics.

pub mod alternating;
pub mod cca;
pub mod equalizer;
mod error;
pub mod kernels;
pub mod linalg;
pub mod signals;

pub use error::{Error, Result};
