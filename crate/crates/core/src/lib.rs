//! Smoothness-penalized non-negative CP tensor factorization with missing
//! entries.
//!
//! The crate is `no_std` and only needs `alloc`. It provides:
//!
//! - [`tensor`]: dense N-way storage and the multilinear kernels (outer
//!   products, Hadamard, Frobenius, Kolda–Bader unfolding, Khatri–Rao, MTTKRP).
//! - [`penalties`]: the smoothness seminorms (total variation and natural
//!   cubic spline roughness) and the factor norms.
//! - [`model`]: the unnormalized `A^(1:N)` and normalized `(λ, Ã^(1:N))`
//!   parameterizations, the weighted loss, both penalty forms, the objectives
//!   and the analytic gradient of the unnormalized objective.
//! - [`solvers`]: HALS on the normalized problem and projected limited-memory
//!   quasi-Newton on the unnormalized one.
//! - [`diagnostics`]: the coercivity check on the mask, NMSE, SIM, PSNR,
//!   SSIM and k-fold cross-validation of the penalty weight.
//!
//! IO, file formats and the command line live in the `smoothntf` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assignment;
pub mod diagnostics;
mod error;
pub mod linalg;
pub(crate) mod math;
pub mod model;
pub mod penalties;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{FactorModel, NormalizedFactorModel};
pub use penalties::{NormSpec, PenaltyConfig, SeminormSpec};
pub use tensor::{DenseTensor, Matrix, Shape, WeightMask};
