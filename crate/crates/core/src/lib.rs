//! Heat kernels of the Kohn Laplacian on quadric submanifolds of ℂⁿ×ℂᵐ.
//!
//! The crate evaluates the partial Fourier transform (in the central `t`
//! variables) of the fundamental solution of the diagonal `□_{LL}` heat
//! equation and the induced weighted heat kernel on ℂⁿ, and carries the
//! numerical machinery used to check those closed forms independently:
//!
//! - [`quadric`]: the vector-valued Hermitian form `φ` and the group law on ℂⁿ×ℝᵐ.
//! - [`spectral`]: a complex Jacobi eigensolver for `φ^λ` and adapted coordinates.
//! - [`hermite`]: Hermite functions, Mehler summation and the transform-side solution.
//! - [`kernel`]: the closed-form kernels and the Fourier-inversion oracle.
//! - [`boxop`]: the transformed operator as a finite-difference stencil and
//!   heat evolution by quadrature.
//! - [`quadrature`]: tensor trapezoid / Gauss–Legendre rules with Gaussian tail bounds.
//! - [`verify`]: the packaged verification checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boxop;
mod error;
pub mod hermite;
pub mod kernel;
pub mod quadrature;
pub mod quadric;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::{EpsilonVector, FormIndex, Phase, RhoHat, WeightedHeatKernel};
pub use nalgebra::DMatrix;
pub use num_complex::Complex64;
pub use quadric::{GroupElement, QuadricForm};
pub use spectral::{AdaptedPoint, SpectralData};
