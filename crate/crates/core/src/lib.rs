//! Semiclassical (Gaussian-fluctuation) thermodynamics from discrete-time
//! coherent-state path integrals.
//!
//! The crate is organised around four layers:
//!
//! * [`models`]: the physical models (single-site and lattice Bose-Hubbard,
//!   uniaxial spin), their coherent-state families and the closed-form
//!   reference determinants.
//! * [`oracle`]: exact diagonalization; every semiclassical number is
//!   checked against it.
//! * [`semiclassics`]: saddle search, finite-difference expansion of the
//!   discrete Lagrangian and the fluctuation kernels.
//! * [`spectral`]: Matsubara sums, the contour form of the finite-step
//!   correction and the sum-rule diagnostic.
//!
//! [`correction`] wires these together into model-level free-energy
//! corrections and parameter slopes, and [`validate`] holds the invariant
//! checks run by the command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correction;
pub mod error;
pub mod models;
pub mod numdiff;
pub mod oracle;
pub mod semiclassics;
pub mod spectral;
pub mod validate;

pub use error::{Error, Result};
pub use models::{CoherentPoint, HilbertConfig, ModelSpec};
pub use semiclassics::{Discretization, HessianBlocks};
pub use spectral::CorrectionReport;

pub type C64 = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;
