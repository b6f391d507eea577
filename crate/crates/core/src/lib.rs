//! Numerical laboratory for the scaled Enflo type inequality on `Z_m^n`.
//!
//! - [`torus`], [`table`], [`norm`]: grid geometry, dense function tables,
//!   and the `ℓ_q^d` target spaces.
//! - [`operators`]: the even-box and parity-shell averaging operators `Δ_B`
//!   and `E_j`, with a separable sliding-sum implementation.
//! - [`inequalities`]: exact evaluators for both sides of the Rademacher,
//!   Enflo, scaled Enflo, Pisier, approximation and smoothing inequalities.
//! - [`identity`]: the `R_{i,l}` operators, the `E_j` decomposition identity,
//!   and least-squares recovery of its coefficients.
//! - [`extremal`]: ratio maximization over tables and `(n, m)` scans.

pub mod error;
pub mod extremal;
pub mod identity;
pub mod inequalities;
pub mod norm;
pub mod operators;
pub mod rng;
pub mod table;
pub mod torus;

pub use error::{LabError, Result};
pub use inequalities::RatioReport;
pub use norm::{Exponent, NormSpec};
pub use operators::{SmoothingRadius, SupportSet};
pub use table::FunctionTable;
pub use torus::{AxisSet, SignVector, TorusGeometry, TorusPoint};
