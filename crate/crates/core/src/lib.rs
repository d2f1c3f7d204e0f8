//! Discounted aggregate losses S_n = Σ_{i≤n} X_i Π_{j≤i} Y_j with (X_i, Y_i)
//! i.i.d. bivariate Sarmanov and X regularly varying.
//!
//! The crate provides, for that model:
//! - the catalog of marginal laws (regularly varying F with all four
//!   slowly-varying forms, and a bounded-moment discount law G),
//! - exact joint sampling and the twisted law G_θ,
//! - the product-tail constant κ and the finite/infinite-horizon ruin
//!   factors built from it,
//! - conditional (Rao-Blackwellized) Monte Carlo estimators for the
//!   product tail, the per-term tails H̄_i, and the ruin probabilities
//!   Ψ(x, n) and Ψ(x),
//! - numerical diagnostics for the DZ1–DZ4 sufficient conditions and
//!   the C_i summability constants.
//!
//! The `experiment` module and the `ruinsim` binary run declarative TOML
//! experiments and write CSV/JSON results.

pub mod asymptotics;
pub mod conditions;
pub mod error;
pub mod experiment;
pub mod gof;
pub mod marginals;
pub mod quad;
pub mod rng;
pub mod sarmanov;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use marginals::{DiscountLaw, LongTailedLaw, RegularlyVaryingLaw, SlowlyVaryingSpec};
pub use sarmanov::{KernelSpec, SarmanovModel, TwistedLaw, ValidationReport};
pub use simulate::{MCEstimate, McMethod, PathState};
