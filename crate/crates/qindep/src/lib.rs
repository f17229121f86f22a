//! Sharp identified sets for treatment-effect parameters (ATT, QTT) under
//! quantile-independence relaxations of full statistical independence.
//!
//! The crate is organized around a small set of exact primitives:
//!
//! - [`piecewise`]: nondecreasing piecewise-linear curves (cdfs, quantile
//!   functions, bound envelopes) with exact evaluation, inversion, and
//!   integration.
//! - [`observables`]: the identified objects (treatment share, conditional
//!   cdfs/quantiles) built from an analytic truncated-normal dgp or from
//!   sample data.
//! - [`propensity`]: latent propensity scores on a uniform grid over [0,1],
//!   with the constructions that attain or violate each independence notion.
//! - [`independence`]: deciders for T-set, U-set, mean, and full
//!   independence via the average-value characterization, plus
//!   non-monotonicity diagnostics.
//! - [`bounds`]: closed-form cdf/quantile/mean bound envelopes and
//!   identified sets for ATT and QTT.
//! - [`oracle`]: an independent linear-programming oracle (greedy bang-bang
//!   plus a dense simplex) that certifies the closed forms by brute force.

pub mod bounds;
pub mod error;
pub mod independence;
pub mod observables;
pub mod oracle;
pub mod piecewise;
pub mod propensity;

pub use error::{Error, Result};
pub use piecewise::MonotoneCurve;
