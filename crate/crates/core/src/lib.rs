//! Valuation of insurance liability cash flows under model ambiguity.
//!
//! The value of a run-off liability is the capital requirement minus the value
//! of the owners' option to default, where default is an optimal stopping
//! decision taken against a set of priors. The crate solves the resulting
//! backward recursion exactly on finite lattices and with closed-form inner
//! layers on Monte Carlo samples for a two-period Gaussian claims model.

// `!(x > 0.0)` style guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod gaussian;
pub mod numerics;
pub mod oracle;
pub mod priors;
pub mod riskmeasures;
pub mod scenario;
pub mod valuation;

pub use error::{Error, Result};
