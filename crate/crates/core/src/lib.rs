//! Finite-difference pricing of European and up-and-out calls under the
//! Heston-Hull-White model.
//!
//! The three-dimensional pricing PDE is semidiscretized on nonuniform
//! tensor-product grids ([`grid`], [`discretize`]) and integrated in time with
//! Douglas, Craig-Sneyd, modified Craig-Sneyd and Hundsdorfer-Verwer ADI
//! splittings ([`adi`]). [`analytic`] provides the semi-closed-form call price
//! used as the spatial reference, and [`harness`] drives the convergence
//! experiments behind the `hhw-bench` binary.

// Index loops mirror the stencil algebra; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adi;
pub mod analytic;
pub mod discretize;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
pub use model::{case_params, theta_default, CaseId, HhwParams, OptionKind, OptionSpec, SchemeId};
