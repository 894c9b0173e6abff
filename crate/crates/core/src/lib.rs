//! Heat kernels, Ornstein–Uhlenbeck and Mehler kernels, and Green functions
//! on step-two Carnot groups.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod group;
pub mod kernel;
pub mod matrix_functions;
pub mod ou_mehler;
pub mod quadrature;
pub mod special;
pub mod verification;

pub use error::{Error, Result};
pub use group::{GroupPoint, GroupSpec, HorizontalOperator};
pub use matrix_functions::{DecayEstimate, SpectralData};
