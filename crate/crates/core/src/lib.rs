// `!(a > b)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backreaction;
pub mod calibrate;
pub mod cavity;
pub mod constants;
pub mod contour;
pub mod equilibrium;
pub mod error;
pub mod interp;
pub mod lifshitz;
pub mod optimize;
pub mod proximity;
pub mod quadrature;
pub mod roots;
pub mod seo;

pub use error::{Error, Result};
