// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ct_io;
pub mod detect;
pub mod error;
pub mod eval;
pub mod fpn;
pub mod json;
pub mod pipeline;
pub mod preprocess;
pub mod selftest;
pub mod swin;
pub mod synthetic;
pub mod tensor;
pub mod weights;

pub use error::{Error, Result};
pub use tensor::Tensor;
