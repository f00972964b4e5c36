//! Finite-blocklength converse bounds for the AWGN channel.

// `!(x > 0.0)` is the NaN-rejecting guard used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod ht_core;
pub mod logspace;
pub mod optim;
pub mod quad;
pub mod saddlepoint;
pub mod selftest;
pub mod sim;
pub mod special_fn;

pub use error::{Error, Result};
pub use logspace::{LogValue, Prob};
