//! Link-level simulator for vectored multi-pair wireline systems (G.fast and
//! VDSL). Generates stochastic binder channels, applies upstream crosstalk
//! cancelers and downstream precoders, and turns the resulting per-tone SNRs
//! into bit loading, per-user rates and rate-reach tables.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod canceler;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod precoder;
pub mod profile;
pub mod qam;
pub mod rate;

pub use error::{Result, SimError};
