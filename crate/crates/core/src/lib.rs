//! Sleep-stage classification from a forehead headband: ingestion, signal
//! processing, features, models, synthetic data and online replay.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod features;
pub mod ingest;
pub mod ml;
pub mod model;
pub mod stream;
pub mod synth;

pub use model::*;
