//! Physical-layer authentication of 5G NR uplink devices from SRS channel
//! estimates: trace codec, synthetic trace generation, feature extraction,
//! Pearson and SE-ResNet1D authenticators, and split-aware evaluation.

pub mod numerology;
pub mod trace_format;
pub mod features;
pub mod synth;
pub mod nn;
pub mod auth;
pub mod eval;
pub mod pipeline;

mod fsutil;
pub use fsutil::write_atomic;
