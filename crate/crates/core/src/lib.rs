//! Learnable denoising sparse wavelet networks.
//!
//! The crate is split into the fixed wavelet transform ([`wavelet`]), the
//! learnable cascade ([`network`]), its hand-written gradients and optimizer
//! ([`training`]), downstream heads for anomaly detection and classification
//! ([`analysis`]), and data handling ([`pipeline`]).

pub mod analysis;
pub mod error;
pub mod network;
pub mod pipeline;
pub mod training;
pub mod wavelet;

pub use error::{Error, Result};
pub use network::{DespawnModel, ForwardRecord, LossBreakdown, SharingMode, ThresholdPair};
