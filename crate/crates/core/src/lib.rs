//! Feedback-interval analysis for RVQ-quantized MIMO beamforming over
//! Gauss-Markov fading channels.

pub mod channel;
pub mod codebook;
pub mod error;
pub mod exec;
pub mod finite;
pub mod large;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod special;

pub use channel::{ChannelMatrix, FadingModel, SystemShape};
pub use codebook::{Codebook, CodebookKind};
pub use error::{Error, Result};
pub use exec::Execution;
pub use rng::RandomStream;
