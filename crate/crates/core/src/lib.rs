//! Line current differential relay protection with a learned FDIA detector,
//! the masked iterative FGSM attack against it, and adversarial training.

pub mod attack;
pub mod autodiff;
pub mod dataset;
pub mod defense;
pub mod detector;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod phasor;
pub mod relay;
pub mod waveform;

pub use error::{Error, Result};
pub use exec::Execution;
