//! Symbol error probability of low-resolution ADC M-PAM receivers over
//! Nakagami-m fading: exact closed forms, numerical cross-checks, joint
//! constellation/quantizer design, Monte Carlo and high-SNR asymptotics.

pub mod aqnm;
pub mod asymptotics;
pub mod detector;
pub mod error;
pub mod montecarlo;
pub mod optimizer;
pub mod quadrature;
pub mod sep;
pub mod specfun;
pub mod system;

pub use error::{Error, Result};
pub use sep::{SepMethod, SepResult};
pub use system::{ChannelModel, Constellation, GeometricConstellation, Quantizer, UniformQuantizer};
