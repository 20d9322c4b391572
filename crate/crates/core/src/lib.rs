//! Joint estimation of amplitude modulation, time warping and power spectrum from a
//! single realization of a deformed stationary Gaussian signal, by approximate
//! maximum likelihood on its wavelet coefficients.

pub mod covariance;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod fft;
pub mod interp;
pub mod optimize;
pub mod signal;
pub mod wavelet;

pub use covariance::{CovMatrix, LocalParams};
pub use error::{Error, Result};
pub use estimator::{EstimationConfig, EstimationState, Theta2Search};
pub use signal::{AmplitudeFn, PowerSpectrum, SampledSignal, SpectralBump, WarpFn};
pub use wavelet::{ScaleGrid, TimeScaleTransform, WaveletKind, WaveletSpec};
