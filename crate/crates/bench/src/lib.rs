//! Shared inputs for the benchmarks: the reference two-bump spectrum at 8 kHz.

use warpam_core::signal::{gaussian_stationary_synth, synth_spectrum, SpectralBump};
use warpam_core::{PowerSpectrum, SampledSignal, ScaleGrid, WaveletSpec};

pub const FS: f64 = 8000.0;

pub struct Fixture {
    pub spec: WaveletSpec,
    pub grid: ScaleGrid,
    pub spectrum: PowerSpectrum,
    pub signal: SampledSignal,
}

/// `n` samples of the stationary reference signal on the default 106-scale grid.
pub fn fixture(n: usize) -> Fixture {
    let spec = WaveletSpec::sharp(FS / 2.0).expect("valid wavelet");
    let grid = ScaleGrid::covering(2.0, spec.omega0(), 50.0, 0.45 * FS, 106, 7).expect("valid grid");
    let spectrum = synth_spectrum(&[SpectralBump::new(600.0, 200.0), SpectralBump::new(1200.0, 400.0)], FS)
        .expect("valid spectrum");
    let signal = gaussian_stationary_synth(&spectrum, n, FS, 1).expect("synthesis");
    Fixture { spec, grid, spectrum, signal }
}
