use num_complex::Complex64;

use super::{AmplitudeFn, SampledSignal, WarpFn};
use crate::error::{Error, Result};
use crate::fft;
use crate::interp::CubicSpline;

/// Oversampling factor of the band-limited interpolator.
const OVERSAMPLE: usize = 8;
/// Warps may overshoot the input support by this many samples; values are then clamped.
const BOUNDARY_TOLERANCE_SAMPLES: f64 = 2.0;

/// Evaluates a sampled signal between its samples.
///
/// The signal is upsampled by zero-padding the DFT of its even extension, and a natural
/// cubic spline runs through the upsampled points. At the original sample times the
/// interpolant reproduces the input up to FFT roundoff.
#[derive(Debug, Clone)]
pub struct BandlimitedInterpolator {
    spline: CubicSpline,
    fs: f64,
    t_last: f64,
}

impl BandlimitedInterpolator {
    pub fn new(x: &SampledSignal) -> Self {
        let n = x.len();
        let fine = upsample_even_extension(x.samples(), OVERSAMPLE);
        let fine_fs = x.fs() * OVERSAMPLE as f64;
        let spline = CubicSpline::uniform(0.0, 1.0 / fine_fs, &fine);
        Self {
            spline,
            fs: x.fs(),
            t_last: (n - 1) as f64 / x.fs(),
        }
    }

    /// Value at time `t` (seconds), clamped to the sampled span.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.spline.eval(t.clamp(0.0, self.t_last))
    }

    pub fn span(&self) -> (f64, f64) {
        (0.0, self.t_last)
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }
}

fn upsample_even_extension(x: &[f64], factor: usize) -> Vec<f64> {
    let n = x.len();
    let m = 2 * n;
    let mut ext: Vec<f64> = Vec::with_capacity(m);
    ext.extend_from_slice(x);
    ext.extend(x.iter().rev());
    let spec = fft::forward_real(&ext);
    let big = m * factor;
    let mut padded = vec![Complex64::new(0.0, 0.0); big];
    let half = m / 2;
    for k in 0..half {
        padded[k] = spec[k];
    }
    for k in 1..half {
        padded[big - k] = spec[m - k];
    }
    // split the Nyquist bin between the two halves
    padded[half] = spec[half] * 0.5;
    padded[big - half] = spec[half] * 0.5;
    let up = fft::inverse_normalized(padded);
    let scale = factor as f64;
    up.into_iter()
        .take((n - 1) * factor + 1)
        .map(|c| c.re * scale)
        .collect()
}

/// `y(t_n) = a(t_n) √γ′(t_n) x(γ(t_n))` on `n_out` samples at the rate of `x`.
pub fn apply_deformation(
    x: &SampledSignal,
    a: &AmplitudeFn,
    gamma: &WarpFn,
    n_out: usize,
) -> Result<SampledSignal> {
    let interp = BandlimitedInterpolator::new(x);
    deform_with(&interp, |t| a.eval(t), gamma, n_out)
}

pub(crate) fn deform_with(
    interp: &BandlimitedInterpolator,
    gain: impl Fn(f64) -> f64,
    gamma: &WarpFn,
    n_out: usize,
) -> Result<SampledSignal> {
    let fs = interp.fs();
    let (lo, hi) = interp.span();
    let tol = BOUNDARY_TOLERANCE_SAMPLES / fs;
    let mut y = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let t = n as f64 / fs;
        let u = gamma.eval(t);
        if u < lo - tol || u > hi + tol {
            return Err(Error::WarpOutOfRange { t, mapped: u });
        }
        y.push(gain(t) * gamma.deriv(t).sqrt() * interp.eval(u));
    }
    SampledSignal::new(y, fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::forward_real;
    use std::f64::consts::PI;

    fn tone(f0: f64, n: usize, fs: f64) -> SampledSignal {
        SampledSignal::new(
            (0..n).map(|i| (2.0 * PI * f0 * i as f64 / fs).sin()).collect(),
            fs,
        )
        .unwrap()
    }

    #[test]
    fn identity_deformation_is_exact_on_grid() {
        let x = tone(313.0, 1000, 8000.0);
        let span = (0.0, x.duration());
        let a = AmplitudeFn::constant(1.0, span).unwrap();
        let g = WarpFn::identity(span);
        let y = apply_deformation(&x, &a, &g, x.len()).unwrap();
        let err = x
            .samples()
            .iter()
            .zip(y.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn constant_gain_scales() {
        let x = tone(200.0, 500, 8000.0);
        let span = (0.0, x.duration());
        let a = AmplitudeFn::constant(2.0, span).unwrap();
        let y = apply_deformation(&x, &a, &WarpFn::identity(span), x.len()).unwrap();
        for (xi, yi) in x.samples().iter().zip(y.samples()) {
            assert!((2.0 * xi - yi).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_warp_scales_tone_frequency() {
        let fs = 8000.0;
        let n = 8192;
        let f0 = 500.0;
        let x = tone(f0, 2 * n, fs);
        let s0: f64 = 0.5;
        let rate = 2f64.powf(s0);
        let span = (0.0, (n - 1) as f64 / fs);
        let g = WarpFn::from_derivative(move |_| rate, span, 1e-3).unwrap();
        let a = AmplitudeFn::constant(1.0, span).unwrap();
        let y = apply_deformation(&x, &a, &g, n).unwrap();
        let spec = forward_real(y.samples());
        let peak = (1..n / 2)
            .max_by(|&i, &j| spec[i].norm().total_cmp(&spec[j].norm()))
            .unwrap();
        let f_peak = peak as f64 * fs / n as f64;
        assert!((f_peak - rate * f0).abs() <= fs / n as f64, "{f_peak}");
    }

    #[test]
    fn escaping_warp_is_rejected() {
        let x = tone(100.0, 100, 1000.0);
        let span = (0.0, 0.2);
        let g = WarpFn::from_derivative(|_| 2.0, span, 1e-3).unwrap();
        let a = AmplitudeFn::constant(1.0, span).unwrap();
        let err = apply_deformation(&x, &a, &g, 200).unwrap_err();
        assert!(matches!(err, Error::WarpOutOfRange { .. }));
    }
}
