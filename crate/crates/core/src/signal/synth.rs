use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AmplitudeFn, PowerSpectrum, SampledSignal, WarpFn};
use crate::error::{invalid, Result};
use crate::fft;

/// Quadrature resolution for the normalizations of the synthetic deformations.
const NORMALIZATION_POINTS: usize = 1 << 16;

/// Raised-cosine spectral bump `1 + cos(2π(ν − center)/width)` on `|ν − center| < width/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBump {
    pub center: f64,
    pub width: f64,
    #[serde(default = "unit_gain")]
    pub gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

impl SpectralBump {
    pub fn new(center: f64, width: f64) -> Self {
        Self {
            center,
            width,
            gain: 1.0,
        }
    }

    pub fn eval(&self, nu: f64) -> f64 {
        let d = nu - self.center;
        if d.abs() < self.width / 2.0 {
            self.gain * (1.0 + (2.0 * PI * d / self.width).cos())
        } else {
            0.0
        }
    }
}

/// Sum of raised-cosine bumps, sampled finely on `[0, fs/2]`.
pub fn synth_spectrum(bumps: &[SpectralBump], fs: f64) -> Result<PowerSpectrum> {
    let nyquist = fs / 2.0;
    for b in bumps {
        if !(b.width > 0.0) {
            return Err(invalid("width", format!("bump width must be positive, got {}", b.width)));
        }
        if !(b.gain >= 0.0) {
            return Err(invalid("gain", "bump gain must be nonnegative"));
        }
        if b.center - b.width / 2.0 <= 0.0 || b.center + b.width / 2.0 >= nyquist {
            return Err(invalid(
                "center",
                format!(
                    "bump [{}, {}] must lie inside (0, {nyquist})",
                    b.center - b.width / 2.0,
                    b.center + b.width / 2.0
                ),
            ));
        }
    }
    const GRID: usize = 8192;
    let mut freqs: Vec<f64> = (0..=GRID).map(|i| nyquist * i as f64 / GRID as f64).collect();
    for b in bumps {
        freqs.extend([b.center - b.width / 2.0, b.center, b.center + b.width / 2.0]);
    }
    freqs.sort_by(|a, b| a.total_cmp(b));
    freqs.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * nyquist);
    let values = freqs
        .iter()
        .map(|&nu| bumps.iter().map(|b| b.eval(nu)).sum::<f64>())
        .collect();
    PowerSpectrum::new(freqs, values, nyquist)
}

/// `a(t) = a0 (1 + a1 cos(2πt/T1))` with `a0` chosen so that the mean of `a²` on `[0, tF]` is 1.
pub fn synth_amplitude(a1: f64, period: f64, t_final: f64) -> Result<AmplitudeFn> {
    if !(0.0..1.0).contains(&a1) {
        return Err(invalid("a1", format!("must satisfy 0 <= a1 < 1, got {a1}")));
    }
    if !(period > 0.0) || !(t_final > 0.0) {
        return Err(invalid("period", "T1 and tF must be positive"));
    }
    let w = 2.0 * PI / period;
    let shape = move |t: f64| 1.0 + a1 * (w * t).cos();
    let mean_sq = mean_on_interval(|t| shape(t).powi(2), t_final);
    let a0 = 1.0 / mean_sq.sqrt();
    AmplitudeFn::new(
        move |t| a0 * (1.0 + a1 * (w * t).cos()),
        move |t| -a0 * a1 * w * (w * t).sin(),
        (0.0, t_final),
    )
}

/// `log_q γ′(t) = Γ + cos(2πt/T2) e^{−t/T3}`, `Γ` chosen so that the mean of `γ′` on `[0, tF]` is 1.
pub fn synth_warp(t2: f64, t3: f64, t_final: f64, q: f64, max_step: f64) -> Result<WarpFn> {
    if !(t2 > 0.0) || !(t3 > 0.0) {
        return Err(invalid("T2/T3", "must be positive"));
    }
    let w = 2.0 * PI / t2;
    warp_from_log_derivative(move |t| (w * t).cos() * (-t / t3).exp(), t_final, q, max_step)
}

/// Builds `γ` from `log_q γ′ = Γ + g(t)` with the unit-mean normalization of `γ′`.
pub fn warp_from_log_derivative(
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    t_final: f64,
    q: f64,
    max_step: f64,
) -> Result<WarpFn> {
    if !(q > 1.0) {
        return Err(invalid("q", "scale base must exceed 1"));
    }
    if !(t_final > 0.0) {
        return Err(invalid("t_final", "must be positive"));
    }
    let ln_q = q.ln();
    // mean(q^{Γ+g}) = 1 is solved by bisection on Γ.
    let mean_at = |gamma: f64| mean_on_interval(|t| ((gamma + g(t)) * ln_q).exp(), t_final);
    let (mut lo, mut hi) = (-64.0, 64.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let big_gamma = 0.5 * (lo + hi);
    WarpFn::from_derivative(
        move |t| ((big_gamma + g(t)) * ln_q).exp(),
        (0.0, t_final),
        max_step,
    )
}

fn mean_on_interval(f: impl Fn(f64) -> f64, t_final: f64) -> f64 {
    let n = NORMALIZATION_POINTS;
    let h = t_final / n as f64;
    // Simpson's rule, n even.
    let mut acc = f(0.0) + f(t_final);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0 / t_final
}

/// Doppler time-warp derivative for a source passing at distance `d` with speed `v`,
/// time measured from the closest approach.
pub fn doppler_warp_derivative(c: f64, v: f64, d: f64, t: f64) -> f64 {
    let c2 = c * c;
    let v2 = v * v;
    c2 / (c2 - v2) * (1.0 - v2 * t / (d * d * (c2 - v2) + (c * v * t).powi(2)).sqrt())
}

/// Doppler warp on `[0, t_final]` with the closest approach at `t_center`; `γ(0) = 0`.
pub fn doppler_warp(
    c: f64,
    v: f64,
    d: f64,
    t_center: f64,
    t_final: f64,
    max_step: f64,
) -> Result<WarpFn> {
    if !(c > 0.0) || !(v > 0.0) {
        return Err(invalid("speed", "c and V must be positive"));
    }
    if v >= c {
        return Err(invalid("V", format!("source speed {v} must be below the sound speed {c}")));
    }
    if !(d > 0.0) {
        return Err(invalid("d", "distance must be positive"));
    }
    WarpFn::from_derivative(
        move |t| doppler_warp_derivative(c, v, d, t - t_center),
        (0.0, t_final),
        max_step,
    )
}

/// Real zero-mean Gaussian realization whose one-sided PSD is `spectrum`.
///
/// Independent complex Gaussian DFT coefficients with `E|X_k|² = N F_s S(ν_k) / 2` are
/// Hermitian-symmetrized and inverse transformed.
pub fn gaussian_stationary_synth(
    spectrum: &PowerSpectrum,
    n: usize,
    fs: f64,
    seed: u64,
) -> Result<SampledSignal> {
    if n < 2 {
        return Err(crate::Error::SignalTooShort { len: n, min: 2 });
    }
    if spectrum.is_zero() {
        return SampledSignal::new(vec![0.0; n], fs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    let scale = n as f64 * fs / 2.0;
    for k in 1..=half {
        let nu = k as f64 * fs / n as f64;
        let var = scale * spectrum.eval(nu);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if 2 * k == n {
            // Nyquist bin is real.
            coeffs[k] = Complex64::new(var.sqrt() * re, 0.0);
        } else {
            let sd = (var / 2.0).sqrt();
            coeffs[k] = Complex64::new(sd * re, sd * im);
            coeffs[n - k] = coeffs[k].conj();
        }
    }
    let x = fft::inverse_normalized(coeffs);
    SampledSignal::new(x.into_iter().map(|c| c.re).collect(), fs)
}
