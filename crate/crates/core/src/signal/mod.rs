//! Stationary signal model: power spectra, deformation functions and sampled signals.

mod deform;
mod synth;

pub(crate) use deform::deform_with;
pub use deform::{apply_deformation, BandlimitedInterpolator};
pub use synth::{
    doppler_warp, doppler_warp_derivative, gaussian_stationary_synth, synth_amplitude,
    synth_spectrum, synth_warp, warp_from_log_derivative, SpectralBump,
};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interp::{linear_interp, HermiteTable};

/// Number of points used to check bounds of deformation functions.
const BOUND_SAMPLES: usize = 4096;

/// Nonnegative spectral density on `[0, nyquist]`, linear between samples.
///
/// Values are one-sided: the variance of the process is `∫_0^{nyquist} S(ν) dν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    freqs: Vec<f64>,
    values: Vec<f64>,
    nyquist: f64,
}

impl PowerSpectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>, nyquist: f64) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: freqs.len(),
                got: values.len(),
            });
        }
        if !(nyquist > 0.0 && nyquist.is_finite()) {
            return Err(invalid("nyquist", "must be positive and finite"));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("freqs", "must be strictly increasing"));
        }
        if let (Some(&lo), Some(&hi)) = (freqs.first(), freqs.last()) {
            if lo < 0.0 || hi > nyquist * (1.0 + 1e-12) {
                return Err(invalid("freqs", "must lie inside [0, nyquist]"));
            }
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("values", "densities must be finite and nonnegative"));
        }
        Ok(Self {
            freqs,
            values,
            nyquist,
        })
    }

    pub fn zero(nyquist: f64) -> Self {
        Self {
            freqs: Vec::new(),
            values: Vec::new(),
            nyquist,
        }
    }

    /// Constant density `level` on `[lo, hi]`, zero elsewhere.
    pub fn flat(level: f64, lo: f64, hi: f64, nyquist: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(invalid("flat band", "lo must be below hi"));
        }
        Self::new(vec![lo, hi], vec![level, level], nyquist)
    }

    /// Samples `f` on a uniform grid of `n` points over `[0, nyquist]`.
    pub fn from_fn(f: impl Fn(f64) -> f64, nyquist: f64, n: usize) -> Result<Self> {
        let n = n.max(2);
        let freqs: Vec<f64> = (0..n)
            .map(|i| nyquist * i as f64 / (n - 1) as f64)
            .collect();
        let values = freqs.iter().map(|&v| f(v).max(0.0)).collect();
        Self::new(freqs, values, nyquist)
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nyquist(&self) -> f64 {
        self.nyquist
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Density at `nu` Hz. Zero at and below DC, above Nyquist and outside the samples.
    #[inline]
    pub fn eval(&self, nu: f64) -> f64 {
        if nu <= 0.0 || nu > self.nyquist {
            return 0.0;
        }
        linear_interp(&self.freqs, &self.values, nu).unwrap_or(0.0)
    }

    /// Smallest interval containing every strictly positive sample.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|&v| v > 0.0)?;
        let last = self.values.iter().rposition(|&v| v > 0.0)?;
        let lo = if first > 0 { self.freqs[first - 1] } else { self.freqs[first] };
        let hi = if last + 1 < self.freqs.len() {
            self.freqs[last + 1]
        } else {
            self.freqs[last]
        };
        Some((lo.max(0.0), hi.min(self.nyquist)))
    }

    /// `∫ S(ν) dν`, i.e. the variance of the process.
    pub fn variance(&self) -> f64 {
        self.moment_integral(|_| 1.0)
    }

    /// `∫ w(ν) S(ν) dν` over the sampled support, trapezoid on the sample grid
    /// refined eight times so that smooth weights are integrated accurately.
    pub fn moment_integral(&self, w: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.freqs.len().saturating_sub(1) {
            let (f0, f1) = (self.freqs[i], self.freqs[i + 1]);
            let (v0, v1) = (self.values[i], self.values[i + 1]);
            if v0 == 0.0 && v1 == 0.0 {
                continue;
            }
            const SUB: usize = 8;
            let h = (f1 - f0) / SUB as f64;
            for j in 0..SUB {
                let a = f0 + j as f64 * h;
                let b = a + h;
                let sa = v0 + (v1 - v0) * (a - f0) / (f1 - f0);
                let sb = v0 + (v1 - v0) * (b - f0) / (f1 - f0);
                let wa = if a > 0.0 { w(a) } else { w(a.max(1e-300)) };
                acc += 0.5 * h * (wa * sa + w(b) * sb);
            }
        }
        acc
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            freqs: self.freqs.clone(),
            values: self.values.iter().map(|v| v * k).collect(),
            nyquist: self.nyquist,
        }
    }

    /// Adds a constant density on the sampled frequencies (clamped at zero).
    pub fn offset(&self, delta: f64) -> Self {
        Self {
            freqs: self.freqs.clone(),
            values: self.values.iter().map(|v| (v + delta).max(0.0)).collect(),
            nyquist: self.nyquist,
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smooth positive gain `a(t)` with its derivative and sampled bounds.
#[derive(Clone)]
pub struct AmplitudeFn {
    value: ScalarFn,
    deriv: ScalarFn,
    span: (f64, f64),
    lower: f64,
    upper: f64,
}

impl fmt::Debug for AmplitudeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AmplitudeFn")
            .field("span", &self.span)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl AmplitudeFn {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        span: (f64, f64),
    ) -> Result<Self> {
        let value: ScalarFn = Arc::new(value);
        let (lower, upper) = sampled_bounds(&*value, span);
        if !(lower > 0.0) || !upper.is_finite() {
            return Err(invalid("amplitude", format!("needs 0 < c_a <= a(t) <= C_a < inf, got [{lower}, {upper}]")));
        }
        Ok(Self {
            value,
            deriv: Arc::new(deriv),
            span,
            lower,
            upper,
        })
    }

    pub fn constant(c: f64, span: (f64, f64)) -> Result<Self> {
        Self::new(move |_| c, |_| 0.0, span)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    #[inline]
    pub fn deriv(&self, t: f64) -> f64 {
        (self.deriv)(t)
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// `c_a`
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// `C_a`
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `‖a′‖_∞` from central differences on a dense grid.
    pub fn max_abs_deriv(&self) -> f64 {
        max_abs_central_difference(&*self.value, self.span)
    }

    /// Pointwise reciprocal `1/a`.
    pub fn reciprocal(&self) -> Result<Self> {
        let v = self.value.clone();
        let d = self.deriv.clone();
        let v2 = self.value.clone();
        Self::new(move |t| 1.0 / v(t), move |t| -d(t) / (v2(t) * v2(t)), self.span)
    }
}

/// Smooth increasing warp `γ(t)` with `γ(span.0) = 0`.
///
/// `γ` is tabulated by cumulative trapezoid integration of `γ′` and evaluated by
/// cubic Hermite interpolation using the exact derivative at the nodes.
#[derive(Clone)]
pub struct WarpFn {
    table: Arc<HermiteTable>,
    deriv: ScalarFn,
    span: (f64, f64),
    lower: f64,
    upper: f64,
}

impl fmt::Debug for WarpFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpFn")
            .field("span", &self.span)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl WarpFn {
    /// Integrates `deriv` on `[span.0, span.1]` with step at most `max_step`.
    pub fn from_derivative(
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        span: (f64, f64),
        max_step: f64,
    ) -> Result<Self> {
        let deriv: ScalarFn = Arc::new(deriv);
        Self::from_shared_derivative(deriv, span, max_step)
    }

    fn from_shared_derivative(deriv: ScalarFn, span: (f64, f64), max_step: f64) -> Result<Self> {
        let (t0, t1) = span;
        if !(t1 > t0) {
            return Err(invalid("span", "warp span must have positive length"));
        }
        if !(max_step > 0.0) {
            return Err(invalid("max_step", "must be positive"));
        }
        let intervals = ((t1 - t0) / max_step).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / intervals as f64;
        let derivs: Vec<f64> = (0..=intervals).map(|i| deriv(t0 + i as f64 * dt)).collect();
        if let Some(i) = derivs.iter().position(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(invalid(
                "warp",
                format!("γ′ must be positive, got {} at t = {}", derivs[i], t0 + i as f64 * dt),
            ));
        }
        let values = crate::interp::cumulative_trapezoid(&derivs, dt);
        let lower = derivs.iter().cloned().fold(f64::INFINITY, f64::min);
        let upper = derivs.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            table: Arc::new(HermiteTable {
                t0,
                dt,
                values,
                derivs,
            }),
            deriv,
            span,
            lower,
            upper,
        })
    }

    pub fn identity(span: (f64, f64)) -> Self {
        Self::from_derivative(|_| 1.0, span, (span.1 - span.0).max(1e-9))
            .expect("identity warp is valid")
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.table.eval(t)
    }

    #[inline]
    pub fn deriv(&self, t: f64) -> f64 {
        (self.deriv)(t)
    }

    /// `γ″` by central difference of `γ′`.
    pub fn second_deriv(&self, t: f64) -> f64 {
        let h = 1e-5 * (self.span.1 - self.span.0).max(1e-3);
        ((self.deriv)(t + h) - (self.deriv)(t - h)) / (2.0 * h)
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// `c_γ`
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// `C_γ`
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `‖γ″‖_∞` from central differences of `γ′` on a dense grid.
    pub fn max_abs_second_deriv(&self) -> f64 {
        max_abs_central_difference(&*self.deriv, self.span)
    }

    /// Inverse warp `γ⁻¹` on `[γ(span.0), γ(span.1)]`.
    pub fn inverse(&self) -> Result<Self> {
        let table = self.table.clone();
        let (u0, u1) = (table.values[0], *table.values.last().unwrap());
        let n = table.values.len();
        let du = (u1 - u0) / (n - 1) as f64;
        let fwd = self.deriv.clone();
        let mut values = Vec::with_capacity(n);
        let mut derivs = Vec::with_capacity(n);
        let mut j = 0usize;
        for i in 0..n {
            let u = u0 + i as f64 * du;
            while j + 2 < n && table.values[j + 1] <= u {
                j += 1;
            }
            let t = invert_on_segment(&table, &*fwd, j, u);
            values.push(t);
            derivs.push(1.0 / fwd(t));
        }
        let inv_table = Arc::new(HermiteTable {
            t0: u0,
            dt: du,
            values,
            derivs,
        });
        let inv_for_deriv = inv_table.clone();
        let deriv: ScalarFn = Arc::new(move |u| 1.0 / fwd(inv_for_deriv.eval(u)));
        Ok(Self {
            table: inv_table,
            deriv,
            span: (u0, u1),
            lower: 1.0 / self.upper,
            upper: 1.0 / self.lower,
        })
    }
}

fn invert_on_segment(table: &HermiteTable, deriv: &dyn Fn(f64) -> f64, seg: usize, u: f64) -> f64 {
    let mut lo = table.t0 + seg as f64 * table.dt;
    let mut hi = lo + table.dt;
    // Newton from the linear guess, safeguarded by bisection.
    let (v0, v1) = (table.values[seg], table.values[(seg + 1).min(table.values.len() - 1)]);
    let mut t = if v1 > v0 { lo + (u - v0) / (v1 - v0) * table.dt } else { lo };
    t = t.clamp(lo, hi);
    for _ in 0..50 {
        let f = table.eval(t) - u;
        if f.abs() <= 1e-14 * (1.0 + u.abs()) {
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let step = f / deriv(t);
        let cand = t - step;
        t = if cand > lo && cand < hi { cand } else { 0.5 * (lo + hi) };
    }
    t
}

fn sampled_bounds(f: &dyn Fn(f64) -> f64, span: (f64, f64)) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=BOUND_SAMPLES {
        let t = span.0 + (span.1 - span.0) * i as f64 / BOUND_SAMPLES as f64;
        let v = f(t);
        if !v.is_finite() {
            return (f64::NAN, f64::NAN);
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn max_abs_central_difference(f: &dyn Fn(f64) -> f64, span: (f64, f64)) -> f64 {
    let n = BOUND_SAMPLES;
    let h = (span.1 - span.0) / n as f64;
    let samples: Vec<f64> = (0..=n).map(|i| f(span.0 + i as f64 * h)).collect();
    samples
        .windows(3)
        .map(|w| ((w[2] - w[0]) / (2.0 * h)).abs())
        .fold(0.0, f64::max)
}

/// Real, finite, uniformly sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    fs: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::SignalTooShort {
                len: samples.len(),
                min: 2,
            });
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(invalid("fs", "sampling frequency must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid("samples", format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `t_F = (N - 1) / F_s`
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 / self.fs
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 / self.fs
    }

    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        self.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }

    pub fn mapped(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        Self::new(
            self.samples.iter().enumerate().map(|(i, &v)| f(i, v)).collect(),
            self.fs,
        )
    }
}
