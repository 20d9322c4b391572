//! Analytic wavelets defined in the positive Fourier domain and the discretized
//! continuous wavelet transform on a regular scale × time grid.
//!
//! Conventions: frequencies are in Hz, the mother wavelet has its Fourier mode at
//! `nu0` Hz, and the wavelet at scale `s` is `T_τ D_s ψ` whose Fourier transform is
//! `q^{s/2} ψ̂(q^s ν) e^{-2iπντ}`. Scale `s` therefore analyses frequencies around
//! `q^{-s} ω0`.
//!
//! The transform of a real signal keeps only positive frequencies and carries a
//! `√2` gain, so that for a stationary input with one-sided PSD `S`
//! `E|W(s, τ)|² = q^s ∫_0^∞ S(ξ) |ψ̂(q^s ξ)|² dξ`.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::signal::SampledSignal;

/// Level below which `ψ̂` is treated as zero when choosing integration ranges.
pub const NEGLIGIBLE: f64 = 1e-12;
const QUAD_POINTS: usize = 1 << 12;

/// `δ(a, b) = (a/b + b/a)/2 − 1`.
pub fn divergence(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(invalid("divergence", format!("arguments must be positive, got ({a}, {b})")));
    }
    Ok(divergence_unchecked(a, b))
}

#[inline]
fn divergence_unchecked(a: f64, b: f64) -> f64 {
    0.5 * (a / b + b / a) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveletKind {
    /// `ψ̂_k(ν) ∝ ν^k exp(−kν²/2ν0²)`, normalized to peak 1.
    DerivativeOfGaussian { order: u32 },
    /// `ψ̂_♯(ν) = ε^{δ(ν,ν0)/δ(ν1,ν0)}`.
    Sharp { epsilon: f64, nu1: f64 },
}

/// Analytic wavelet with cached centroid `ω0` and energy `‖ψ‖₂²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletSpec {
    kind: WaveletKind,
    nu0: f64,
    omega0: f64,
    norm_sq: f64,
    support: (f64, f64),
}

impl WaveletSpec {
    pub fn new(kind: WaveletKind, nu0: f64) -> Result<Self> {
        if !(nu0 > 0.0 && nu0.is_finite()) {
            return Err(invalid("nu0", "wavelet mode must be positive"));
        }
        match kind {
            WaveletKind::DerivativeOfGaussian { order } if order == 0 => {
                return Err(invalid("order", "derivative-of-Gaussian order must be >= 1"));
            }
            WaveletKind::Sharp { epsilon, nu1 } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(invalid("epsilon", "must lie in (0, 1)"));
                }
                if !(nu1 > 0.0) || (nu1 - nu0).abs() <= 1e-12 * nu0 {
                    return Err(invalid("nu1", "cutoff must be positive and differ from nu0"));
                }
            }
            _ => {}
        }
        let mut spec = Self {
            kind,
            nu0,
            omega0: f64::NAN,
            norm_sq: f64::NAN,
            support: (0.0, 0.0),
        };
        spec.support = spec.find_support();
        let (omega0, norm_sq) = spec.centroid_and_norm()?;
        spec.omega0 = omega0;
        spec.norm_sq = norm_sq;
        Ok(spec)
    }

    /// Sharp wavelet with `ε = 1e−3` and `ν1 = ν0/√2`.
    pub fn sharp(nu0: f64) -> Result<Self> {
        Self::new(
            WaveletKind::Sharp {
                epsilon: 1e-3,
                nu1: nu0 / SQRT_2,
            },
            nu0,
        )
    }

    pub fn kind(&self) -> WaveletKind {
        self.kind
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    /// Centroid of `|ψ̂|²`.
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// `‖ψ‖₂² = ∫_0^∞ |ψ̂|²`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Frequency range (Hz) outside which `ψ̂ < 1e−12`.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    #[inline]
    pub fn eval(&self, nu: f64) -> f64 {
        if nu <= 0.0 {
            return 0.0;
        }
        match self.kind {
            WaveletKind::DerivativeOfGaussian { order } => {
                let k = order as f64;
                let u = nu / self.nu0;
                // u^k exp(-k(u²-1)/2) peaks at 1 for u = 1
                (k * u.ln() - 0.5 * k * (u * u - 1.0)).exp()
            }
            WaveletKind::Sharp { epsilon, nu1 } => {
                let d1 = divergence_unchecked(nu1, self.nu0);
                let d = divergence_unchecked(nu, self.nu0);
                (epsilon.ln() * d / d1).exp()
            }
        }
    }

    /// `dψ̂/dν` by central difference.
    pub fn eval_deriv(&self, nu: f64) -> f64 {
        let h = 1e-6 * self.nu0;
        (self.eval(nu + h) - self.eval((nu - h).max(0.0))) / (2.0 * h)
    }

    fn find_support(&self) -> (f64, f64) {
        match self.kind {
            WaveletKind::Sharp { epsilon, nu1 } => {
                let d1 = divergence_unchecked(nu1, self.nu0);
                let d = d1 * NEGLIGIBLE.ln() / epsilon.ln();
                let c = 1.0 + d;
                let r = (c * c - 1.0).sqrt();
                (self.nu0 * (c - r), self.nu0 * (c + r))
            }
            WaveletKind::DerivativeOfGaussian { .. } => {
                let below = |nu: f64| self.eval(nu) < NEGLIGIBLE;
                let mut lo = self.nu0;
                while !below(lo) && lo > 1e-12 * self.nu0 {
                    lo *= 0.9;
                }
                let mut hi = self.nu0;
                while !below(hi) {
                    hi *= 1.1;
                }
                (lo, hi)
            }
        }
    }

    /// `(ω0, ‖ψ‖₂²)` by trapezoid quadrature on log-spaced nodes, checked by halving the nodes.
    pub fn centroid_and_norm(&self) -> Result<(f64, f64)> {
        let fine = self.moments(QUAD_POINTS);
        let coarse = self.moments(QUAD_POINTS / 2);
        let rel = |a: f64, b: f64| ((a - b) / a).abs();
        let disagreement = rel(fine.0, coarse.0).max(rel(fine.1, coarse.1));
        if !(disagreement < 1e-6) {
            return Err(Error::QuadratureNotConverged { disagreement });
        }
        Ok((fine.1 / fine.0, fine.0))
    }

    fn moments(&self, n: usize) -> (f64, f64) {
        let (lo, hi) = self.support;
        let (a, b) = (lo.ln(), hi.ln());
        let h = (b - a) / (n - 1) as f64;
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for i in 0..n {
            let nu = (a + i as f64 * h).exp();
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * h * nu;
            let p = self.eval(nu).powi(2);
            m0 += w * p;
            m1 += w * p * nu;
        }
        (m0, m1)
    }
}

/// Arithmetic scale grid `s_i = s_min + i δ_s` with base `q` and coarse subsampling factor `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    q: f64,
    scales: Vec<f64>,
    step: f64,
    subsample: usize,
}

impl ScaleGrid {
    pub fn new(q: f64, s_min: f64, step: f64, count: usize, subsample: usize) -> Result<Self> {
        if !(q > 1.0) {
            return Err(invalid("q", "scale base must exceed 1"));
        }
        if !(step > 0.0) {
            return Err(invalid("scale_step", "must be positive"));
        }
        if count < 2 {
            return Err(invalid("scale_count", "need at least two scales"));
        }
        if subsample == 0 || count / subsample < 1 {
            return Err(invalid("subsample", "p must be >= 1 and leave at least one coarse scale"));
        }
        Ok(Self {
            q,
            scales: (0..count).map(|i| s_min + i as f64 * step).collect(),
            step,
            subsample,
        })
    }

    /// Grid whose analysed frequencies `q^{−s} ω0` span `[f_lo, f_hi]`.
    pub fn covering(
        q: f64,
        omega0: f64,
        f_lo: f64,
        f_hi: f64,
        count: usize,
        subsample: usize,
    ) -> Result<Self> {
        if !(f_lo > 0.0 && f_hi > f_lo) {
            return Err(invalid("band", "need 0 < f_lo < f_hi"));
        }
        if count < 2 {
            return Err(invalid("scale_count", "need at least two scales"));
        }
        let s_min = (omega0 / f_hi).ln() / q.ln();
        let s_max = (omega0 / f_lo).ln() / q.ln();
        Self::new(q, s_min, (s_max - s_min) / (count - 1) as f64, count, subsample)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn subsample(&self) -> usize {
        self.subsample
    }

    pub fn s_min(&self) -> f64 {
        self.scales[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.scales.last().unwrap()
    }

    /// Row indices kept by the coarse grid `s_p`: `0, p, 2p, …`, `⌊M_s/p⌋` of them.
    pub fn coarse_indices(&self) -> Vec<usize> {
        (0..self.scales.len() / self.subsample)
            .map(|i| i * self.subsample)
            .collect()
    }

    /// The coarse grid `s_p` (step `p δ_s`).
    pub fn coarse(&self) -> ScaleGrid {
        let idx = self.coarse_indices();
        ScaleGrid {
            q: self.q,
            scales: idx.iter().map(|&i| self.scales[i]).collect(),
            step: self.step * self.subsample as f64,
            subsample: 1,
        }
    }

    /// Analysed frequencies `q^{−s_i} ω0`, decreasing with `i`.
    pub fn frequencies(&self, omega0: f64) -> Vec<f64> {
        self.scales.iter().map(|&s| omega0 * self.q.powf(-s)).collect()
    }

    pub fn validate_for(&self, fs: f64, omega0: f64) -> Result<()> {
        let f = self.frequencies(omega0);
        let hi = f[0];
        if !(hi <= fs / 2.0 * (1.0 + 1e-12)) {
            return Err(invalid(
                "scale grid",
                format!("highest analysed frequency {hi:.1} Hz exceeds Nyquist {}", fs / 2.0),
            ));
        }
        Ok(())
    }
}

/// Complex coefficients over a scale grid (rows) and time samples (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScaleTransform {
    coeffs: Vec<Complex64>,
    grid: ScaleGrid,
    times: Vec<f64>,
    fs: f64,
    // row-major validity; `None` means every coefficient is valid
    mask: Option<Vec<bool>>,
}

impl TimeScaleTransform {
    pub fn new(coeffs: Vec<Complex64>, grid: ScaleGrid, times: Vec<f64>, fs: f64) -> Result<Self> {
        let expected = grid.len() * times.len();
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            coeffs,
            grid,
            times,
            fs,
            mask: None,
        })
    }

    /// Attaches a row-major validity mask.
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coeffs.len(),
                got: mask.len(),
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask
            .as_ref()
            .is_none_or(|m| m[row * self.times.len() + col])
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn cols(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.coeffs[row * self.times.len() + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        let n = self.times.len();
        &self.coeffs[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Keeps the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut coeffs = Vec::with_capacity(self.rows() * cols.len());
        for r in 0..self.rows() {
            let row = self.row(r);
            coeffs.extend(cols.iter().map(|&c| row[c]));
        }
        let n = self.cols();
        let mask = self.mask.as_ref().map(|m| {
            (0..self.rows())
                .flat_map(|r| cols.iter().map(move |&c| m[r * n + c]))
                .collect()
        });
        Self {
            coeffs,
            grid: self.grid.clone(),
            times: cols.iter().map(|&c| self.times[c]).collect(),
            fs: self.fs,
            mask,
        }
    }

    /// Restriction to the coarse scale grid.
    pub fn coarse(&self) -> Self {
        let idx = self.grid.coarse_indices();
        let mut coeffs = Vec::with_capacity(idx.len() * self.cols());
        for &r in &idx {
            coeffs.extend_from_slice(self.row(r));
        }
        let n = self.cols();
        let mask = self.mask.as_ref().map(|m| {
            idx.iter()
                .flat_map(|&r| m[r * n..(r + 1) * n].iter().copied())
                .collect()
        });
        Self {
            coeffs,
            grid: self.grid.coarse(),
            times: self.times.clone(),
            fs: self.fs,
            mask,
        }
    }

    /// `|W|²` grid, row-major.
    pub fn scalogram(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Per-scale filter `√2 q^{s/2} ψ̂(q^s ν)` on positive DFT bins.
fn scale_filter(spec: &WaveletSpec, q: f64, s: f64, nu: f64) -> f64 {
    if nu <= 0.0 {
        return 0.0;
    }
    let qs = q.powf(s);
    SQRT_2 * qs.sqrt() * spec.eval(qs * nu)
}

/// Discretized CWT by per-scale FFT filtering (periodic boundary).
pub fn cwt(x: &SampledSignal, grid: &ScaleGrid, spec: &WaveletSpec) -> Result<TimeScaleTransform> {
    let all: Vec<usize> = (0..x.len()).collect();
    cwt_at(x, grid, spec, &all)
}

/// [`cwt`] restricted to the sample indices `cols`.
pub fn cwt_at(
    x: &SampledSignal,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
    cols: &[usize],
) -> Result<TimeScaleTransform> {
    let n = x.len();
    if n < 2 {
        return Err(Error::SignalTooShort { len: n, min: 2 });
    }
    if let Some(&bad) = cols.iter().find(|&&c| c >= n) {
        return Err(invalid("cols", format!("sample index {bad} beyond signal length {n}")));
    }
    let fs = x.fs();
    let spectrum = fft::forward_real(x.samples());
    let plan: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(n);
    let q = grid.q();
    let rows: Vec<Vec<Complex64>> = grid
        .scales()
        .par_iter()
        .map(|&s| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for (k, slot) in buf.iter_mut().enumerate().take(n / 2 + 1).skip(1) {
                let nu = k as f64 * fs / n as f64;
                let f = scale_filter(spec, q, s, nu);
                if f != 0.0 {
                    *slot = spectrum[k] * f;
                }
            }
            plan.process(&mut buf);
            let inv = 1.0 / n as f64;
            cols.iter().map(|&c| buf[c] * inv).collect()
        })
        .collect();
    let times = cols.iter().map(|&i| i as f64 / fs).collect();
    TimeScaleTransform::new(rows.concat(), grid.clone(), times, fs)
}

/// Exact evaluation of the transform at arbitrary (scale, time) from the DFT of the signal.
///
/// Same convention as [`cwt`]; costs one pass over the positive bins per coefficient.
#[derive(Debug, Clone)]
pub struct CoefficientEvaluator {
    spectrum: Vec<Complex64>,
    n: usize,
    fs: f64,
    q: f64,
    spec: WaveletSpec,
}

impl CoefficientEvaluator {
    pub fn new(x: &SampledSignal, q: f64, spec: &WaveletSpec) -> Self {
        Self {
            spectrum: fft::forward_real(x.samples()),
            n: x.len(),
            fs: x.fs(),
            q,
            spec: spec.clone(),
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> Complex64 {
        let n = self.n;
        let df = self.fs / n as f64;
        let qs = self.q.powf(s);
        let (lo, hi) = self.spec.support();
        let k_lo = ((lo / qs / df).floor() as usize).max(1);
        let k_hi = ((hi / qs / df).ceil() as usize).min(n / 2);
        let mut acc = Complex64::new(0.0, 0.0);
        if k_lo > k_hi {
            return acc;
        }
        let dphi = 2.0 * std::f64::consts::PI * df * t;
        let step = Complex64::from_polar(1.0, dphi);
        let mut rot = Complex64::from_polar(1.0, dphi * k_lo as f64);
        for k in k_lo..=k_hi {
            let f = scale_filter(&self.spec, self.q, s, k as f64 * df);
            acc += self.spectrum[k] * f * rot;
            rot *= step;
            if k % 64 == 0 {
                // renormalize the rotating phasor
                rot = Complex64::from_polar(1.0, dphi * (k + 1) as f64);
            }
        }
        acc / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn divergence_examples() {
        assert_eq!(divergence(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(divergence(2.0, 1.0).unwrap(), 0.25);
        let (a, b) = (0.7, 2.9);
        assert!((divergence(a, b).unwrap() - divergence(b, a).unwrap()).abs() < 1e-15);
        assert!((divergence(a, b).unwrap() - divergence(1.0 / a, 1.0 / b).unwrap()).abs() < 1e-14);
        assert!(divergence(0.0, 1.0).is_err());
        assert!(divergence(1.0, -1.0).is_err());
    }

    #[test]
    fn sharp_wavelet_values() {
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        assert_eq!(spec.eval(4000.0), 1.0);
        assert!((spec.eval(4000.0 / SQRT_2) - 1e-3).abs() < 1e-15);
        assert_eq!(spec.eval(0.0), 0.0);
        assert_eq!(spec.eval(-10.0), 0.0);
        for nu in [1000.0, 3000.0, 5000.0] {
            let mirror = 4000.0 * 4000.0 / nu;
            assert!((spec.eval(nu) - spec.eval(mirror)).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_gaussian_peaks_at_mode() {
        let spec = WaveletSpec::new(WaveletKind::DerivativeOfGaussian { order: 3 }, 100.0).unwrap();
        assert!((spec.eval(100.0) - 1.0).abs() < 1e-15);
        assert!(spec.eval(99.0) < 1.0 && spec.eval(101.0) < 1.0);
    }

    #[test]
    fn centroid_matches_fine_trapezoid_and_scales() {
        let spec = WaveletSpec::sharp(1000.0).unwrap();
        // oracle: fine linear-axis trapezoid
        let n = 400_000;
        let (lo, hi) = (200.0, 5000.0);
        let h = (hi - lo) / n as f64;
        let (mut m0, mut m1) = (0.0, 0.0);
        for i in 0..=n {
            let nu = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let p = spec.eval(nu).powi(2);
            m0 += w * p * h;
            m1 += w * p * nu * h;
        }
        assert!((spec.norm_sq() / m0 - 1.0).abs() < 1e-8);
        assert!((spec.omega0() / (m1 / m0) - 1.0).abs() < 1e-8);
        assert!(spec.omega0() >= spec.nu0());
        let scaled = WaveletSpec::sharp(3000.0).unwrap();
        assert!((scaled.omega0() / spec.omega0() - 3.0).abs() < 1e-9);
        assert!(spec.norm_sq() > 0.0 && spec.norm_sq().is_finite());
    }

    fn test_grid(spec: &WaveletSpec) -> ScaleGrid {
        ScaleGrid::covering(2.0, spec.omega0(), 100.0, 3500.0, 60, 4).unwrap()
    }

    #[test]
    fn zero_signal_gives_zero_transform() {
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let x = SampledSignal::new(vec![0.0; 256], 8000.0).unwrap();
        let w = cwt(&x, &test_grid(&spec), &spec).unwrap();
        assert!(w.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn tone_peaks_at_matching_scale() {
        let fs = 8000.0;
        let f0 = 700.0;
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let grid = test_grid(&spec);
        let x = SampledSignal::new(
            (0..4096).map(|i| (2.0 * PI * f0 * i as f64 / fs).cos()).collect(),
            fs,
        )
        .unwrap();
        let w = cwt(&x, &grid, &spec).unwrap();
        let col = 2048;
        let best = (0..grid.len())
            .max_by(|&a, &b| w.get(a, col).norm().total_cmp(&w.get(b, col).norm()))
            .unwrap();
        // oracle: direct evaluation of the scale response at f0
        let oracle = (0..grid.len())
            .max_by(|&a, &b| {
                let r = |i: usize| {
                    let qs = 2f64.powf(grid.scales()[i]);
                    qs.sqrt() * spec.eval(qs * f0)
                };
                r(a).total_cmp(&r(b))
            })
            .unwrap();
        assert_eq!(best, oracle);
    }

    #[test]
    fn transform_is_linear() {
        let fs = 8000.0;
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let grid = test_grid(&spec);
        let a: Vec<f64> = (0..512).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let b: Vec<f64> = (0..512).map(|i| ((i * 104_729) % 89) as f64 / 89.0 - 0.5).collect();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
        let wa = cwt(&SampledSignal::new(a, fs).unwrap(), &grid, &spec).unwrap();
        let wb = cwt(&SampledSignal::new(b, fs).unwrap(), &grid, &spec).unwrap();
        let wm = cwt(&SampledSignal::new(mix, fs).unwrap(), &grid, &spec).unwrap();
        for i in 0..wm.data().len() {
            let expect = wa.data()[i] * 2.0 - wb.data()[i] * 3.0;
            assert!((wm.data()[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn evaluator_matches_fft_transform() {
        let fs = 8000.0;
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let grid = test_grid(&spec);
        let x: Vec<f64> = (0..1024).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let x = SampledSignal::new(x, fs).unwrap();
        let w = cwt(&x, &grid, &spec).unwrap();
        let ev = CoefficientEvaluator::new(&x, 2.0, &spec);
        for (r, c) in [(3, 100), (20, 511), (40, 900)] {
            let exact = ev.eval(grid.scales()[r], c as f64 / fs);
            assert!((exact - w.get(r, c)).norm() < 1e-10 * (1.0 + exact.norm()));
        }
    }

    #[test]
    fn coarse_grid_has_floor_size() {
        let g = ScaleGrid::new(2.0, 0.0, 0.1, 106, 7).unwrap();
        assert_eq!(g.coarse().len(), 15);
        assert!((g.coarse().step() - 0.7).abs() < 1e-12);
        assert!(ScaleGrid::new(2.0, 0.0, 0.0, 10, 1).is_err());
    }
}
