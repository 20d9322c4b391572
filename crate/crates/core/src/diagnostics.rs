//! Baselines, Cramér–Rao bounds, bias formulas, approximation-error and spectrum-bias
//! bounds with their empirical counterparts, and MSE reporting.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{CovMatrix, LocalParams};
use crate::error::{invalid, Error, Result};
use crate::estimator::FrameModel;
use crate::signal::{apply_deformation, gaussian_stationary_synth, AmplitudeFn, PowerSpectrum, WarpFn};
use crate::wavelet::{cwt_at, CoefficientEvaluator, ScaleGrid, TimeScaleTransform, WaveletSpec};

/// Dense sampling used for sup norms.
const SUP_SAMPLES: usize = 1 << 12;
/// Finite-difference step for `∂C/∂θ2`.
const CRLB_FD_STEP: f64 = 1e-4;

/// `‖w‖²/M_s`
pub fn baseline_theta1(w: &[Complex64]) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    w.iter().map(|c| c.norm_sqr()).sum::<f64>() / w.len() as f64
}

/// Negated scalogram scale centroid per column, centered to zero mean.
///
/// Scale `s` analyses frequency `q^{−s}ω0`, so a warp with `log_q γ′ = θ2` moves energy
/// to `s − θ2`: the centroid itself tracks `−θ2`.
///
/// Columns without energy get 0 and are listed in the second return value; they do not
/// take part in the centering.
pub fn baseline_theta2(wy: &TimeScaleTransform) -> (Vec<f64>, Vec<usize>) {
    let scales = wy.grid().scales();
    let mut out = vec![0.0; wy.cols()];
    let mut flagged = Vec::new();
    for (n, slot) in out.iter_mut().enumerate() {
        let (mut num, mut den) = (0.0, 0.0);
        for (m, &s) in scales.iter().enumerate() {
            let e = wy.get(m, n).norm_sqr();
            num += s * e;
            den += e;
        }
        if den > 0.0 {
            *slot = -num / den;
        } else {
            flagged.push(n);
        }
    }
    let valid = out.len() - flagged.len();
    if valid > 0 {
        let mut mean = 0.0;
        for (n, v) in out.iter().enumerate() {
            if !flagged.contains(&n) {
                mean += v;
            }
        }
        mean /= valid as f64;
        for (n, v) in out.iter_mut().enumerate() {
            if !flagged.contains(&n) {
                *v -= mean;
            }
        }
    }
    (out, flagged)
}

/// `2θ1²/M_s`
pub fn crlb_theta1(theta1: f64, m: usize) -> f64 {
    2.0 * theta1 * theta1 / m as f64
}

/// `2 / Tr{(C⁻¹ ∂C)²}`
pub fn slepian_bangs(c: &CovMatrix, dc: &DMatrix<f64>) -> Result<f64> {
    if dc.nrows() != c.dim() || dc.ncols() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            got: dc.nrows(),
        });
    }
    let chol = nalgebra::Cholesky::new(c.matrix().clone()).ok_or(Error::NotPositiveDefinite)?;
    let a = chol.solve(dc);
    let tr = (&a * &a).trace();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::NotIdentifiable);
    }
    Ok(2.0 / tr)
}

/// Slepian–Bangs bound for `θ2` under the estimator's own covariance model.
pub fn crlb_theta2(
    params: LocalParams,
    spectrum: &PowerSpectrum,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
    noise_level: f64,
    r: f64,
) -> Result<f64> {
    let model = FrameModel::new(grid, spec, spectrum.nyquist(), noise_level, r)?;
    crlb_theta2_with(&model, params, spectrum)
}

pub fn crlb_theta2_with(model: &FrameModel, params: LocalParams, spectrum: &PowerSpectrum) -> Result<f64> {
    let h = CRLB_FD_STEP;
    let at = |d: f64| {
        model.covariance(
            LocalParams {
                theta2: params.theta2 + d,
                ..params
            },
            spectrum,
        )
    };
    let dc = (at(h)?.matrix() - at(-h)?.matrix()) / (2.0 * h);
    slepian_bangs(&at(0.0)?, &dc)
}

/// Bias of the closed-form `θ̃1` when the estimated spectrum and warp replace the truth:
/// `(θ1/M) Tr{C̃0r⁻¹ C0 − I} + (σ_W²/M) Tr{C̃0r⁻¹ C_wn}`.
///
/// `C̃0r` is the regularized matrix the estimator inverts; `C0` is the unregularized
/// true covariance.
#[allow(clippy::too_many_arguments)]
pub fn bias_theta1(
    theta1: f64,
    true_spectrum: &PowerSpectrum,
    est_spectrum: &PowerSpectrum,
    true_theta2: f64,
    est_theta2: f64,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
    r: f64,
    noise_level: f64,
) -> Result<f64> {
    let nyq = true_spectrum.nyquist();
    let est = FrameModel::new(grid, spec, nyq, 0.0, r)?.c0(est_theta2, est_spectrum)?;
    let truth_model = crate::covariance::CovarianceModel::new(grid, spec, nyq);
    let c0 = truth_model.c0(true_theta2, true_spectrum, grid.q());
    let chol = nalgebra::Cholesky::new(est.matrix().clone()).ok_or(Error::NotPositiveDefinite)?;
    let m = grid.len() as f64;
    let mut bias = theta1 / m * (chol.solve(c0.matrix()).trace() - m);
    if noise_level > 0.0 {
        bias += noise_level / m * chol.solve(truth_model.white().matrix()).trace();
    }
    Ok(bias)
}

/// One evaluation point of a bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub scale: f64,
    /// Analysis time (s), or frequency (Hz) for spectrum-bias points.
    pub at: f64,
    pub bound: f64,
    pub empirical: Option<f64>,
}

/// Constants of a theoretical bound and its values, with empirical counterparts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub constants: BTreeMap<String, f64>,
    pub points: Vec<BoundPoint>,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.empirical.is_some_and(|e| e > p.bound))
            .count()
    }

    /// Smallest `bound − empirical` over points with an empirical value.
    pub fn margin(&self) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|p| p.empirical.map(|e| p.bound - e))
            .reduce(f64::min)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }
}

/// `sup_t |ψ(t)|(1 + |t|^β)` for the time-domain wavelet of the transform (including
/// its `√2` analytic gain), `t` in seconds.
fn wavelet_decay_constant(spec: &WaveletSpec, beta: f64) -> f64 {
    let (lo, hi) = spec.support();
    let n = SUP_SAMPLES;
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / (n - 1) as f64;
    let nodes: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let nu = (a + k as f64 * h).exp();
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 } * h * nu;
            (nu, w * spec.eval(nu))
        })
        .collect();
    // |ψ(t)| decays on the scale of 1/bandwidth; sample well past it
    let t_max = 200.0 / spec.nu0();
    (0..SUP_SAMPLES)
        .into_par_iter()
        .map(|i| {
            let t = t_max * i as f64 / (SUP_SAMPLES - 1) as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for &(nu, w) in &nodes {
                acc += Complex64::from_polar(w, 2.0 * std::f64::consts::PI * nu * t);
            }
            std::f64::consts::SQRT_2 * acc.norm() * (1.0 + t.abs().powf(beta))
        })
        .reduce(|| 0.0, f64::max)
}

/// Approximation-error bound
/// `E|ε(s,τ)|² ≤ A_ψ² C_a² q^{3s} (K1‖γ″‖ + K2 q^{μs}‖γ″‖^ρ + K3‖a′‖)²`,
/// where `A_ψ = sup|ψ(t)|(1+|t|^β)` accounts for the wavelet not being normalized to
/// `|ψ(t)| ≤ 1/(1+|t|^β)`.
pub fn theorem1_bound(
    a: &AmplitudeFn,
    gamma: &WarpFn,
    spectrum: &PowerSpectrum,
    spec: &WaveletSpec,
    beta: f64,
    q: f64,
    scales: &[f64],
) -> Result<BoundReport> {
    if !(beta > 2.0) {
        return Err(invalid("beta", format!("decay exponent must exceed 2, got {beta}")));
    }
    let rho = (beta - 1.0) / (beta + 2.0);
    let mu = (beta - 4.0) / (beta + 2.0);
    let sigma_x = spectrum.variance().sqrt();
    let i_rho = spectrum.moment_integral(|xi| xi.powf(2.0 * rho)).sqrt();
    if !i_rho.is_finite() {
        return Err(invalid("spectrum", "I_X^(ρ) is not finite"));
    }
    let (c_g, cap_g) = (gamma.lower(), gamma.upper());
    let (c_a, cap_a) = (a.lower(), a.upper());
    let g2 = gamma.max_abs_second_deriv();
    let a1 = a.max_abs_deriv();
    let k1 = beta * sigma_x / (2.0 * (beta - 2.0) * c_g.sqrt());
    let k2 = i_rho * (std::f64::consts::PI / 2.0).powf(rho) * cap_g.sqrt() * 4.0 / (3.0 * rho);
    let k3 = cap_g.sqrt() * beta * sigma_x / ((beta - 2.0) * c_a);
    let a_psi = wavelet_decay_constant(spec, beta);
    let bound_at = |s: f64| {
        let inner = k1 * g2 + k2 * q.powf(mu * s) * g2.powf(rho) + k3 * a1;
        a_psi * a_psi * cap_a * cap_a * q.powf(3.0 * s) * inner * inner
    };
    let constants = BTreeMap::from([
        ("beta".into(), beta),
        ("rho".into(), rho),
        ("mu".into(), mu),
        ("sigma_x".into(), sigma_x),
        ("i_x_rho".into(), i_rho),
        ("k1".into(), k1),
        ("k2".into(), k2),
        ("k3".into(), k3),
        ("a_psi".into(), a_psi),
        ("gamma_second_sup".into(), g2),
        ("a_prime_sup".into(), a1),
        ("c_a".into(), c_a),
        ("cap_a".into(), cap_a),
        ("c_gamma".into(), c_g),
        ("cap_gamma".into(), cap_g),
    ]);
    let points = scales
        .iter()
        .map(|&s| BoundPoint {
            scale: s,
            at: f64::NAN,
            bound: bound_at(s),
            empirical: None,
        })
        .collect();
    Ok(BoundReport { constants, points })
}

/// Monte-Carlo `E|W_Y(s,τ) − a(τ) W_X(s + log_q γ′(τ), γ(τ))|²` at the given scales and
/// analysis sample indices, next to the analytic bound of [`theorem1_bound`].
///
/// `W_Y` is the discrete transform of the deformed realization; the tangent
/// approximation is evaluated exactly from the DFT of the undeformed one.
#[allow(clippy::too_many_arguments)]
pub fn empirical_approx_error(
    a: &AmplitudeFn,
    gamma: &WarpFn,
    spectrum: &PowerSpectrum,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
    n_samples: usize,
    fs: f64,
    frames: &[usize],
    beta: f64,
    n_trials: usize,
    seed: u64,
) -> Result<BoundReport> {
    if n_trials == 0 {
        return Err(invalid("n_trials", "need at least one trial"));
    }
    let q = grid.q();
    let t_end = (n_samples - 1) as f64 / fs;
    let x_len = ((gamma.eval(t_end) * fs).ceil() as usize + 8).max(n_samples);
    let frames: Vec<usize> = frames
        .iter()
        .copied()
        .filter(|&i| i < n_samples && gamma.eval(i as f64 / fs) <= (x_len - 1) as f64 / fs)
        .collect();
    if frames.is_empty() {
        return Err(invalid("frames", "no analysis time maps inside the synthesized signal"));
    }
    let scales = grid.scales().to_vec();
    let sums: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<f64>> {
            let x = gaussian_stationary_synth(spectrum, x_len, fs, seed.wrapping_add(trial as u64))?;
            let y = apply_deformation(&x, a, gamma, n_samples)?;
            let wy = cwt_at(&y, grid, spec, &frames)?;
            let ev = CoefficientEvaluator::new(&x, q, spec);
            let mut out = vec![0.0; scales.len() * frames.len()];
            for (j, &i) in frames.iter().enumerate() {
                let tau = i as f64 / fs;
                let shift = gamma.deriv(tau).ln() / q.ln();
                let gain = a.eval(tau);
                let mapped = gamma.eval(tau);
                for (m, &s) in scales.iter().enumerate() {
                    let approx = ev.eval(s + shift, mapped) * gain;
                    out[m * frames.len() + j] = (wy.get(m, j) - approx).norm_sqr();
                }
            }
            Ok(out)
        })
        .try_reduce(
            || vec![0.0; scales.len() * frames.len()],
            |mut acc, v| {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                Ok(acc)
            },
        )?;
    let mut report = theorem1_bound(a, gamma, spectrum, spec, beta, q, &scales)?;
    let bounds: Vec<f64> = report.points.iter().map(|p| p.bound).collect();
    let (frames, sums) = (&frames, &sums);
    report.points = scales
        .iter()
        .enumerate()
        .flat_map(|(m, &s)| {
            let bound = bounds[m];
            frames.iter().enumerate().map(move |(j, &i)| BoundPoint {
                scale: s,
                at: i as f64 / fs,
                bound,
                empirical: Some(sums[m * frames.len() + j] / n_trials as f64),
            })
        })
        .collect();
    report.constants.insert("n_trials".into(), n_trials as f64);
    Ok(report)
}

/// Band-pass spectrum `S_{X,ψ}(q^{−s}ω0) = q^s ∫ S(ξ) ψ̂(q^s ξ)² dξ / ‖ψ‖²`: the
/// expectation of the spectrum estimator with exact deformations.
pub fn bandpass_spectrum(spectrum: &PowerSpectrum, spec: &WaveletSpec, q: f64, s: f64) -> f64 {
    let qs = q.powf(s);
    let (lo, hi) = spec.support();
    let (a, b) = ((lo / qs).ln(), (hi / qs).ln());
    let n = 1 << 13;
    let h = (b - a) / (n - 1) as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let xi = (a + k as f64 * h).exp();
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 } * h * xi;
        let p = spec.eval(qs * xi);
        acc += w * spectrum.eval(xi) * p * p;
    }
    qs * acc / spec.norm_sq()
}

/// Spectrum-bias bound
/// `‖b_S‖_∞ ≤ (J_X/‖ψ‖²)(K′1‖θ1 − θ̃1‖_∞ + K′2‖θ̃2 − θ2‖_∞)`, one point per scale.
pub fn prop1_bias_bound(
    spec: &WaveletSpec,
    spectrum: &PowerSpectrum,
    grid: &ScaleGrid,
    c_theta1: f64,
    theta1_err: f64,
    theta2_err: f64,
) -> Result<BoundReport> {
    if !(c_theta1 > 0.0) {
        return Err(invalid("c_theta1", "lower bound on θ1 must be positive"));
    }
    if let (Some(&f0), Some(&v0)) = (spectrum.freqs().first(), spectrum.values().first()) {
        if f0 == 0.0 && v0 > 0.0 {
            return Err(Error::DivergentLowFrequencyIntegral);
        }
    }
    let j_x = spectrum.moment_integral(|xi| 1.0 / xi);
    if !j_x.is_finite() {
        return Err(Error::DivergentLowFrequencyIntegral);
    }
    // decay check: u^η ψ̂(u) must die out over the sampled tail for some η > 2
    let eta = 3.0;
    let (lo, hi) = spec.support();
    let tail_end = 100.0 * hi;
    let tail = |u: f64| u.powf(eta) * spec.eval(u);
    let tail_max = (0..SUP_SAMPLES)
        .map(|i| tail(spec.nu0() * (tail_end / spec.nu0()).powf(i as f64 / (SUP_SAMPLES - 1) as f64)))
        .fold(0.0, f64::max);
    if !(tail(tail_end) <= 1e-6 * tail_max) {
        return Err(invalid("wavelet", "ψ̂ does not decay faster than u^-3"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let us: Vec<f64> = (0..SUP_SAMPLES)
        .map(|i| (a + (b - a) * i as f64 / (SUP_SAMPLES - 1) as f64).exp())
        .collect();
    let phi1 = us.iter().map(|&u| u * spec.eval(u).powi(2)).fold(0.0, f64::max);
    let phi2 = us.iter().map(|&u| u * u * spec.eval(u)).fold(0.0, f64::max);
    let dpsi = us
        .windows(2)
        .map(|w| ((spec.eval(w[1]) - spec.eval(w[0])) / (w[1] - w[0])).abs())
        .fold(0.0, f64::max);
    let k1 = phi1 / c_theta1;
    let k2 = grid.q().ln() * (phi1 + 2.0 * dpsi * phi2);
    let bound = j_x / spec.norm_sq() * (k1 * theta1_err + k2 * theta2_err);
    let constants = BTreeMap::from([
        ("j_x".into(), j_x),
        ("phi1_sup".into(), phi1),
        ("phi2_sup".into(), phi2),
        ("psi_hat_prime_sup".into(), dpsi),
        ("k1_prime".into(), k1),
        ("k2_prime".into(), k2),
        ("theta1_err".into(), theta1_err),
        ("theta2_err".into(), theta2_err),
    ]);
    let freqs = grid.frequencies(spec.omega0());
    let points = grid
        .scales()
        .iter()
        .zip(freqs)
        .map(|(&s, nu)| BoundPoint {
            scale: s,
            at: nu,
            bound,
            empirical: None,
        })
        .collect();
    Ok(BoundReport { constants, points })
}

/// Mean square errors on the parameter scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsePair {
    /// On `θ1 = a²`.
    pub amplitude: f64,
    /// On `θ2 = log_q γ′`.
    pub warping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub baseline: MsePair,
    pub algorithm: MsePair,
}

/// Frame-wise `θ1`, `θ2` trajectories.
#[derive(Debug, Clone, Copy)]
pub struct Trajectories<'a> {
    pub theta1: &'a [f64],
    pub theta2: &'a [f64],
}

pub fn mse(est: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(est.len(), truth.len(), "trajectories must be aligned");
    if est.is_empty() {
        return 0.0;
    }
    est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / est.len() as f64
}

/// Amplitude MSE after rescaling the estimate to the mean of the truth: the amplitude is
/// identifiable only up to a constant factor (a baseline energy estimate carries the
/// signal's variance).
pub fn amplitude_mse(est: &[f64], truth: &[f64]) -> f64 {
    let me = est.iter().sum::<f64>();
    let mt = truth.iter().sum::<f64>();
    if me > 0.0 {
        let k = mt / me;
        let scaled: Vec<f64> = est.iter().map(|e| e * k).collect();
        mse(&scaled, truth)
    } else {
        mse(est, truth)
    }
}

pub fn mse_pair(est: Trajectories<'_>, truth: Trajectories<'_>) -> MsePair {
    MsePair {
        amplitude: amplitude_mse(est.theta1, truth.theta1),
        warping: mse(est.theta2, truth.theta2),
    }
}

pub fn mse_report(
    algorithm: Trajectories<'_>,
    baseline: Trajectories<'_>,
    truth: Trajectories<'_>,
) -> MseReport {
    MseReport {
        baseline: mse_pair(baseline, truth),
        algorithm: mse_pair(algorithm, truth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::build_c0;
    use crate::signal::{synth_spectrum, SpectralBump};

    fn bumps() -> PowerSpectrum {
        synth_spectrum(
            &[SpectralBump::new(600.0, 200.0), SpectralBump::new(1200.0, 400.0)],
            8000.0,
        )
        .unwrap()
    }

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn baseline_theta1_examples() {
        assert_eq!(baseline_theta1(&[c(0.0); 4]), 0.0);
        assert_eq!(baseline_theta1(&[c(1.0), Complex64::new(0.0, 1.0), c(-1.0)]), 1.0);
    }

    #[test]
    fn baseline_theta1_is_closed_form_with_identity() {
        let w = [c(0.3), Complex64::new(-0.2, 0.7), c(1.1)];
        let id = CovMatrix::identity(3);
        let f = id.factor().unwrap();
        assert!((f.quad_form(&w) / 3.0 - baseline_theta1(&w)).abs() < 1e-15);
    }

    #[test]
    fn baseline_theta2_centering() {
        let grid = ScaleGrid::new(2.0, 0.0, 0.5, 4, 1).unwrap();
        // identical columns
        let coeffs: Vec<Complex64> = (0..4).flat_map(|m| vec![c(m as f64 + 1.0); 3]).collect();
        let w = TimeScaleTransform::new(coeffs, grid.clone(), vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let (t, flagged) = baseline_theta2(&w);
        assert!(flagged.is_empty());
        assert!(t.iter().all(|v| v.abs() < 1e-15));
        // single active row
        let coeffs: Vec<Complex64> = (0..4)
            .flat_map(|m| vec![c(if m == 2 { 1.0 + m as f64 } else { 0.0 }); 3])
            .collect();
        let w = TimeScaleTransform::new(coeffs, grid.clone(), vec![0.0, 1.0, 2.0], 1.0).unwrap();
        assert!(baseline_theta2(&w).0.iter().all(|v| v.abs() < 1e-15));
        // silent column is flagged and set to zero
        let mut coeffs: Vec<Complex64> = (0..12).map(|i| c(i as f64 * 0.1 + 0.1)).collect();
        for m in 0..4 {
            coeffs[m * 3 + 1] = c(0.0);
        }
        let w = TimeScaleTransform::new(coeffs, grid, vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let (t, flagged) = baseline_theta2(&w);
        assert_eq!(flagged, vec![1]);
        assert_eq!(t[1], 0.0);
        assert!((t[0] + t[2]).abs() < 1e-15);
    }

    #[test]
    fn crlb_theta1_examples() {
        assert_eq!(crlb_theta1(1.0, 106), 2.0 / 106.0);
        assert!((crlb_theta1(1.7, 212) * 2.0 - crlb_theta1(1.7, 106)).abs() < 1e-16);
    }

    #[test]
    fn slepian_bangs_theta1_direction() {
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let grid = ScaleGrid::covering(2.0, spec.omega0(), 400.0, 1500.0, 7, 1).unwrap();
        let c0 = build_c0(0.1, &bumps(), &grid, &spec).unwrap();
        let theta1 = 1.9;
        let c = c0.scaled(theta1);
        let sb = slepian_bangs(&c, c0.matrix()).unwrap();
        let want = crlb_theta1(theta1, grid.len());
        assert!((sb / want - 1.0).abs() < 1e-6);
        let alpha = 3.3;
        let scaled = slepian_bangs(&c.scaled(alpha), &(c0.matrix() * alpha)).unwrap();
        assert!((scaled / sb - 1.0).abs() < 1e-10);
        let zero = DMatrix::zeros(grid.len(), grid.len());
        assert!(matches!(slepian_bangs(&c, &zero), Err(Error::NotIdentifiable)));
    }

    #[test]
    fn crlb_theta2_is_positive_and_finite() {
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let grid = ScaleGrid::covering(2.0, spec.omega0(), 50.0, 3600.0, 106, 7).unwrap();
        let v = crlb_theta2(
            LocalParams {
                theta1: 1.0,
                theta2: 0.0,
            },
            &bumps(),
            &grid.coarse(),
            &spec,
            0.0,
            1e-3,
        )
        .unwrap();
        assert!(v > 0.0 && v.is_finite());
    }

    #[test]
    fn bias_examples() {
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let grid = ScaleGrid::covering(2.0, spec.omega0(), 400.0, 1500.0, 7, 1).unwrap();
        let s = bumps();
        let b0 = bias_theta1(1.3, &s, &s, 0.05, 0.05, &grid, &spec, 0.0, 0.0).unwrap();
        assert!(b0.abs() < 1e-8, "{b0}");
        let b = bias_theta1(1.3, &s, &s.scaled(2.0), 0.05, 0.05, &grid, &spec, 0.0, 0.0).unwrap();
        assert!((b + 0.65).abs() < 1e-8, "{b}");
    }

    #[test]
    fn approximation_bound_constants_and_limits() {
        let span = (0.0, 2.0);
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let s = bumps();
        let a = AmplitudeFn::constant(1.0, span).unwrap();
        let affine = WarpFn::from_derivative(|_| 1.3, span, 1e-3).unwrap();
        let r = theorem1_bound(&a, &affine, &s, &spec, 4.0, 2.0, &[1.0, 2.0]).unwrap();
        assert_eq!(r.constant("rho"), Some(0.5));
        assert_eq!(r.constant("mu"), Some(0.0));
        assert!(r.points.iter().all(|p| p.bound == 0.0));
        assert!(theorem1_bound(&a, &affine, &s, &spec, 2.0, 2.0, &[1.0]).is_err());

        let curved = WarpFn::from_derivative(|t| 1.0 + 0.3 * (3.0 * t).sin(), span, 1e-3).unwrap();
        let scales: Vec<f64> = (0..10).map(|i| 7.0 - i as f64 * 0.7).collect();
        let r = theorem1_bound(&a, &curved, &s, &spec, 4.0, 2.0, &scales).unwrap();
        assert!(r.points.windows(2).all(|w| w[1].bound < w[0].bound));
    }

    #[test]
    fn approximation_bound_monotone_in_constants() {
        let span = (0.0, 2.0);
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let s = bumps();
        let a = AmplitudeFn::constant(1.0, span).unwrap();
        let slow = WarpFn::from_derivative(|t| 1.0 + 0.1 * t.sin(), span, 1e-3).unwrap();
        let fast = WarpFn::from_derivative(|t| 1.0 + 0.1 * (2.0 * t).sin(), span, 1e-3).unwrap();
        let b_slow = theorem1_bound(&a, &slow, &s, &spec, 4.0, 2.0, &[3.0]).unwrap();
        let b_fast = theorem1_bound(&a, &fast, &s, &spec, 4.0, 2.0, &[3.0]).unwrap();
        assert!(b_fast.points[0].bound > b_slow.points[0].bound);
        let a_big = AmplitudeFn::constant(2.0, span).unwrap();
        let big = theorem1_bound(&a_big, &slow, &s, &spec, 4.0, 2.0, &[3.0]).unwrap();
        assert!(big.constant("k3").unwrap() < b_slow.constant("k3").unwrap());
    }

    #[test]
    fn bias_bound_linear_and_zero() {
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let grid = ScaleGrid::covering(2.0, spec.omega0(), 400.0, 1500.0, 7, 1).unwrap();
        let s = bumps();
        let zero = prop1_bias_bound(&spec, &s, &grid, 0.5, 0.0, 0.0).unwrap();
        assert!(zero.points.iter().all(|p| p.bound == 0.0));
        let b1 = prop1_bias_bound(&spec, &s, &grid, 0.5, 0.1, 0.0).unwrap().points[0].bound;
        let b2 = prop1_bias_bound(&spec, &s, &grid, 0.5, 0.2, 0.0).unwrap().points[0].bound;
        assert!((b2 / b1 - 2.0).abs() < 1e-12);
        let c1 = prop1_bias_bound(&spec, &s, &grid, 0.5, 0.0, 0.05).unwrap().points[0].bound;
        let c3 = prop1_bias_bound(&spec, &s, &grid, 0.5, 0.0, 0.15).unwrap().points[0].bound;
        assert!((c3 / c1 - 3.0).abs() < 1e-12);
        let dc = PowerSpectrum::new(vec![0.0, 100.0], vec![1.0, 1.0], 4000.0).unwrap();
        assert!(matches!(
            prop1_bias_bound(&spec, &dc, &grid, 0.5, 0.1, 0.1),
            Err(Error::DivergentLowFrequencyIntegral)
        ));
    }

    #[test]
    fn mse_examples() {
        let t1 = [0.5, 1.0, 1.5];
        let t2 = [0.1, -0.2, 0.1];
        let truth = Trajectories { theta1: &t1, theta2: &t2 };
        let r = mse_report(truth, truth, truth);
        assert_eq!(r.algorithm, MsePair { amplitude: 0.0, warping: 0.0 });
        let shifted: Vec<f64> = t2.iter().map(|v| v + 0.3).collect();
        let r = mse_pair(Trajectories { theta1: &t1, theta2: &shifted }, truth);
        assert!((r.warping - 0.09).abs() < 1e-15);
        // amplitude is compared up to a constant factor
        let scaled: Vec<f64> = t1.iter().map(|v| v * 250.0).collect();
        assert!(amplitude_mse(&scaled, &t1) < 1e-24);
    }

    #[test]
    fn report_counts_violations() {
        let r = BoundReport {
            constants: BTreeMap::new(),
            points: vec![
                BoundPoint { scale: 0.0, at: 0.0, bound: 1.0, empirical: Some(0.5) },
                BoundPoint { scale: 0.0, at: 0.0, bound: 1.0, empirical: Some(1.5) },
                BoundPoint { scale: 0.0, at: 0.0, bound: 1.0, empirical: None },
            ],
        };
        assert_eq!(r.violations(), 1);
        assert_eq!(r.margin(), Some(-0.5));
    }
}
