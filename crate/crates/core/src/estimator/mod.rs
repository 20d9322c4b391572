//! Approximate maximum-likelihood estimation of amplitude, warping and spectrum.

mod frame;
mod spectral;

pub use frame::{
    dense_log_density, estimate_theta1_closed_form, estimate_theta1_noisy, estimate_theta2,
    frame_log_likelihood, FrameModel,
};
pub use spectral::{spectrum_estimate, unwarp_coeffs, welch_psd};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interp::{cumulative_trapezoid, CubicSpline};
use crate::optimize::AscentConfig;
use crate::signal::{deform_with, AmplitudeFn, BandlimitedInterpolator, PowerSpectrum, SampledSignal, WarpFn};
use crate::wavelet::{cwt_at, ScaleGrid, TimeScaleTransform, WaveletSpec};

/// How each frame's `θ2` update searches the coarse-grid likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theta2Search {
    /// Scan the profile likelihood `max_θ1 ℒ(θ1, ·)` over the whole `θ2` range in steps of
    /// the fine scale step, then refine the best point by gradient ascent.
    #[default]
    Global,
    /// Gradient ascent of `ℒ(θ̃1, ·)` from the previous iterate (0 at the first pass).
    /// Cheaper, but the likelihood oscillates with the coarse scale step and large
    /// deformations get trapped in side modes.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    /// Stopping threshold `T` on the relative parameter update.
    pub threshold: f64,
    /// `k_max`
    pub max_iters: usize,
    pub ascent: AscentConfig,
    /// Samples between estimation frames.
    pub stride: usize,
    /// White-noise spectral density `σ_W²`; 0 selects the clean model.
    pub noise_level: f64,
    /// Covariance regularization `r`, relative to the mean diagonal of the matrix.
    pub regularization: f64,
    /// Frames closer than `margin · q^{s_max}/ν0` seconds to either end are dropped.
    pub margin: f64,
    /// `θ1` is clamped to at least `theta1_floor · median(θ1)`.
    pub theta1_floor: f64,
    pub theta2_search: Theta2Search,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            threshold: 1e-3,
            max_iters: 30,
            ascent: AscentConfig::default(),
            stride: 64,
            noise_level: 0.0,
            regularization: 1e-5,
            margin: 4.0,
            theta1_floor: 1e-8,
            theta2_search: Theta2Search::Global,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid("threshold", "stopping threshold must lie in (0, 1)"));
        }
        if self.max_iters < 1 {
            return Err(invalid("max_iters", "need at least one iteration"));
        }
        if self.stride < 1 {
            return Err(invalid("stride", "must be at least 1"));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(invalid("noise_level", "must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.regularization) {
            return Err(invalid("regularization", "must lie in [0, 1)"));
        }
        if !(self.margin >= 0.0) {
            return Err(invalid("margin", "must be nonnegative"));
        }
        if !(self.theta1_floor > 0.0 && self.theta1_floor < 1.0) {
            return Err(invalid("theta1_floor", "must lie in (0, 1)"));
        }
        let a = &self.ascent;
        if !(a.initial_step > 0.0 && a.backtrack > 0.0 && a.backtrack < 1.0 && a.max_iters >= 1)
            || !(a.grad_tol > 0.0 && a.fd_step > 0.0)
        {
            return Err(invalid("ascent", "needs positive step, tolerance and FD step, backtrack in (0, 1), max_iters ≥ 1"));
        }
        Ok(())
    }
}

/// Outcome of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// Relative changes; infinite when the previous iterate is zero (JSON `null`).
    #[serde(deserialize_with = "null_as_infinity")]
    pub criterion_theta1: f64,
    #[serde(deserialize_with = "null_as_infinity")]
    pub criterion_theta2: f64,
    /// Frames whose inner `θ2` ascent hit its iteration cap.
    pub unconverged_frames: usize,
    /// Frames whose covariance could not be factored (previous values kept).
    pub failed_frames: usize,
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Iterates and final curves of the joint estimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationState {
    pub fs: f64,
    pub q: f64,
    pub frame_indices: Vec<usize>,
    pub frame_times: Vec<f64>,
    /// `θ̃1^(k)` for `k = 0..=K`.
    pub theta1: Vec<Vec<f64>>,
    /// `θ̃2^(k)` for `k = 0..=K`.
    pub theta2: Vec<Vec<f64>>,
    /// `θ̃3 = γ̃(τ_n)` from the final iterate.
    pub theta3: Vec<f64>,
    /// `S̃_X^(k)` for `k = 0..=K`.
    pub spectra: Vec<PowerSpectrum>,
    pub reports: Vec<IterationReport>,
    pub converged: bool,
    /// `ã(t_i)` on the full sample grid.
    pub amplitude: Vec<f64>,
    /// `γ̃(t_i)`
    pub warp: Vec<f64>,
    /// `γ̃′(t_i)`
    pub warp_deriv: Vec<f64>,
}

impl EstimationState {
    pub fn iterations(&self) -> usize {
        self.reports.len()
    }

    pub fn final_theta1(&self) -> &[f64] {
        self.theta1.last().expect("state holds the initial iterate")
    }

    pub fn final_theta2(&self) -> &[f64] {
        self.theta2.last().expect("state holds the initial iterate")
    }

    pub fn final_spectrum(&self) -> &PowerSpectrum {
        self.spectra.last().expect("state holds the initial iterate")
    }

    pub fn criteria(&self) -> Vec<(f64, f64)> {
        self.reports
            .iter()
            .map(|r| (r.criterion_theta1, r.criterion_theta2))
            .collect()
    }

    fn span(&self) -> (f64, f64) {
        (0.0, (self.warp.len().max(2) - 1) as f64 / self.fs)
    }

    /// `ã` as a function of continuous time.
    pub fn amplitude_fn(&self) -> Result<AmplitudeFn> {
        let th1 = self.final_theta1();
        let floor = th1.iter().cloned().fold(f64::INFINITY, f64::min).max(f64::MIN_POSITIVE);
        let curve = FrameCurve::new(&self.frame_times, th1);
        let curve2 = curve.clone();
        AmplitudeFn::new(
            move |t| curve.eval(t).max(floor).sqrt(),
            move |t| {
                let v = curve2.eval(t).max(floor);
                0.5 * curve2.deriv(t) / v.sqrt()
            },
            self.span(),
        )
    }

    /// `γ̃` with `γ̃(0) = 0`.
    pub fn warp_fn(&self) -> Result<WarpFn> {
        let curve = FrameCurve::new(&self.frame_times, self.final_theta2());
        let ln_q = self.q.ln();
        WarpFn::from_derivative(move |t| (curve.eval(t) * ln_q).exp(), self.span(), 1.0 / self.fs)
    }
}

/// Natural cubic spline through frame values with constant extrapolation.
#[derive(Debug, Clone)]
struct FrameCurve {
    spline: Option<CubicSpline>,
    lo: (f64, f64),
    hi: (f64, f64),
}

impl FrameCurve {
    fn new(times: &[f64], values: &[f64]) -> Self {
        let n = times.len();
        let spline = (n >= 2).then(|| CubicSpline::natural(times, values));
        Self {
            spline,
            lo: (times[0], values[0]),
            hi: (times[n - 1], values[n - 1]),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        match &self.spline {
            None => self.lo.1,
            Some(_) if t <= self.lo.0 => self.lo.1,
            Some(_) if t >= self.hi.0 => self.hi.1,
            Some(s) => s.eval(t),
        }
    }

    fn deriv(&self, t: f64) -> f64 {
        match &self.spline {
            Some(s) if t > self.lo.0 && t < self.hi.0 => s.deriv(t),
            _ => 0.0,
        }
    }
}

/// Sample indices of the estimation frames: every `stride` samples, away from the edges.
pub fn frame_indices(n: usize, fs: f64, cfg: &EstimationConfig, grid: &ScaleGrid, spec: &WaveletSpec) -> Vec<usize> {
    let margin = cfg.margin * grid.q().powf(grid.s_max()) / spec.nu0();
    let margin_samples = (margin * fs).ceil() as usize;
    (0..n)
        .step_by(cfg.stride)
        .filter(|&i| i >= margin_samples && i + margin_samples < n)
        .collect()
}

/// Stopping criterion `‖new − old‖² / ‖old‖²`.
pub fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let num: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = old.iter().map(|b| b * b).sum();
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn apply_floor(theta1: &mut [f64], rel: f64) -> Result<()> {
    let med = median(theta1);
    if !(med > 0.0) {
        return Err(Error::NotIdentifiable);
    }
    let floor = rel * med;
    theta1.iter_mut().for_each(|t| *t = t.max(floor));
    Ok(())
}

/// Pins the constants left free by the model: `a` is identifiable only up to a factor
/// and `γ` only up to an affine map, and both are absorbed by `S̃_X`. We fix
/// `mean θ1 = 1` and `mean q^{θ2} = 1` over the frames.
fn normalize(theta1: &mut [f64], theta2: &mut [f64], q: f64) {
    let m1 = theta1.iter().sum::<f64>() / theta1.len() as f64;
    if m1 > 0.0 && m1.is_finite() {
        theta1.iter_mut().for_each(|t| *t /= m1);
    }
    let ln_q = q.ln();
    let m2 = theta2.iter().map(|t| (t * ln_q).exp()).sum::<f64>() / theta2.len() as f64;
    let shift = m2.ln() / ln_q;
    if shift.is_finite() {
        theta2.iter_mut().for_each(|t| *t -= shift);
    }
}

/// `S̃_X` from the unwarped transform, minus the white-noise level carried by `W_y/√θ1`.
fn spectrum_update(
    wx: &TimeScaleTransform,
    spec: &WaveletSpec,
    theta1: &[f64],
    noise_level: f64,
) -> Result<PowerSpectrum> {
    let s = spectrum_estimate(wx, spec)?;
    if noise_level == 0.0 {
        return Ok(s);
    }
    let level = noise_level * theta1.iter().map(|t| 1.0 / t).sum::<f64>() / theta1.len() as f64;
    Ok(s.offset(-level))
}

/// Alternating estimation of `(θ1, θ2)` per frame and of the spectrum.
pub fn run_joint_estimation(
    y: &SampledSignal,
    cfg: &EstimationConfig,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
) -> Result<EstimationState> {
    run_joint_estimation_with(y, cfg, grid, spec, |_| {})
}

/// [`run_joint_estimation`] with a callback after every outer iteration.
pub fn run_joint_estimation_with(
    y: &SampledSignal,
    cfg: &EstimationConfig,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
    mut on_iteration: impl FnMut(&IterationReport),
) -> Result<EstimationState> {
    cfg.validate()?;
    let fs = y.fs();
    grid.validate_for(fs, spec.omega0())?;
    let frames = frame_indices(y.len(), fs, cfg, grid, spec);
    if frames.is_empty() {
        return Err(Error::SignalTooShort {
            len: y.len(),
            min: 2 * (cfg.margin * grid.q().powf(grid.s_max()) / spec.nu0() * fs).ceil() as usize + 1,
        });
    }
    let wy = cwt_at(y, grid, spec, &frames)?;
    let wy_coarse = wy.coarse();
    let nyquist = fs / 2.0;
    let fine = FrameModel::new(grid, spec, nyquist, cfg.noise_level, cfg.regularization)?;
    let coarse = FrameModel::new(&grid.coarse(), spec, nyquist, cfg.noise_level, cfg.regularization)?;
    let nf = frames.len();
    let fine_cols: Vec<Vec<_>> = (0..nf).map(|n| wy.column(n)).collect();
    let coarse_cols: Vec<Vec<_>> = (0..nf).map(|n| wy_coarse.column(n)).collect();

    let mut theta1 = vec![1.0; nf];
    let mut theta2 = vec![0.0; nf];
    let mut spectrum = spectrum_update(&wy, spec, &theta1, cfg.noise_level)?;
    let mut state = EstimationState {
        fs,
        q: grid.q(),
        frame_times: frames.iter().map(|&i| i as f64 / fs).collect(),
        frame_indices: frames,
        theta1: vec![theta1.clone()],
        theta2: vec![theta2.clone()],
        theta3: Vec::new(),
        spectra: vec![spectrum.clone()],
        reports: Vec::new(),
        converged: false,
        amplitude: Vec::new(),
        warp: Vec::new(),
        warp_deriv: Vec::new(),
    };

    for k in 1..=cfg.max_iters {
        let updates: Vec<Option<(f64, f64, bool)>> = (0..nf)
            .into_par_iter()
            .map(|n| {
                let col = &coarse_cols[n];
                let a2 = match cfg.theta2_search {
                    Theta2Search::Local => coarse
                        .theta2_ascent(col, theta1[n], &spectrum, theta2[n], &cfg.ascent)
                        .ok()?,
                    Theta2Search::Global => {
                        let start = coarse
                            .theta2_scan(col, &spectrum, grid.step(), theta1[n], &cfg.ascent)
                            .ok()?;
                        coarse
                            .theta2_profile_ascent(col, &spectrum, start, theta1[n], &cfg.ascent)
                            .ok()?
                    }
                };
                let t1 = if fine.is_noisy() {
                    fine.theta1_noisy(&fine_cols[n], a2.x, &spectrum, theta1[n], &cfg.ascent)
                        .ok()?
                        .x
                } else {
                    fine.theta1_closed_form(&fine_cols[n], a2.x, &spectrum).ok()?
                };
                t1.is_finite().then_some((t1, a2.x, a2.converged))
            })
            .collect();
        let mut new1 = theta1.clone();
        let mut new2 = theta2.clone();
        let (mut failed, mut unconverged) = (0, 0);
        for (n, u) in updates.into_iter().enumerate() {
            match u {
                Some((t1, t2, ok)) => {
                    new1[n] = t1;
                    new2[n] = t2;
                    unconverged += usize::from(!ok);
                }
                None => failed += 1,
            }
        }
        apply_floor(&mut new1, cfg.theta1_floor)?;
        normalize(&mut new1, &mut new2, grid.q());
        let report = IterationReport {
            iteration: k,
            criterion_theta1: relative_change(&new1, &theta1),
            criterion_theta2: relative_change(&new2, &theta2),
            unconverged_frames: unconverged,
            failed_frames: failed,
        };
        theta1 = new1;
        theta2 = new2;
        let wx = unwarp_coeffs(&wy, &theta1, &theta2)?;
        spectrum = spectrum_update(&wx, spec, &theta1, cfg.noise_level)?;
        state.theta1.push(theta1.clone());
        state.theta2.push(theta2.clone());
        state.spectra.push(spectrum.clone());
        state.reports.push(report);
        on_iteration(&report);
        if report.criterion_theta1 < cfg.threshold && report.criterion_theta2 < cfg.threshold {
            state.converged = true;
            break;
        }
    }

    finalize(&mut state, y.len(), cfg.theta1_floor);
    Ok(state)
}

/// Interpolates the final frame estimates onto every sample and integrates `γ̃′`.
fn finalize(state: &mut EstimationState, n: usize, rel_floor: f64) {
    let fs = state.fs;
    let th1 = state.final_theta1().to_vec();
    let floor = rel_floor * median(&th1);
    let c1 = FrameCurve::new(&state.frame_times, &th1);
    let c2 = FrameCurve::new(&state.frame_times, state.final_theta2());
    let ln_q = state.q.ln();
    state.amplitude = (0..n).map(|i| c1.eval(i as f64 / fs).max(floor).sqrt()).collect();
    state.warp_deriv = (0..n).map(|i| (c2.eval(i as f64 / fs) * ln_q).exp()).collect();
    state.warp = cumulative_trapezoid(&state.warp_deriv, 1.0 / fs);
    state.theta3 = state.frame_indices.iter().map(|&i| state.warp[i]).collect();
}

/// `x̃ = D_{γ̃⁻¹} A_{ã⁻¹} y` on the uniform grid covering `[0, γ̃(t_F)]`.
pub fn stationarize(y: &SampledSignal, state: &EstimationState) -> Result<SampledSignal> {
    let gamma = state.warp_fn()?;
    let inv = gamma.inverse()?;
    let amp = state.amplitude_fn()?;
    let end = gamma.eval(gamma.span().1);
    let n_out = (end * y.fs() + 1e-6).floor() as usize + 1;
    let interp = BandlimitedInterpolator::new(y);
    let inv2 = inv.clone();
    deform_with(&interp, move |t| 1.0 / amp.eval(inv2.eval(t)), &inv, n_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(EstimationConfig::default().validate().is_ok());
        for bad in [
            EstimationConfig { threshold: 0.0, ..Default::default() },
            EstimationConfig { threshold: 1.0, ..Default::default() },
            EstimationConfig { max_iters: 0, ..Default::default() },
            EstimationConfig { regularization: 1.0, ..Default::default() },
            EstimationConfig { noise_level: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn stopping_criterion_is_scale_invariant() {
        let old = [1.0, 2.0, 3.0];
        let new = [1.1, 2.0, 2.9];
        let c = relative_change(&new, &old);
        let k = 37.0;
        let old_k: Vec<f64> = old.iter().map(|v| v * k).collect();
        let new_k: Vec<f64> = new.iter().map(|v| v * k).collect();
        assert!((relative_change(&new_k, &old_k) - c).abs() < 1e-15);
        assert_eq!(relative_change(&[0.1], &[0.0]), f64::INFINITY);
        assert_eq!(relative_change(&[0.0], &[0.0]), 0.0);
    }

    #[test]
    fn floor_clamps_relative_to_median() {
        let mut t = vec![0.0, 1.0, 2.0, 3.0];
        apply_floor(&mut t, 1e-8).unwrap();
        assert!((t[0] - 1.5e-8).abs() < 1e-20);
        assert!(apply_floor(&mut [0.0, 0.0, 0.0], 1e-8).is_err());
    }

    #[test]
    fn frame_curve_interpolates_and_holds_ends() {
        let times = [1.0, 2.0, 3.0, 4.0];
        let vals = [0.5, -0.2, 0.3, 0.1];
        let c = FrameCurve::new(&times, &vals);
        for (t, v) in times.iter().zip(vals) {
            assert!((c.eval(*t) - v).abs() < 1e-12);
        }
        assert_eq!(c.eval(0.0), 0.5);
        assert_eq!(c.eval(9.0), 0.1);
        assert_eq!(FrameCurve::new(&[1.0], &[0.7]).eval(5.0), 0.7);
    }
}
