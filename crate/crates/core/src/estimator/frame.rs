use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::covariance::{regularize_relative, CovMatrix, CovarianceModel, LocalParams};
use crate::error::{invalid, Error, Result};
use crate::optimize::{gradient_ascent, AscentConfig, AscentResult};
use crate::signal::PowerSpectrum;
use crate::wavelet::{ScaleGrid, WaveletSpec};

/// Per-frame Gaussian model of a coefficient column on one scale grid.
///
/// Clean model: `C = θ1 C0r(θ2)`; noisy model: `C = θ1 C0r(θ2) + σ_W² B`, where `C0r`
/// and `B` are the relatively regularized clean and white-noise covariances.
#[derive(Debug, Clone)]
pub struct FrameModel {
    cov: CovarianceModel,
    white: Option<CovMatrix>,
    q: f64,
    r: f64,
    noise_level: f64,
    theta2_bounds: (f64, f64),
}

impl FrameModel {
    pub fn new(
        grid: &ScaleGrid,
        spec: &WaveletSpec,
        nyquist: f64,
        noise_level: f64,
        r: f64,
    ) -> Result<Self> {
        if !(noise_level >= 0.0 && noise_level.is_finite()) {
            return Err(invalid("noise_level", "σ_W² must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&r) {
            return Err(invalid("regularization", "r must lie in [0, 1)"));
        }
        let cov = CovarianceModel::new(grid, spec, nyquist);
        let white = if noise_level > 0.0 {
            Some(regularize_relative(&cov.white(), r.max(1e-10))?)
        } else {
            None
        };
        let half = 0.5 * (grid.s_max() - grid.s_min());
        Ok(Self {
            cov,
            white,
            q: grid.q(),
            r,
            noise_level,
            theta2_bounds: (-half, half),
        })
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn is_noisy(&self) -> bool {
        self.white.is_some()
    }

    pub fn theta2_bounds(&self) -> (f64, f64) {
        self.theta2_bounds
    }

    /// Regularized clean covariance `C0r(θ2)`.
    pub fn c0(&self, theta2: f64, spectrum: &PowerSpectrum) -> Result<CovMatrix> {
        regularize_relative(&self.cov.c0(theta2, spectrum, self.q), self.r)
    }

    pub fn covariance(&self, params: LocalParams, spectrum: &PowerSpectrum) -> Result<CovMatrix> {
        let c0 = self.c0(params.theta2, spectrum)?;
        Ok(match &self.white {
            None => c0.scaled(params.theta1),
            Some(b) => CovMatrix::new(
                c0.matrix() * params.theta1 + b.matrix() * self.noise_level,
                crate::covariance::Provenance::Noisy {
                    noise_level: self.noise_level,
                },
            ),
        })
    }

    fn check_len(&self, w: &[Complex64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// `ℒ = −½ ln|det C| − ½ ⟨C⁻¹w, w⟩`.
    pub fn log_likelihood(
        &self,
        params: LocalParams,
        w: &[Complex64],
        spectrum: &PowerSpectrum,
    ) -> Result<f64> {
        self.check_len(w)?;
        let f = self.covariance(params, spectrum)?.factor()?;
        Ok(-0.5 * f.log_det() - 0.5 * f.quad_form(w))
    }

    /// `θ̃1 = ⟨C0r(θ2)⁻¹w, w⟩ / M_s` (clean model).
    pub fn theta1_closed_form(
        &self,
        w: &[Complex64],
        theta2: f64,
        spectrum: &PowerSpectrum,
    ) -> Result<f64> {
        self.check_len(w)?;
        let f = self.c0(theta2, spectrum)?.factor()?;
        Ok(f.quad_form(w) / w.len() as f64)
    }

    /// Gradient ascent of `θ2 ↦ ℒ(θ1, θ2)` from `init`.
    pub fn theta2_ascent(
        &self,
        w: &[Complex64],
        theta1: f64,
        spectrum: &PowerSpectrum,
        init: f64,
        cfg: &AscentConfig,
    ) -> Result<AscentResult> {
        self.check_len(w)?;
        let f = |theta2: f64| self.log_likelihood(LocalParams { theta1, theta2 }, w, spectrum).ok();
        let res = gradient_ascent(f, init, self.theta2_bounds, cfg);
        if !res.value.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(res)
    }

    /// Profile log-likelihood `max_θ1 ℒ(θ1, θ2)`: closed form for the clean model, inner
    /// ascent from `theta1_init` for the noisy one.
    pub fn profile_log_likelihood(
        &self,
        w: &[Complex64],
        theta2: f64,
        spectrum: &PowerSpectrum,
        theta1_init: f64,
        cfg: &AscentConfig,
    ) -> Result<f64> {
        self.check_len(w)?;
        if self.is_noisy() {
            return Ok(self.theta1_noisy(w, theta2, spectrum, theta1_init, cfg)?.value);
        }
        let m = w.len() as f64;
        let f = self.c0(theta2, spectrum)?.factor()?;
        let t1 = f.quad_form(w) / m;
        if !(t1 > 0.0) {
            return Err(Error::NotIdentifiable);
        }
        Ok(-0.5 * f.log_det() - 0.5 * m * t1.ln() - 0.5 * m)
    }

    /// Gradient ascent of the profile log-likelihood over `θ2` from `init`.
    pub fn theta2_profile_ascent(
        &self,
        w: &[Complex64],
        spectrum: &PowerSpectrum,
        init: f64,
        theta1_init: f64,
        cfg: &AscentConfig,
    ) -> Result<AscentResult> {
        self.check_len(w)?;
        let f = |theta2: f64| self.profile_log_likelihood(w, theta2, spectrum, theta1_init, cfg).ok();
        let res = gradient_ascent(f, init, self.theta2_bounds, cfg);
        if !res.value.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(res)
    }

    /// Best point of the profile log-likelihood on `θ2 ∈ {lo, lo + step, …} ∩ bounds`.
    pub fn theta2_scan(
        &self,
        w: &[Complex64],
        spectrum: &PowerSpectrum,
        step: f64,
        theta1_init: f64,
        cfg: &AscentConfig,
    ) -> Result<f64> {
        if !(step > 0.0) {
            return Err(invalid("step", "scan step must be positive"));
        }
        let (lo, hi) = self.theta2_bounds;
        let count = ((hi - lo) / step).floor() as usize;
        (0..=count)
            .map(|j| lo + j as f64 * step)
            .filter_map(|t2| {
                self.profile_log_likelihood(w, t2, spectrum, theta1_init, cfg)
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(|v| (t2, v))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t2, _)| t2)
            .ok_or(Error::NotPositiveDefinite)
    }

    /// Noisy-model `θ1` by gradient ascent over `ln θ1`.
    ///
    /// The likelihood is evaluated in the basis that whitens `B` and diagonalizes
    /// `C0r`, so each evaluation costs `O(M_s)`.
    pub fn theta1_noisy(
        &self,
        w: &[Complex64],
        theta2: f64,
        spectrum: &PowerSpectrum,
        init: f64,
        cfg: &AscentConfig,
    ) -> Result<AscentResult> {
        self.check_len(w)?;
        let b = self
            .white
            .as_ref()
            .ok_or_else(|| invalid("noise_level", "noisy θ1 needs σ_W² > 0"))?;
        let sigma2 = self.noise_level;
        let chol = nalgebra::Cholesky::new(b.matrix().clone()).ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let c0 = self.c0(theta2, spectrum)?;
        let m = self.dim();
        // A = L⁻¹ C0r L⁻ᵀ
        let linv_c0 = l
            .solve_lower_triangular(c0.matrix())
            .ok_or(Error::NotPositiveDefinite)?;
        let a = l
            .solve_lower_triangular(&linv_c0.transpose())
            .ok_or(Error::NotPositiveDefinite)?;
        let a = (&a + a.transpose()) * 0.5;
        let eig = a.symmetric_eigen();
        let whiten = |v: DVector<f64>| -> Result<DVector<f64>> {
            let y = l.solve_lower_triangular(&v).ok_or(Error::NotPositiveDefinite)?;
            Ok(eig.eigenvectors.transpose() * y)
        };
        let zr = whiten(DVector::from_iterator(m, w.iter().map(|c| c.re)))?;
        let zi = whiten(DVector::from_iterator(m, w.iter().map(|c| c.im)))?;
        let energy: Vec<f64> = zr.iter().zip(zi.iter()).map(|(a, b)| a * a + b * b).collect();
        let lambda: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        let ll = |u: f64| {
            let t1 = u.exp();
            let mut acc = 0.0;
            for (lam, e) in lambda.iter().zip(&energy) {
                let d = t1 * lam + sigma2;
                acc += d.ln() + e / d;
            }
            Some(-0.5 * acc)
        };
        let u0 = init.max(1e-300).ln();
        // unimodal in ln θ1, which may sit many nats from the start: allow long steps
        let log_cfg = AscentConfig {
            initial_step: cfg.initial_step.max(1.0),
            max_iters: cfg.max_iters.max(200),
            ..*cfg
        };
        let mut res = gradient_ascent(ll, u0, (u0 - 40.0, u0 + 40.0), &log_cfg);
        res.x = res.x.exp();
        // report on the same scale as `log_likelihood`
        res.value -= 0.5 * 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(res)
    }
}

/// `ℒ(Θn)` for one coefficient column.
pub fn frame_log_likelihood(
    params: LocalParams,
    w: &[Complex64],
    spectrum: &PowerSpectrum,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
    noise_level: f64,
    r: f64,
) -> Result<f64> {
    FrameModel::new(grid, spec, spectrum.nyquist(), noise_level, r)?.log_likelihood(params, w, spectrum)
}

pub fn estimate_theta1_closed_form(
    w: &[Complex64],
    theta2: f64,
    spectrum: &PowerSpectrum,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
    r: f64,
) -> Result<f64> {
    FrameModel::new(grid, spec, spectrum.nyquist(), 0.0, r)?.theta1_closed_form(w, theta2, spectrum)
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_theta2(
    w_coarse: &[Complex64],
    theta1: f64,
    spectrum: &PowerSpectrum,
    coarse: &ScaleGrid,
    spec: &WaveletSpec,
    noise_level: f64,
    r: f64,
    init: f64,
    cfg: &AscentConfig,
) -> Result<AscentResult> {
    FrameModel::new(coarse, spec, spectrum.nyquist(), noise_level, r)?
        .theta2_ascent(w_coarse, theta1, spectrum, init, cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_theta1_noisy(
    w: &[Complex64],
    theta2: f64,
    spectrum: &PowerSpectrum,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
    noise_level: f64,
    r: f64,
    init: f64,
    cfg: &AscentConfig,
) -> Result<AscentResult> {
    FrameModel::new(grid, spec, spectrum.nyquist(), noise_level, r)?
        .theta1_noisy(w, theta2, spectrum, init, cfg)
}

/// Dense log-density of a circular complex Gaussian vector, up to the `ln π` constant
/// and with the project-wide ½ factor. Used as an oracle in tests.
#[doc(hidden)]
pub fn dense_log_density(c: &DMatrix<f64>, w: &[Complex64]) -> f64 {
    let lu = c.clone().lu();
    let det = lu.determinant();
    let inv = lu.try_inverse().expect("invertible");
    let m = w.len();
    let mut q = Complex64::new(0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            q += w[i].conj() * inv[(i, j)] * w[j];
        }
    }
    -0.5 * det.abs().ln() - 0.5 * q.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synth_spectrum, SpectralBump};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_setup(m: usize) -> (ScaleGrid, WaveletSpec, PowerSpectrum) {
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        let grid = ScaleGrid::covering(2.0, spec.omega0(), 300.0, 1500.0, m, 1).unwrap();
        let s = synth_spectrum(
            &[SpectralBump::new(600.0, 400.0), SpectralBump::new(1200.0, 800.0)],
            8000.0,
        )
        .unwrap();
        (grid, spec, s)
    }

    fn random_w(m: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn likelihood_matches_dense_oracle() {
        let (grid, spec, s) = small_setup(5);
        let w = random_w(5, 3);
        let p = LocalParams {
            theta1: 1.3,
            theta2: 0.1,
        };
        for noise in [0.0, 0.02] {
            let model = FrameModel::new(&grid, &spec, 4000.0, noise, 1e-3).unwrap();
            let c = model.covariance(p, &s).unwrap();
            let got = model.log_likelihood(p, &w, &s).unwrap();
            let want = dense_log_density(c.matrix(), &w);
            assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn identity_covariance_likelihood() {
        let spec = WaveletSpec::sharp(4000.0).unwrap();
        // scales two octaves apart do not overlap: C0 is diagonal with entries S0 ‖ψ‖²
        let grid = ScaleGrid::new(2.0, 1.0, 2.5, 3, 1).unwrap();
        let s0 = 1.0 / spec.norm_sq();
        let flat = PowerSpectrum::flat(s0, 1.0, 4000.0, 4000.0).unwrap();
        let model = FrameModel::new(&grid, &spec, 4000.0, 0.0, 0.0).unwrap();
        let c = model.c0(0.0, &flat).unwrap();
        assert!((c.matrix() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-9);
        let w = random_w(3, 9);
        let p = LocalParams {
            theta1: 1.0,
            theta2: 0.0,
        };
        let ll = model.log_likelihood(p, &w, &flat).unwrap();
        let norm: f64 = w.iter().map(|c| c.norm_sqr()).sum();
        assert!((ll + norm / 2.0).abs() < 1e-8);
        // ‖w‖² = M_s gives θ̃1 = 1
        let k = (3.0 / norm).sqrt();
        let w1: Vec<Complex64> = w.iter().map(|c| c * k).collect();
        assert!((model.theta1_closed_form(&w1, 0.0, &flat).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(model.theta1_closed_form(&[Complex64::new(0.0, 0.0); 3], 0.0, &flat).unwrap(), 0.0);
    }

    #[test]
    fn likelihood_scaling_identity() {
        let (grid, spec, s) = small_setup(6);
        let model = FrameModel::new(&grid, &spec, 4000.0, 0.0, 1e-3).unwrap();
        let w = random_w(6, 5);
        let (t1, t2, alpha) = (0.8, -0.05, 2.7);
        let base = model.log_likelihood(LocalParams { theta1: t1, theta2: t2 }, &w, &s).unwrap();
        let scaled = model
            .log_likelihood(LocalParams { theta1: alpha * t1, theta2: t2 }, &w, &s)
            .unwrap();
        let quad = model.covariance(LocalParams { theta1: t1, theta2: t2 }, &s).unwrap().factor().unwrap().quad_form(&w);
        let want = base + 6.0 * (-0.5 * alpha.ln()) - 0.5 * (1.0 / alpha - 1.0) * quad;
        assert!((scaled - want).abs() < 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn closed_form_matches_grid_search() {
        let (grid, spec, s) = small_setup(8);
        let model = FrameModel::new(&grid, &spec, 4000.0, 0.0, 1e-3).unwrap();
        let w: Vec<Complex64> = random_w(8, 11).iter().map(|c| c * 0.05).collect();
        let t2 = 0.07;
        let closed = model.theta1_closed_form(&w, t2, &s).unwrap();
        let step = closed / 200.0;
        let best = (1..1000)
            .map(|i| i as f64 * step)
            .max_by(|a, b| {
                let la = model.log_likelihood(LocalParams { theta1: *a, theta2: t2 }, &w, &s).unwrap();
                let lb = model.log_likelihood(LocalParams { theta1: *b, theta2: t2 }, &w, &s).unwrap();
                la.total_cmp(&lb)
            })
            .unwrap();
        assert!((best - closed).abs() <= step, "{best} vs {closed}");
    }

    #[test]
    fn theta2_ascent_never_decreases_likelihood() {
        let (grid, spec, s) = small_setup(8);
        let model = FrameModel::new(&grid, &spec, 4000.0, 0.0, 1e-3).unwrap();
        for seed in 0..5 {
            let w: Vec<Complex64> = random_w(8, seed).iter().map(|c| c * 0.1).collect();
            let init = 0.05 * seed as f64 - 0.1;
            let l0 = model.log_likelihood(LocalParams { theta1: 1.0, theta2: init }, &w, &s).unwrap();
            let r = model.theta2_ascent(&w, 1.0, &s, init, &AscentConfig::default()).unwrap();
            assert!(r.value >= l0);
        }
    }

    #[test]
    fn noisy_theta1_approaches_closed_form() {
        let (grid, spec, s) = small_setup(8);
        let w: Vec<Complex64> = random_w(8, 21).iter().map(|c| c * 0.2).collect();
        let clean = FrameModel::new(&grid, &spec, 4000.0, 0.0, 1e-3)
            .unwrap()
            .theta1_closed_form(&w, 0.0, &s)
            .unwrap();
        let noisy = FrameModel::new(&grid, &spec, 4000.0, 1e-9, 1e-3).unwrap();
        let cfg = AscentConfig {
            max_iters: 500,
            grad_tol: 1e-9,
            ..Default::default()
        };
        let r = noisy.theta1_noisy(&w, 0.0, &s, 1.0, &cfg).unwrap();
        assert!((r.x / clean - 1.0).abs() < 0.01, "{} vs {clean}", r.x);
        // reported value is the full noisy likelihood
        let direct = noisy
            .log_likelihood(LocalParams { theta1: r.x, theta2: 0.0 }, &w, &s)
            .unwrap();
        assert!((direct - r.value).abs() < 1e-6 * direct.abs().max(1.0));
    }

    #[test]
    fn profile_is_likelihood_at_closed_form() {
        let (grid, spec, s) = small_setup(6);
        let w = random_w(6, 21);
        let model = FrameModel::new(&grid, &spec, 4000.0, 0.0, 1e-3).unwrap();
        let cfg = AscentConfig::default();
        for t2 in [-0.2, 0.0, 0.15] {
            let t1 = model.theta1_closed_form(&w, t2, &s).unwrap();
            let want = model.log_likelihood(LocalParams { theta1: t1, theta2: t2 }, &w, &s).unwrap();
            let got = model.profile_log_likelihood(&w, t2, &s, 1.0, &cfg).unwrap();
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0));
            // no θ1 does better
            for f in [0.8, 1.25] {
                let other = model.log_likelihood(LocalParams { theta1: t1 * f, theta2: t2 }, &w, &s).unwrap();
                assert!(other < got);
            }
        }
    }

    #[test]
    fn noisy_profile_dominates_fixed_theta1() {
        let (grid, spec, s) = small_setup(5);
        let w = random_w(5, 8);
        let model = FrameModel::new(&grid, &spec, 4000.0, 1e-3, 1e-3).unwrap();
        let cfg = AscentConfig::default();
        let got = model.profile_log_likelihood(&w, 0.05, &s, 1.0, &cfg).unwrap();
        for t1 in [1e-3, 1e-2, 0.1, 1.0] {
            let v = model.log_likelihood(LocalParams { theta1: t1, theta2: 0.05 }, &w, &s).unwrap();
            assert!(v <= got + 1e-9);
        }
    }

    #[test]
    fn scan_then_ascent_recovers_planted_shift() {
        let (grid, spec, s) = small_setup(8);
        let model = FrameModel::new(&grid, &spec, 4000.0, 0.0, 1e-3).unwrap();
        // the column with the largest expected energy pattern: w_m = sqrt(C0_mm(θ2*))
        let target = 0.23;
        let c = model.c0(target, &s).unwrap();
        let w: Vec<Complex64> = (0..8).map(|m| Complex64::new(c.get(m, m).sqrt(), 0.0)).collect();
        let cfg = AscentConfig::default();
        let start = model.theta2_scan(&w, &s, grid.step() / 4.0, 1.0, &cfg).unwrap();
        let r = model.theta2_profile_ascent(&w, &s, start, 1.0, &cfg).unwrap();
        assert!((r.x - target).abs() < 0.05, "{start} {r:?}");
        assert!(model.theta2_scan(&w, &s, 0.0, 1.0, &cfg).is_err());
    }
}
