//! Covariance of fixed-time wavelet coefficient vectors, and the pointwise time–scale
//! covariance kernel of the approximate model.
//!
//! All fixed-time matrices are real symmetric: `ψ̂` is real, so the Hermitian
//! covariance of the circular coefficient vector has no imaginary part.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{AmplitudeFn, PowerSpectrum, WarpFn};
use crate::wavelet::{ScaleGrid, WaveletSpec, NEGLIGIBLE};

/// Default number of log-spaced quadrature nodes.
pub const DEFAULT_QUAD_NODES: usize = 1 << 11;
const KERNEL_QUAD_NODES: usize = 1 << 14;
const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Clean,
    Noisy { noise_level: f64 },
    Regularized { r: f64 },
}

/// Per-frame parameters: `θ1 = a(τ_n)²`, `θ2 = log_q γ′(τ_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalParams {
    pub theta1: f64,
    pub theta2: f64,
}

/// Real symmetric covariance of a wavelet coefficient column.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    data: DMatrix<f64>,
    provenance: Provenance,
}

impl CovMatrix {
    pub fn new(data: DMatrix<f64>, provenance: Provenance) -> Self {
        Self { data, provenance }
    }

    pub fn identity(m: usize) -> Self {
        Self::new(DMatrix::identity(m, m), Provenance::Clean)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(&self.data * k, self.provenance)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| (self.data[(i, j)] - self.data[(j, i)]).abs() <= tol))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.data
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Cholesky factorization; fails when the matrix is not positive definite.
    pub fn factor(&self) -> Result<Factorized> {
        let chol = Cholesky::new(self.data.clone()).ok_or(Error::NotPositiveDefinite)?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Factorized { chol, log_det })
    }
}

/// Cholesky factor of a [`CovMatrix`].
#[derive(Debug, Clone)]
pub struct Factorized {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Factorized {
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn solve(&self, w: &[Complex64]) -> Vec<Complex64> {
        let re = nalgebra::DVector::from_iterator(w.len(), w.iter().map(|c| c.re));
        let im = nalgebra::DVector::from_iterator(w.len(), w.iter().map(|c| c.im));
        let zr = self.chol.solve(&re);
        let zi = self.chol.solve(&im);
        zr.iter().zip(zi.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
    }

    /// `⟨C⁻¹w, w⟩` (real for Hermitian `C`).
    pub fn quad_form(&self, w: &[Complex64]) -> f64 {
        let m = w.len();
        let l = self.chol.l_dirty();
        let mut acc = 0.0;
        for part in [
            w.iter().map(|c| c.re).collect::<Vec<_>>(),
            w.iter().map(|c| c.im).collect::<Vec<_>>(),
        ] {
            // forward substitution L y = part; ‖y‖² = partᵀ C⁻¹ part
            let mut y = vec![0.0; m];
            for i in 0..m {
                let mut v = part[i];
                for j in 0..i {
                    v -= l[(i, j)] * y[j];
                }
                y[i] = v / l[(i, i)];
                acc += y[i] * y[i];
            }
        }
        acc
    }
}

/// `(log|det C|, C⁻¹w)` through a Cholesky factorization.
pub fn log_det_and_solve(c: &CovMatrix, w: &[Complex64]) -> Result<(f64, Vec<Complex64>)> {
    if w.len() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            got: w.len(),
        });
    }
    let f = c.factor()?;
    Ok((f.log_det(), f.solve(w)))
}

/// `(1 − r) C + r I`.
pub fn regularize(c: &CovMatrix, r: f64) -> Result<CovMatrix> {
    if !(0.0..=1.0).contains(&r) {
        return Err(invalid("r", format!("regularization must lie in [0, 1], got {r}")));
    }
    let n = c.dim();
    let data = &c.data * (1.0 - r) + DMatrix::<f64>::identity(n, n) * r;
    Ok(CovMatrix::new(data, Provenance::Regularized { r }))
}

/// `(1 − r) C + r d̄ I` with `d̄` the mean diagonal of `C`, so the result scales with `C`.
pub fn regularize_relative(c: &CovMatrix, r: f64) -> Result<CovMatrix> {
    let n = c.dim();
    let level = if n == 0 { 0.0 } else { c.trace() / n as f64 };
    if level <= 0.0 {
        return regularize(c, r);
    }
    let mut out = regularize(&c.scaled(1.0 / level), r)?;
    out.data *= level;
    Ok(out)
}

/// Log-frequency trapezoid quadrature shared by all entries of a fixed-time covariance.
///
/// Stores `q^{s_i/2} ψ̂(q^{s_i} ξ_k)` for every scale and node together with the range of
/// nodes on which it is not negligible, so that `C_ij = Σ_k w_k S(ξ_k) ψ_ik ψ_jk`
/// only visits overlapping ranges.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    psi: Vec<Vec<f64>>,
    ranges: Vec<(usize, usize)>,
    nyquist: f64,
    norm_sq: f64,
}

impl CovarianceModel {
    pub fn new(grid: &ScaleGrid, spec: &WaveletSpec, nyquist: f64) -> Self {
        Self::with_nodes(grid, spec, nyquist, DEFAULT_QUAD_NODES)
    }

    pub fn with_nodes(grid: &ScaleGrid, spec: &WaveletSpec, nyquist: f64, n: usize) -> Self {
        Self::with_range(grid, spec, nyquist, n, (0.0, f64::INFINITY))
    }

    /// Nodes restricted to `band ∩` the union of the wavelet passbands.
    pub fn with_range(
        grid: &ScaleGrid,
        spec: &WaveletSpec,
        nyquist: f64,
        n: usize,
        band: (f64, f64),
    ) -> Self {
        let q = grid.q();
        let (lo, hi) = spec.support();
        let mut xi_lo = (lo * q.powf(-grid.s_max())).max(band.0);
        let mut xi_hi = (hi * q.powf(-grid.s_min())).min(band.1);
        if !(xi_hi > xi_lo) {
            // empty intersection: any nondegenerate range gives zeros
            xi_lo = lo * q.powf(-grid.s_max());
            xi_hi = xi_lo * 2.0;
        }
        let n = n.max(2);
        let (a, b) = (xi_lo.ln(), xi_hi.ln());
        let h = (b - a) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|k| (a + k as f64 * h).exp()).collect();
        let weights: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(k, &xi)| if k == 0 || k == n - 1 { 0.5 } else { 1.0 } * h * xi)
            .collect();
        let mut psi = Vec::with_capacity(grid.len());
        let mut ranges = Vec::with_capacity(grid.len());
        for &s in grid.scales() {
            let qs = q.powf(s);
            let row: Vec<f64> = nodes.iter().map(|&xi| qs.sqrt() * spec.eval(qs * xi)).collect();
            let peak = qs.sqrt();
            let first = row.iter().position(|&v| v > NEGLIGIBLE * peak).unwrap_or(0);
            let last = row.iter().rposition(|&v| v > NEGLIGIBLE * peak).map_or(0, |i| i + 1);
            ranges.push((first, last.max(first)));
            psi.push(row);
        }
        Self {
            nodes,
            weights,
            psi,
            ranges,
            nyquist,
            norm_sq: spec.norm_sq(),
        }
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    fn assemble(&self, density: &[f64], provenance: Provenance) -> CovMatrix {
        let m = self.dim();
        let mut data = DMatrix::<f64>::zeros(m, m);
        let wd: Vec<f64> = self.weights.iter().zip(density).map(|(w, d)| w * d).collect();
        for i in 0..m {
            let (lo_i, hi_i) = self.ranges[i];
            for j in i..m {
                let (lo_j, hi_j) = self.ranges[j];
                let (lo, hi) = (lo_i.max(lo_j), hi_i.min(hi_j));
                if lo >= hi {
                    continue;
                }
                let (pi, pj) = (&self.psi[i], &self.psi[j]);
                let mut acc = 0.0;
                for k in lo..hi {
                    acc += wd[k] * pi[k] * pj[k];
                }
                data[(i, j)] = acc;
                data[(j, i)] = acc;
            }
        }
        CovMatrix::new(data, provenance)
    }

    /// `C0(θ2)_ij = q^{(s_i+s_j)/2} ∫ S(q^{−θ2} ξ) ψ̂(q^{s_i} ξ) ψ̂(q^{s_j} ξ) dξ`.
    pub fn c0(&self, theta2: f64, spectrum: &PowerSpectrum, q: f64) -> CovMatrix {
        let shrink = q.powf(-theta2);
        let density: Vec<f64> = self.nodes.iter().map(|&xi| spectrum.eval(shrink * xi)).collect();
        self.assemble(&density, Provenance::Clean)
    }

    /// White-noise covariance `C_wn` with unit density up to Nyquist.
    pub fn white(&self) -> CovMatrix {
        let density: Vec<f64> = self
            .nodes
            .iter()
            .map(|&xi| if xi <= self.nyquist { 1.0 } else { 0.0 })
            .collect();
        self.assemble(&density, Provenance::Noisy { noise_level: 1.0 })
    }

    /// `θ1 C0(θ2) + σ_W² C_wn`.
    pub fn noisy(
        &self,
        params: LocalParams,
        noise_level: f64,
        spectrum: &PowerSpectrum,
        q: f64,
    ) -> CovMatrix {
        let shrink = q.powf(-params.theta2);
        let density: Vec<f64> = self
            .nodes
            .iter()
            .map(|&xi| {
                let white = if xi <= self.nyquist { noise_level } else { 0.0 };
                params.theta1 * spectrum.eval(shrink * xi) + white
            })
            .collect();
        self.assemble(&density, Provenance::Noisy { noise_level })
    }
}

fn check_convergence(base: &CovMatrix, doubled: &CovMatrix) -> Result<()> {
    let scale = doubled.matrix().amax();
    if scale == 0.0 {
        return Ok(());
    }
    let disagreement = (base.matrix() - doubled.matrix()).amax() / scale;
    if disagreement > CONVERGENCE_TOL {
        return Err(Error::QuadratureNotConverged { disagreement });
    }
    Ok(())
}

/// Frequencies `ξ` where `S(q^{−θ2} ξ)` can be nonzero.
fn warped_support(spectrum: &PowerSpectrum, theta2: f64, q: f64) -> (f64, f64) {
    match spectrum.support() {
        Some((lo, hi)) => {
            let k = q.powf(theta2);
            (lo * k, hi * k)
        }
        None => (0.0, f64::INFINITY),
    }
}

/// Clean fixed-time covariance `C0(θ2)`, checked against a quadrature with twice the nodes.
pub fn build_c0(
    theta2: f64,
    spectrum: &PowerSpectrum,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
) -> Result<CovMatrix> {
    let nyq = spectrum.nyquist();
    let band = warped_support(spectrum, theta2, grid.q());
    let build = |n| CovarianceModel::with_range(grid, spec, nyq, n, band).c0(theta2, spectrum, grid.q());
    let base = build(DEFAULT_QUAD_NODES);
    check_convergence(&base, &build(2 * DEFAULT_QUAD_NODES))?;
    Ok(base)
}

/// Noisy fixed-time covariance `θ1 C0(θ2) + σ_W² C_wn`.
pub fn build_c_noisy(
    params: LocalParams,
    noise_level: f64,
    spectrum: &PowerSpectrum,
    grid: &ScaleGrid,
    spec: &WaveletSpec,
) -> Result<CovMatrix> {
    if !(noise_level >= 0.0) {
        return Err(invalid("noise_level", "σ_W² must be nonnegative"));
    }
    let nyq = spectrum.nyquist();
    let band = if noise_level > 0.0 {
        (0.0, nyq)
    } else {
        warped_support(spectrum, params.theta2, grid.q())
    };
    let build = |n| {
        CovarianceModel::with_range(grid, spec, nyq, n, band).noisy(params, noise_level, spectrum, grid.q())
    };
    let base = build(DEFAULT_QUAD_NODES);
    check_convergence(&base, &build(2 * DEFAULT_QUAD_NODES))?;
    Ok(base)
}

/// Point evaluation of the approximate-model covariance
/// `E{W̃_Y(s, τ) conj(W̃_Y(s′, τ′))}` for given deformations.
#[allow(clippy::too_many_arguments)]
pub fn full_kernel(
    a: &AmplitudeFn,
    gamma: &WarpFn,
    spectrum: &PowerSpectrum,
    spec: &WaveletSpec,
    q: f64,
    (s, s_prime): (f64, f64),
    (tau, tau_prime): (f64, f64),
) -> Complex64 {
    let g1 = gamma.deriv(tau);
    let g2 = gamma.deriv(tau_prime);
    let lag = gamma.eval(tau) - gamma.eval(tau_prime);
    let d1 = q.powf(s) * g1;
    let d2 = q.powf(s_prime) * g2;
    let (lo, hi) = spec.support();
    let xi_lo = (lo / d1).max(lo / d2);
    let xi_hi = (hi / d1).min(hi / d2);
    if !(xi_hi > xi_lo) {
        return Complex64::new(0.0, 0.0);
    }
    let n = KERNEL_QUAD_NODES;
    let (la, lb) = (xi_lo.ln(), xi_hi.ln());
    let h = (lb - la) / (n - 1) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let xi = (la + k as f64 * h).exp();
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 } * h * xi;
        let v = spectrum.eval(xi) * spec.eval(d1 * xi) * spec.eval(d2 * xi);
        if v != 0.0 {
            acc += Complex64::from_polar(w * v, 2.0 * std::f64::consts::PI * xi * lag);
        }
    }
    let pre = a.eval(tau) * a.eval(tau_prime) * q.powf(0.5 * (s + s_prime)) * (g1 * g2).sqrt();
    acc * pre
}
