//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line reaches the log. A failing criterion is
//! reported, not fatal; errors inside a check count as a failure of that criterion.

use num_complex::Complex64;
use std::path::Path;
use std::time::Instant;
use warpam_cli::commands::{self, Common};
use warpam_cli::config::ExperimentConfig;
use warpam_cli::experiments;
use warpam_core::covariance::{build_c0, log_det_and_solve, regularize, CovMatrix};
use warpam_core::diagnostics::{crlb_theta1, theorem1_bound};
use warpam_core::estimator::{dense_log_density, estimate_theta1_closed_form, frame_log_likelihood, FrameModel};
use warpam_core::signal::*;
use warpam_core::wavelet::{cwt_at, divergence, ScaleGrid, WaveletSpec};
use warpam_core::{covariance::full_kernel, LocalParams};

type Check = Result<(bool, String), String>;

const SEED: u64 = 1;

// Reference values: MSE of the algorithm and of the baselines, (amplitude, warping).
const TABLE_ALGORITHM: (f64, f64) = (7.01e-2, 4.91e-4);
const TABLE_BASELINE: (f64, f64) = (2.01e-1, 2.32e-2);

fn within_factor(v: f64, reference: f64, k: f64) -> bool {
    v >= reference / k && v <= reference * k
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(serde::Deserialize)]
struct Summary {
    iterations: usize,
    converged: bool,
    reports: Vec<warpam_core::estimator::IterationReport>,
    runtime_s: f64,
    mse: Option<warpam_core::diagnostics::MseReport>,
}

/// `synth` then `estimate` through the command layer, in a scratch directory.
fn synth_and_estimate(cfg: &ExperimentConfig, dir: &Path) -> Result<Summary, String> {
    let c = Common { config: cfg.clone(), seed: SEED, out: dir.to_path_buf(), quiet: true };
    commands::synth(&c).map_err(err)?;
    commands::estimate(&c, &dir.join("signal.wav"), None, None).map_err(err)?;
    let text = std::fs::read_to_string(dir.join("summary.json")).map_err(err)?;
    serde_json::from_str(&text).map_err(err)
}

fn criteria_1_and_2() -> (Check, Check) {
    let full = tempfile::tempdir().unwrap();
    let small = tempfile::tempdir().unwrap();
    let run = || -> Result<(Summary, Summary), String> {
        Ok((
            synth_and_estimate(&ExperimentConfig::default(), full.path())?,
            synth_and_estimate(&ExperimentConfig::small(), small.path())?,
        ))
    };
    let (big, little) = match run() {
        Ok(v) => v,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let c1 = (|| {
        let m = big.mse.ok_or("no truth sidecar found")?;
        let s = little.mse.ok_or("no truth sidecar found")?;
        let alg_ok = within_factor(m.algorithm.amplitude, TABLE_ALGORITHM.0, 3.0)
            && within_factor(m.algorithm.warping, TABLE_ALGORITHM.1, 3.0);
        let base_ok = within_factor(m.baseline.amplitude, TABLE_BASELINE.0, 3.0)
            && within_factor(m.baseline.warping, TABLE_BASELINE.1, 3.0);
        let better = m.algorithm.amplitude < m.baseline.amplitude && m.algorithm.warping < m.baseline.warping;
        let small_better = s.algorithm.amplitude < s.baseline.amplitude && s.algorithm.warping < s.baseline.warping;
        let time_ok = big.runtime_s <= 600.0 && little.runtime_s <= 60.0;
        Ok((
            alg_ok && base_ok && better && small_better && time_ok,
            format!(
                "2^16: algorithm amp {:.3e} warp {:.3e} (limits {:.3e}, {:.3e}); baseline amp {:.3e} warp {:.3e}; \
                 {:.0} s | 2^14: algorithm ({:.3e}, {:.3e}) vs baseline ({:.3e}, {:.3e}); {:.1} s",
                m.algorithm.amplitude,
                m.algorithm.warping,
                3.0 * TABLE_ALGORITHM.0,
                3.0 * TABLE_ALGORITHM.1,
                m.baseline.amplitude,
                m.baseline.warping,
                big.runtime_s,
                s.algorithm.amplitude,
                s.algorithm.warping,
                s.baseline.amplitude,
                s.baseline.warping,
                little.runtime_s,
            ),
        ))
    })();
    let positive = big.reports.iter().all(|r| r.criterion_theta1 > 0.0 && r.criterion_theta2 > 0.0);
    let series: Vec<String> = big
        .reports
        .iter()
        .map(|r| format!("({:.1e}, {:.1e})", r.criterion_theta1, r.criterion_theta2))
        .collect();
    let c2 = Ok((
        big.converged && big.iterations <= 15 && positive && !big.reports.is_empty(),
        format!("{} iterations, converged {}; criteria {}", big.iterations, big.converged, series.join(" ")),
    ));
    (c1, c2)
}

fn criterion_3() -> Check {
    let exact = crlb_theta1(1.0, 106) == 2.0 / 106.0;
    let cov = experiments::crlb_coverage(&ExperimentConfig::default(), SEED).map_err(err)?;
    let seeds = ExperimentConfig::default().bench.crlb_seeds;
    Ok((
        exact && seeds >= 20 && (0.88..=0.99).contains(&cov.fraction),
        format!(
            "crlb_theta1(1, 106) = 2/106: {exact}; {:.1}% of {} estimates ({seeds} seeds) within ±1.96√CRLB; \
             var/CRLB = {:.2}",
            100.0 * cov.fraction,
            cov.rows.len(),
            cov.variance_ratio
        ),
    ))
}

fn criterion_4() -> Check {
    let cfg = ExperimentConfig::default();
    let r = experiments::theorem1_check(&cfg, SEED).map_err(err)?;
    let trials = r.constant("n_trials").unwrap_or(0.0);
    let monotone = experiments::bound_is_monotone(&r);
    let ratio = r
        .points
        .iter()
        .filter_map(|p| p.empirical.map(|e| e / p.bound))
        .fold(0.0, f64::max);
    Ok((
        trials >= 100.0 && r.violations() == 0 && monotone,
        format!(
            "{trials} trials, {} points, {} violations, max empirical/bound = {ratio:.2e}, monotone in s: {monotone}",
            r.points.len(),
            r.violations()
        ),
    ))
}

fn criterion_5() -> Check {
    let cfg = ExperimentConfig::default();
    let p = experiments::prop1_check(&cfg, SEED).map_err(err)?;
    let pass = p.max_abs_z <= 3.0 && p.sup_bias <= p.bound && cfg.bench.prop1_seeds >= 100;
    // breakdown only: where the violations sit relative to the spectral support
    let peak = p.rows.iter().map(|r| r.expected).fold(0.0, f64::max);
    let z = |r: &experiments::Prop1Row| (r.mean - r.expected).abs() / r.std_err;
    let inside: Vec<f64> = p.rows.iter().filter(|r| r.expected >= 1e-6 * peak).map(z).collect();
    let over = p.rows.iter().filter(|r| z(r) > 3.0).count();
    Ok((
        pass,
        format!(
            "{} seeds at N = {}: max |mean − S_X,ψ|/SE = {:.2} over {} frequencies \
             ({} above 3; max {:.2} where S_X,ψ ≥ 1e-6·peak); injected errors \
             ({:.3}, {:.3}): sup-bias {:.3e} ≤ bound {:.3e}: {}",
            cfg.bench.prop1_seeds,
            cfg.bench.prop1_n,
            p.max_abs_z,
            p.rows.len(),
            over,
            inside.iter().cloned().fold(0.0, f64::max),
            p.theta1_error,
            p.theta2_error,
            p.sup_bias,
            p.bound,
            p.sup_bias <= p.bound
        ),
    ))
}

struct Oracle {
    failures: Vec<String>,
}

impl Oracle {
    fn check(&mut self, name: &str, ok: bool) {
        if !ok {
            self.failures.push(name.to_string());
        }
    }
}

fn criterion_6() -> Check {
    let t0 = Instant::now();
    let mut o = Oracle { failures: Vec::new() };
    let fs = 8000.0;
    let spec = WaveletSpec::sharp(fs / 2.0).map_err(err)?;
    let bumps = synth_spectrum(&[SpectralBump::new(600.0, 200.0), SpectralBump::new(1200.0, 400.0)], fs).map_err(err)?;

    // likelihood against the dense circular-Gaussian density, 5 scales
    let g5 = ScaleGrid::covering(2.0, spec.omega0(), 500.0, 1400.0, 5, 1).map_err(err)?;
    let x = gaussian_stationary_synth(&bumps, 2048, fs, 7).map_err(err)?;
    let w = cwt_at(&x, &g5, &spec, &[1024]).map_err(err)?.column(0);
    let p = LocalParams { theta1: 1.3, theta2: 0.1 };
    let model = FrameModel::new(&g5, &spec, fs / 2.0, 0.0, 1e-5).map_err(err)?;
    let c = model.covariance(p, &bumps).map_err(err)?;
    let ll = frame_log_likelihood(p, &w, &bumps, &g5, &spec, 0.0, 1e-5).map_err(err)?;
    let dense = dense_log_density(c.matrix(), &w);
    o.check("likelihood vs dense density", (ll - dense).abs() <= 1e-8 * dense.abs().max(1.0));

    // closed-form θ1 against a grid search of the likelihood
    let th = estimate_theta1_closed_form(&w, p.theta2, &bumps, &g5, &spec, 1e-5).map_err(err)?;
    let step = th * 1e-3;
    let best = (1..4000)
        .map(|k| k as f64 * step)
        .map(|t| (t, frame_log_likelihood(LocalParams { theta1: t, ..p }, &w, &bumps, &g5, &spec, 0.0, 1e-5).unwrap()))
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    o.check("closed-form θ1 vs grid search", (best.0 - th).abs() <= step);

    // scale-shift identity of C0
    let g = ScaleGrid::covering(2.0, spec.omega0(), 200.0, 1800.0, 40, 4).map_err(err)?;
    let m = 3;
    let base = build_c0(0.0, &bumps, &g, &spec).map_err(err)?;
    let shifted = build_c0(m as f64 * g.step(), &bumps, &g, &spec).map_err(err)?;
    let tol = 1e-6 * base.matrix().amax();
    let shift_ok = (0..g.len() - m).all(|i| (0..g.len() - m).all(|j| (shifted.get(i, j) - base.get(i + m, j + m)).abs() < tol));
    o.check("C0 scale shift", shift_ok);

    // full kernel against Monte-Carlo covariance for an affine warp (tangent model exact)
    let n = 4096;
    let tf = (n - 1) as f64 / fs;
    let lambda = 2f64.powf(0.2);
    let a = AmplitudeFn::constant(1.3, (0.0, tf)).map_err(err)?;
    let gamma = WarpFn::from_derivative(move |_| lambda, (0.0, tf), 1.0 / fs).map_err(err)?;
    let (s1, s2) = (g.scales()[10], g.scales()[12]);
    let (i1, i2) = (2048usize, 2064usize);
    let (tau1, tau2) = (i1 as f64 / fs, i2 as f64 / fs);
    let kernel = full_kernel(&a, &gamma, &bumps, &spec, 2.0, (s1, s2), (tau1, tau2));
    let pair = ScaleGrid::new(2.0, s1, s2 - s1, 2, 1).map_err(err)?;
    let x_len = (lambda * n as f64).ceil() as usize + 8;
    let samples: Vec<Complex64> = (0..200u64)
        .map(|k| {
            let x = gaussian_stationary_synth(&bumps, x_len, fs, 1000 + k).unwrap();
            let y = apply_deformation(&x, &a, &gamma, n).unwrap();
            let wt = cwt_at(&y, &pair, &spec, &[i1, i2]).unwrap();
            wt.get(0, 0) * wt.get(1, 1).conj()
        })
        .collect();
    let nm = samples.len() as f64;
    let mean: Complex64 = samples.iter().sum::<Complex64>() / nm;
    let se = |f: &dyn Fn(&Complex64) -> f64, mu: f64| {
        (samples.iter().map(|z| (f(z) - mu).powi(2)).sum::<f64>() / (nm - 1.0) / nm).sqrt()
    };
    let (se_re, se_im) = (se(&|z| z.re, mean.re), se(&|z| z.im, mean.im));
    o.check(
        "full kernel vs Monte-Carlo (3 SE)",
        (mean.re - kernel.re).abs() <= 3.0 * se_re && (mean.im - kernel.im).abs() <= 3.0 * se_im,
    );

    // exact examples
    o.check("S(600) = 2", (bumps.eval(600.0) - 2.0).abs() < 1e-12);
    o.check("S(700) = 0", bumps.eval(700.0) == 0.0);
    o.check("S(900) = 0", bumps.eval(900.0) == 0.0);
    o.check("S(ν < 0) = 0", bumps.eval(-1.0) == 0.0);
    let flat_a = synth_amplitude(0.0, 1.0, 3.0).map_err(err)?;
    o.check("a1 = 0 gives a ≡ 1", (0..100).all(|k| (flat_a.eval(0.03 * k as f64) - 1.0).abs() < 1e-12));
    let a04 = synth_amplitude(0.4, 1.0, 3.0).map_err(err)?;
    o.check("a0 for a1 = 0.4", (a04.eval(0.25) - (1.0f64 / 1.08).sqrt()).abs() < 1e-5);
    o.check("Doppler γ′(0)", (doppler_warp_derivative(340.0, 54.0, 5.0, 0.0) - 1.02588).abs() < 1e-5);
    o.check("Doppler limits", (doppler_warp_derivative(340.0, 54.0, 5.0, 1e12) - 340.0 / 394.0).abs() < 1e-9
        && (doppler_warp_derivative(340.0, 54.0, 5.0, -1e12) - 340.0 / 286.0).abs() < 1e-9);
    let c0 = CovMatrix::identity(4).scaled(2.0);
    let ones = vec![Complex64::new(1.0, -2.0); 4];
    let (ld, z) = log_det_and_solve(&c0, &ones).map_err(err)?;
    o.check("log det 2I", (ld - 4.0 * 2f64.ln()).abs() < 1e-12 && z.iter().all(|v| (v - ones[0] / 2.0).norm() < 1e-12));
    o.check("regularize r = 0", regularize(&base, 0.0).map_err(err)?.matrix() == base.matrix());
    o.check("regularize r = 1", regularize(&base, 1.0).map_err(err)?.matrix() == CovMatrix::identity(base.dim()).matrix());
    o.check("crlb_theta1 halves with M_s", crlb_theta1(1.0, 212) * 2.0 == crlb_theta1(1.0, 106));
    o.check("divergence(a, a) = 0", divergence(3.0, 3.0).map_err(err)? == 0.0);
    let span = (0.0, 1.0);
    let rep = theorem1_bound(
        &AmplitudeFn::constant(1.0, span).map_err(err)?,
        &WarpFn::identity(span),
        &bumps,
        &spec,
        4.0,
        2.0,
        g.scales(),
    )
    .map_err(err)?;
    o.check("β = 4 gives ρ = 1/2, μ = 0", rep.constant("rho") == Some(0.5) && rep.constant("mu") == Some(0.0));
    o.check("affine warp, constant amplitude: bound 0", rep.points.iter().all(|p| p.bound == 0.0));

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = o.failures.is_empty() && elapsed < 10.0;
    Ok((
        pass,
        if o.failures.is_empty() {
            format!("all oracle checks hold ({elapsed:.1} s)")
        } else {
            format!("failed: {} ({elapsed:.1} s)", o.failures.join("; "))
        },
    ))
}

fn criterion_7() -> Check {
    let r = experiments::null_check(&ExperimentConfig::small(), SEED).map_err(err)?;
    let ci = 3.0 * r.crlb_theta2.sqrt();
    Ok((
        r.max_abs_theta2 <= ci && (r.mean_theta1 - 1.0).abs() <= 0.05,
        format!(
            "2^14 stationary input: max |θ̃2| = {:.3e} (3√CRLB = {ci:.3e}), mean θ̃1 = {:.4}, {} iterations",
            r.max_abs_theta2, r.mean_theta1, r.iterations
        ),
    ))
}

fn criterion_8() -> Check {
    let cfg = ExperimentConfig::default();
    let r = experiments::doppler_demo(&cfg, SEED).map_err(err)?;
    let (e, l) = (r.endpoints, r.limits);
    let limits_ok = (e.0 - l.0).abs() <= 1e-9 * l.0 && (e.1 - l.1).abs() <= 1e-9 * l.1;
    Ok((
        limits_ok && r.rms_rel_central <= 0.05,
        format!(
            "limits ({:.5}, {:.5}) vs c/(c±V) ({:.5}, {:.5}); RMS deviation of γ̃′ over the central 80% at {} dB: \
             {:.2}% (scale factor {:.4}, {} iterations)",
            e.0,
            e.1,
            l.0,
            l.1,
            cfg.doppler.snr_db,
            100.0 * r.rms_rel_central,
            r.scale_factor,
            r.state.iterations()
        ),
    ))
}

fn report(n: usize, c: Check) -> bool {
    let (pass, detail) = c.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("criterion {n}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    let t0 = Instant::now();
    let (c1, c2) = criteria_1_and_2();
    let results = [
        report(1, c1),
        report(2, c2),
        report(3, criterion_3()),
        report(4, criterion_4()),
        report(5, criterion_5()),
        report(6, criterion_6()),
        report(7, criterion_7()),
        report(8, criterion_8()),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/8 criteria pass ({:.0} s)", t0.elapsed().as_secs_f64());
}
