//! The four subcommands. Each returns whether it finished with warnings.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use warpam_core::diagnostics::{BoundReport, MseReport};
use warpam_core::estimator::{run_joint_estimation, IterationReport};
use warpam_core::EstimationState;

use crate::config::ExperimentConfig;
use crate::experiments::{self, Coverage, NullCheck, Prop1Check, Setup, SyntheticRun, Truth, FORMAT_VERSION};
use crate::output::*;
use crate::wav::{read_wav, write_wav};
use crate::{CliError, Result};

/// Options common to every command.
#[derive(Debug, Clone)]
pub struct Common {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Common {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Sidecar path next to a WAV file: `x.wav` → `x.truth.json`.
pub fn truth_path(wav: &Path) -> PathBuf {
    wav.with_extension("truth.json")
}

fn has_warnings(state: &EstimationState) -> bool {
    !state.converged || state.reports.last().is_some_and(|r| r.failed_frames > 0)
}

#[derive(Serialize)]
struct SynthSummary<'a> {
    format_version: u32,
    command: &'static str,
    seed: u64,
    fs: f64,
    n_samples: usize,
    duration_s: f64,
    wav: String,
    truth: String,
    gain: f64,
    config: &'a ExperimentConfig,
}

pub fn synth(c: &Common) -> Result<bool> {
    let cfg = &c.config;
    let syn = experiments::synthesize(cfg, c.seed)?;
    let wav = c.path("signal.wav");
    let gain = write_wav(&wav, &syn.y, cfg.synth.wav_format)?;
    let truth = truth_path(&wav);
    write_json(&truth, &syn.truth(c.seed, gain))?;
    write_json(
        &c.path("synth.json"),
        &SynthSummary {
            format_version: FORMAT_VERSION,
            command: "synth",
            seed: c.seed,
            fs: cfg.signal.fs,
            n_samples: cfg.signal.n,
            duration_s: cfg.t_final(),
            wav: wav.display().to_string(),
            truth: truth.display().to_string(),
            gain,
            config: cfg,
        },
    )?;
    c.say(format!("wrote {} ({} samples, gain {gain})", wav.display(), cfg.signal.n));
    Ok(false)
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    format_version: u32,
    command: &'static str,
    input: String,
    fs: f64,
    n_samples: usize,
    n_frames: usize,
    noise_level: f64,
    iterations: usize,
    converged: bool,
    reports: &'a [IterationReport],
    /// Wall-clock time; the only field that differs between identical runs.
    runtime_s: f64,
    mse: Option<MseReport>,
}

fn write_state(c: &Common, state: &EstimationState) -> Result<()> {
    write_frames(&c.path("frames.csv"), state)?;
    write_spectra(&c.path("spectra.csv"), state)?;
    write_criteria(&c.path("criteria.csv"), state)?;
    Ok(())
}

/// `noisy` is a white-noise variance; the model takes the one-sided density `2σ²/Fs`.
pub fn estimate(c: &Common, input: &Path, truth: Option<&Path>, noisy: Option<f64>) -> Result<bool> {
    let mut cfg = c.config.clone();
    let y = read_wav(input)?;
    if y.fs() != cfg.signal.fs {
        return Err(CliError::Config(format!(
            "`signal.fs`: input is sampled at {} Hz but the configuration says {} Hz (resampling is not supported)",
            y.fs(),
            cfg.signal.fs
        )));
    }
    if let Some(var) = noisy {
        if !(var >= 0.0 && var.is_finite()) {
            return Err(CliError::Usage(format!("--noisy: variance must be nonnegative, got {var}")));
        }
        cfg.estimation.noise_level = 2.0 * var / y.fs();
    }
    let setup = Setup::new(&cfg)?;
    let t0 = Instant::now();
    let state = run_joint_estimation(&y, &cfg.estimation, &setup.grid, &setup.spec)?;
    let runtime_s = t0.elapsed().as_secs_f64();
    write_state(c, &state)?;
    let sidecar = truth.map(Path::to_path_buf).or_else(|| Some(truth_path(input)).filter(|p| p.exists()));
    let mse = match sidecar {
        Some(p) => {
            let t: Truth = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
            if t.amplitude.len() != y.len() {
                return Err(CliError::Input(format!(
                    "{}: truth has {} samples, signal has {}",
                    p.display(),
                    t.amplitude.len(),
                    y.len()
                )));
            }
            let (t1, t2) = t.theta_at(&state.frame_indices, setup.grid.q());
            Some(experiments::score(&y, &state, (&t1, &t2), &setup)?)
        }
        None => None,
    };
    write_json(
        &c.path("summary.json"),
        &EstimateSummary {
            format_version: FORMAT_VERSION,
            command: "estimate",
            input: input.display().to_string(),
            fs: y.fs(),
            n_samples: y.len(),
            n_frames: state.frame_indices.len(),
            noise_level: cfg.estimation.noise_level,
            iterations: state.iterations(),
            converged: state.converged,
            reports: &state.reports,
            runtime_s,
            mse,
        },
    )?;
    c.say(format!(
        "{} iterations ({}converged) in {runtime_s:.1} s",
        state.iterations(),
        if state.converged { "" } else { "not " }
    ));
    if let Some(m) = mse {
        c.say(format!(
            "MSE amplitude {:.3e} (baseline {:.3e}), warping {:.3e} (baseline {:.3e})",
            m.algorithm.amplitude, m.baseline.amplitude, m.algorithm.warping, m.baseline.warping
        ));
    }
    Ok(has_warnings(&state))
}

#[derive(Serialize)]
struct DopplerSummary<'a> {
    format_version: u32,
    command: &'static str,
    source: &'static str,
    seed: u64,
    c: f64,
    v: f64,
    d: f64,
    snr_db: f64,
    noise_variance: f64,
    noise_level: f64,
    iterations: usize,
    converged: bool,
    reports: &'a [IterationReport],
    scale_factor: f64,
    rms_rel_central: f64,
    endpoints: (f64, f64),
    limits: (f64, f64),
}

pub fn doppler(c: &Common) -> Result<bool> {
    let cfg = &c.config;
    let run = experiments::doppler_demo(cfg, c.seed)?;
    let spec = cfg.wavelet_spec()?;
    write_state(c, &run.state)?;
    write_doppler(&c.path("doppler.csv"), &run.frame_times, &run.theoretical, &run.estimated)?;
    write_scalogram(&c.path("scalogram_before.csv"), &run.before, &spec)?;
    write_scalogram(&c.path("scalogram_after.csv"), &run.after, &spec)?;
    let d = cfg.doppler;
    write_json(
        &c.path("summary.json"),
        &DopplerSummary {
            format_version: FORMAT_VERSION,
            command: "doppler",
            source: "synthetic engine-like spectrum (no recording is used)",
            seed: c.seed,
            c: d.c,
            v: d.v,
            d: d.d,
            snr_db: d.snr_db,
            noise_variance: run.noise_variance,
            noise_level: run.noise_level,
            iterations: run.state.iterations(),
            converged: run.state.converged,
            reports: &run.state.reports,
            scale_factor: run.scale_factor,
            rms_rel_central: run.rms_rel_central,
            endpoints: run.endpoints,
            limits: run.limits,
        },
    )?;
    c.say(format!(
        "Doppler: {} iterations, RMS deviation of γ̃′ over the central 80%: {:.2}%",
        run.state.iterations(),
        100.0 * run.rms_rel_central
    ));
    Ok(has_warnings(&run.state))
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    format_version: u32,
    command: &'static str,
    seed: u64,
    runs: &'a [SyntheticRun],
    mean_mse: MseReport,
    coverage_fraction: f64,
    coverage_variance_ratio: f64,
    coverage_samples: usize,
    theorem1_violations: usize,
    theorem1_margin: Option<f64>,
    theorem1_monotone: bool,
    prop1_max_abs_z: f64,
    prop1_sup_bias: f64,
    prop1_bound: f64,
    null: &'a NullCheck,
    failures: &'a [String],
}

/// Multi-seed Monte-Carlo: MSE table, CRLB coverage, bound checks and the null case.
pub fn bench(c: &Common) -> Result<bool> {
    let cfg = &c.config;
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    for k in 0..cfg.bench.mse_seeds as u64 {
        let seed = c.seed + k;
        match experiments::synthetic_run(cfg, seed) {
            Ok((run, _)) => {
                c.say(format!("seed {seed}: {} iterations, {:?}", run.iterations, run.mse));
                runs.push(run);
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    write_mse(&c.path("mse.csv"), &runs)?;
    write_run_criteria(&c.path("criteria.csv"), &runs)?;
    let coverage: Coverage = experiments::crlb_coverage(cfg, c.seed)?;
    write_coverage(&c.path("coverage.csv"), &coverage)?;
    c.say(format!("CRLB coverage {:.1}%", 100.0 * coverage.fraction));
    let t1: BoundReport = experiments::theorem1_check(cfg, c.seed)?;
    write_bound(&c.path("theorem1.csv"), &t1)?;
    let p1: Prop1Check = experiments::prop1_check(cfg, c.seed)?;
    write_prop1(&c.path("prop1.csv"), &p1)?;
    let null = experiments::null_check(cfg, c.seed)?;
    let mean = |f: &dyn Fn(&MseReport) -> f64| runs.iter().map(|r| f(&r.mse)).sum::<f64>() / runs.len().max(1) as f64;
    let mut mean_mse = runs.first().map(|r| r.mse).unwrap_or(MseReport {
        baseline: warpam_core::diagnostics::MsePair { amplitude: f64::NAN, warping: f64::NAN },
        algorithm: warpam_core::diagnostics::MsePair { amplitude: f64::NAN, warping: f64::NAN },
    });
    if !runs.is_empty() {
        mean_mse.algorithm.amplitude = mean(&|m| m.algorithm.amplitude);
        mean_mse.algorithm.warping = mean(&|m| m.algorithm.warping);
        mean_mse.baseline.amplitude = mean(&|m| m.baseline.amplitude);
        mean_mse.baseline.warping = mean(&|m| m.baseline.warping);
    }
    let summary = BenchSummary {
        format_version: FORMAT_VERSION,
        command: "bench",
        seed: c.seed,
        runs: &runs,
        mean_mse,
        coverage_fraction: coverage.fraction,
        coverage_variance_ratio: coverage.variance_ratio,
        coverage_samples: coverage.rows.len(),
        theorem1_violations: t1.violations(),
        theorem1_margin: t1.margin(),
        theorem1_monotone: experiments::bound_is_monotone(&t1),
        prop1_max_abs_z: p1.max_abs_z,
        prop1_sup_bias: p1.sup_bias,
        prop1_bound: p1.bound,
        null: &null,
        failures: &failures,
    };
    write_json(&c.path("bench_summary.json"), &summary)?;
    std::fs::write(c.path("bench_report.txt"), report_text(&summary))?;
    c.say(report_text(&summary));
    Ok(!failures.is_empty())
}

fn report_text(s: &BenchSummary<'_>) -> String {
    let m = &s.mean_mse;
    format!(
        "seeds                 {}\n\
         MSE algorithm         amplitude {:.3e}  warping {:.3e}\n\
         MSE baseline          amplitude {:.3e}  warping {:.3e}\n\
         CRLB coverage         {:.1}% of {} estimates (variance / CRLB = {:.2})\n\
         approximation bound   {} violations, monotone in scale: {}\n\
         spectrum bias         max |z| = {:.2}; perturbed sup-bias {:.3e} vs bound {:.3e}\n\
         null case             max |θ̃2| = {:.3e} (3√CRLB = {:.3e}), mean θ̃1 = {:.4}\n\
         failures              {}\n",
        s.runs.len(),
        m.algorithm.amplitude,
        m.algorithm.warping,
        m.baseline.amplitude,
        m.baseline.warping,
        100.0 * s.coverage_fraction,
        s.coverage_samples,
        s.coverage_variance_ratio,
        s.theorem1_violations,
        s.theorem1_monotone,
        s.prop1_max_abs_z,
        s.prop1_sup_bias,
        s.prop1_bound,
        s.null.max_abs_theta2,
        3.0 * s.null.crlb_theta2.sqrt(),
        s.null.mean_theta1,
        s.failures.len(),
    )
}
