//! CSV and JSON result files.
//!
//! Column lists:
//! - `frames.csv`: `time,theta1,theta2,amplitude,warp,warp_deriv`
//! - `spectra.csv`: `iteration,freq,value`
//! - `criteria.csv`: `iteration,theta1,theta2`
//! - `scalogram_*.csv`: `scale,freq,<one column per frame time>`
//! - `doppler.csv`: `time,gamma_prime_theory,gamma_prime_est`
//! - `mse.csv`: `seed,iterations,converged,algorithm_amplitude,algorithm_warping,baseline_amplitude,baseline_warping`
//! - `coverage.csv`: `seed,time,theta2_true,theta2_est,crlb,inside`
//! - `theorem1.csv`: `scale,time,bound,empirical`
//! - `prop1.csv`: `scale,freq,expected,mean,std_err,perturbed_mean,bound`

use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use warpam_core::diagnostics::BoundReport;
use warpam_core::{EstimationState, TimeScaleTransform, WaveletSpec};

use crate::experiments::{Coverage, Prop1Check, SyntheticRun};
use crate::Result;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

pub fn write_frames(path: &Path, state: &EstimationState) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time", "theta1", "theta2", "amplitude", "warp", "warp_deriv"])?;
    let (t1, t2) = (state.final_theta1(), state.final_theta2());
    for (j, &i) in state.frame_indices.iter().enumerate() {
        w.serialize((
            state.frame_times[j],
            t1[j],
            t2[j],
            state.amplitude[i],
            state.warp[i],
            state.warp_deriv[i],
        ))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectra(path: &Path, state: &EstimationState) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "freq", "value"])?;
    for (k, s) in state.spectra.iter().enumerate() {
        for (f, v) in s.freqs().iter().zip(s.values()) {
            w.serialize((k, f, v))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_criteria(path: &Path, state: &EstimationState) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "theta1", "theta2"])?;
    for r in &state.reports {
        w.serialize((r.iteration, r.criterion_theta1, r.criterion_theta2))?;
    }
    w.flush()?;
    Ok(())
}

/// `|W|²` with one row per scale and one column per frame.
pub fn write_scalogram(path: &Path, wt: &TimeScaleTransform, spec: &WaveletSpec) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["scale".to_string(), "freq".to_string()];
    header.extend(wt.times().iter().map(|t| format!("{t}")));
    w.write_record(&header)?;
    let freqs = wt.grid().frequencies(spec.omega0());
    for (r, s) in wt.grid().scales().iter().enumerate() {
        let mut rec = vec![s.to_string(), freqs[r].to_string()];
        rec.extend(wt.row(r).iter().map(|c| c.norm_sqr().to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_doppler(path: &Path, times: &[f64], theory: &[f64], est: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time", "gamma_prime_theory", "gamma_prime_est"])?;
    for ((t, a), b) in times.iter().zip(theory).zip(est) {
        w.serialize((t, a, b))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_mse(path: &Path, runs: &[SyntheticRun]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "seed",
        "iterations",
        "converged",
        "algorithm_amplitude",
        "algorithm_warping",
        "baseline_amplitude",
        "baseline_warping",
    ])?;
    for r in runs {
        w.serialize((
            r.seed,
            r.iterations,
            r.converged,
            r.mse.algorithm.amplitude,
            r.mse.algorithm.warping,
            r.mse.baseline.amplitude,
            r.mse.baseline.warping,
        ))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_run_criteria(path: &Path, runs: &[SyntheticRun]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["seed", "iteration", "theta1", "theta2"])?;
    for r in runs {
        for (k, (a, b)) in r.criteria.iter().enumerate() {
            w.serialize((r.seed, k + 1, a, b))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_coverage(path: &Path, cov: &Coverage) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["seed", "time", "theta2_true", "theta2_est", "crlb", "inside"])?;
    for r in &cov.rows {
        w.serialize((r.seed, r.time, r.theta2_true, r.theta2_est, r.crlb, r.inside))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bound(path: &Path, report: &BoundReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["scale", "time", "bound", "empirical"])?;
    for p in &report.points {
        w.serialize((p.scale, p.at, p.bound, p.empirical))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_prop1(path: &Path, check: &Prop1Check) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["scale", "freq", "expected", "mean", "std_err", "perturbed_mean", "bound"])?;
    for r in &check.rows {
        w.serialize((r.scale, r.freq, r.expected, r.mean, r.std_err, r.perturbed_mean, r.bound))?;
    }
    w.flush()?;
    Ok(())
}
