//! Experiment configuration: a single TOML document with one table per concern.
//!
//! Every table is optional and falls back to the reference synthetic setup (8 kHz,
//! 2^16 samples, two raised-cosine bumps); unknown keys are errors.

use serde::{Deserialize, Serialize};
use std::path::Path;
use warpam_core::signal::{synth_spectrum, SpectralBump};
use warpam_core::{EstimationConfig, PowerSpectrum, ScaleGrid, WaveletKind, WaveletSpec};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub signal: SignalConfig,
    pub synth: SynthConfig,
    pub wavelet: WaveletConfig,
    pub grid: GridConfig,
    pub estimation: EstimationConfig,
    pub doppler: DopplerConfig,
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    /// Sampling frequency (Hz).
    pub fs: f64,
    /// Number of samples `N_τ`.
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: f64,
    pub width: f64,
    #[serde(default = "one")]
    pub gain: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavFormat {
    Float32,
    Pcm16,
    Pcm24,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub bumps: Vec<BumpConfig>,
    /// Relative modulation depth `a1`.
    pub a1: f64,
    /// `T1`, `T2`, `T3` as fractions of the duration `t_F`.
    pub t1_frac: f64,
    pub t2_frac: f64,
    pub t3_frac: f64,
    pub wav_format: WavFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFamily {
    Sharp,
    DerivativeOfGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveletConfig {
    pub family: WaveletFamily,
    /// Mode of `ψ̂` in Hz; defaults to `Fs/2`.
    pub nu0: Option<f64>,
    pub epsilon: f64,
    /// Sharp-wavelet cutoff in Hz; defaults to `ν0/√2`.
    pub nu1: Option<f64>,
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub q: f64,
    /// Analysed band (Hz); `f_max` defaults to `0.45·Fs`.
    pub f_min: f64,
    pub f_max: Option<f64>,
    /// `M_s`
    pub scales: usize,
    /// `p`
    pub subsample: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DopplerConfig {
    /// Sound speed (m/s).
    pub c: f64,
    /// Source speed (m/s).
    pub v: f64,
    /// Closest distance (m).
    pub d: f64,
    pub snr_db: f64,
    /// Engine firing frequency (Hz) and number of harmonics in the synthetic spectrum.
    pub fundamental: f64,
    pub harmonics: usize,
    pub harmonic_width: f64,
    /// Broadband floor relative to the first harmonic.
    pub broadband_gain: f64,
    /// Amplitude follows `(1 + (V t/D)²)^{-1/2}` around the closest approach.
    pub envelope_distance: f64,
    /// Use the noisy likelihood with the known noise level.
    pub noisy_model: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Seeds `seed, seed+1, …` for the full-estimation MSE table.
    pub mse_seeds: usize,
    /// Seeds for the oracle-spectrum CRLB coverage.
    pub crlb_seeds: usize,
    /// Every k-th estimation frame enters the coverage statistics.
    pub crlb_frame_stride: usize,
    pub theorem1_trials: usize,
    pub theorem1_frames: usize,
    /// Decay exponent `β` of the wavelet in the approximation-error bound.
    pub beta: f64,
    pub prop1_seeds: usize,
    pub prop1_n: usize,
    /// Injected sup-norm errors on `θ1` (relative) and `θ2`.
    pub prop1_theta1_error: f64,
    pub prop1_theta2_error: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self { fs: 8000.0, n: 1 << 16 }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            bumps: vec![
                BumpConfig { center: 600.0, width: 200.0, gain: 1.0 },
                BumpConfig { center: 1200.0, width: 400.0, gain: 1.0 },
            ],
            a1: 0.4,
            t1_frac: 1.0 / 3.0,
            t2_frac: 0.5,
            t3_frac: 0.5,
            wav_format: WavFormat::Float32,
        }
    }
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            family: WaveletFamily::Sharp,
            nu0: None,
            epsilon: 1e-3,
            nu1: None,
            order: 2,
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            q: 2.0,
            f_min: 50.0,
            f_max: None,
            scales: 106,
            subsample: 7,
        }
    }
}

impl Default for DopplerConfig {
    fn default() -> Self {
        Self {
            c: 340.0,
            v: 54.0,
            d: 5.0,
            snr_db: 20.0,
            fundamental: 120.0,
            harmonics: 12,
            harmonic_width: 40.0,
            broadband_gain: 0.2,
            envelope_distance: 100.0,
            noisy_model: true,
        }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            mse_seeds: 3,
            crlb_seeds: 20,
            crlb_frame_stride: 8,
            theorem1_trials: 100,
            theorem1_frames: 16,
            beta: 4.0,
            prop1_seeds: 100,
            prop1_n: 1 << 14,
            prop1_theta1_error: 0.1,
            prop1_theta2_error: 0.05,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            signal: SignalConfig::default(),
            synth: SynthConfig::default(),
            wavelet: WaveletConfig::default(),
            grid: GridConfig::default(),
            estimation: EstimationConfig::default(),
            doppler: DopplerConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

fn bad(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {reason}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Reference setup at `N_τ = 2^14`: same constants, shorter record.
    pub fn small() -> Self {
        let mut cfg = Self::default();
        cfg.signal.n = 1 << 14;
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn t_final(&self) -> f64 {
        (self.signal.n - 1) as f64 / self.signal.fs
    }

    /// Rejects out-of-range values, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let s = &self.signal;
        positive("signal.fs", s.fs)?;
        if s.n < 2 {
            return Err(bad("signal.n", "need at least 2 samples"));
        }
        let nyq = s.fs / 2.0;
        for (i, b) in self.synth.bumps.iter().enumerate() {
            positive(&format!("synth.bumps[{i}].width"), b.width)?;
            if !(b.gain >= 0.0 && b.gain.is_finite()) {
                return Err(bad(&format!("synth.bumps[{i}].gain"), "must be nonnegative"));
            }
            if !(b.center - b.width / 2.0 > 0.0 && b.center + b.width / 2.0 < nyq) {
                return Err(bad(&format!("synth.bumps[{i}].center"), "bump must lie inside (0, Fs/2)"));
            }
        }
        if !(0.0..1.0).contains(&self.synth.a1) {
            return Err(bad("synth.a1", "must lie in [0, 1)"));
        }
        positive("synth.t1_frac", self.synth.t1_frac)?;
        positive("synth.t2_frac", self.synth.t2_frac)?;
        positive("synth.t3_frac", self.synth.t3_frac)?;
        let w = &self.wavelet;
        if let Some(nu0) = w.nu0 {
            positive("wavelet.nu0", nu0)?;
        }
        if let Some(nu1) = w.nu1 {
            positive("wavelet.nu1", nu1)?;
        }
        if !(w.epsilon > 0.0 && w.epsilon < 1.0) {
            return Err(bad("wavelet.epsilon", "must lie in (0, 1)"));
        }
        if w.order == 0 {
            return Err(bad("wavelet.order", "must be at least 1"));
        }
        let g = &self.grid;
        if !(g.q > 1.0 && g.q.is_finite()) {
            return Err(bad("grid.q", "must exceed 1"));
        }
        positive("grid.f_min", g.f_min)?;
        if let Some(f) = g.f_max {
            if !(f > g.f_min && f <= nyq) {
                return Err(bad("grid.f_max", "must lie in (f_min, Fs/2]"));
            }
        }
        if g.scales < 2 {
            return Err(bad("grid.scales", "need at least 2 scales"));
        }
        if g.subsample == 0 || g.subsample >= g.scales {
            return Err(bad("grid.subsample", "must lie in [1, scales)"));
        }
        self.estimation
            .validate()
            .map_err(|e| bad("estimation", e))?;
        let d = &self.doppler;
        positive("doppler.c", d.c)?;
        positive("doppler.v", d.v)?;
        if d.v >= d.c {
            return Err(bad("doppler.v", "source speed must be below the sound speed"));
        }
        positive("doppler.d", d.d)?;
        if !d.snr_db.is_finite() {
            return Err(bad("doppler.snr_db", "must be finite"));
        }
        positive("doppler.fundamental", d.fundamental)?;
        positive("doppler.harmonic_width", d.harmonic_width)?;
        positive("doppler.envelope_distance", d.envelope_distance)?;
        if !(d.broadband_gain >= 0.0) {
            return Err(bad("doppler.broadband_gain", "must be nonnegative"));
        }
        if d.harmonics == 0 {
            return Err(bad("doppler.harmonics", "need at least one harmonic"));
        }
        if d.fundamental * d.harmonics as f64 + d.harmonic_width / 2.0 >= nyq {
            return Err(bad("doppler.harmonics", "highest harmonic must stay below Fs/2"));
        }
        let b = &self.bench;
        for (key, v) in [
            ("bench.mse_seeds", b.mse_seeds),
            ("bench.crlb_seeds", b.crlb_seeds),
            ("bench.crlb_frame_stride", b.crlb_frame_stride),
            ("bench.theorem1_trials", b.theorem1_trials),
            ("bench.theorem1_frames", b.theorem1_frames),
            ("bench.prop1_seeds", b.prop1_seeds),
        ] {
            if v == 0 {
                return Err(bad(key, "must be at least 1"));
            }
        }
        if !(b.beta > 2.0) {
            return Err(bad("bench.beta", "decay exponent must exceed 2"));
        }
        if b.prop1_n < 2 {
            return Err(bad("bench.prop1_n", "need at least 2 samples"));
        }
        if !(b.prop1_theta1_error >= 0.0 && b.prop1_theta1_error < 1.0) {
            return Err(bad("bench.prop1_theta1_error", "must lie in [0, 1)"));
        }
        if !(b.prop1_theta2_error >= 0.0) {
            return Err(bad("bench.prop1_theta2_error", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn wavelet_spec(&self) -> Result<WaveletSpec> {
        let w = &self.wavelet;
        let nu0 = w.nu0.unwrap_or(self.signal.fs / 2.0);
        let kind = match w.family {
            WaveletFamily::Sharp => WaveletKind::Sharp {
                epsilon: w.epsilon,
                nu1: w.nu1.unwrap_or(nu0 / std::f64::consts::SQRT_2),
            },
            WaveletFamily::DerivativeOfGaussian => WaveletKind::DerivativeOfGaussian { order: w.order },
        };
        Ok(WaveletSpec::new(kind, nu0)?)
    }

    pub fn scale_grid(&self, spec: &WaveletSpec) -> Result<ScaleGrid> {
        let g = &self.grid;
        let f_max = g.f_max.unwrap_or(0.45 * self.signal.fs);
        let grid = ScaleGrid::covering(g.q, spec.omega0(), g.f_min, f_max, g.scales, g.subsample)?;
        grid.validate_for(self.signal.fs, spec.omega0())?;
        Ok(grid)
    }

    pub fn spectrum(&self) -> Result<PowerSpectrum> {
        let bumps: Vec<SpectralBump> = self
            .synth
            .bumps
            .iter()
            .map(|b| SpectralBump { center: b.center, width: b.width, gain: b.gain })
            .collect();
        Ok(synth_spectrum(&bumps, self.signal.fs)?)
    }
}
