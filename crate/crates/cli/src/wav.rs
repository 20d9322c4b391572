//! Mono WAV input/output: 16/24-bit PCM and 32-bit float.

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use std::path::Path;
use warpam_core::SampledSignal;

use crate::config::WavFormat;
use crate::{CliError, Result};

/// Writes `x` and returns the gain applied to the samples before quantization.
///
/// Float output is written unscaled. PCM output that would clip is rescaled to a peak of
/// 0.99 of full scale; the gain is recorded so scores can undo it.
pub fn write_wav(path: &Path, x: &SampledSignal, format: WavFormat) -> Result<f64> {
    let (bits, sample_format) = match format {
        WavFormat::Float32 => (32, SampleFormat::Float),
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Pcm24 => (24, SampleFormat::Int),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: fs_to_rate(x.fs())?,
        bits_per_sample: bits,
        sample_format,
    };
    let mut w = WavWriter::create(path, spec)?;
    let gain = match format {
        WavFormat::Float32 => {
            for &v in x.samples() {
                w.write_sample(v as f32)?;
            }
            1.0
        }
        WavFormat::Pcm16 | WavFormat::Pcm24 => {
            let peak = x.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let gain = if peak >= 1.0 { 0.99 / peak } else { 1.0 };
            let full = (1i64 << (bits - 1)) as f64;
            for &v in x.samples() {
                let q = (v * gain * full).round().clamp(-full, full - 1.0);
                w.write_sample(q as i32)?;
            }
            gain
        }
    };
    w.finalize()?;
    Ok(gain)
}

/// Reads a mono file; PCM samples are scaled to `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<SampledSignal> {
    let mut r = WavReader::open(path)?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(CliError::Input(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => r.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let full = (1i64 << (spec.bits_per_sample - 1)) as f64;
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    Ok(SampledSignal::new(samples, spec.sample_rate as f64)?)
}

fn fs_to_rate(fs: f64) -> Result<u32> {
    if fs.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&fs) {
        return Err(CliError::Config(format!("`signal.fs`: WAV needs an integral rate, got {fs}")));
    }
    Ok(fs as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone() -> SampledSignal {
        SampledSignal::new((0..1000).map(|i| 0.5 * (i as f64 * 0.1).sin() + 1e-3).collect(), 8000.0).unwrap()
    }

    #[test]
    fn float_roundtrip_is_exact_at_f32() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let x = tone();
        assert_eq!(write_wav(&p, &x, WavFormat::Float32).unwrap(), 1.0);
        let y = read_wav(&p).unwrap();
        assert_eq!(y.fs(), 8000.0);
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }

    #[test]
    fn pcm_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        for (fmt, bits) in [(WavFormat::Pcm16, 16), (WavFormat::Pcm24, 24)] {
            let p = dir.path().join("x.wav");
            let x = tone();
            write_wav(&p, &x, fmt).unwrap();
            let y = read_wav(&p).unwrap();
            let lsb = 1.0 / (1i64 << (bits - 1)) as f64;
            for (a, b) in x.samples().iter().zip(y.samples()) {
                assert!((a - b).abs() <= lsb, "{bits}-bit");
            }
        }
    }

    #[test]
    fn clipping_pcm_is_rescaled() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let x = SampledSignal::new(vec![0.0, 4.0, -2.0, 1.0], 8000.0).unwrap();
        let gain = write_wav(&p, &x, WavFormat::Pcm16).unwrap();
        assert!((gain - 0.99 / 4.0).abs() < 1e-15);
        let y = read_wav(&p).unwrap();
        assert!((y.samples()[1] - 0.99).abs() < 1e-4);
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = WavSpec { channels: 2, sample_rate: 8000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for _ in 0..8 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(CliError::Input(_))));
    }
}
