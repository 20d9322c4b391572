use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::interp::CubicSpline;
use crate::signal::{PowerSpectrum, SampledSignal};
use crate::wavelet::{TimeScaleTransform, WaveletSpec};

const INTEGER_SNAP: f64 = 1e-9;

/// `W_x(s_m, ·) = W_y(s_m − θ2, ·)/√θ1`, column by column.
///
/// Scale shifts that are not a multiple of the grid step use a natural cubic spline of
/// the column along the scale axis (real and imaginary parts separately). Rows whose
/// shifted scale falls outside the grid are marked invalid.
pub fn unwarp_coeffs(
    wy: &TimeScaleTransform,
    theta1: &[f64],
    theta2: &[f64],
) -> Result<TimeScaleTransform> {
    let (rows, cols) = (wy.rows(), wy.cols());
    for v in [theta1.len(), theta2.len()] {
        if v != cols {
            return Err(Error::DimensionMismatch { expected: cols, got: v });
        }
    }
    if let Some(bad) = theta1.iter().find(|&&t| !(t > 0.0)) {
        return Err(invalid("theta1", format!("must be positive, got {bad}")));
    }
    let step = wy.grid().step();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); rows * cols];
    let mut mask = vec![false; rows * cols];
    let last = (rows - 1) as f64;
    for n in 0..cols {
        let shift = theta2[n] / step;
        let gain = 1.0 / theta1[n].sqrt();
        let col = wy.column(n);
        let near = shift.round();
        let splines = if (shift - near).abs() > INTEGER_SNAP && rows >= 2 {
            let re: Vec<f64> = col.iter().map(|c| c.re).collect();
            let im: Vec<f64> = col.iter().map(|c| c.im).collect();
            Some((CubicSpline::uniform(0.0, 1.0, &re), CubicSpline::uniform(0.0, 1.0, &im)))
        } else {
            None
        };
        let mut any = false;
        for m in 0..rows {
            let u = m as f64 - shift;
            if u < -INTEGER_SNAP || u > last + INTEGER_SNAP {
                continue;
            }
            let v = match &splines {
                None => col[(m as f64 - near) as usize],
                Some((re, im)) => {
                    let u = u.clamp(0.0, last);
                    Complex64::new(re.eval(u), im.eval(u))
                }
            };
            coeffs[m * cols + n] = v * gain;
            mask[m * cols + n] = true;
            any = true;
        }
        if !any {
            return Err(Error::NoValidRows { column: n });
        }
    }
    TimeScaleTransform::new(coeffs, wy.grid().clone(), wy.times().to_vec(), wy.fs())?.with_mask(mask)
}

/// Mean energy per row over valid columns, `S̃(q^{−s_m}ω0) = Σ|W|²/(N_valid ‖ψ‖²)`,
/// as a piecewise-linear spectrum through the analysed frequencies.
pub fn spectrum_estimate(wx: &TimeScaleTransform, spec: &WaveletSpec) -> Result<PowerSpectrum> {
    let nyquist = wx.fs() / 2.0;
    let freqs = wx.grid().frequencies(spec.omega0());
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(wx.rows());
    for (m, &nu) in freqs.iter().enumerate() {
        if !(nu > 0.0 && nu <= nyquist) {
            continue;
        }
        let (mut acc, mut count) = (0.0, 0usize);
        for (n, c) in wx.row(m).iter().enumerate() {
            if wx.is_valid(m, n) {
                acc += c.norm_sqr();
                count += 1;
            }
        }
        if count > 0 {
            points.push((nu, acc / (count as f64 * spec.norm_sq())));
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| a.0 == b.0);
    let (f, v): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    PowerSpectrum::new(f, v, nyquist)
}

/// Averaged modified periodogram with a Hann window and per-segment mean removal.
///
/// One-sided density: `Σ PSD·Δν` approximates the variance.
pub fn welch_psd(x: &SampledSignal, segment: usize, overlap: usize) -> Result<PowerSpectrum> {
    if segment < 2 || segment > x.len() {
        return Err(invalid(
            "segment",
            format!("segment length must lie in [2, {}], got {segment}", x.len()),
        ));
    }
    if overlap >= segment {
        return Err(invalid("overlap", "overlap must be smaller than the segment"));
    }
    let hop = segment - overlap;
    let window: Vec<f64> = (0..segment)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / segment as f64).cos())
        .collect();
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let fs = x.fs();
    let bins = segment / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    let mut start = 0;
    let data = x.samples();
    while start + segment <= data.len() {
        let seg = &data[start..start + segment];
        let mean = seg.iter().sum::<f64>() / segment as f64;
        let tapered: Vec<f64> = seg.iter().zip(&window).map(|(v, w)| (v - mean) * w).collect();
        let spec = fft::forward_real(&tapered);
        for (k, a) in acc.iter_mut().enumerate() {
            let edge = k == 0 || (segment % 2 == 0 && k == segment / 2);
            let factor = if edge { 1.0 } else { 2.0 };
            *a += factor * spec[k].norm_sqr() / (fs * energy);
        }
        count += 1;
        start += hop;
    }
    let freqs = (0..bins).map(|k| fft::bin_frequency(k, segment, fs)).collect();
    let values = acc.into_iter().map(|a| a / count as f64).collect();
    PowerSpectrum::new(freqs, values, fs / 2.0)
}
