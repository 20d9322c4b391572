use num_complex::Complex64;
use rustfft::FftPlanner;

/// Unnormalized forward DFT of a real sequence.
pub fn forward_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse DFT including the `1/N` factor.
pub fn inverse_normalized(mut spectrum: Vec<Complex64>) -> Vec<Complex64> {
    let n = spectrum.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let scale = 1.0 / n as f64;
    spectrum.iter_mut().for_each(|v| *v *= scale);
    spectrum
}

/// Frequency in Hz of DFT bin `k` for a length-`n` transform (negative above Nyquist).
pub fn bin_frequency(k: usize, n: usize, fs: f64) -> f64 {
    if 2 * k <= n {
        k as f64 * fs / n as f64
    } else {
        (k as f64 - n as f64) * fs / n as f64
    }
}
