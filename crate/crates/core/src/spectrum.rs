//! DFT-based power measurement helpers.
//!
//! The simulation grids in this crate are built so that every tone and
//! every intermod product falls exactly on a DFT bin. Single-bin phasors
//! are therefore computed with integer phase accumulation (`m * bin mod M`
//! stays exact in u64), which avoids the argument-reduction error of
//! evaluating `cos` at large arguments.
//!
//! Power conventions: a real tone of peak amplitude C carries power
//! C^2 / 2. All spectra here are normalized so that summing bin powers
//! reproduces the mean-square value of the input (Parseval), which also
//! makes band-integrated power of an on-bin line exact regardless of the
//! analysis window.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;
use std::sync::Arc;

use crate::exec;

/// Complex amplitude `C * exp(j*phi)` of the bin `bin` cycles per record,
/// such that the matching component of `y` is `C * cos(2*pi*f*t + phi)`.
/// Scaled by 2/M; only meaningful for 0 < bin < M/2.
pub(crate) fn single_bin_phasor(y: &[f64], bin: u64) -> Complex64 {
    let m_total = y.len() as u64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, &sample) in y.iter().enumerate() {
        let units = (m as u64 * bin) % m_total;
        let angle = -TAU * units as f64 / m_total as f64;
        let (sin, cos) = angle.sin_cos();
        acc += Complex64::new(sample * cos, sample * sin);
    }
    acc * (2.0 / m_total as f64)
}

/// One-sided power spectrum of the full record with a rectangular window.
/// Returns `(frequency_hz, power_v2)` per bin; bin powers sum to the
/// mean square of `y`.
#[allow(clippy::needless_range_loop)]
pub fn power_spectrum(y: &[f64], sample_rate: f64) -> Vec<(f64, f64)> {
    let m_total = y.len();
    assert!(m_total > 0, "empty record");
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(m_total)
        .process(&mut buf);

    let scale = 1.0 / (m_total as f64 * m_total as f64);
    let half = m_total / 2;
    let bin_hz = sample_rate / m_total as f64;
    let mut out = Vec::with_capacity(half + 1);
    out.push((0.0, buf[0].norm_sqr() * scale));
    for k in 1..half {
        out.push((k as f64 * bin_hz, 2.0 * buf[k].norm_sqr() * scale));
    }
    if m_total.is_multiple_of(2) && m_total > 1 {
        out.push((half as f64 * bin_hz, buf[half].norm_sqr() * scale));
    }
    out
}

/// Two-sided per-bin power averaged over `n_segments` non-overlapping
/// Hann-windowed segments. Bin k holds frequency `k * fs / seg_len` for
/// k <= seg_len/2 and the negative mirror above. Bin powers sum to the
/// mean square of `y` in expectation.
pub(crate) fn hann_psd_two_sided(y: &[f64], n_segments: usize) -> Vec<f64> {
    assert!(n_segments >= 1 && y.len() >= n_segments);
    let seg_len = y.len() / n_segments;
    let window: Vec<f64> = (0..seg_len)
        .map(|m| 0.5 * (1.0 - (TAU * m as f64 / seg_len as f64).cos()))
        .collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg_len);
    let fft: Arc<dyn rustfft::Fft<f64>> = fft;

    let per_segment = exec::map_indexed(n_segments, |s| {
        let seg = &y[s * seg_len..(s + 1) * seg_len];
        let mut buf: Vec<Complex64> = seg
            .iter()
            .zip(&window)
            .map(|(&v, &w)| Complex64::new(v * w, 0.0))
            .collect();
        fft.process(&mut buf);
        let scale = 1.0 / (seg_len as f64 * window_energy);
        buf.into_iter()
            .map(|c| c.norm_sqr() * scale)
            .collect::<Vec<f64>>()
    });

    let mut avg = vec![0.0; seg_len];
    for seg in &per_segment {
        for (a, p) in avg.iter_mut().zip(seg) {
            *a += p;
        }
    }
    let inv = 1.0 / n_segments as f64;
    for a in &mut avg {
        *a *= inv;
    }
    avg
}

/// One-sided `(frequency_hz, power_v2)` view of [`hann_psd_two_sided`].
pub fn welch_spectrum(y: &[f64], sample_rate: f64, n_segments: usize) -> Vec<(f64, f64)> {
    let psd = hann_psd_two_sided(y, n_segments);
    let seg_len = psd.len();
    let half = seg_len / 2;
    let bin_hz = sample_rate / seg_len as f64;
    let mut out = Vec::with_capacity(half + 1);
    out.push((0.0, psd[0]));
    for k in 1..half {
        out.push((k as f64 * bin_hz, psd[k] + psd[seg_len - k]));
    }
    if seg_len.is_multiple_of(2) && seg_len > 1 {
        out.push((half as f64 * bin_hz, psd[half]));
    }
    out
}

/// Total power of the two-sided PSD whose bin frequency magnitude falls in
/// `[lo, hi)`. The half-open interval keeps adjacent bands disjoint.
pub(crate) fn band_power_from_psd(psd: &[f64], sample_rate: f64, lo: f64, hi: f64) -> f64 {
    let seg_len = psd.len();
    let bin_hz = sample_rate / seg_len as f64;
    let half = seg_len / 2;
    let mut total = 0.0;
    for k in 1..=half {
        let f = k as f64 * bin_hz;
        if f >= lo && f < hi {
            total += psd[k];
            if k != half || !seg_len.is_multiple_of(2) {
                total += psd[seg_len - k];
            }
        }
    }
    total
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(m_total: usize, bin: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..m_total)
            .map(|m| amp * (TAU * bin * m as f64 / m_total as f64 + phase).cos())
            .collect()
    }

    #[test]
    fn single_bin_recovers_amplitude_and_phase() {
        let y = tone(1024, 37.0, 3.0, 0.5);
        let p = single_bin_phasor(&y, 37);
        assert!((p.norm() - 3.0).abs() < 1e-9);
        assert!((p.arg() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn single_bin_rejects_other_content() {
        let y = vec![4.2; 512];
        assert!(single_bin_phasor(&y, 5).norm() < 1e-10);

        let mut two = tone(512, 10.0, 1.0, 0.1);
        for (a, b) in two.iter_mut().zip(tone(512, 33.0, 2.0, -0.7)) {
            *a += b;
        }
        let p10 = single_bin_phasor(&two, 10);
        let p33 = single_bin_phasor(&two, 33);
        assert!((p10.norm() - 1.0).abs() < 1e-9);
        assert!((p33.norm() - 2.0).abs() < 1e-9);
        assert!((p33.arg() + 0.7).abs() < 1e-9);
    }

    #[test]
    fn power_spectrum_satisfies_parseval() {
        let mut y = tone(2048, 100.0, 1.5, 0.3);
        for (a, b) in y.iter_mut().zip(tone(2048, 431.0, 0.4, 2.0)) {
            *a += b + 0.25; // plus a DC offset
        }
        let mean_square: f64 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let total: f64 = power_spectrum(&y, 2048.0).iter().map(|&(_, p)| p).sum();
        assert!((total - mean_square).abs() <= 1e-9 * mean_square);
    }

    #[test]
    fn power_spectrum_tone_power() {
        let y = tone(1024, 64.0, 1.0, 0.0);
        let spec = power_spectrum(&y, 1024.0);
        assert!((spec[64].1 - 0.5).abs() < 1e-12);
        let rest: f64 = spec
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != 64)
            .map(|(_, &(_, p))| p)
            .sum();
        assert!(rest < 1e-15);
    }

    #[test]
    fn welch_band_power_captures_on_bin_line() {
        // Segment length 512: an on-segment-bin tone spreads over exactly
        // three Hann bins, all inside a generous band.
        let y = tone(8192, 16.0 * 33.0, 2.0, 1.0); // 33 cycles per segment
        let psd = hann_psd_two_sided(&y, 16);
        let fs = 8192.0;
        let line_hz = 33.0 * fs / 512.0;
        let band = band_power_from_psd(
            &psd,
            fs,
            line_hz - 5.0 * fs / 512.0,
            line_hz + 5.0 * fs / 512.0,
        );
        assert!((band - 2.0).abs() < 1e-9, "got {band}");
        let elsewhere = band_power_from_psd(&psd, fs, 0.5, line_hz - 5.0 * fs / 512.0);
        assert!(elsewhere < 1e-12);
    }

    #[test]
    fn welch_spectrum_parseval_in_expectation_for_lines() {
        let y = tone(4096, 256.0, 1.0, 0.0);
        let total: f64 = welch_spectrum(&y, 4096.0, 8).iter().map(|&(_, p)| p).sum();
        assert!((total - 0.5).abs() < 1e-9);
    }
}
