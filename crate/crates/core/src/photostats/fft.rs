use std::cmp::Ordering;
use std::f64::consts::TAU;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Spectrum, SpectrumKind};
use crate::trace::{Meta, TimeTrace};

const ZERO_PADDING: usize = 4;
const PEAK_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq_ghz: f64,
    pub magnitude: f64,
}

/// One-sided magnitude spectrum of the mean-removed, Hann-windowed trace,
/// zero-padded to four times its length.
pub fn magnitude_spectrum(trace: &TimeTrace, window: Window) -> Spectrum {
    let n = trace.len();
    let mean = trace.values.iter().sum::<f64>() / n as f64;
    let padded = ZERO_PADDING * n;
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); padded];
    for (k, v) in trace.values.iter().enumerate() {
        let w = match window {
            Window::Hann => 0.5 * (1.0 - (TAU * k as f64 / (n - 1) as f64).cos()),
        };
        buf[k] = Complex::new((v - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let df = 1.0 / (padded as f64 * trace.grid.dt());
    let half = padded / 2;
    let mut meta = Meta::new();
    meta.insert("window".into(), "hann".into());
    meta.insert("zero_padding".into(), ZERO_PADDING.to_string());
    meta.insert("bin_ghz".into(), df.to_string());
    Spectrum {
        freq_ghz: (0..=half).map(|k| k as f64 * df).collect(),
        magnitude: buf[..=half].iter().map(|c| c.norm()).collect(),
        kind: SpectrumKind::FftOfTrace,
        meta,
    }
}

/// Parabolic vertex offset (in bins) through three samples around a maximum.
fn vertex_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

/// Local maxima above 5 % of the global maximum, refined by a three-point
/// parabola on log-magnitude, strongest first (ties towards lower frequency).
/// The DC bin is never reported.
pub fn find_peaks(spec: &Spectrum, n_peaks: usize) -> Vec<Peak> {
    let m = &spec.magnitude;
    let global = m.iter().cloned().fold(0.0, f64::max);
    if global <= 0.0 || m.len() < 3 {
        return Vec::new();
    }
    let df = spec.freq_ghz[1] - spec.freq_ghz[0];
    let mut peaks: Vec<Peak> = (1..m.len() - 1)
        .filter(|&k| m[k] > m[k - 1] && m[k] >= m[k + 1] && m[k] >= PEAK_THRESHOLD * global)
        .map(|k| {
            let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
            let (delta, mag) = if a > 0.0 && c > 0.0 {
                let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
                let d = vertex_offset(la, lb, lc);
                (d, (lb - 0.25 * (la - lc) * d).exp())
            } else {
                let d = vertex_offset(a, b, c);
                (d, b - 0.25 * (a - c) * d)
            };
            Peak {
                freq_ghz: spec.freq_ghz[k] + delta * df,
                magnitude: mag,
            }
        })
        .collect();
    peaks.sort_by(|p, q| match q.magnitude.partial_cmp(&p.magnitude) {
        Some(Ordering::Equal) | None => p.freq_ghz.total_cmp(&q.freq_ghz),
        Some(o) => o,
    });
    peaks.truncate(n_peaks);
    peaks
}

/// Spectrum and strongest `n_peaks` oscillation frequencies of `trace`.
pub fn fft_peaks(trace: &TimeTrace, window: Window, n_peaks: usize) -> (Spectrum, Vec<Peak>) {
    let spec = magnitude_spectrum(trace, window);
    let peaks = find_peaks(&spec, n_peaks);
    (spec, peaks)
}
