//! Photon-statistics observables: g²(τ), detector response, FFT peak
//! analysis of Rabi traces and the resonance-fluorescence spectrum.

mod emission;
mod fft;

pub use emission::emission_spectrum;
pub use fft::{fft_peaks, magnitude_spectrum, Peak, Window};

use crate::error::{invalid, Error, Result};
use crate::qdyn::{EvolveOptions, TimeGrid};
use crate::tls::{self, Drive, TlsParams};
use crate::trace::Meta;
pub use crate::trace::TimeTrace;

/// Fit-side nuisance parameters for measured correlation data:
/// `A·g²(τ − dt) + Δg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2FitModel {
    pub scale_a: f64,
    pub offset_dg: f64,
    pub time_offset_dt: f64,
}

impl G2FitModel {
    pub fn new(scale_a: f64, offset_dg: f64, time_offset_dt: f64) -> Result<Self> {
        if !(scale_a > 0.0) {
            return Err(invalid("scale_a", "must be positive"));
        }
        Ok(Self {
            scale_a,
            offset_dg,
            time_offset_dt,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    FftOfTrace,
    Emission,
}

/// Magnitude versus ordinary frequency (GHz) on a strictly increasing axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq_ghz: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub kind: SpectrumKind,
    pub meta: Meta,
}

/// Normalized intensity correlation `g²(τ)` on `[−T, T]`.
///
/// `grid` must start at 0; the returned trace is its even reflection.
pub fn g2_curve(params: &TlsParams, drive: &Drive, grid: &TimeGrid) -> Result<TimeTrace> {
    g2_one_sided(params, drive, grid)?.even_reflection()
}

/// `g²(τ)` for `τ ≥ 0` on `grid`.
pub fn g2_one_sided(params: &TlsParams, drive: &Drive, grid: &TimeGrid) -> Result<TimeTrace> {
    if grid.t_start() != 0.0 {
        return Err(invalid("grid", "g2 grid must start at τ = 0"));
    }
    if drive.rabi_ghz == 0.0 {
        return Err(Error::Undriven);
    }
    let opts = EvolveOptions::with_max_step(tls::integration_step(params, drive));
    let values = tls::normalized_correlation(params, drive, grid, &opts)?;
    Ok(TimeTrace::new(*grid, values)?
        .with_meta("quantity", "g2")
        .with_meta("t1_ns", params.t1())
        .with_meta("t2_ns", params.t2())
        .with_meta("rabi_ghz", drive.rabi_ghz)
        .with_meta("detuning_ghz", drive.detuning_ghz))
}

/// Convolution with a unit-area Gaussian detector response of width `sigma` (ns).
///
/// Each input sample is spread over its in-range neighbours with kernel
/// weights renormalized to the samples that exist, so the sample sum (and
/// hence `dt·Σ`) is conserved exactly and the map stays linear.
pub fn apply_irf(trace: &TimeTrace, sigma: f64) -> Result<TimeTrace> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("irf_sigma_ns", format!("must be ≥ 0, got {sigma}")));
    }
    let limit = trace.grid.span() / 4.0;
    if sigma > limit {
        return Err(Error::KernelTooWide { sigma, limit });
    }
    if sigma == 0.0 {
        return Ok(trace.clone());
    }
    let dt = trace.grid.dt();
    let n = trace.len();
    let half = ((6.0 * sigma / dt).ceil() as usize).max(1);
    let kernel: Vec<f64> = (0..=half)
        .map(|k| {
            let x = k as f64 * dt / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let mut out = vec![0.0; n];
    for (i, &v) in trace.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let norm: f64 = (lo..=hi).map(|j| kernel[i.abs_diff(j)]).sum();
        for j in lo..=hi {
            out[j] += v * kernel[i.abs_diff(j)] / norm;
        }
    }
    let mut result = TimeTrace::new(trace.grid, out)?;
    result.meta = trace.meta.clone();
    result.meta.insert("irf_sigma_ns".into(), sigma.to_string());
    Ok(result)
}

/// `dt · Σ values`, the quantity [`apply_irf`] conserves.
pub fn sample_integral(trace: &TimeTrace) -> f64 {
    trace.grid.dt() * trace.values.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bump() -> TimeTrace {
        let grid = TimeGrid::new(-5.0, 5.0, 1001).unwrap();
        let v = grid.times().iter().map(|t| (-t * t).exp()).collect();
        TimeTrace::new(grid, v).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let t = bump();
        assert_eq!(apply_irf(&t, 0.0).unwrap().values, t.values);
    }

    #[test]
    fn irf_conserves_integral() {
        let t = bump();
        let c = apply_irf(&t, 0.3).unwrap();
        assert!((t.integral() - c.integral()).abs() < 1e-6);
        assert!((sample_integral(&t) - sample_integral(&c)).abs() < 1e-12);
        // Edge-heavy trace: sample integral still conserved.
        let grid = TimeGrid::new(0.0, 4.0, 401).unwrap();
        let ramp = TimeTrace::new(grid, grid.times()).unwrap();
        let cr = apply_irf(&ramp, 0.5).unwrap();
        assert!((sample_integral(&ramp) - sample_integral(&cr)).abs() < 1e-12);
    }

    #[test]
    fn irf_too_wide_is_rejected() {
        assert!(matches!(
            apply_irf(&bump(), 3.0),
            Err(Error::KernelTooWide { .. })
        ));
        assert!(apply_irf(&bump(), -1.0).is_err());
    }

    #[test]
    fn g2_requires_drive() {
        let grid = TimeGrid::new(0.0, 5.0, 51).unwrap();
        let err = g2_curve(&TlsParams::siv_c(), &Drive::resonant(0.0).unwrap(), &grid).unwrap_err();
        assert_eq!(err, Error::Undriven);
    }

    #[test]
    fn g2_starts_at_zero_and_decorrelates() {
        let p = TlsParams::siv_c();
        let grid = TimeGrid::new(0.0, 18.5, 371).unwrap();
        let g = g2_curve(&p, &Drive::resonant(0.906).unwrap(), &grid).unwrap();
        let centre = grid.n_points() - 1;
        assert!(g.values[centre].abs() < 1e-9);
        assert_abs_diff_eq!(*g.values.last().unwrap(), 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(g.values[0], 1.0, epsilon = 1e-4);
        assert!(g.values.iter().all(|v| *v >= -1e-9));
    }

    #[test]
    fn g2_fit_model_requires_positive_scale() {
        assert!(G2FitModel::new(0.0, 0.1, 0.0).is_err());
        assert!(G2FitModel::new(1.0, 0.1, 0.0).is_ok());
    }
}
