//! Closed-form and cross-module oracles for the numerical engine.

use std::f64::consts::{PI, TAU};

use sivlab::fitkit::{
    fit_exp_decay, fit_exp_envelope, fit_linear, fit_linear_sqrtp, fit_lorentzian_fwhm, fit_rabi,
    fit_rabi_from, fit_sine_sqrtp, lm_fit, lorentzian, FitData, ParamSpec, Weighting,
};
use sivlab::lambda::{dip_splitting, probe_scan, LambdaParams};
use sivlab::photostats::{apply_irf, emission_spectrum, fft_peaks, g2_one_sided, Window};
use sivlab::qdyn::{
    evolve, evolve_with, steady_residual, steady_state, DensityMatrix, EvolveOptions, TimeGrid,
};
use sivlab::ramsey::{visibility_curve, RamseySequence};
use sivlab::synth::{synth_counts, NoiseSpec};
use sivlab::tls::{
    self, lineshape_fwhm_analytic, mu_mode_oracle, power_to_rabi, rabi_population_analytic,
    Drive, MuMode, PowerCalib, PulseEnvelope, TlsParams,
};
use sivlab::trace::{linspace, Curve, TimeTrace};

fn siv() -> TlsParams {
    TlsParams::siv_c()
}

#[test]
fn mu_oracle_selects_obe_by_wide_margin() {
    let o = mu_mode_oracle();
    assert_eq!(o.mode, MuMode::Obe);
    assert!(o.discrimination() > 1e3, "{o:?}");
}

#[test]
fn closed_form_matches_regression_correlator() {
    let grid = TimeGrid::new(0.0, 10.0, 1001).unwrap();
    for rabi in [0.906, 1.304, 1.854] {
        let d = Drive::resonant(rabi).unwrap();
        let opts = EvolveOptions::with_max_step(tls::integration_step(&siv(), &d)).tolerance(1e-11);
        let rms = tls::analytic_vs_numeric_rms(&siv(), &d, MuMode::Obe, &grid, &opts).unwrap();
        assert!(rms < 1e-6, "Ω/2π = {rabi}: rms {rms}");
    }
}

#[test]
fn rk4_global_error_is_fourth_order() {
    let l = tls::liouvillian(&siv(), &Drive::new(1.304, 0.4).unwrap()).unwrap();
    let rho0 = DensityMatrix::basis(2, tls::GROUND);
    let grid = TimeGrid::new(0.0, 2.0, 2).unwrap();
    let reference = evolve_with(&l, &rho0, &grid, &EvolveOptions::fixed_step(1e-4)).unwrap()[1].population(1);
    let err = |h: f64| {
        let p = evolve_with(&l, &rho0, &grid, &EvolveOptions::fixed_step(h)).unwrap()[1].population(1);
        (p - reference).abs()
    };
    let (e1, e2) = (err(0.04), err(0.02));
    let order = (e1 / e2).log2();
    assert!((order - 4.0).abs() < 0.3, "observed order {order}");
}

#[test]
fn steady_state_is_a_fixed_point_of_evolution() {
    let l = tls::liouvillian(&siv(), &Drive::new(0.7, -0.3).unwrap()).unwrap();
    let ss = steady_state(&l).unwrap();
    assert!(steady_residual(&l, ss.matrix()) < 1e-10);
    let grid = TimeGrid::new(0.0, 5.0, 11).unwrap();
    for rho in evolve(&l, &ss, &grid).unwrap() {
        assert!((rho.matrix() - ss.matrix()).max_abs() < 1e-9);
    }
}

#[test]
fn steady_population_matches_bloch_formula() {
    let p = siv();
    for (rabi, det) in [(0.1, 0.0), (0.3, 0.2), (1.0, -0.5)] {
        let d = Drive::new(rabi, det).unwrap();
        let s = p.saturation(d.rabi_angular());
        let x = d.detuning_angular() * p.t2();
        let expected = 0.5 * s / (1.0 + s + x * x);
        let got = tls::steady_population(&p, &d).unwrap();
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }
}

#[test]
fn transform_limited_linewidth() {
    let p = TlsParams::new(1.85, 3.7).unwrap();
    let rabi = (0.01f64 / (1.85 * 3.7)).sqrt() / TAU;
    let curve = tls::excitation_lineshape(&p, rabi, &linspace(-0.5, 0.5, 201)).unwrap();
    let fwhm = fit_lorentzian_fwhm(&curve).unwrap().value("fwhm").unwrap();
    assert!((fwhm - 0.086).abs() < 0.03 * 0.086, "{fwhm}");
    assert!((fwhm - lineshape_fwhm_analytic(&p, rabi)).abs() < 1e-6);
}

#[test]
fn lineshape_offset_invariance() {
    let x = linspace(-1.0, 1.0, 101);
    let y: Vec<f64> = x.iter().map(|&x| lorentzian(x, 0.1, 0.3, 1.0, 0.0)).collect();
    let a = fit_lorentzian_fwhm(&Curve::new(x.clone(), y.clone()).unwrap()).unwrap();
    let shifted = y.iter().map(|v| v + 7.5).collect();
    let b = fit_lorentzian_fwhm(&Curve::new(x, shifted).unwrap()).unwrap();
    assert!((a.value("fwhm").unwrap() - b.value("fwhm").unwrap()).abs() < 1e-8);
}

#[test]
fn detuned_trace_oscillates_at_generalized_rabi() {
    let d = Drive::new(1.304, 1.0).unwrap();
    let grid = TimeGrid::new(0.0, 10.0, 2001).unwrap();
    let pulse = PulseEnvelope::square(9.999, 10.0).unwrap();
    let trace = tls::rabi_trace_numeric(&siv(), &d, &pulse, &grid).unwrap();
    let (spec, peaks) = fft_peaks(&trace, Window::Hann, 1);
    let bin: f64 = spec.meta["bin_ghz"].parse().unwrap();
    assert!((peaks[0].freq_ghz - 1.6433).abs() < bin);
}

#[test]
fn mollow_triplet_positions_and_heights() {
    let p = TlsParams::radiative(1.85).unwrap();
    let freqs = linspace(-4.0, 4.0, 401);
    let s = emission_spectrum(&p, &Drive::resonant(2.0).unwrap(), &freqs).unwrap();
    let m = &s.magnitude;
    let maxima: Vec<usize> = (1..m.len() - 1).filter(|&k| m[k] > m[k - 1] && m[k] >= m[k + 1]).collect();
    assert_eq!(maxima.len(), 3);
    let pos: Vec<f64> = maxima.iter().map(|&k| freqs[k]).collect();
    assert!((pos[0] + 2.0).abs() < 0.04 && pos[1].abs() < 0.04 && (pos[2] - 2.0).abs() < 0.04);
    let ratio = m[maxima[1]] / m[maxima[0]];
    assert!((ratio - 3.0).abs() < 0.3, "{ratio}");
}

#[test]
fn g2_antibunching_and_irf_filling() {
    let d = Drive::resonant(0.906).unwrap();
    let grid = TimeGrid::new(0.0, 18.5, 1851).unwrap();
    let g2 = g2_one_sided(&siv(), &d, &grid).unwrap();
    assert!(g2.values[0].abs() < 1e-6);
    assert!((g2.values[g2.len() - 1] - 1.0).abs() < 1e-3);
    let two = g2.even_reflection().unwrap();
    let centre = two.len() / 2;
    let mut last = two.values[centre];
    for sigma in [0.05, 0.15, 0.3] {
        let v = apply_irf(&two, sigma).unwrap().values[centre];
        assert!(v > last);
        last = v;
    }
}

#[test]
fn autler_townes_splitting_tracks_pump() {
    let p = LambdaParams::default();
    let detunings = linspace(-1.5, 1.5, 301);
    let mut pairs = Vec::new();
    for oc in [0.3, 0.5, 0.8] {
        let c = probe_scan(&p, oc, 0.0, 0.02, &detunings).unwrap();
        let split = dip_splitting(&c).unwrap();
        assert!((split - oc).abs() < 0.05 * oc, "{split} vs {oc}");
        pairs.push((oc * oc, split));
    }
    let fit = fit_linear_sqrtp(&pairs).unwrap();
    assert!(fit.r_squared > 0.99);
}

#[test]
fn ramsey_visibility_follows_coherence_decay() {
    let p = TlsParams::new(1.85, 0.78).unwrap();
    let pulse = PulseEnvelope::square(0.01, 12.5).unwrap();
    let taus = linspace(0.0, 3.0, 13);
    let v = visibility_curve(&p, &pulse, &taus).unwrap();
    assert!(v.y[0] > 0.95);
    assert!(v.y.windows(2).all(|w| w[1] <= w[0]));
    let fit = fit_exp_envelope(&v).unwrap();
    let t = fit.value("tau_ns").unwrap();
    assert!((t - 0.78).abs() < 0.05 * 0.78, "{t}");
    let _ = RamseySequence::new(pulse, 0.0, 0.0).unwrap();
}

#[test]
fn pulsed_rabi_period_matches_pulse_area() {
    let pulse = PulseEnvelope::square(0.2, 12.5).unwrap();
    let calib = PowerCalib::new(20.0).unwrap();
    let x = linspace(0.0, 600.0, 121);
    let powers: Vec<f64> = x.iter().map(|v| v * v).collect();
    let c = tls::pulsed_rabi_scan(&siv(), &pulse, &powers, &calib).unwrap();
    let pairs: Vec<(f64, f64)> = c.x.iter().copied().zip(c.y.iter().copied()).collect();
    let period = fit_sine_sqrtp(&pairs).unwrap().value("period").unwrap();
    // ρ_ee = sin²(Ω·T/2) with Ω ∝ √P, so the √P period gives Ω·T = 2π.
    let rabi_per_sqrt_nw = TAU * power_to_rabi(&calib, &siv(), 1.0);
    let expected = TAU / (rabi_per_sqrt_nw * 0.2);
    assert!((period - expected).abs() < 0.05 * expected, "{period} vs {expected}");
}

fn analytic_trace(rabi: f64, t2: f64, a: f64, dg: f64) -> TimeTrace {
    let p = TlsParams::new(1.85, t2).unwrap();
    let d = Drive::resonant(rabi).unwrap();
    let grid = TimeGrid::new(0.0, 10.0, 1001).unwrap();
    let v = grid
        .times()
        .iter()
        .map(|&t| a * rabi_population_analytic(&p, &d, t, MuMode::Obe) + dg)
        .collect();
    TimeTrace::new(grid, v).unwrap()
}

#[test]
fn rabi_fit_recovers_noiseless_parameters() {
    let trace = analytic_trace(1.304, 1.62, 0.8, 0.05);
    let r = fit_rabi(&trace, 1.85, MuMode::Obe, Weighting::Unit).unwrap();
    assert!(r.converged, "{}", r.message);
    assert!((r.value("omega_ghz").unwrap() - 1.304).abs() < 1e-6);
    assert!((r.value("t2_ns").unwrap() - 1.62).abs() < 1e-6);
}

#[test]
fn rabi_fit_basin_is_robust_to_30_percent_offsets() {
    let trace = analytic_trace(1.304, 1.62, 0.8, 0.05);
    let r = fit_rabi_from(&trace, 1.85, MuMode::Obe, Weighting::Unit, [1.304 * 1.3, 1.62 * 0.7, 0.8 * 1.3, 0.0, 0.0]).unwrap();
    assert!((r.value("omega_ghz").unwrap() - 1.304).abs() < 1e-6);
    assert!((r.value("t2_ns").unwrap() - 1.62).abs() < 1e-6);
}

#[test]
fn lifetime_and_ramsey_decays() {
    let x = linspace(0.0, 10.0, 201);
    for tau in [1.85, 0.78] {
        let y = x.iter().map(|t| 1e3 * (-t / tau).exp() + 4.0).collect();
        let r = fit_exp_decay(&Curve::new(x.clone(), y).unwrap()).unwrap();
        assert!((r.value("tau_ns").unwrap() - tau).abs() < 1e-8);
    }
}

#[test]
fn linear_model_lm_equals_closed_form() {
    let x = linspace(0.0, 5.0, 30);
    let y: Vec<f64> = x.iter().enumerate().map(|(k, x)| 0.7 * x - 0.2 + 0.01 * ((k * 7 % 5) as f64 - 2.0)).collect();
    let closed = fit_linear(&x, &y).unwrap();
    let lm = lm_fit(
        |x, p| p[0] * x + p[1],
        &FitData::unweighted(x.clone(), y.clone()).unwrap(),
        &[ParamSpec::free("slope", 0.0), ParamSpec::free("intercept", 0.0)],
    )
    .unwrap();
    for k in 0..2 {
        assert!((closed.values[k] - lm.values[k]).abs() < 1e-10, "{:?} vs {:?} {}", closed.values, lm.values, lm.message);
        assert!((closed.stderr[k] - lm.stderr[k]).abs() < 1e-6 * closed.stderr[k]);
    }
}

#[test]
fn exact_power_calibration_line() {
    let calib = PowerCalib::new(20.0).unwrap();
    let pairs: Vec<(f64, f64)> = [50.0, 200.0, 800.0, 2000.0]
        .iter()
        .map(|&p| (p, power_to_rabi(&calib, &siv(), p)))
        .collect();
    let r = fit_linear_sqrtp(&pairs).unwrap();
    assert!(r.value("intercept").unwrap().abs() < 1e-10);
    assert!((r.r_squared - 1.0).abs() < 1e-12);
}

fn gaussian_data(copies: usize) -> FitData {
    let base = linspace(-3.0, 3.0, 61);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..copies {
        for (k, &xi) in base.iter().enumerate() {
            let noise = 1e-3 * (((k * 37 + 11) % 17) as f64 / 8.0 - 1.0);
            x.push(xi);
            y.push(2.0 * (-(xi - 0.4).powi(2) / (2.0 * 0.7f64.powi(2))).exp() + noise);
        }
    }
    FitData::unweighted(x, y).unwrap()
}

fn fit_gaussian(data: &FitData) -> sivlab::fitkit::FitResult {
    lm_fit(
        |x, p| p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp(),
        data,
        &[
            ParamSpec::positive("height", 1.0),
            ParamSpec::free("center", 0.0),
            ParamSpec::positive("width", 1.0),
        ],
    )
    .unwrap()
}

#[test]
fn gaussian_recovery_within_three_standard_errors() {
    let r = fit_gaussian(&gaussian_data(1));
    assert!((r.value("center").unwrap() - 0.4).abs() < 3.0 * r.error("center").unwrap());
    assert!((r.value("width").unwrap() - 0.7).abs() < 3.0 * r.error("width").unwrap());
}

#[test]
fn uncertainties_shrink_as_inverse_sqrt_n() {
    let one = fit_gaussian(&gaussian_data(1));
    let four = fit_gaussian(&gaussian_data(4));
    for name in ["center", "width"] {
        let ratio = one.error(name).unwrap() / four.error(name).unwrap();
        assert!((ratio - 2.0).abs() < 0.1, "{name}: {ratio}");
    }
}

/// Variance/mean over 100 seeds per bin, averaged over 16 independent bins;
/// a single bin's ratio scatters by about 0.14 at 100 samples.
#[test]
fn synthetic_counts_have_poisson_dispersion() {
    let bins = 16;
    let grid = TimeGrid::new(0.0, 1.0, bins).unwrap();
    let model = TimeTrace::new(grid, vec![1.0; bins]).unwrap();
    for mean in [4.0, 400.0] {
        let runs: Vec<Vec<u64>> = (0..100)
            .map(|seed| synth_counts(&model, &NoiseSpec::new(seed, 0.0, mean, 0.0).unwrap()).unwrap().counts)
            .collect();
        let ratio = (0..bins)
            .map(|b| {
                let s: Vec<f64> = runs.iter().map(|r| r[b] as f64).collect();
                let m = s.iter().sum::<f64>() / 100.0;
                s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 99.0 / m
            })
            .sum::<f64>()
            / bins as f64;
        assert!((0.9..=1.1).contains(&ratio), "mean {mean}: {ratio}");
    }
}

#[test]
fn ideal_ramsey_population_is_bloch_fringe() {
    let p = TlsParams::new(1.85, 0.78).unwrap();
    let pulse = PulseEnvelope::square(0.001, 12.5).unwrap();
    for (tau, phi) in [(0.3, 0.0), (0.5, 1.0), (1.2, PI)] {
        let seq = RamseySequence::new(pulse, tau, phi).unwrap();
        let got = sivlab::ramsey::ramsey_population(&p, &seq, 0.0).unwrap();
        let expected = 0.5 * (1.0 + (-tau / 0.78f64).exp() * phi.cos());
        assert!((got - expected).abs() < 5e-3, "τ={tau}, φ={phi}: {got} vs {expected}");
    }
}
