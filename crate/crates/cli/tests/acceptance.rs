//! Acceptance criteria 1–10: one PASS/FAIL line each, nonzero exit on failure.

use std::f64::consts::TAU;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sivlab::fitkit::{fit_exp_decay, fit_exp_envelope, fit_linear_sqrtp, fit_lorentzian_fwhm, fit_rabi, fit_sine_sqrtp, Weighting};
use sivlab::lambda::{self, at_map2d, dip_splitting, probe_scan, LambdaDrive, LambdaParams};
use sivlab::photostats::{apply_irf, emission_spectrum, fft_peaks, g2_one_sided, Window};
use sivlab::qdyn::{evolve, steady_residual, steady_state, DensityMatrix, EvolveOptions, TimeGrid};
use sivlab::ramsey::visibility_curve;
use sivlab::synth::{synth_counts, NoiseSpec};
use sivlab::tls::{self, mu_mode_oracle, power_to_rabi, Drive, MuMode, PowerCalib, PulseEnvelope, TlsParams};
use sivlab::{linspace, Curve, TimeTrace};

const T1: f64 = 1.85;
const T2: f64 = 1.62;

// 1
const LINEWIDTH_MHZ: f64 = 86.0;
const LINEWIDTH_REL: f64 = 0.03;
// 2
const ORACLE_RMS: f64 = 1e-6;
const ORACLE_DISCRIMINATION: f64 = 1e3;
// 4
const MOLLOW_POS_REL: f64 = 0.02;
const MOLLOW_RATIO: f64 = 3.0;
const MOLLOW_RATIO_REL: f64 = 0.10;
// 5
const G2_ZERO: f64 = 1e-6;
const G2_TAIL: f64 = 1e-3;
// 6
const SPLIT_REL: f64 = 0.05;
const SPLIT_R2: f64 = 0.99;
// 7
const ROUNDTRIP_SEEDS: u64 = 20;
const ROUNDTRIP_MIN_OK: usize = 19;
const OMEGA_REL: f64 = 0.02;
const T2_REL: f64 = 0.10;
const DECAY_REL: f64 = 0.01;
// 8
const RAMSEY_T2: f64 = 0.78;
const RAMSEY_REL: f64 = 0.05;
const RAMSEY_V0: f64 = 0.95;
// 9
const PULSED_MIN_PERIODS: f64 = 2.0;
const PULSED_FIRST_MAX: f64 = 0.93;
// 10
const RANDOM_CASES: usize = 1000;
const TRACE_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-9;
const STEADY_TOL: f64 = 1e-10;

type Verdict = (bool, String);

fn rel_ok(v: f64, target: f64, rel: f64) -> bool {
    (v - target).abs() <= rel * target.abs()
}

fn siv() -> TlsParams {
    TlsParams::new(T1, T2).unwrap()
}

fn criterion_1() -> Verdict {
    let p = TlsParams::new(T1, 2.0 * T1).unwrap();
    let rabi = (0.01 / (T1 * 2.0 * T1)).sqrt() / TAU;
    let curve = tls::excitation_lineshape(&p, rabi, &linspace(-0.5, 0.5, 201)).unwrap();
    let fwhm = 1e3 * fit_lorentzian_fwhm(&curve).unwrap().value("fwhm").unwrap();
    (rel_ok(fwhm, LINEWIDTH_MHZ, LINEWIDTH_REL), format!("transform-limited FWHM {fwhm:.3} MHz (target 86 MHz +/- 3%)"))
}

fn criterion_2() -> Verdict {
    let oracle = mu_mode_oracle();
    let grid = TimeGrid::new(0.0, 10.0, 1001).unwrap();
    let mut worst = 0.0f64;
    for rabi in [0.906, 1.304, 1.854] {
        let d = Drive::resonant(rabi).unwrap();
        let opts = EvolveOptions::with_max_step(tls::integration_step(&siv(), &d)).tolerance(1e-11);
        worst = worst.max(tls::analytic_vs_numeric_rms(&siv(), &d, oracle.mode, &grid, &opts).unwrap());
    }
    let ok = worst < ORACLE_RMS && oracle.discrimination() >= ORACLE_DISCRIMINATION;
    (ok, format!("closed form vs regression RMS {worst:.2e} under mu_mode={}, oracle discrimination {:.2e}", oracle.mode, oracle.discrimination()))
}

fn criterion_3() -> Verdict {
    let grid = TimeGrid::new(0.0, 10.0, 2001).unwrap();
    let pulse = PulseEnvelope::square(9.999, 10.0).unwrap();
    let mut worst = 0.0f64;
    for det in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let d = Drive::new(1.304, det).unwrap();
        let trace = tls::rabi_trace_numeric(&siv(), &d, &pulse, &grid).unwrap();
        let (spec, peaks) = fft_peaks(&trace, Window::Hann, 1);
        let bin: f64 = spec.meta["bin_ghz"].parse().unwrap();
        worst = worst.max((peaks[0].freq_ghz - tls::generalized_rabi(&d)).abs() / bin);
    }
    (worst <= 1.0, format!("FFT peak within {worst:.3} bins of sqrt(Omega^2 + Delta^2) for Delta in -2..2 GHz"))
}

fn criterion_4() -> Verdict {
    let freqs = linspace(-4.0, 4.0, 401);
    let s = emission_spectrum(&TlsParams::radiative(T1).unwrap(), &Drive::resonant(2.0).unwrap(), &freqs).unwrap();
    let m = &s.magnitude;
    let maxima: Vec<usize> = (1..m.len() - 1).filter(|&k| m[k] > m[k - 1] && m[k] >= m[k + 1]).collect();
    if maxima.len() != 3 {
        return (false, format!("expected 3 emission peaks, found {}", maxima.len()));
    }
    let pos: Vec<f64> = maxima.iter().map(|&k| freqs[k]).collect();
    let ratio = 2.0 * m[maxima[1]] / (m[maxima[0]] + m[maxima[2]]);
    let ok = rel_ok(pos[0], -2.0, MOLLOW_POS_REL)
        && pos[1].abs() <= MOLLOW_POS_REL * 2.0
        && rel_ok(pos[2], 2.0, MOLLOW_POS_REL)
        && rel_ok(ratio, MOLLOW_RATIO, MOLLOW_RATIO_REL);
    (ok, format!("Mollow peaks at {:.3}, {:.3}, {:.3} GHz, centre/side ratio {ratio:.3}", pos[0], pos[1], pos[2]))
}

fn criterion_5() -> Verdict {
    let grid = TimeGrid::new(0.0, 10.0 * T1, 1851).unwrap();
    let g2 = g2_one_sided(&siv(), &Drive::resonant(0.906).unwrap(), &grid).unwrap();
    let zero = g2.values[0];
    let tail = g2.values[g2.len() - 1];
    let two = g2.even_reflection().unwrap();
    let centre = two.len() / 2;
    let blurred: Vec<f64> = [0.05, 0.15, 0.3].iter().map(|&s| apply_irf(&two, s).unwrap().values[centre]).collect();
    let increasing = zero < blurred[0] && blurred.windows(2).all(|w| w[1] > w[0]);
    let ok = zero.abs() < G2_ZERO && (tail - 1.0).abs() < G2_TAIL && increasing;
    (ok, format!("g2(0) = {zero:.1e}, g2(10 T1) = {tail:.6}, blurred g2(0) = {:.3}/{:.3}/{:.3}", blurred[0], blurred[1], blurred[2]))
}

fn criterion_6() -> Verdict {
    let p = LambdaParams::default();
    let detunings = linspace(-1.5, 1.5, 301);
    let mut worst = 0.0f64;
    let mut pairs = Vec::new();
    for oc in [0.3, 0.5, 0.8] {
        let split = dip_splitting(&probe_scan(&p, oc, 0.0, 0.02, &detunings).unwrap()).unwrap();
        worst = worst.max((split - oc).abs() / oc);
        // Pump power in units where Omega = sqrt(P).
        pairs.push((oc * oc, split));
    }
    let fit = fit_linear_sqrtp(&pairs).unwrap();
    let intercept = fit.value("intercept").unwrap();
    let intercept_ok = intercept.abs() < SPLIT_REL * 0.3;

    let calib = PowerCalib::new(20.0).unwrap();
    let oc = power_to_rabi(&calib, &siv(), 20.0 * 20.0);
    let od = power_to_rabi(&calib, &siv(), 2.5 * 20.0);
    let axis = linspace(-1.5, 1.5, 61);
    let step = axis[1] - axis[0];
    let map = at_map2d(&p, oc, od, &axis, &axis).unwrap();
    let valley = map.valley_near_diagonal();
    let off = valley
        .iter()
        .enumerate()
        .map(|(row, v)| v.map_or(f64::INFINITY, |k| (k as f64 - row as f64).abs()))
        .fold(0.0, f64::max);
    let ok = worst < SPLIT_REL && fit.r_squared > SPLIT_R2 && intercept_ok && off <= 1.0;
    (ok, format!(
        "splitting error {:.2}%, R^2 {:.5}, intercept {intercept:.4} GHz, map valley within {off} grid steps ({step:.3} GHz) of the diagonal",
        100.0 * worst,
        fit.r_squared
    ))
}

fn synth_fit(model: &TimeTrace, seed: u64) -> Option<(f64, f64)> {
    let top = model.values.iter().cloned().fold(0.0, f64::max);
    let noise = NoiseSpec::new(seed, 20.0, 1e4 / top, 0.0).ok()?;
    let counts = synth_counts(model, &noise).ok()?.to_trace();
    let r = fit_rabi(&counts, T1, MuMode::Obe, Weighting::Poisson).ok()?;
    Some((r.value("omega_ghz")?, r.value("t2_ns")?))
}

fn criterion_7() -> Verdict {
    let rabi = 1.304;
    let d = Drive::resonant(rabi).unwrap();
    let grid = TimeGrid::new(0.0, 10.0, 1001).unwrap();
    let l = tls::liouvillian(&siv(), &d).unwrap();
    let pops = evolve(&l, &DensityMatrix::basis(2, tls::GROUND), &grid).unwrap();
    let rabi_model = TimeTrace::new(grid, pops.iter().map(|r| r.population(tls::EXCITED)).collect()).unwrap();
    let g2_model = g2_one_sided(&siv(), &d, &grid).unwrap();
    let good = |model: &TimeTrace| {
        (0..ROUNDTRIP_SEEDS)
            .filter(|&seed| {
                synth_fit(model, seed).is_some_and(|(om, t2)| rel_ok(om, rabi, OMEGA_REL) && rel_ok(t2, T2, T2_REL))
            })
            .count()
    };
    let (n_rabi, n_g2) = (good(&rabi_model), good(&g2_model));
    let x = linspace(0.0, 10.0, 201);
    let decay_ok = [T1, RAMSEY_T2].iter().all(|&tau| {
        let y = x.iter().map(|t| (-t / tau).exp()).collect();
        let fit = fit_exp_decay(&Curve::new(x.clone(), y).unwrap()).unwrap();
        rel_ok(fit.value("tau_ns").unwrap(), tau, DECAY_REL)
    });
    let ok = n_rabi >= ROUNDTRIP_MIN_OK && n_g2 >= ROUNDTRIP_MIN_OK && decay_ok;
    (ok, format!("Poisson round trip recovers Omega and T2 in {n_rabi}/20 (Rabi) and {n_g2}/20 (g2) seeds; noiseless decays within 1%: {decay_ok}"))
}

fn criterion_8() -> Verdict {
    let p = TlsParams::new(T1, RAMSEY_T2).unwrap();
    let pulse = PulseEnvelope::square(0.01, 12.5).unwrap();
    let v = visibility_curve(&p, &pulse, &linspace(0.0, 3.0, 13)).unwrap();
    let t2 = fit_exp_envelope(&v).unwrap().value("tau_ns").unwrap();
    let ok = rel_ok(t2, RAMSEY_T2, RAMSEY_REL) && v.y[0] > RAMSEY_V0;
    (ok, format!("Ramsey visibility fit {t2:.4} ns (target 0.78 +/- 5%), V(0) = {:.4}", v.y[0]))
}

fn criterion_9() -> Verdict {
    let pulse = PulseEnvelope::square(0.2, 12.5).unwrap();
    let calib = PowerCalib::new(20.0).unwrap();
    let roots = linspace(0.0, 600.0, 241);
    let powers: Vec<f64> = roots.iter().map(|r| r * r).collect();
    let c = tls::pulsed_rabi_scan(&siv(), &pulse, &powers, &calib).unwrap();
    let pairs: Vec<(f64, f64)> = c.x.iter().copied().zip(c.y.iter().copied()).collect();
    let period = fit_sine_sqrtp(&pairs).unwrap().value("period").unwrap();
    let periods = 600.0 / period;
    let y = &c.y;
    let first_max = (1..y.len() - 1).find(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1]).map_or(0.0, |k| y[k]);
    let ok = periods >= PULSED_MIN_PERIODS && first_max >= PULSED_FIRST_MAX;
    (ok, format!("{periods:.2} sin^2 periods over sqrt(P) in 0..600, first maximum {first_max:.4}"))
}

fn physical(rho: &DensityMatrix) -> bool {
    let m = rho.matrix();
    (m.trace().re - 1.0).abs() < TRACE_TOL
        && m.trace().im.abs() < TRACE_TOL
        && m.hermitian_deviation() < HERMITIAN_TOL
        && m.hermitian_eigenvalues()[0] > -POSITIVITY_TOL
}

fn criterion_10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = TimeGrid::new(0.0, 6.0, 13).unwrap();
    let mut bad_state = 0;
    let mut worst_residual = 0.0f64;
    for case in 0..RANDOM_CASES {
        let t1 = rng.random_range(0.3..5.0);
        let (l, rho0) = if case % 4 == 3 {
            let p = LambdaParams {
                gamma_c: rng.random_range(0.05..1.0),
                gamma_d: rng.random_range(0.05..1.0),
                gamma_ground: rng.random_range(0.0..0.1),
                gamma_phi_e: rng.random_range(0.0..0.5),
                gamma_phi_g: rng.random_range(0.0..0.1),
                ..LambdaParams::default()
            };
            let d = LambdaDrive::new(
                rng.random_range(0.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(0.0..2.0),
                rng.random_range(-2.0..2.0),
            )
            .unwrap();
            (lambda::lambda_liouvillian(&p, &d).unwrap(), DensityMatrix::basis(3, lambda::G_C))
        } else {
            let p = TlsParams::new(t1, rng.random_range(0.05..1.0) * 2.0 * t1).unwrap();
            let d = Drive::new(rng.random_range(0.0..4.0), rng.random_range(-3.0..3.0)).unwrap();
            (tls::liouvillian(&p, &d).unwrap(), DensityMatrix::basis(2, tls::GROUND))
        };
        let states = evolve(&l, &rho0, &grid).unwrap();
        bad_state += states.iter().filter(|r| !physical(r)).count();
        match steady_state(&l) {
            Ok(ss) => worst_residual = worst_residual.max(steady_residual(&l, ss.matrix())),
            Err(_) => worst_residual = f64::INFINITY,
        }
    }
    let deterministic = cli_is_deterministic();
    let ok = bad_state == 0 && worst_residual < STEADY_TOL && deterministic;
    (ok, format!(
        "{RANDOM_CASES} random cases: {bad_state} unphysical states, worst steady residual {worst_residual:.1e}; repeated CLI runs byte-identical: {deterministic}"
    ))
}

fn cli_is_deterministic() -> bool {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.conf");
    std::fs::write(&config, "[synth]\nmodel = g2\nrabi_ghz = 0.906\nt_end_ns = 18.5\nn_points = 1851\nseed = 5\nfit = true\n").unwrap();
    let run = |out: &str| {
        Command::new(env!("CARGO_BIN_EXE_sivlab"))
            .args(["synth", "--config", config.to_str().unwrap(), "--out", out])
            .current_dir(tmp.path())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    };
    if !(run("a") && run("b")) {
        return false;
    }
    ["synth.csv", "synth_fit.csv"].iter().all(|f| {
        let a = std::fs::read(tmp.path().join("a").join(f));
        let b = std::fs::read(tmp.path().join("b").join(f));
        matches!((a, b), (Ok(a), Ok(b)) if a == b)
    })
}

fn main() {
    let criteria: [fn() -> Verdict; 10] = [
        criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
        criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
    ];
    let mut failed = 0;
    for (k, check) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        println!("criterion {} {}: {detail}", k + 1, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
