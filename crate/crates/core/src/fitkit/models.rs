use std::f64::consts::{PI, TAU};

use super::lm::{lm_fit, FitData, FitResult, ParamSpec};
use crate::error::{Error, Result};
use crate::photostats::{fft_peaks, Window};
use crate::tls::{rabi_population_raw, MuMode};
use crate::trace::{Curve, TimeTrace};

/// Per-point weights: unit for normalized curves, `1/max(y, 1)` for counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    Unit,
    #[default]
    Poisson,
}

impl Weighting {
    fn weights(self, y: &[f64]) -> Vec<f64> {
        match self {
            Weighting::Unit => vec![1.0; y.len()],
            Weighting::Poisson => y.iter().map(|v| 1.0 / v.max(1.0)).collect(),
        }
    }
}

/// Least-squares `(a, c)` for `y ≈ a·g + c`; `None` if `g` is constant.
fn linear_scale_offset(g: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = g.len() as f64;
    let (mg, my) = (g.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sgg: f64 = g.iter().map(|v| (v - mg) * (v - mg)).sum();
    if sgg <= 1e-300 {
        return None;
    }
    let sgy: f64 = g.iter().zip(y).map(|(g, y)| (g - mg) * (y - my)).sum();
    let a = sgy / sgg;
    Some((a, my - a * mg))
}

fn range(y: &[f64]) -> (f64, f64) {
    y.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

pub const RABI_PARAMS: [&str; 5] = ["omega_ghz", "t2_ns", "scale_a", "offset_dg", "dt_ns"];

/// Initial guess for [`fit_rabi`]: Ω from the dominant FFT line, T2 = T1,
/// then `A`, `Δg` by linear regression.
pub fn rabi_initial_guess(data: &TimeTrace, t1_fixed: f64, mu_mode: MuMode) -> Option<[f64; 5]> {
    let (_, peaks) = fft_peaks(data, Window::Hann, 1);
    let omega = peaks.first()?.freq_ghz;
    let t2 = t1_fixed;
    let x = data.times();
    let p: Vec<f64> = x
        .iter()
        .map(|&t| rabi_population_raw(t1_fixed, t2, TAU * omega, t, mu_mode))
        .collect();
    let (a, c) = linear_scale_offset(&p, &data.values)?;
    Some([omega, t2, a.abs().max(1e-12), c, 0.0])
}

/// `A·P(τ − dt; Ω, T2) + Δg` with `P` the closed-form Rabi population and
/// T1 held at `t1_fixed`.
pub fn fit_rabi(data: &TimeTrace, t1_fixed: f64, mu_mode: MuMode, weighting: Weighting) -> Result<FitResult> {
    if !(t1_fixed > 0.0) {
        return Err(Error::FitPrecondition("t1_fixed must be positive".into()));
    }
    let specs = |init: [f64; 5]| {
        vec![
            ParamSpec::positive(RABI_PARAMS[0], init[0]),
            ParamSpec::positive(RABI_PARAMS[1], init[1]),
            ParamSpec::positive(RABI_PARAMS[2], init[2]),
            ParamSpec::free(RABI_PARAMS[3], init[3]),
            ParamSpec::free(RABI_PARAMS[4], init[4]),
        ]
    };
    let Some(init) = rabi_initial_guess(data, t1_fixed, mu_mode) else {
        return Ok(FitResult::unfitted(
            &specs([f64::NAN; 5]),
            "no oscillation found in the trace spectrum",
        ));
    };
    let periods = data.grid.span() * init[0];
    if periods < 3.0 {
        return Ok(FitResult::unfitted(
            &specs(init),
            format!("trace covers {periods:.2} oscillation periods, need ≥ 3"),
        ));
    }
    fit_rabi_from(data, t1_fixed, mu_mode, weighting, init)
}

/// [`fit_rabi`] from an explicit initial guess in [`RABI_PARAMS`] order.
pub fn fit_rabi_from(
    data: &TimeTrace,
    t1_fixed: f64,
    mu_mode: MuMode,
    weighting: Weighting,
    init: [f64; 5],
) -> Result<FitResult> {
    let fit_data = FitData::new(data.times(), data.values.clone(), weighting.weights(&data.values))?;
    let specs = [
        ParamSpec::positive(RABI_PARAMS[0], init[0]),
        ParamSpec::positive(RABI_PARAMS[1], init[1]),
        ParamSpec::positive(RABI_PARAMS[2], init[2]),
        ParamSpec::free(RABI_PARAMS[3], init[3]),
        ParamSpec::free(RABI_PARAMS[4], init[4]),
    ];
    lm_fit(
        |t, p| p[2] * rabi_population_raw(t1_fixed, p[1], TAU * p[0], t - p[4], mu_mode) + p[3],
        &fit_data,
        &specs,
    )
}

/// Closed-form regression `y = slope·x + intercept` with R².
pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
            context: "linear fit columns",
        });
    }
    if n < 3 {
        return Err(Error::FitPrecondition(format!("linear fit needs ≥ 3 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::FitPrecondition("data must be finite".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 1e-24 * (mx * mx * nf).max(1e-300) {
        return Err(Error::DegenerateAbscissa);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - slope * a - intercept;
            r * r
        })
        .sum();
    let chi2_reduced = ss_res / (nf - 2.0);
    let var_slope = chi2_reduced / sxx;
    let var_intercept = chi2_reduced * (1.0 / nf + mx * mx / sxx);
    let cov = -chi2_reduced * mx / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(FitResult {
        names: vec!["slope".into(), "intercept".into()],
        values: vec![slope, intercept],
        stderr: vec![var_slope.sqrt(), var_intercept.sqrt()],
        covariance: vec![vec![var_slope, cov], vec![cov, var_intercept]],
        chi2_reduced,
        r_squared,
        n_iter: 0,
        converged: true,
        message: "closed-form regression".into(),
    })
}

/// Ω (GHz) versus √P for `(power_nw, omega_ghz)` pairs.
pub fn fit_linear_sqrtp(pairs: &[(f64, f64)]) -> Result<FitResult> {
    if pairs.iter().any(|(p, _)| !(*p >= 0.0)) {
        return Err(Error::FitPrecondition("powers must be ≥ 0".into()));
    }
    let x: Vec<f64> = pairs.iter().map(|(p, _)| p.sqrt()).collect();
    let y: Vec<f64> = pairs.iter().map(|(_, o)| *o).collect();
    fit_linear(&x, &y)
}

/// `height / (1 + (2(x − center)/fwhm)²) + offset`.
pub fn lorentzian(x: f64, center: f64, fwhm: f64, height: f64, offset: f64) -> f64 {
    let u = 2.0 * (x - center) / fwhm;
    height / (1.0 + u * u) + offset
}

pub fn fit_lorentzian_fwhm(curve: &Curve) -> Result<FitResult> {
    let (x, y) = (&curve.x, &curve.y);
    if x.len() < 5 {
        return Err(Error::FitPrecondition("Lorentzian fit needs ≥ 5 points".into()));
    }
    let (lo, hi) = range(y);
    let half = 0.5 * (lo + hi);
    if !(y[0] < half && y[y.len() - 1] < half) {
        return Err(Error::NotBracketed);
    }
    let height = hi - lo;
    let (mut area, mut first) = (0.0, 0.0);
    for k in 1..x.len() {
        let dx = x[k] - x[k - 1];
        let (a, b) = (y[k - 1] - lo, y[k] - lo);
        area += 0.5 * dx * (a + b);
        first += 0.5 * dx * (a * x[k - 1] + b * x[k]);
    }
    let center = first / area;
    let fwhm = (2.0 * area / (PI * height)).max(1e-3 * (x[x.len() - 1] - x[0]));
    let data = FitData::unweighted(x.clone(), y.clone())?;
    lm_fit(
        |x, p| lorentzian(x, p[0], p[1], p[2], p[3]),
        &data,
        &[
            ParamSpec::free("center", center),
            ParamSpec::positive("fwhm", fwhm),
            ParamSpec::positive("height", height),
            ParamSpec::free("offset", lo),
        ],
    )
}

/// Log-linear estimate of `(amplitude, tau)` for `y − offset`.
fn log_linear_decay(x: &[f64], y: &[f64], offset: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, y)| (*y - offset).abs() > 0.0)
        .map(|(x, y)| (*x, (y - offset).abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ls: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, intercept) = linear_scale_offset(&xs, &ls)?;
    if !(slope < 0.0) {
        return None;
    }
    Some((intercept.exp(), -1.0 / slope))
}

fn check_decay_data(curve: &Curve) -> Result<()> {
    if curve.len() < 4 {
        return Err(Error::FitPrecondition("decay fit needs ≥ 4 points".into()));
    }
    Ok(())
}

/// `amplitude·e^{−t/τ} + offset`.
pub fn fit_exp_decay(curve: &Curve) -> Result<FitResult> {
    check_decay_data(curve)?;
    let (x, y) = (&curve.x, &curve.y);
    let (lo, hi) = range(y);
    let specs = |a: f64, tau: f64, c: f64| {
        vec![
            ParamSpec::free("amplitude", a),
            ParamSpec::positive("tau_ns", tau),
            ParamSpec::free("offset", c),
        ]
    };
    let span = x[x.len() - 1] - x[0];
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1e-300) {
        return Ok(FitResult::unfitted(&specs(0.0, span, lo), "data do not decay"));
    }
    // Place the offset guess just beyond the tail so all log arguments stay positive.
    let falling = y[0] > y[y.len() - 1];
    let c0 = if falling { lo - 1e-3 * (hi - lo) } else { hi + 1e-3 * (hi - lo) };
    let (a0, tau0) = log_linear_decay(x, y, c0)
        .map(|(a, t)| (if falling { a } else { -a }, t))
        .unwrap_or((y[0] - c0, 0.3 * span));
    let a0 = a0 * (x[0] / tau0).exp();
    let r = lm_fit(
        |t, p| p[0] * (-t / p[1]).exp() + p[2],
        &FitData::unweighted(x.clone(), y.clone())?,
        &specs(a0, tau0.clamp(1e-3 * span, 10.0 * span), c0),
    )?;
    let tau = r.values[1];
    if r.converged && tau > 100.0 * span {
        return Ok(FitResult {
            converged: false,
            message: format!("fitted τ = {tau} far exceeds the data span; no decay"),
            ..r
        });
    }
    Ok(r)
}

/// `amplitude·e^{−t/τ}` with no offset, for visibility envelopes.
pub fn fit_exp_envelope(curve: &Curve) -> Result<FitResult> {
    check_decay_data(curve)?;
    let (x, y) = (&curve.x, &curve.y);
    let span = x[x.len() - 1] - x[0];
    let (a0, tau0) = log_linear_decay(x, y, 0.0).unwrap_or((y[0].abs().max(1e-12), span));
    let r = lm_fit(
        |t, p| p[0] * (-t / p[1]).exp(),
        &FitData::unweighted(x.clone(), y.clone())?,
        &[
            ParamSpec::positive("amplitude", a0.max(1e-12)),
            ParamSpec::positive("tau_ns", tau0.clamp(1e-3 * span, 10.0 * span)),
        ],
    )?;
    Ok(r)
}

/// `amplitude·sin²(πx/period + phase) + offset`.
pub fn sine_squared(x: f64, amplitude: f64, period: f64, phase: f64, offset: f64) -> f64 {
    amplitude * (PI * x / period + phase).sin().powi(2) + offset
}

const SINE_PERIOD_GRID: usize = 240;
const SINE_PHASE_GRID: usize = 32;

/// Fit `(√P, counts)` pairs with [`sine_squared`]; the initial guess comes
/// from a (period, phase) grid search with linear amplitude and offset.
pub fn fit_sine_sqrtp(pairs: &[(f64, f64)]) -> Result<FitResult> {
    if pairs.len() < 5 {
        return Err(Error::FitPrecondition("sine fit needs ≥ 5 points".into()));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (xmin, xmax) = range(&x);
    let span = xmax - xmin;
    if !(span > 0.0) {
        return Err(Error::DegenerateAbscissa);
    }
    let mut best = (f64::INFINITY, [0.0, span, 0.0, y[0]]);
    let (p_lo, p_hi) = (span / 16.0, 2.0 * span);
    for i in 0..SINE_PERIOD_GRID {
        let period = p_lo * (p_hi / p_lo).powf(i as f64 / (SINE_PERIOD_GRID - 1) as f64);
        for j in 0..SINE_PHASE_GRID {
            let phase = PI * j as f64 / SINE_PHASE_GRID as f64;
            let g: Vec<f64> = x.iter().map(|&x| sine_squared(x, 1.0, period, phase, 0.0)).collect();
            let Some((a, c)) = linear_scale_offset(&g, &y) else {
                continue;
            };
            let res: f64 = g.iter().zip(&y).map(|(g, y)| (y - a * g - c).powi(2)).sum();
            if res < best.0 {
                best = (res, [a, period, phase, c]);
            }
        }
    }
    // A·sin²(θ) = −A·sin²(θ + π/2) + A, so a negative amplitude maps to a positive one.
    let [a, period, phase, c] = best.1;
    let init = if a < 0.0 { [-a, period, phase + 0.5 * PI, c + a] } else { [a, period, phase, c] };
    let scale = range(&y).1.abs().max(range(&y).0.abs()).max(1e-300);
    lm_fit(
        |x, p| sine_squared(x, p[0], p[1], p[2], p[3]),
        &FitData::unweighted(x, y)?,
        &[
            ParamSpec::positive("amplitude", init[0].max(1e-9 * scale)),
            ParamSpec::positive("period", init[1]),
            ParamSpec::free("phase", init[2]),
            ParamSpec::free("offset", init[3]),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdyn::TimeGrid;
    use crate::trace::linspace;

    #[test]
    fn lorentzian_exact_recovery() {
        let x = linspace(-1.0, 1.0, 201);
        let y = x.iter().map(|&x| lorentzian(x, 0.05, 0.219, 2.0, 0.1)).collect();
        let r = fit_lorentzian_fwhm(&Curve::new(x, y).unwrap()).unwrap();
        assert!(r.converged, "{}", r.message);
        assert!((r.value("fwhm").unwrap() - 0.219).abs() < 1e-8);
    }

    #[test]
    fn lorentzian_requires_bracketing() {
        let x = linspace(0.0, 1.0, 51);
        let y = x.iter().map(|&x| lorentzian(x, 0.0, 0.5, 1.0, 0.0)).collect();
        assert!(matches!(
            fit_lorentzian_fwhm(&Curve::new(x, y).unwrap()),
            Err(Error::NotBracketed)
        ));
    }

    #[test]
    fn exp_decay_exact() {
        for tau in [1.85, 0.78] {
            let x = linspace(0.0, 10.0, 101);
            let y = x.iter().map(|&t| 5.0 * (-t / tau).exp() + 0.2).collect();
            let r = fit_exp_decay(&Curve::new(x, y).unwrap()).unwrap();
            assert!(r.converged);
            assert!((r.value("tau_ns").unwrap() - tau).abs() < 1e-8 * tau);
        }
    }

    #[test]
    fn exp_decay_constant_not_converged() {
        let x = linspace(0.0, 10.0, 20);
        let r = fit_exp_decay(&Curve::new(x, vec![3.0; 20]).unwrap()).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn linear_degenerate_abscissa() {
        let pairs = [(4.0, 1.0), (4.0, 2.0), (4.0, 3.0)];
        assert!(matches!(fit_linear_sqrtp(&pairs), Err(Error::DegenerateAbscissa)));
    }

    #[test]
    fn sine_exact_recovery() {
        let pairs: Vec<(f64, f64)> = linspace(0.0, 10.0, 81)
            .into_iter()
            .map(|x| (x, sine_squared(x, 0.9, 3.1, 0.2, 0.05)))
            .collect();
        let r = fit_sine_sqrtp(&pairs).unwrap();
        assert!(r.converged);
        assert!((r.value("period").unwrap() - 3.1).abs() < 1e-8);
        assert!((r.value("amplitude").unwrap() - 0.9).abs() < 1e-8);
    }

    #[test]
    fn rabi_without_oscillation_is_not_converged() {
        let grid = TimeGrid::new(0.0, 10.0, 401).unwrap();
        let v = grid.times().iter().map(|t| 1.0 - (-t / 2.0).exp()).collect();
        let r = fit_rabi(&TimeTrace::new(grid, v).unwrap(), 1.85, MuMode::Obe, Weighting::Unit).unwrap();
        assert!(!r.converged);
    }
}
