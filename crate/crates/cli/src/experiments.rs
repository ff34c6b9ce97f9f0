//! Config-to-computation plans, one per experiment.
//!
//! Planning reads and validates every key; the returned job only computes.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::PathBuf;

use rayon::prelude::*;
use sivlab::fitkit::{
    self, fit_exp_decay, fit_exp_envelope, fit_linear, fit_linear_sqrtp, fit_lorentzian_fwhm,
    fit_rabi, fit_sine_sqrtp, FitResult, Weighting,
};
use sivlab::lambda::{self, LambdaParams};
use sivlab::photostats::{apply_irf, emission_spectrum, fft_peaks, g2_curve, g2_one_sided, Window};
use sivlab::qdyn::{evolve, DensityMatrix, TimeGrid};
use sivlab::ramsey::visibility_curve;
use sivlab::synth::{synth_counts, NoiseSpec};
use sivlab::tls::{
    self, power_to_rabi, rabi_population_analytic, rabi_population_raw, Drive, MuMode, PowerCalib,
    PulseEnvelope, PulseShape, TlsParams,
};
use sivlab::{linspace, Curve, TimeTrace};

use crate::config::{Check, ConfigError, Section};
use crate::csvdoc::CsvDocument;
use crate::svg::Plot;

pub const EXPERIMENTS: [&str; 13] = [
    "rabi_trace",
    "rabi_analytic",
    "detuning_map",
    "g2",
    "mollow_spectrum",
    "lineshape",
    "autler_scan",
    "autler_map",
    "pulsed_rabi",
    "ramsey",
    "lifetime",
    "fit",
    "synth",
];

/// One file of an experiment's output.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Table { suffix: String, doc: CsvDocument },
    Report(FitResult),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub artifacts: Vec<Artifact>,
    pub plot: Option<Plot>,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
}

impl Output {
    fn table(mut self, suffix: &str, doc: CsvDocument) -> Self {
        self.artifacts.push(Artifact::Table {
            suffix: suffix.to_string(),
            doc,
        });
        self
    }

    fn report(mut self, fit: FitResult) -> Self {
        self.artifacts.push(Artifact::Report(fit));
        self
    }

    fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    fn plot(mut self, plot: Plot) -> Self {
        self.plot = Some(plot);
        self
    }

    fn summary(mut self, text: String) -> Self {
        self.summary = text;
        self
    }
}

pub type Job = Box<dyn FnOnce() -> sivlab::Result<Output> + Send>;

pub struct Plan {
    pub experiment: String,
    pub job: Job,
    pub plot: bool,
    pub output: Option<PathBuf>,
    pub mu_mode: MuMode,
    pub seed: Option<u64>,
    pub hash: String,
}

/// Validates `section` for `experiment` and prepares the computation.
pub fn plan(experiment: &str, section: &mut Section) -> Result<Plan, ConfigError> {
    if !EXPERIMENTS.contains(&experiment) {
        return Err(ConfigError::new("experiment", format!("unknown experiment `{experiment}`")));
    }
    let result = build(experiment, section);
    section.finish()?;
    let (job, common) = result?;
    Ok(Plan {
        experiment: experiment.to_string(),
        job,
        plot: common.plot,
        output: common.output,
        mu_mode: common.mu_mode,
        seed: common.seed,
        hash: section.hash(),
    })
}

struct Common {
    plot: bool,
    output: Option<PathBuf>,
    mu_mode: MuMode,
    seed: Option<u64>,
}

fn build(experiment: &str, s: &mut Section) -> Result<(Job, Common), ConfigError> {
    if let Some(named) = s.untracked("experiment") {
        if named != experiment {
            return Err(ConfigError::new(
                "experiment",
                format!("config names `{named}` but `{experiment}` was requested"),
            ));
        }
    }
    let plot = s.untracked("plot").map_or(Ok(false), |v| {
        v.parse::<bool>()
            .map_err(|_| ConfigError::new("plot", format!("expected true|false, got `{v}`")))
    })?;
    let output = s.untracked("output").map(PathBuf::from);
    let mu_mode = s.get("mu_mode", tls::default_mu_mode())?;
    let mut common = Common {
        plot,
        output,
        mu_mode,
        seed: None,
    };
    let job = match experiment {
        "rabi_trace" => rabi_trace(s, mu_mode)?,
        "rabi_analytic" => rabi_analytic(s, mu_mode)?,
        "detuning_map" => detuning_map(s)?,
        "g2" => g2(s)?,
        "mollow_spectrum" => mollow_spectrum(s)?,
        "lineshape" => lineshape(s)?,
        "autler_scan" => autler_scan(s)?,
        "autler_map" => autler_map(s)?,
        "pulsed_rabi" => pulsed_rabi(s)?,
        "ramsey" => ramsey(s)?,
        "lifetime" => {
            let (job, seed) = lifetime(s)?;
            common.seed = Some(seed);
            job
        }
        "fit" => fit(s, mu_mode)?,
        "synth" => {
            let (job, seed) = synth(s, mu_mode)?;
            common.seed = Some(seed);
            job
        }
        _ => unreachable!("checked against EXPERIMENTS"),
    };
    Ok((job, common))
}

fn tls_params(s: &mut Section) -> Result<TlsParams, ConfigError> {
    let t1 = s.f64("t1_ns", 1.85, Check::Positive)?;
    let t2 = s.f64("t2_ns", 1.62, Check::Positive)?;
    Ok(TlsParams::new(t1, t2)?)
}

fn calib(s: &mut Section) -> Result<PowerCalib, ConfigError> {
    Ok(PowerCalib::new(s.f64("p_sat_nw", 20.0, Check::Positive)?)?)
}

/// Ω/2π from `rabi_ghz`, or from `power_nw` through the saturation calibration.
fn rabi_ghz(s: &mut Section, params: &TlsParams, default: f64) -> Result<f64, ConfigError> {
    if s.has("power_nw") && s.has("rabi_ghz") {
        return Err(ConfigError::new("power_nw", "give either rabi_ghz or power_nw, not both"));
    }
    let cal = calib(s)?;
    match s.opt_f64("power_nw", Check::NonNegative)? {
        Some(p) => Ok(power_to_rabi(&cal, params, p)),
        None => s.f64("rabi_ghz", default, Check::NonNegative),
    }
}

fn drive(s: &mut Section, params: &TlsParams, default_rabi: f64) -> Result<Drive, ConfigError> {
    let rabi = rabi_ghz(s, params, default_rabi)?;
    let det = s.f64("detuning_ghz", 0.0, Check::Any)?;
    Ok(Drive::new(rabi, det)?)
}

fn pulse(s: &mut Section, duration: f64, period: f64) -> Result<PulseEnvelope, ConfigError> {
    let shape: String = s.get("pulse_shape", "square".to_string())?;
    let shape: PulseShape = shape.parse()?;
    let duration = s.f64("pulse_ns", duration, Check::Positive)?;
    let period = s.f64("period_ns", period, Check::Positive)?;
    let rise = s.f64("rise_ns", 0.0, Check::NonNegative)?;
    Ok(PulseEnvelope::new(shape, duration, period, rise)?)
}

fn time_grid(s: &mut Section, t_end: f64, n: usize) -> Result<TimeGrid, ConfigError> {
    let t0 = s.f64("t_start_ns", 0.0, Check::Any)?;
    let t1 = s.f64("t_end_ns", t_end, Check::Any)?;
    let n = s.count("n_points", n, 2)?;
    Ok(TimeGrid::new(t0, t1, n)?)
}

fn axis(s: &mut Section, name: &str, unit: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, ConfigError> {
    let min_key = format!("{name}_min_{unit}");
    let max_key = format!("{name}_max_{unit}");
    let a = s.f64(&min_key, lo, Check::Any)?;
    let b = s.f64(&max_key, hi, Check::Any)?;
    let n = s.count(&format!("n_{name}"), n, 3)?;
    if b <= a {
        return Err(ConfigError::new(max_key, format!("must exceed {min_key}")));
    }
    Ok(linspace(a, b, n))
}

fn weighting(s: &mut Section, default: Weighting) -> Result<Weighting, ConfigError> {
    let name = if default == Weighting::Unit { "unit" } else { "poisson" };
    match s.get("weighting", name.to_string())?.as_str() {
        "unit" => Ok(Weighting::Unit),
        "poisson" => Ok(Weighting::Poisson),
        other => Err(ConfigError::new("weighting", format!("expected unit|poisson, got `{other}`"))),
    }
}

fn trace_doc(trace: &TimeTrace, value_col: &str) -> CsvDocument {
    let mut doc = CsvDocument::from_columns(&["tau_ns", value_col], &[&trace.times(), &trace.values]);
    for (k, v) in &trace.meta {
        doc.push_meta(k, v);
    }
    doc
}

fn curve_doc(curve: &Curve, x_col: &str, y_col: &str) -> CsvDocument {
    let mut doc = CsvDocument::from_columns(&[x_col, y_col], &[&curve.x, &curve.y]);
    for (k, v) in &curve.meta {
        doc.push_meta(k, v);
    }
    doc
}

fn lines(title: &str, x_label: &str, y_label: &str, series: Vec<(&str, Vec<f64>, Vec<f64>)>) -> Plot {
    Plot::Lines {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        series: series.into_iter().map(|(n, x, y)| (n.to_string(), x, y)).collect(),
    }
}

fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1))
        .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1])
        .collect()
}

/// Continuous-wave `ρ_ee(t)` from the ground state.
fn cw_trace(params: &TlsParams, drive: &Drive, grid: &TimeGrid) -> sivlab::Result<TimeTrace> {
    let l = tls::liouvillian(params, drive)?;
    let states = evolve(&l, &DensityMatrix::basis(2, tls::GROUND), grid)?;
    Ok(TimeTrace::new(*grid, states.iter().map(|r| r.population(tls::EXCITED)).collect())?
        .with_meta("quantity", "rho_ee")
        .with_meta("rabi_ghz", drive.rabi_ghz)
        .with_meta("detuning_ghz", drive.detuning_ghz))
}

fn rabi_trace(s: &mut Section, mu_mode: MuMode) -> Result<Job, ConfigError> {
    let p = tls_params(s)?;
    let d = drive(s, &p, 1.304)?;
    let grid = time_grid(s, 10.0, 1001)?;
    let pulsed = if s.has("pulse_ns") { Some(pulse(s, 0.2, 12.5)?) } else { None };
    let do_fit = s.flag("fit", false)?;
    let w = weighting(s, Weighting::Unit)?;
    Ok(Box::new(move || {
        let trace = match &pulsed {
            Some(env) => tls::rabi_trace_numeric(&p, &d, env, &grid)?,
            None => cw_trace(&p, &d, &grid)?,
        };
        let (spec, peaks) = fft_peaks(&trace, Window::Hann, 1);
        let bin: f64 = spec.meta.get("bin_ghz").and_then(|b| b.parse().ok()).unwrap_or(f64::NAN);
        let peak = peaks.first().map_or(f64::NAN, |p| p.freq_ghz);
        let expected = tls::generalized_rabi(&d);
        let mut out = Output::default()
            .table("", trace_doc(&trace, "population"))
            .table("_fft", CsvDocument::from_columns(&["freq_ghz", "magnitude"], &[&spec.freq_ghz, &spec.magnitude]))
            .metric("fft_peak_ghz", peak)
            .metric("fft_bin_ghz", bin)
            .metric("generalized_rabi_ghz", expected)
            .plot(lines("Rabi oscillation", "tau (ns)", "rho_ee", vec![("numeric", trace.times(), trace.values.clone())]));
        let mut summary = format!("rabi_trace: FFT peak {peak:.4} GHz (generalized Rabi {expected:.4} GHz, bin {bin:.4})");
        if do_fit {
            let r = fit_rabi(&trace, p.t1(), mu_mode, w)?;
            let (om, t2) = (r.value("omega_ghz").unwrap_or(f64::NAN), r.value("t2_ns").unwrap_or(f64::NAN));
            summary += &format!("; fit Omega/2pi {om:.4} GHz, T2 {t2:.4} ns");
            out = out.metric("fit_omega_ghz", om).metric("fit_t2_ns", t2).report(r);
        }
        Ok(out.summary(summary))
    }))
}

fn rabi_analytic(s: &mut Section, mu_mode: MuMode) -> Result<Job, ConfigError> {
    let p = tls_params(s)?;
    let d = drive(s, &p, 0.906)?;
    let grid = time_grid(s, 10.0, 1001)?;
    Ok(Box::new(move || {
        let t = grid.times();
        let pop: Vec<f64> = t.iter().map(|&x| rabi_population_analytic(&p, &d, x, mu_mode)).collect();
        let mut doc = CsvDocument::from_columns(&["tau_ns", "population"], &[&t, &pop]);
        doc.push_meta("rabi_ghz", d.rabi_ghz);
        doc.push_meta("detuning_ghz", d.detuning_ghz);
        Ok(Output::default()
            .summary(format!("rabi_analytic: {} points, P(0) = {}, mu_mode = {mu_mode}", pop.len(), pop[0]))
            .metric("population_start", pop[0])
            .plot(lines("Closed-form Rabi oscillation", "tau (ns)", "rho_ee", vec![("analytic", t.clone(), pop.clone())]))
            .table("", doc))
    }))
}

fn detuning_map(s: &mut Section) -> Result<Job, ConfigError> {
    let p = tls_params(s)?;
    let rabi = rabi_ghz(s, &p, 1.304)?;
    let detunings = axis(s, "detuning", "ghz", -2.0, 2.0, 9)?;
    let grid = time_grid(s, 10.0, 2001)?;
    Ok(Box::new(move || {
        let traces = detunings
            .par_iter()
            .map(|&det| cw_trace(&p, &Drive::new(rabi, det)?, &grid))
            .collect::<sivlab::Result<Vec<_>>>()?;
        let t = grid.times();
        let values: Vec<Vec<f64>> = traces.iter().map(|tr| tr.values.clone()).collect();
        let mut fft = CsvDocument::new(&["detuning_ghz", "fft_peak_ghz", "generalized_rabi_ghz", "bin_ghz"]);
        let mut worst = 0.0f64;
        for (tr, &det) in traces.iter().zip(&detunings) {
            let (spec, peaks) = fft_peaks(tr, Window::Hann, 1);
            let bin: f64 = spec.meta.get("bin_ghz").and_then(|b| b.parse().ok()).unwrap_or(f64::NAN);
            let peak = peaks.first().map_or(f64::NAN, |p| p.freq_ghz);
            let expected = rabi.hypot(det);
            worst = worst.max((peak - expected).abs() / bin);
            fft.rows.push(vec![det, peak, expected, bin]);
        }
        let mut map = CsvDocument::long_form(["detuning_ghz", "tau_ns", "population"], &detunings, &t, &values);
        map.push_meta("rabi_ghz", rabi);
        Ok(Output::default()
            .summary(format!(
                "detuning_map: {}x{} map; FFT peaks within {worst:.3} bins of sqrt(Omega^2 + Delta^2)",
                detunings.len(),
                t.len()
            ))
            .metric("max_bin_error", worst)
            .plot(Plot::Heatmap {
                title: "rho_ee vs detuning and time".into(),
                x_label: "tau (ns)".into(),
                y_label: "detuning (GHz)".into(),
                x: t,
                y: detunings.clone(),
                z: values,
            })
            .table("", map)
            .table("_fft", fft))
    }))
}

fn g2(s: &mut Section) -> Result<Job, ConfigError> {
    let p = tls_params(s)?;
    let d = drive(s, &p, 0.906)?;
    let tau_max = s.f64("tau_max_ns", 18.5, Check::Positive)?;
    let n = s.count("n_points", 1851, 3)?;
    let sigma = s.f64("irf_sigma_ns", 0.0, Check::NonNegative)?;
    if sigma > tau_max / 2.0 {
        return Err(ConfigError::new("irf_sigma_ns", "kernel wider than a quarter of the two-sided window"));
    }
    let grid = TimeGrid::new(0.0, tau_max, n)?;
    Ok(Box::new(move || {
        let mut g = g2_curve(&p, &d, &grid)?;
        if sigma > 0.0 {
            g = apply_irf(&g, sigma)?;
        }
        let centre = g.values[g.len() / 2];
        let edge = g.values[g.len() - 1];
        Ok(Output::default()
            .summary(format!("g2: g2(0) = {centre:.3e}, g2({tau_max} ns) = {edge:.6}, irf sigma {sigma} ns"))
            .metric("g2_zero", centre)
            .metric("g2_edge", edge)
            .plot(lines("Intensity correlation", "tau (ns)", "g2", vec![("g2", g.times(), g.values.clone())]))
            .table("", trace_doc(&g, "g2")))
    }))
}

fn mollow_spectrum(s: &mut Section) -> Result<Job, ConfigError> {
    let p = tls_params(s)?;
    let d = drive(s, &p, 2.0)?;
    let freqs = axis(s, "freq", "ghz", -4.0, 4.0, 401)?;
    Ok(Box::new(move || {
        let spec = emission_spectrum(&p, &d, &freqs)?;
        let m = &spec.magnitude;
        let maxima = local_maxima(m);
        let mut out = Output::default().metric("n_peaks", maxima.len() as f64);
        let summary = if maxima.len() == 3 {
            let pos: Vec<f64> = maxima.iter().map(|&k| freqs[k]).collect();
            let ratio = 2.0 * m[maxima[1]] / (m[maxima[0]] + m[maxima[2]]);
            out = out
                .metric("peak_low_ghz", pos[0])
                .metric("peak_mid_ghz", pos[1])
                .metric("peak_high_ghz", pos[2])
                .metric("height_ratio", ratio);
            format!(
                "mollow_spectrum: peaks at {:.3}, {:.3}, {:.3} GHz, centre/side {ratio:.3}",
                pos[0], pos[1], pos[2]
            )
        } else {
            format!("mollow_spectrum: {} peaks", maxima.len())
        };
        let mut doc = CsvDocument::from_columns(&["freq_ghz", "intensity"], &[&spec.freq_ghz, m]);
        for (k, v) in &spec.meta {
            doc.push_meta(k, v);
        }
        Ok(out
            .summary(summary)
            .plot(lines("Resonance fluorescence spectrum", "frequency offset (GHz)", "S", vec![("S", freqs.clone(), m.clone())]))
            .table("", doc))
    }))
}

fn lineshape(s: &mut Section) -> Result<Job, ConfigError> {
    let p = tls_params(s)?;
    let rabi = if s.has("power_nw") || s.has("rabi_ghz") {
        rabi_ghz(s, &p, 0.0)?
    } else {
        let cal = calib(s)?;
        power_to_rabi(&cal, &p, 0.01 * cal.p_sat())
    };
    let detunings = axis(s, "detuning", "ghz", -0.5, 0.5, 201)?;
    Ok(Box::new(move || {
        let curve = tls::excitation_lineshape(&p, rabi, &detunings)?;
        let fit = fit_lorentzian_fwhm(&curve)?;
        let fwhm = 1e3 * fit.value("fwhm").unwrap_or(f64::NAN);
        let analytic = 1e3 * tls::lineshape_fwhm_analytic(&p, rabi);
        Ok(Output::default()
            .summary(format!("lineshape: FWHM {fwhm:.3} MHz (analytic {analytic:.3} MHz)"))
            .metric("fwhm_mhz", fwhm)
            .metric("fwhm_analytic_mhz", analytic)
            .plot(lines("Excitation lineshape", "detuning (GHz)", "rho_ee (normalized)", vec![("steady state", curve.x.clone(), curve.y.clone())]))
            .table("", curve_doc(&curve, "detuning_ghz", "population_norm"))
            .report(fit))
    }))
}

fn lambda_params(s: &mut Section) -> Result<(LambdaParams, TlsParams), ConfigError> {
    let tls = tls_params(s)?;
    let base = LambdaParams {
        gamma_c: 0.5 / tls.t1(),
        gamma_d: 0.5 / tls.t1(),
        gamma_phi_e: (1.0 / tls.t2() - 0.5 / tls.t1()).max(0.0),
        ..LambdaParams::default()
    };
    let p = LambdaParams {
        gamma_c: s.f64("gamma_c", base.gamma_c, Check::NonNegative)?,
        gamma_d: s.f64("gamma_d", base.gamma_d, Check::NonNegative)?,
        gamma_ground: s.f64("gamma_ground", base.gamma_ground, Check::NonNegative)?,
        gamma_phi_e: s.f64("gamma_phi_e", base.gamma_phi_e, Check::NonNegative)?,
        gamma_phi_g: s.f64("gamma_phi_g", base.gamma_phi_g, Check::NonNegative)?,
        ..base
    };
    p.validate()?;
    Ok((p, tls))
}

fn autler_scan(s: &mut Section) -> Result<Job, ConfigError> {
    let (lp, tp) = lambda_params(s)?;
    let cal = calib(s)?;
    let powers = s.list("power_c_nw", &[200.0, 400.0, 800.0, 1600.0], Check::Positive)?;
    let delta_c = s.f64("delta_c_ghz", 0.0, Check::Any)?;
    let omega_d = s.f64("omega_d_ghz", 0.02, Check::Positive)?;
    let dd = axis(s, "delta_d", "ghz", -1.5, 1.5, 301)?;
    Ok(Box::new(move || {
        let omegas: Vec<f64> = powers.iter().map(|&pw| power_to_rabi(&cal, &tp, pw)).collect();
        let curves = omegas
            .iter()
            .map(|&oc| lambda::probe_scan(&lp, oc, delta_c, omega_d, &dd))
            .collect::<sivlab::Result<Vec<_>>>()?;
        let splits = curves.iter().map(lambda::dip_splitting).collect::<sivlab::Result<Vec<_>>>()?;
        let worst = splits
            .iter()
            .zip(&omegas)
            .map(|(sp, oc)| (sp - oc).abs() / oc)
            .fold(0.0, f64::max);
        let pairs: Vec<(f64, f64)> = powers.iter().copied().zip(splits.iter().copied()).collect();
        let fit = if pairs.len() >= 3 {
            Some(fit_linear_sqrtp(&pairs)?)
        } else {
            None
        };
        let values: Vec<Vec<f64>> = curves.iter().map(|c| c.y.clone()).collect();
        let map = CsvDocument::long_form(["omega_c_ghz", "delta_d_ghz", "fluorescence_norm"], &omegas, &dd, &values);
        let sqrt_p: Vec<f64> = powers.iter().map(|p| p.sqrt()).collect();
        let table = CsvDocument::from_columns(
            &["power_c_nw", "sqrt_power", "omega_c_ghz", "splitting_ghz"],
            &[&powers, &sqrt_p, &omegas, &splits],
        );
        let series = curves
            .iter()
            .map(|c| ("probe scan", c.x.clone(), c.y.clone()))
            .collect();
        let mut out = Output::default()
            .metric("max_rel_error", worst)
            .plot(lines("Autler-Townes probe scans", "probe detuning (GHz)", "fluorescence (normalized)", series))
            .table("", map)
            .table("_splitting", table);
        let mut summary = format!("autler_scan: splitting matches Omega_C within {:.2}%", 100.0 * worst);
        if let Some(fit) = fit {
            let r2 = fit.r_squared;
            let b = fit.value("intercept").unwrap_or(f64::NAN);
            let be = fit.error("intercept").unwrap_or(f64::NAN);
            summary += &format!("; linear in sqrt(P) with R^2 = {r2:.5}, intercept {b:.4} +/- {be:.4} GHz");
            out = out
                .metric("r_squared", r2)
                .metric("intercept_ghz", b)
                .metric("intercept_stderr_ghz", be)
                .report(fit);
        }
        Ok(out.summary(summary))
    }))
}

fn autler_map(s: &mut Section) -> Result<Job, ConfigError> {
    let (lp, tp) = lambda_params(s)?;
    let cal = calib(s)?;
    let oc = power_to_rabi(&cal, &tp, s.f64("power_c_nw", 400.0, Check::NonNegative)?);
    let od = power_to_rabi(&cal, &tp, s.f64("power_d_nw", 50.0, Check::NonNegative)?);
    let dc = axis(s, "delta_c", "ghz", -1.5, 1.5, 61)?;
    let dd = axis(s, "delta_d", "ghz", -1.5, 1.5, 61)?;
    Ok(Box::new(move || {
        let map = lambda::at_map2d(&lp, oc, od, &dc, &dd)?;
        let step = dd[1] - dd[0];
        let valley = map.valley_near_diagonal();
        let missing = valley.iter().filter(|v| v.is_none()).count();
        let worst = valley
            .iter()
            .zip(&dc)
            .filter_map(|(v, &c)| v.map(|k| (k as f64 - ((c - dd[0]) / step).round()).abs()))
            .fold(0.0, f64::max);
        let mut doc = CsvDocument::long_form(["delta_c_ghz", "delta_d_ghz", "fluorescence"], &dc, &dd, &map.values);
        doc.push_meta("omega_c_ghz", oc);
        doc.push_meta("omega_d_ghz", od);
        Ok(Output::default()
            .summary(format!(
                "autler_map: {}x{} map, dark valley within {worst:.2} grid steps of the diagonal ({missing} rows without a valley)",
                dc.len(),
                dd.len()
            ))
            .metric("valley_max_steps", worst)
            .metric("valley_missing_rows", missing as f64)
            .plot(Plot::Heatmap {
                title: "Fluorescence vs pump and probe detuning".into(),
                x_label: "probe detuning (GHz)".into(),
                y_label: "pump detuning (GHz)".into(),
                x: dd.clone(),
                y: dc.clone(),
                z: map.values.clone(),
            })
            .table("", doc))
    }))
}

fn pulsed_rabi(s: &mut Section) -> Result<Job, ConfigError> {
    let p = tls_params(s)?;
    let cal = calib(s)?;
    let env = pulse(s, 0.2, 12.5)?;
    let sqrt_max = s.f64("sqrt_power_max", 600.0, Check::Positive)?;
    let n = s.count("n_power", 241, 8)?;
    Ok(Box::new(move || {
        let roots = linspace(0.0, sqrt_max, n);
        let powers: Vec<f64> = roots.iter().map(|r| r * r).collect();
        let curve = tls::pulsed_rabi_scan(&p, &env, &powers, &cal)?;
        let pairs: Vec<(f64, f64)> = curve.x.iter().copied().zip(curve.y.iter().copied()).collect();
        let fit = fit_sine_sqrtp(&pairs)?;
        let period = fit.value("period").unwrap_or(f64::NAN);
        let first_max = local_maxima(&curve.y).first().map_or(f64::NAN, |&k| curve.y[k]);
        let oscillations = sqrt_max / period;
        let mut doc = CsvDocument::from_columns(&["power_nw", "sqrt_power", "population"], &[&powers, &curve.x, &curve.y]);
        for (k, v) in &curve.meta {
            doc.push_meta(k, v);
        }
        Ok(Output::default()
            .summary(format!(
                "pulsed_rabi: {oscillations:.2} oscillations, sqrt(P) period {period:.2}, first maximum {first_max:.4}"
            ))
            .metric("oscillations", oscillations)
            .metric("period_sqrt_nw", period)
            .metric("first_max", first_max)
            .plot(lines("Pulsed Rabi oscillation", "sqrt(P) (sqrt nW)", "rho_ee after pulse", vec![("scan", curve.x.clone(), curve.y.clone())]))
            .table("", doc)
            .report(fit))
    }))
}

fn ramsey(s: &mut Section) -> Result<Job, ConfigError> {
    let p = tls_params(s)?;
    let env = pulse(s, 0.01, 12.5)?;
    let taus = axis(s, "tau", "ns", 0.0, 3.0, 13)?;
    if taus[0] < 0.0 {
        return Err(ConfigError::new("tau_min_ns", "delays must be ≥ 0"));
    }
    Ok(Box::new(move || {
        let v = visibility_curve(&p, &env, &taus)?;
        let fit = fit_exp_envelope(&v)?;
        let t2 = fit.value("tau_ns").unwrap_or(f64::NAN);
        Ok(Output::default()
            .summary(format!("ramsey: V(0) = {:.4}, fitted coherence decay {t2:.4} ns", v.y[0]))
            .metric("visibility_zero", v.y[0])
            .metric("fit_t2_ns", t2)
            .plot(lines("Ramsey visibility", "delay (ns)", "visibility", vec![("V", v.x.clone(), v.y.clone())]))
            .table("", curve_doc(&v, "tau_ns", "visibility"))
            .report(fit))
    }))
}

fn noise(s: &mut Section, background: f64) -> Result<(u64, f64, f64, f64), ConfigError> {
    let seed = s.get("seed", 0u64)?;
    let peak = s.f64("peak_counts", 1e4, Check::Positive)?;
    let bg = s.f64("background_rate", background, Check::NonNegative)?;
    let sigma = s.f64("irf_sigma_ns", 0.0, Check::NonNegative)?;
    Ok((seed, peak, bg, sigma))
}

fn lifetime(s: &mut Section) -> Result<(Job, u64), ConfigError> {
    let p = tls_params(s)?;
    let grid = time_grid(s, 10.0, 201)?;
    let (seed, peak, bg, sigma) = noise(s, 0.0)?;
    let noisy = s.flag("noise", true)?;
    let spec = NoiseSpec::new(seed, bg, peak, sigma)?;
    let job: Job = Box::new(move || {
        let l = tls::liouvillian(&p, &Drive::new(0.0, 0.0)?)?;
        let states = evolve(&l, &DensityMatrix::basis(2, tls::EXCITED), &grid)?;
        let model: Vec<f64> = states.iter().map(|r| r.population(tls::EXCITED)).collect();
        let t = grid.times();
        let counts: Vec<f64> = if noisy {
            synth_counts(&TimeTrace::new(grid, model.clone())?, &spec)?.to_trace().values
        } else {
            model.iter().map(|m| m * peak + bg).collect()
        };
        let fit = fit_exp_decay(&Curve::new(t.clone(), counts.clone())?)?;
        let tau = fit.value("tau_ns").unwrap_or(f64::NAN);
        let mut doc = CsvDocument::from_columns(&["tau_ns", "population", "counts"], &[&t, &model, &counts]);
        doc.push_meta("peak_counts", peak);
        doc.push_meta("background_rate", bg);
        doc.push_meta("irf_sigma_ns", sigma);
        Ok(Output::default()
            .summary(format!("lifetime: fitted decay {tau:.4} ns (T1 = {} ns)", p.t1()))
            .metric("fit_tau_ns", tau)
            .plot(lines("Excited-state decay", "t (ns)", "counts", vec![("counts", t.clone(), counts.clone())]))
            .table("", doc)
            .report(fit))
    });
    Ok((job, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FitModel {
    Rabi,
    Lorentzian,
    ExpDecay,
    ExpEnvelope,
    Linear,
    LinearSqrtp,
    SineSqrtp,
}

impl std::str::FromStr for FitModel {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "rabi" => Self::Rabi,
            "lorentzian" => Self::Lorentzian,
            "exp_decay" => Self::ExpDecay,
            "exp_envelope" => Self::ExpEnvelope,
            "linear" => Self::Linear,
            "linear_sqrtp" => Self::LinearSqrtp,
            "sine_sqrtp" => Self::SineSqrtp,
            _ => return Err(()),
        })
    }
}

fn model_value(model: FitModel, v: &[f64], x: f64, t1: f64, mode: MuMode) -> f64 {
    match model {
        FitModel::Rabi => v[2] * rabi_population_raw(t1, v[1], TAU * v[0], x - v[4], mode) + v[3],
        FitModel::Lorentzian => fitkit::lorentzian(x, v[0], v[1], v[2], v[3]),
        FitModel::ExpDecay => v[0] * (-x / v[1]).exp() + v[2],
        FitModel::ExpEnvelope => v[0] * (-x / v[1]).exp(),
        FitModel::Linear => v[0] * x + v[1],
        FitModel::LinearSqrtp => v[0] * x.max(0.0).sqrt() + v[1],
        FitModel::SineSqrtp => fitkit::sine_squared(x, v[0], v[1], v[2], v[3]),
    }
}

/// Uniform grid through `x`, if the samples are evenly spaced.
fn uniform_grid(x: &[f64]) -> Option<TimeGrid> {
    let grid = TimeGrid::new(x[0], x[x.len() - 1], x.len()).ok()?;
    let tol = 1e-6 * grid.dt();
    x.iter()
        .enumerate()
        .all(|(k, &v)| (v - grid.time(k)).abs() <= tol)
        .then_some(grid)
}

fn fit(s: &mut Section, mu_mode: MuMode) -> Result<Job, ConfigError> {
    let path: String = s
        .opt("input")?
        .ok_or_else(|| ConfigError::new("input", "fit needs an input CSV path"))?;
    let name: String = s.get("model", "rabi".to_string())?;
    let model: FitModel = name.parse().map_err(|_| {
        ConfigError::new(
            "model",
            format!("unknown model `{name}` (rabi|lorentzian|exp_decay|exp_envelope|linear|linear_sqrtp|sine_sqrtp)"),
        )
    })?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ConfigError::new("input", format!("cannot read `{path}`: {e}")))?;
    let doc = CsvDocument::parse(&text).map_err(|e| ConfigError::new("input", format!("`{path}`: {e}")))?;
    let default_x = doc.columns.first().cloned().unwrap_or_default();
    let default_y = doc.columns.get(1).cloned().unwrap_or_default();
    let x_col: String = s.get("x_column", default_x)?;
    let y_col: String = s.get("y_column", default_y)?;
    let x = doc.column(&x_col).map_err(|e| ConfigError::new("x_column", e.to_string()))?;
    let y = doc.column(&y_col).map_err(|e| ConfigError::new("y_column", e.to_string()))?;
    if x.len() < 3 {
        return Err(ConfigError::new("input", "need at least 3 data rows"));
    }
    let t1 = s.f64("t1_ns", 1.85, Check::Positive)?;
    let w = weighting(s, Weighting::Poisson)?;
    let grid = if model == FitModel::Rabi {
        Some(uniform_grid(&x).ok_or_else(|| ConfigError::new("x_column", "rabi fits need evenly spaced, increasing times"))?)
    } else {
        None
    };
    Ok(Box::new(move || {
        let pairs = || x.iter().copied().zip(y.iter().copied()).collect::<Vec<_>>();
        let result = match model {
            FitModel::Rabi => fit_rabi(&TimeTrace::new(grid.expect("grid checked"), y.clone())?, t1, mu_mode, w)?,
            FitModel::Lorentzian => fit_lorentzian_fwhm(&Curve::new(x.clone(), y.clone())?)?,
            FitModel::ExpDecay => fit_exp_decay(&Curve::new(x.clone(), y.clone())?)?,
            FitModel::ExpEnvelope => fit_exp_envelope(&Curve::new(x.clone(), y.clone())?)?,
            FitModel::Linear => fit_linear(&x, &y)?,
            FitModel::LinearSqrtp => fit_linear_sqrtp(&pairs())?,
            FitModel::SineSqrtp => fit_sine_sqrtp(&pairs())?,
        };
        let fitted: Vec<f64> = x.iter().map(|&xi| model_value(model, &result.values, xi, t1, mu_mode)).collect();
        let values: Vec<String> = result
            .names
            .iter()
            .zip(&result.values)
            .map(|(n, v)| format!("{n} = {v:.6}"))
            .collect();
        let mut out = Output::default();
        for (n, v) in result.names.iter().zip(&result.values) {
            out = out.metric(n, *v);
        }
        Ok(out
            .summary(format!("fit ({name}): {}; converged = {}", values.join(", "), result.converged))
            .plot(lines("Fit", &x_col, &y_col, vec![("data", x.clone(), y.clone()), ("fit", x.clone(), fitted.clone())]))
            .table("", CsvDocument::from_columns(&[&x_col, &y_col, "fit"], &[&x, &y, &fitted]))
            .report(result))
    }))
}

fn synth(s: &mut Section, mu_mode: MuMode) -> Result<(Job, u64), ConfigError> {
    let name: String = s.get("model", "rabi".to_string())?;
    if !["rabi", "g2", "exp_decay"].contains(&name.as_str()) {
        return Err(ConfigError::new("model", format!("unknown model `{name}` (rabi|g2|exp_decay)")));
    }
    let p = tls_params(s)?;
    let d = drive(s, &p, 1.304)?;
    let grid = time_grid(s, 10.0, 1001)?;
    let (seed, peak, bg, sigma) = noise(s, 20.0)?;
    let do_fit = s.flag("fit", false)?;
    let w = weighting(s, Weighting::Poisson)?;
    if name == "g2" && grid.t_start() != 0.0 {
        return Err(ConfigError::new("t_start_ns", "g2 grids start at 0"));
    }
    let job: Job = Box::new(move || {
        let model = match name.as_str() {
            "rabi" => cw_trace(&p, &d, &grid)?,
            "g2" => g2_one_sided(&p, &d, &grid)?,
            _ => TimeTrace::new(grid, grid.times().iter().map(|t| (-(t - grid.t_start()) / p.t1()).exp()).collect())?,
        };
        let top = model.values.iter().cloned().fold(0.0, f64::max);
        if top <= 0.0 {
            return Err(sivlab::Error::NumericFailure("model curve is identically zero".into()));
        }
        let scale = peak / top;
        let spec = NoiseSpec::new(seed, bg, scale, sigma)?;
        let hist = synth_counts(&model, &spec)?;
        let counts = hist.to_trace();
        let expected: Vec<f64> = model.values.iter().map(|v| scale * v + bg).collect();
        let mut doc = CsvDocument::from_columns(&["tau_ns", "expected", "counts"], &[&model.times(), &expected, &counts.values]);
        for (k, v) in &hist.meta {
            doc.push_meta(k, v);
        }
        let mut out = Output::default()
            .plot(lines("Synthetic histogram", "tau (ns)", "counts", vec![("counts", counts.times(), counts.values.clone()), ("expected", model.times(), expected.clone())]))
            .table("", doc);
        let mut summary = format!("synth ({name}): {} bins, seed {seed}, total {} counts", hist.counts.len(), hist.counts.iter().sum::<u64>());
        if do_fit {
            let r = if name == "exp_decay" {
                fit_exp_decay(&Curve::from_trace(&counts))?
            } else {
                fit_rabi(&counts, p.t1(), mu_mode, w)?
            };
            for (n, v) in r.names.iter().zip(&r.values) {
                out = out.metric(&format!("fit_{n}"), *v);
            }
            summary += &format!("; fit converged = {}", r.converged);
            out = out.report(r);
        }
        Ok(out.summary(summary))
    });
    Ok((job, seed))
}
