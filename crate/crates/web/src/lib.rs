//! Browser bindings: Rabi trace, g² curve and emission spectrum of a driven emitter.

use sivlab::photostats::{apply_irf, emission_spectrum, g2_curve};
use sivlab::qdyn::{evolve, DensityMatrix, TimeGrid};
use sivlab::tls::{self, Drive, TlsParams};
use sivlab::linspace;
use wasm_bindgen::prelude::*;

/// Upper bound on samples per curve, to keep the page responsive.
pub const MAX_POINTS: usize = 4001;

fn check_points(n: usize) -> Result<(), String> {
    if (3..=MAX_POINTS).contains(&n) {
        Ok(())
    } else {
        Err(format!("n_points must lie in 3..={MAX_POINTS}, got {n}"))
    }
}

fn model(t1: f64, t2: f64, rabi_ghz: f64, detuning_ghz: f64) -> Result<(TlsParams, Drive), String> {
    let p = TlsParams::new(t1, t2).map_err(|e| e.to_string())?;
    let d = Drive::new(rabi_ghz, detuning_ghz).map_err(|e| e.to_string())?;
    Ok((p, d))
}

/// Excited population under continuous drive from `|g⟩`, on `[0, t_end]`.
pub fn rabi_trace_values(t1: f64, t2: f64, rabi_ghz: f64, detuning_ghz: f64, t_end: f64, n_points: usize) -> Result<Vec<f64>, String> {
    check_points(n_points)?;
    let (p, d) = model(t1, t2, rabi_ghz, detuning_ghz)?;
    let grid = TimeGrid::new(0.0, t_end, n_points).map_err(|e| e.to_string())?;
    let l = tls::liouvillian(&p, &d).map_err(|e| e.to_string())?;
    let states = evolve(&l, &DensityMatrix::basis(2, tls::GROUND), &grid).map_err(|e| e.to_string())?;
    Ok(states.iter().map(|r| r.population(tls::EXCITED)).collect())
}

/// Two-sided `g²(τ)` on `[−tau_max, tau_max]` (`2·n_points − 1` samples),
/// blurred by a Gaussian detector response of width `irf_sigma` when positive.
pub fn g2_values(t1: f64, t2: f64, rabi_ghz: f64, detuning_ghz: f64, tau_max: f64, n_points: usize, irf_sigma: f64) -> Result<Vec<f64>, String> {
    check_points(n_points)?;
    let (p, d) = model(t1, t2, rabi_ghz, detuning_ghz)?;
    let grid = TimeGrid::new(0.0, tau_max, n_points).map_err(|e| e.to_string())?;
    let mut g = g2_curve(&p, &d, &grid).map_err(|e| e.to_string())?;
    if irf_sigma > 0.0 {
        g = apply_irf(&g, irf_sigma).map_err(|e| e.to_string())?;
    }
    Ok(g.values)
}

/// Incoherent emission spectrum on `[−f_max, f_max]` GHz around the transition.
pub fn spectrum_values(t1: f64, t2: f64, rabi_ghz: f64, detuning_ghz: f64, f_max: f64, n_points: usize) -> Result<Vec<f64>, String> {
    check_points(n_points)?;
    if !(f_max > 0.0) {
        return Err(format!("f_max must be > 0, got {f_max}"));
    }
    let (p, d) = model(t1, t2, rabi_ghz, detuning_ghz)?;
    let s = emission_spectrum(&p, &d, &linspace(-f_max, f_max, n_points)).map_err(|e| e.to_string())?;
    Ok(s.magnitude)
}

#[wasm_bindgen]
pub fn rabi_trace(t1: f64, t2: f64, rabi_ghz: f64, detuning_ghz: f64, t_end: f64, n_points: usize) -> Result<Vec<f64>, JsError> {
    rabi_trace_values(t1, t2, rabi_ghz, detuning_ghz, t_end, n_points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn g2(t1: f64, t2: f64, rabi_ghz: f64, detuning_ghz: f64, tau_max: f64, n_points: usize, irf_sigma: f64) -> Result<Vec<f64>, JsError> {
    g2_values(t1, t2, rabi_ghz, detuning_ghz, tau_max, n_points, irf_sigma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn spectrum(t1: f64, t2: f64, rabi_ghz: f64, detuning_ghz: f64, f_max: f64, n_points: usize) -> Result<Vec<f64>, JsError> {
    spectrum_values(t1, t2, rabi_ghz, detuning_ghz, f_max, n_points).map_err(|e| JsError::new(&e))
}
