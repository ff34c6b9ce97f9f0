//! Two-pulse Ramsey interferometry on the optical transition.
//!
//! The optical phase accumulated as the second pulse's path delay is scanned
//! is represented in the rotating frame by `relative_phase` on that pulse.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::qdyn::{
    build_liouvillian, propagate_modulated, propagate_piecewise, ComplexMatrix, EvolveOptions,
    ModulatedTerm, Segment,
};
use crate::tls::{self, Drive, PulseEnvelope, PulseShape, TlsParams, EXCITED, GROUND};
use crate::trace::Curve;
use crate::units::{angular_to_ghz, ghz_to_angular};

/// Phase samples per fringe used for visibility extraction.
pub const DEFAULT_PHASES: usize = 32;

/// Two π/2 pulses separated by a free-evolution gap `delay_tau` (ns),
/// measured from the end of the first pulse to the start of the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseySequence {
    pub pulse: PulseEnvelope,
    pub delay_tau: f64,
    pub relative_phase: f64,
}

impl RamseySequence {
    pub fn new(pulse: PulseEnvelope, delay_tau: f64, relative_phase: f64) -> Result<Self> {
        if !(delay_tau >= 0.0 && delay_tau.is_finite()) {
            return Err(invalid("delay_tau", format!("must be ≥ 0, got {delay_tau}")));
        }
        Ok(Self {
            pulse,
            delay_tau,
            relative_phase,
        })
    }
}

/// Ω/2π (GHz) giving a π/2 area for `pulse`.
pub fn pi_half_rabi_ghz(pulse: &PulseEnvelope) -> f64 {
    angular_to_ghz(FRAC_PI_2 / pulse.area_factor())
}

/// `ρ_ee` after pulse 1 → free evolution → pulse 2 (phase-shifted).
pub fn ramsey_population(params: &TlsParams, seq: &RamseySequence, detuning_ghz: f64) -> Result<f64> {
    let rabi = ghz_to_angular(pi_half_rabi_ghz(&seq.pulse));
    let detuning = ghz_to_angular(detuning_ghz);
    let drive = Drive::new(angular_to_ghz(rabi), detuning_ghz)?;
    let opts = EvolveOptions::with_max_step(tls::integration_step(params, &drive)).tolerance(1e-10);
    let jumps = tls::jumps(params);
    let end = seq.pulse.pulse_end();
    let second = end + seq.delay_tau;
    let total = second + end;
    let rho0 = ComplexMatrix::projector(2, GROUND);
    let rho = if seq.pulse.shape() == PulseShape::Square && seq.pulse.rise_time() == 0.0 {
        let first = build_liouvillian(tls::hamiltonian(rabi, detuning, 0.0), jumps.clone())?;
        let free = build_liouvillian(tls::hamiltonian(0.0, detuning, 0.0), jumps.clone())?;
        let last = build_liouvillian(tls::hamiltonian(rabi, detuning, seq.relative_phase), jumps)?;
        let segments = [
            Segment {
                until: end,
                generator: &first,
            },
            Segment {
                until: second,
                generator: &free,
            },
            Segment {
                until: f64::INFINITY,
                generator: &last,
            },
        ];
        propagate_piecewise(&segments, &rho0, 0.0, total, &opts)?
    } else {
        let base = build_liouvillian(tls::hamiltonian(0.0, detuning, 0.0), jumps)?;
        let pulse = seq.pulse;
        let (c, s) = (seq.relative_phase.cos(), seq.relative_phase.sin());
        let env_x = move |t: f64| pulse.single(t) + c * pulse.single(t - second);
        let env_y = move |t: f64| s * pulse.single(t - second);
        let terms = [
            ModulatedTerm {
                hamiltonian: tls::hamiltonian(rabi, 0.0, 0.0),
                envelope: &env_x,
            },
            ModulatedTerm {
                hamiltonian: tls::hamiltonian(rabi, 0.0, FRAC_PI_2),
                envelope: &env_y,
            },
        ];
        let opts = EvolveOptions {
            max_step: Some(opts.max_step.unwrap_or(f64::INFINITY).min(seq.pulse.duration() / 50.0)),
            ..opts
        };
        let breaks: Vec<f64> = pulse
            .single_breakpoints()
            .iter()
            .flat_map(|b| [*b, b + second])
            .collect();
        propagate_modulated(&base, &terms, &rho0, 0.0, total, &breaks, &opts)?
    };
    Ok(rho.get(EXCITED, EXCITED).re)
}

/// Fringe visibility `(max − min)/(max + min)` over `n_phases` equally spaced
/// relative phases in `[0, 2π)`.
pub fn visibility(params: &TlsParams, pulse: &PulseEnvelope, tau: f64, detuning_ghz: f64, n_phases: usize) -> Result<f64> {
    if n_phases < 16 {
        return Err(invalid("n_phases", "need at least 16 phase samples"));
    }
    let fringe: Vec<f64> = (0..n_phases)
        .map(|k| {
            let seq = RamseySequence::new(*pulse, tau, TAU * k as f64 / n_phases as f64)?;
            ramsey_population(params, &seq, detuning_ghz)
        })
        .collect::<Result<_>>()?;
    let max = fringe.iter().cloned().fold(f64::MIN, f64::max);
    let min = fringe.iter().cloned().fold(f64::MAX, f64::min);
    if max + min == 0.0 {
        return Err(Error::ZeroFringe);
    }
    Ok((max - min) / (max + min))
}

/// Resonant visibility versus free-evolution delay.
pub fn visibility_curve(params: &TlsParams, pulse: &PulseEnvelope, taus: &[f64]) -> Result<Curve> {
    if taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(invalid("tau_range", "delays must be ≥ 0"));
    }
    let v: Vec<f64> = taus
        .par_iter()
        .map(|&tau| visibility(params, pulse, tau, 0.0, DEFAULT_PHASES))
        .collect::<Result<_>>()?;
    Ok(Curve::new(taus.to_vec(), v)?
        .with_meta("quantity", "ramsey_visibility")
        .with_meta("pulse_ns", pulse.duration())
        .with_meta("t1_ns", params.t1())
        .with_meta("t2_ns", params.t2())
        .with_meta("n_phases", DEFAULT_PHASES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn short_pulse() -> PulseEnvelope {
        PulseEnvelope::square(0.01, 12.5).unwrap()
    }

    #[test]
    fn zero_delay_in_phase_is_a_pi_pulse() {
        let p = TlsParams::siv_c();
        let seq = RamseySequence::new(short_pulse(), 0.0, 0.0).unwrap();
        assert!(ramsey_population(&p, &seq, 0.0).unwrap() > 0.99);
        let anti = RamseySequence::new(short_pulse(), 0.0, PI).unwrap();
        assert!(ramsey_population(&p, &anti, 0.0).unwrap() < 0.01);
    }

    #[test]
    fn population_is_two_pi_periodic_in_phase() {
        let p = TlsParams::siv_c();
        let a = ramsey_population(&p, &RamseySequence::new(short_pulse(), 0.4, 0.7).unwrap(), 0.3).unwrap();
        let b = ramsey_population(&p, &RamseySequence::new(short_pulse(), 0.4, 0.7 + TAU).unwrap(), 0.3).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn negative_delay_rejected() {
        assert!(RamseySequence::new(short_pulse(), -0.1, 0.0).is_err());
    }

    #[test]
    fn gaussian_pulses_match_square_in_short_limit() {
        let p = TlsParams::siv_c();
        let g = PulseEnvelope::gaussian(0.01, 12.5).unwrap();
        let vs = visibility(&p, &short_pulse(), 0.5, 0.0, 16).unwrap();
        let vg = visibility(&p, &g, 0.5, 0.0, 16).unwrap();
        assert!((vs - vg).abs() < 0.02, "{vs} vs {vg}");
    }
}
