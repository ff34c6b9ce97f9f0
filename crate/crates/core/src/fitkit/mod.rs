//! Levenberg–Marquardt engine and the fit models used for Rabi traces,
//! g² curves, lineshapes, decays and pulse-area scans.

mod lm;
mod models;

pub use lm::{lm_fit, Bound, FitData, FitResult, ParamSpec, CHI2_REL_TOL, MAX_ITERATIONS, STEP_TOL};
pub use models::{
    fit_exp_decay, fit_exp_envelope, fit_linear, fit_linear_sqrtp, fit_lorentzian_fwhm, fit_rabi,
    fit_rabi_from, fit_sine_sqrtp, lorentzian, rabi_initial_guess, sine_squared, Weighting,
    RABI_PARAMS,
};
