//! Boundary conversion between ordinary (GHz) and angular (rad/ns) frequency.

use std::f64::consts::TAU;

#[inline]
pub fn ghz_to_angular(f_ghz: f64) -> f64 {
    TAU * f_ghz
}

#[inline]
pub fn angular_to_ghz(omega: f64) -> f64 {
    omega / TAU
}
