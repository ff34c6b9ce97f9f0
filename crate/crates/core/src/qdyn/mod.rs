//! Dense Lindblad master-equation engine for small Hilbert spaces.
//!
//! Frequencies are angular (rad/ns) and times are ns throughout this module.

mod evolve;
mod liouvillian;
mod matrix;
mod steady;

pub use evolve::{
    evolve, evolve_modulated, evolve_piecewise, evolve_with, propagate_modulated,
    propagate_operator, propagate_piecewise, EvolveOptions, ModulatedTerm, Propagator, Segment,
};
pub use liouvillian::{build_liouvillian, Liouvillian, HAMILTONIAN_HERMITIAN_TOL};
pub use matrix::{
    ComplexMatrix, DensityMatrix, TimeGrid, C64, HERMITIAN_TOL, POSITIVITY_TOL,
    SAMPLE_HERMITIAN_TOL, TRACE_TOL,
};
pub use steady::{steady_residual, steady_state, STEADY_RESIDUAL_TOL};

use crate::error::Result;

/// Two-time correlator `C(τ) = Tr[a · e^{Lτ}(b_left · ρ_ss · b_right)]`.
///
/// `τ` runs over `grid`; a grid starting after zero is reached by first
/// propagating the seed operator to `grid.t_start()`.
pub fn regression_correlator(
    l: &Liouvillian,
    rho_ss: &DensityMatrix,
    a: &ComplexMatrix,
    b_left: &ComplexMatrix,
    b_right: &ComplexMatrix,
    grid: &TimeGrid,
) -> Result<Vec<C64>> {
    regression_correlator_with(l, rho_ss, a, b_left, b_right, grid, &EvolveOptions::default())
}

pub fn regression_correlator_with(
    l: &Liouvillian,
    rho_ss: &DensityMatrix,
    a: &ComplexMatrix,
    b_left: &ComplexMatrix,
    b_right: &ComplexMatrix,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<Vec<C64>> {
    let mut seed = &(b_left * rho_ss.matrix()) * b_right;
    if grid.t_start() > 0.0 {
        seed = Propagator::new(l, grid.t_start(), opts)?.apply(&seed);
    }
    let traj = propagate_operator(l, &seed, grid, opts)?;
    Ok(traj.iter().map(|x| (a * x).trace()).collect())
}
