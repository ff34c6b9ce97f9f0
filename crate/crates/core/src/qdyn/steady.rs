use nalgebra::{DMatrix, DVector};

use super::evolve::{interval_propagator, EvolveOptions};
use super::liouvillian::Liouvillian;
use super::matrix::{ComplexMatrix, DensityMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Residual bound `‖L(ρ_ss)‖_max` accepted from the direct solve.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;

/// Unique stationary state of `l`.
///
/// Solves `S·vec(ρ) = 0` with the first row replaced by the trace
/// constraint. If that solve is singular or leaves a residual above
/// [`STEADY_RESIDUAL_TOL`], the spectrum is inspected: a degenerate zero
/// eigenvalue is reported, otherwise the state is obtained by integrating
/// for 20 times the slowest relaxation time.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    if let Some(rho) = direct_solve(l) {
        if steady_residual(l, &rho) < STEADY_RESIDUAL_TOL {
            return finish(rho);
        }
    }
    integration_fallback(l)
}

/// `‖L(ρ)‖_max`.
pub fn steady_residual(l: &Liouvillian, rho: &ComplexMatrix) -> f64 {
    l.apply(rho).max_abs()
}

fn direct_solve(l: &Liouvillian) -> Option<ComplexMatrix> {
    let dim = l.dim();
    let n = dim * dim;
    let mut a = l.superoperator().clone();
    for col in 0..n {
        a[(0, col)] = ZERO;
    }
    for i in 0..dim {
        a[(0, i + i * dim)] = ONE;
    }
    let mut b = DVector::<C64>::zeros(n);
    b[0] = ONE;
    let x = a.lu().solve(&b)?;
    if x.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return None;
    }
    Some(hermitize(ComplexMatrix::from_vectorized(dim, x.as_slice())))
}

fn hermitize(m: ComplexMatrix) -> ComplexMatrix {
    let h = (&m + &m.dagger()).scale_real(0.5);
    let tr = h.trace().re;
    h.scale_real(1.0 / tr)
}

fn finish(rho: ComplexMatrix) -> Result<DensityMatrix> {
    DensityMatrix::new(rho).map_err(|e| Error::NumericFailure(format!("steady state: {e}")))
}

fn generator_eigenvalues(s: &DMatrix<C64>) -> Result<Vec<C64>> {
    let schur = nalgebra::Schur::try_new(s.clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::NumericFailure("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

fn integration_fallback(l: &Liouvillian) -> Result<DensityMatrix> {
    let s = l.superoperator();
    let scale = l.norm_inf().max(1.0);
    let eig = generator_eigenvalues(s)?;
    let zero_tol = 1e-9 * scale;
    let zero_modes = eig.iter().filter(|z| z.norm() < zero_tol).count();
    if zero_modes != 1 {
        return Err(Error::DegenerateSteadyState { zero_modes });
    }
    let slowest = eig
        .iter()
        .filter(|z| z.norm() >= zero_tol)
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min);
    if !(slowest > 0.0) {
        return Err(Error::DegenerateSteadyState { zero_modes });
    }
    let duration = 20.0 / slowest;
    let opts = EvolveOptions::default().tolerance(1e-13);
    let prop = interval_propagator(s, l.norm_inf(), duration, &opts, opts.tolerance)?;
    let dim = l.dim();
    let rho0 = DensityMatrix::maximally_mixed(dim);
    let v = &prop * DVector::from_vec(rho0.matrix().vectorize());
    let rho = hermitize(ComplexMatrix::from_vectorized(dim, v.as_slice()));
    let residual = steady_residual(l, &rho);
    if residual > STEADY_RESIDUAL_TOL {
        return Err(Error::NumericFailure(format!(
            "steady-state residual {residual:.3e} after long-time integration"
        )));
    }
    finish(rho)
}
