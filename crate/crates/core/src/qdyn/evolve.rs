//! Fixed-step fourth-order Runge–Kutta propagation of Lindblad generators.
//!
//! For a time-independent generator `S`, one RK4 step of size `h` is the
//! degree-4 Taylor polynomial `T₄(hS)`; a grid interval of `n` steps is
//! therefore `T₄(hS)ⁿ`, evaluated by repeated squaring. Every interval is
//! verified by halving the step until successive refinements agree.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::liouvillian::{commutator_super, superop_norm_inf, Liouvillian};
use super::matrix::{ComplexMatrix, DensityMatrix, TimeGrid, C64, SAMPLE_HERMITIAN_TOL};
use crate::error::{Error, Result};

/// Internal step control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Upper bound on the internal RK4 step (ns). `None` derives it from the
    /// generator norm as `2π / (200·‖S‖∞)`.
    pub max_step: Option<f64>,
    /// Maximum entrywise change allowed when the internal step is halved.
    pub tolerance: f64,
    /// Run the step-halving verification pass.
    pub verify: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            max_step: None,
            tolerance: 1e-8,
            verify: true,
        }
    }
}

impl EvolveOptions {
    pub fn with_max_step(step: f64) -> Self {
        Self {
            max_step: Some(step),
            ..Self::default()
        }
    }

    /// Plain RK4 at exactly `step`, no verification (convergence studies).
    pub fn fixed_step(step: f64) -> Self {
        Self {
            max_step: Some(step),
            tolerance: 0.0,
            verify: false,
        }
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }
}

const MAX_HALVINGS: u32 = 40;

fn default_step(norm: f64) -> f64 {
    if norm > 0.0 {
        TAU / (200.0 * norm)
    } else {
        f64::INFINITY
    }
}

fn initial_step(opts: &EvolveOptions, norm: f64) -> f64 {
    match opts.max_step {
        Some(h) if h > 0.0 => h,
        _ => default_step(norm),
    }
}

fn rk4_step_matrix(s: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
    let n = s.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let hs = s * C64::new(h, 0.0);
    // I + hS(I + hS/2(I + hS/3(I + hS/4)))
    let mut acc = &id + &hs * C64::new(0.25, 0.0);
    acc = &id + &hs * &acc * C64::new(1.0 / 3.0, 0.0);
    acc = &id + &hs * &acc * C64::new(0.5, 0.0);
    &id + &hs * &acc
}

fn matrix_power(m: &DMatrix<C64>, mut n: u64) -> DMatrix<C64> {
    let dim = m.nrows();
    let mut result = DMatrix::<C64>::identity(dim, dim);
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

fn all_finite<'a>(it: impl IntoIterator<Item = &'a C64>) -> bool {
    it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Verified RK4 propagator over `duration` for a constant superoperator.
pub(crate) fn interval_propagator(
    s: &DMatrix<C64>,
    norm: f64,
    duration: f64,
    opts: &EvolveOptions,
    tol: f64,
) -> Result<DMatrix<C64>> {
    let dim = s.nrows();
    if duration <= 0.0 || norm == 0.0 {
        return Ok(DMatrix::identity(dim, dim));
    }
    let h0 = initial_step(opts, norm);
    let mut n = (duration / h0).ceil().max(1.0) as u64;
    let mut prop = matrix_power(&rk4_step_matrix(s, duration / n as f64), n);
    if !opts.verify {
        return finite_or_fail(prop);
    }
    for _ in 0..MAX_HALVINGS {
        let n2 = n * 2;
        let refined = matrix_power(&rk4_step_matrix(s, duration / n2 as f64), n2);
        if !all_finite(refined.iter()) {
            return Err(Error::NumericFailure("non-finite propagator".into()));
        }
        let diff = max_abs_diff(&prop, &refined);
        if all_finite(prop.iter()) && diff < tol {
            return Ok(refined);
        }
        prop = refined;
        n = n2;
    }
    Err(Error::NumericFailure(format!(
        "step-size underflow: no convergence after {MAX_HALVINGS} halvings"
    )))
}

fn finite_or_fail(m: DMatrix<C64>) -> Result<DMatrix<C64>> {
    if all_finite(m.iter()) {
        Ok(m)
    } else {
        Err(Error::NumericFailure("non-finite propagator".into()))
    }
}

/// Reusable propagator `e^{L·duration}` (RK4 approximation).
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    matrix: DMatrix<C64>,
}

impl Propagator {
    pub fn new(l: &Liouvillian, duration: f64, opts: &EvolveOptions) -> Result<Self> {
        let matrix =
            interval_propagator(l.superoperator(), l.norm_inf(), duration, opts, opts.tolerance)?;
        Ok(Self {
            dim: l.dim(),
            matrix,
        })
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        apply_super(&self.matrix, self.dim, x)
    }
}

fn apply_super(s: &DMatrix<C64>, dim: usize, x: &ComplexMatrix) -> ComplexMatrix {
    let v = DVector::from_vec(x.vectorize());
    ComplexMatrix::from_vectorized(dim, (s * v).as_slice())
}

pub(crate) fn check_sample(mat: ComplexMatrix, t: f64) -> Result<DensityMatrix> {
    DensityMatrix::validated(mat, SAMPLE_HERMITIAN_TOL)
        .map_err(|e| Error::NumericFailure(format!("state at t = {t:.6} ns: {e}")))
}

/// `evolve(l, rho0, grid)` with default step control.
pub fn evolve(l: &Liouvillian, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    evolve_with(l, rho0, grid, &EvolveOptions::default())
}

pub fn evolve_with(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    check_dim(l.dim(), rho0.dim())?;
    let ops = propagate_operator(l, rho0.matrix(), grid, opts)?;
    ops.into_iter()
        .enumerate()
        .map(|(k, m)| check_sample(m, grid.time(k)))
        .collect()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found,
            context: "state vs generator",
        })
    }
}

/// Propagates an arbitrary operator `x0` given at `grid.t_start()`.
pub fn propagate_operator(
    l: &Liouvillian,
    x0: &ComplexMatrix,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<Vec<ComplexMatrix>> {
    check_dim(l.dim(), x0.dim())?;
    let n_int = grid.n_points() - 1;
    let tol = opts.tolerance / n_int as f64;
    let step = interval_propagator(l.superoperator(), l.norm_inf(), grid.dt(), opts, tol)?;
    let dim = l.dim();
    let mut out = Vec::with_capacity(grid.n_points());
    let mut x = x0.clone();
    out.push(x.clone());
    for _ in 0..n_int {
        x = apply_super(&step, dim, &x);
        if !x.is_finite() {
            return Err(Error::NumericFailure("non-finite value during evolution".into()));
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// A generator that is active up to (and excluding) `until`.
///
/// Segment `k` covers `[segments[k-1].until, segments[k].until)`; the first
/// segment extends to −∞ and the last one to +∞.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub until: f64,
    pub generator: &'a Liouvillian,
}

fn segment_index(segments: &[Segment<'_>], t: f64) -> usize {
    segments
        .iter()
        .position(|s| t < s.until)
        .unwrap_or(segments.len() - 1)
}

struct PiecewiseRunner<'a, 'b> {
    segments: &'b [Segment<'a>],
    opts: EvolveOptions,
    tol: f64,
    cache: HashMap<(usize, u64), DMatrix<C64>>,
}

impl PiecewiseRunner<'_, '_> {
    fn advance(&mut self, x: &ComplexMatrix, t0: f64, t1: f64) -> Result<ComplexMatrix> {
        let dim = x.dim();
        let mut t = t0;
        let mut v = x.clone();
        while t < t1 {
            let idx = segment_index(self.segments, t);
            let seg_end = if idx + 1 == self.segments.len() {
                f64::INFINITY
            } else {
                self.segments[idx].until
            };
            let stop = seg_end.min(t1);
            let len = stop - t;
            let gen = self.segments[idx].generator;
            let key = (idx, len.to_bits());
            if !self.cache.contains_key(&key) {
                let p = interval_propagator(
                    gen.superoperator(),
                    gen.norm_inf(),
                    len,
                    &self.opts,
                    self.tol,
                )?;
                self.cache.insert(key, p);
            }
            v = apply_super(&self.cache[&key], dim, &v);
            t = stop;
        }
        Ok(v)
    }
}

fn validate_segments(segments: &[Segment<'_>], dim: usize) -> Result<()> {
    if segments.is_empty() {
        return Err(crate::error::invalid("segments", "at least one segment required"));
    }
    for w in segments.windows(2) {
        if w[1].until < w[0].until {
            return Err(crate::error::invalid("segments", "boundaries must be ascending"));
        }
    }
    for s in segments {
        check_dim(dim, s.generator.dim())?;
    }
    Ok(())
}

/// Evolution under a piecewise-constant generator, sampled on `grid`.
pub fn evolve_piecewise(
    segments: &[Segment<'_>],
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    validate_segments(segments, rho0.dim())?;
    let n_int = grid.n_points() - 1;
    let breaks = segments.len().saturating_sub(1);
    let mut runner = PiecewiseRunner {
        segments,
        opts: *opts,
        tol: opts.tolerance / (n_int + breaks) as f64,
        cache: HashMap::new(),
    };
    let mut out = Vec::with_capacity(grid.n_points());
    let mut x = rho0.matrix().clone();
    out.push(rho0.clone());
    for k in 0..n_int {
        x = runner.advance(&x, grid.time(k), grid.time(k + 1))?;
        out.push(check_sample(x.clone(), grid.time(k + 1))?);
    }
    Ok(out)
}

/// Final operator after piecewise-constant evolution from `t0` to `t1`.
pub fn propagate_piecewise(
    segments: &[Segment<'_>],
    x0: &ComplexMatrix,
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<ComplexMatrix> {
    validate_segments(segments, x0.dim())?;
    let mut runner = PiecewiseRunner {
        segments,
        opts: *opts,
        tol: opts.tolerance / segments.len() as f64,
        cache: HashMap::new(),
    };
    let x = runner.advance(x0, t0, t1)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NumericFailure("non-finite value during evolution".into()))
    }
}

/// Hamiltonian term `f(t)·H_k` added to a static generator.
///
/// Envelopes are expected to stay within `[-1, 1]`; the default step is sized
/// on that assumption.
pub struct ModulatedTerm<'a> {
    pub hamiltonian: ComplexMatrix,
    pub envelope: &'a (dyn Fn(f64) -> f64 + Sync),
}

struct ModulatedSystem {
    base: DMatrix<C64>,
    terms: Vec<DMatrix<C64>>,
    dim: usize,
}

impl ModulatedSystem {
    fn derivative(&self, envs: &[f64], x: &DVector<C64>) -> DVector<C64> {
        let mut dx = &self.base * x;
        for (s, f) in self.terms.iter().zip(envs) {
            if *f != 0.0 {
                dx += (s * x) * C64::new(*f, 0.0);
            }
        }
        dx
    }

    /// RK4 across `times` with steps of at most `h`, never stepping over a
    /// breakpoint. Envelopes are sampled strictly inside each smooth piece so
    /// jumps at breakpoints are seen as one-sided limits.
    fn run(
        &self,
        envelopes: &[&(dyn Fn(f64) -> f64 + Sync)],
        x0: &DVector<C64>,
        times: &[f64],
        breaks: &[f64],
        h: f64,
    ) -> Vec<DVector<C64>> {
        let mut out = Vec::with_capacity(times.len());
        let mut x = x0.clone();
        out.push(x.clone());
        for w in times.windows(2) {
            let mut edges = vec![w[0]];
            edges.extend(breaks.iter().copied().filter(|b| *b > w[0] && *b < w[1]));
            edges.push(w[1]);
            edges.sort_by(f64::total_cmp);
            edges.dedup();
            for piece in edges.windows(2) {
                let (a, b) = (piece[0], piece[1]);
                let eps = 1e-9 * (b - a);
                let eval = |t: f64| -> Vec<f64> {
                    let t = t.clamp(a + eps, b - eps);
                    envelopes.iter().map(|f| f(t)).collect()
                };
                let n = if h.is_finite() { ((b - a) / h).ceil().max(1.0) as u64 } else { 1 };
                let step = (b - a) / n as f64;
                for j in 0..n {
                    let t = a + j as f64 * step;
                    let f0 = eval(t);
                    let fm = eval(t + 0.5 * step);
                    let f1 = eval(t + step);
                    let hc = C64::new(step, 0.0);
                    let half = C64::new(0.5 * step, 0.0);
                    let k1 = self.derivative(&f0, &x);
                    let k2 = self.derivative(&fm, &(&x + &k1 * half));
                    let k3 = self.derivative(&fm, &(&x + &k2 * half));
                    let k4 = self.derivative(&f1, &(&x + &k3 * hc));
                    x += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
                        * C64::new(step / 6.0, 0.0);
                }
            }
            out.push(x.clone());
        }
        out
    }
}

/// Halvings allowed for the trajectory-level check; each one doubles the cost.
const MAX_MODULATED_HALVINGS: u32 = 12;

fn modulated_trajectory(
    base: &Liouvillian,
    terms: &[ModulatedTerm<'_>],
    x0: &ComplexMatrix,
    times: &[f64],
    breaks: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<ComplexMatrix>> {
    let dim = base.dim();
    check_dim(dim, x0.dim())?;
    for t in terms {
        check_dim(dim, t.hamiltonian.dim())?;
        let deviation = t.hamiltonian.hermitian_deviation();
        if deviation > super::liouvillian::HAMILTONIAN_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
    }
    let system = ModulatedSystem {
        base: base.superoperator().clone(),
        terms: terms.iter().map(|t| commutator_super(&t.hamiltonian)).collect(),
        dim,
    };
    let norm = superop_norm_inf(&system.base)
        + system.terms.iter().map(superop_norm_inf).sum::<f64>();
    let envelopes: Vec<&(dyn Fn(f64) -> f64 + Sync)> = terms.iter().map(|t| t.envelope).collect();
    let x0v = DVector::from_vec(x0.vectorize());
    let mut h = initial_step(opts, norm);
    let to_ops = |traj: Vec<DVector<C64>>| -> Vec<ComplexMatrix> {
        traj.into_iter()
            .map(|v| ComplexMatrix::from_vectorized(system.dim, v.as_slice()))
            .collect()
    };
    let mut coarse = system.run(&envelopes, &x0v, times, breaks, h);
    if !opts.verify {
        return finite_traj(to_ops(coarse));
    }
    for _ in 0..MAX_MODULATED_HALVINGS {
        h *= 0.5;
        let fine = system.run(&envelopes, &x0v, times, breaks, h);
        let diff = coarse
            .iter()
            .zip(&fine)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0f64, |acc, d| if d.is_nan() { f64::INFINITY } else { acc.max(d) });
        if diff < opts.tolerance {
            return finite_traj(to_ops(fine));
        }
        coarse = fine;
    }
    Err(Error::NumericFailure(
        "step-size underflow: modulated evolution did not converge".into(),
    ))
}

fn finite_traj(traj: Vec<ComplexMatrix>) -> Result<Vec<ComplexMatrix>> {
    if traj.iter().all(ComplexMatrix::is_finite) {
        Ok(traj)
    } else {
        Err(Error::NumericFailure("non-finite value during evolution".into()))
    }
}

/// Evolution under `L(t) = L₀ − i Σ_k f_k(t)[H_k, ·]`, sampled on `grid`.
///
/// `breaks` lists times where an envelope may jump; steps never straddle them.
pub fn evolve_modulated(
    base: &Liouvillian,
    terms: &[ModulatedTerm<'_>],
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    breaks: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    let times = grid.times();
    let traj = modulated_trajectory(base, terms, rho0.matrix(), &times, breaks, opts)?;
    traj.into_iter()
        .zip(times)
        .map(|(m, t)| check_sample(m, t))
        .collect()
}

/// Final operator after modulated evolution from `t0` to `t1`.
pub fn propagate_modulated(
    base: &Liouvillian,
    terms: &[ModulatedTerm<'_>],
    x0: &ComplexMatrix,
    t0: f64,
    t1: f64,
    breaks: &[f64],
    opts: &EvolveOptions,
) -> Result<ComplexMatrix> {
    let traj = modulated_trajectory(base, terms, x0, &[t0, t1], breaks, opts)?;
    Ok(traj.into_iter().last().expect("two samples"))
}
