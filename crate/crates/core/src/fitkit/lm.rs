use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 500;
pub const CHI2_REL_TOL: f64 = 1e-10;
pub const STEP_TOL: f64 = 1e-12;
const DIFF_STEP: f64 = 1e-6;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e14;
const POLISH_STEPS: usize = 3;

/// Parameter domain; positive parameters are fitted as `ln p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Free,
    Positive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub init: f64,
    pub bound: Bound,
}

impl ParamSpec {
    pub fn free(name: &str, init: f64) -> Self {
        Self {
            name: name.into(),
            init,
            bound: Bound::Free,
        }
    }

    pub fn positive(name: &str, init: f64) -> Self {
        Self {
            name: name.into(),
            init,
            bound: Bound::Positive,
        }
    }

    fn to_internal(&self, p: f64) -> f64 {
        match self.bound {
            Bound::Free => p,
            Bound::Positive => p.ln(),
        }
    }

    fn to_external(&self, u: f64) -> f64 {
        match self.bound {
            Bound::Free => u,
            Bound::Positive => u.exp(),
        }
    }

    /// `dp/du` at internal value `u`.
    fn jacobian(&self, u: f64) -> f64 {
        match self.bound {
            Bound::Free => 1.0,
            Bound::Positive => u.exp(),
        }
    }
}

/// Observations with statistical weights `1/σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weight: Vec<f64>,
}

impl FitData {
    pub fn new(x: Vec<f64>, y: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != weight.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: if x.len() != y.len() { y.len() } else { weight.len() },
                context: "fit data columns",
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::FitPrecondition("data must be finite".into()));
        }
        if weight.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::FitPrecondition("weights must be finite and ≥ 0".into()));
        }
        Ok(Self { x, y, weight })
    }

    pub fn unweighted(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; x.len()];
        Self::new(x, y, w)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Row-major covariance, scaled by `chi2_reduced`.
    pub covariance: Vec<Vec<f64>>,
    pub chi2_reduced: f64,
    pub r_squared: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub message: String,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|k| self.values[k])
    }

    pub fn error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|k| self.stderr[k])
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Result carrying the initial guess only, for inputs a fit cannot use.
    pub(crate) fn unfitted(params: &[ParamSpec], message: impl Into<String>) -> Self {
        let m = params.len();
        Self {
            names: params.iter().map(|p| p.name.clone()).collect(),
            values: params.iter().map(|p| p.init).collect(),
            stderr: vec![f64::INFINITY; m],
            covariance: vec![vec![f64::INFINITY; m]; m],
            chi2_reduced: f64::NAN,
            r_squared: f64::NAN,
            n_iter: 0,
            converged: false,
            message: message.into(),
        }
    }
}

struct Problem<'a, F> {
    model: &'a F,
    data: &'a FitData,
    params: &'a [ParamSpec],
}

impl<F: Fn(f64, &[f64]) -> f64> Problem<'_, F> {
    fn external(&self, u: &[f64]) -> Vec<f64> {
        self.params.iter().zip(u).map(|(s, &v)| s.to_external(v)).collect()
    }

    fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        let p = self.external(u);
        self.data
            .x
            .iter()
            .map(|&x| {
                let v = (self.model)(x, &p);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteModel { x })
                }
            })
            .collect()
    }

    fn chi2(&self, f: &[f64]) -> f64 {
        self.data
            .y
            .iter()
            .zip(f)
            .zip(&self.data.weight)
            .map(|((y, f), w)| w * (y - f) * (y - f))
            .sum()
    }

    /// Central-difference Jacobian of the model with respect to internal parameters.
    fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.data.len();
        let mut j = DMatrix::zeros(n, u.len());
        let mut probe = u.to_vec();
        for k in 0..u.len() {
            let h = DIFF_STEP * u[k].abs().max(1.0);
            probe[k] = u[k] + h;
            let fp = self.eval(&probe)?;
            probe[k] = u[k] - h;
            let fm = self.eval(&probe)?;
            probe[k] = u[k];
            for i in 0..n {
                j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(j)
    }

    /// Normal matrix `JᵀWJ` and gradient `JᵀW(y − f)`.
    fn normal(&self, j: &DMatrix<f64>, f: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let m = j.ncols();
        let mut a = DMatrix::zeros(m, m);
        let mut g = DVector::zeros(m);
        for i in 0..self.data.len() {
            let w = self.data.weight[i];
            let r = self.data.y[i] - f[i];
            for p in 0..m {
                let jp = j[(i, p)] * w;
                g[p] += jp * r;
                for q in 0..=p {
                    a[(p, q)] += jp * j[(i, q)];
                }
            }
        }
        for p in 0..m {
            for q in 0..p {
                a[(q, p)] = a[(p, q)];
            }
        }
        (a, g)
    }
}

fn solve_damped(a: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let max_diag = a.diagonal().iter().cloned().fold(0.0, f64::max);
    let floor = 1e-12 * max_diag.max(1e-300);
    let mut damped = a.clone();
    for k in 0..a.nrows() {
        damped[(k, k)] += lambda * a[(k, k)].max(floor);
    }
    damped.cholesky().map(|c| c.solve(g)).filter(|d| d.iter().all(|v| v.is_finite()))
}

fn r_squared(data: &FitData, f: &[f64]) -> f64 {
    let wsum: f64 = data.weight.iter().sum();
    if wsum <= 0.0 {
        return f64::NAN;
    }
    let mean = data.y.iter().zip(&data.weight).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let ss_tot: f64 = data
        .y
        .iter()
        .zip(&data.weight)
        .map(|(y, w)| w * (y - mean) * (y - mean))
        .sum();
    let ss_res: f64 = data
        .y
        .iter()
        .zip(f)
        .zip(&data.weight)
        .map(|((y, f), w)| w * (y - f) * (y - f))
        .sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NAN
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Undamped Gauss–Newton steps after convergence, kept while χ² does not grow
/// beyond rounding.
fn polish<F: Fn(f64, &[f64]) -> f64>(
    problem: &Problem<'_, F>,
    u: &mut Vec<f64>,
    f: &mut Vec<f64>,
    chi2: &mut f64,
) -> Result<()> {
    for _ in 0..POLISH_STEPS {
        let j = problem.jacobian(u)?;
        let (a, g) = problem.normal(&j, f);
        let Some(delta) = a.cholesky().map(|c| c.solve(&g)) else {
            return Ok(());
        };
        let trial: Vec<f64> = u.iter().zip(delta.iter()).map(|(u, d)| u + d).collect();
        let Ok(ft) = problem.eval(&trial) else {
            return Ok(());
        };
        let c = problem.chi2(&ft);
        // Near the optimum the χ² gain is below summation rounding.
        if !(c <= *chi2 * (1.0 + 1e-12)) {
            return Ok(());
        }
        *u = trial;
        *f = ft;
        *chi2 = c;
    }
    Ok(())
}

/// Levenberg–Marquardt least squares of `model(x, params)` against `data`.
pub fn lm_fit<F>(model: F, data: &FitData, params: &[ParamSpec]) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let m = params.len();
    let n = data.len();
    if n < m {
        return Err(Error::FitPrecondition(format!(
            "{n} data points for {m} free parameters"
        )));
    }
    for p in params {
        if !p.init.is_finite() || (p.bound == Bound::Positive && p.init <= 0.0) {
            return Err(Error::FitPrecondition(format!(
                "invalid initial value {} for {}",
                p.init, p.name
            )));
        }
    }
    let problem = Problem {
        model: &model,
        data,
        params,
    };
    let mut u: Vec<f64> = params.iter().map(|p| p.to_internal(p.init)).collect();
    let mut f = problem.eval(&u)?;
    let mut chi2 = problem.chi2(&f);
    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let mut n_iter = 0;

    while n_iter < MAX_ITERATIONS {
        n_iter += 1;
        if chi2 == 0.0 {
            converged = true;
            message = "exact fit".into();
            break;
        }
        let j = problem.jacobian(&u)?;
        let (a, g) = problem.normal(&j, &f);
        let mut accepted = None;
        while lambda <= LAMBDA_MAX {
            if let Some(delta) = solve_damped(&a, &g, lambda) {
                let trial: Vec<f64> = u.iter().zip(delta.iter()).map(|(u, d)| u + d).collect();
                match problem.eval(&trial) {
                    Ok(ft) => {
                        let c = problem.chi2(&ft);
                        if c <= chi2 {
                            accepted = Some((trial, ft, c, delta.norm()));
                            break;
                        }
                    }
                    Err(Error::NonFiniteModel { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            lambda *= 10.0;
        }
        let Some((trial, ft, c, step)) = accepted else {
            if solve_damped(&a, &g, LAMBDA_MAX).is_none() {
                return Err(Error::SingularNormalEquations);
            }
            converged = true;
            message = "no further decrease in chi-square".into();
            break;
        };
        let rel = (chi2 - c) / chi2.max(f64::MIN_POSITIVE);
        u = trial;
        f = ft;
        chi2 = c;
        lambda = (lambda / 10.0).max(1e-12);
        if rel < CHI2_REL_TOL || step < STEP_TOL {
            converged = true;
            message = if rel < CHI2_REL_TOL {
                "relative chi-square change below tolerance".into()
            } else {
                "step norm below tolerance".into()
            };
            break;
        }
    }

    if converged {
        polish(&problem, &mut u, &mut f, &mut chi2)?;
    }

    let values = problem.external(&u);
    let dof = (n - m).max(1) as f64;
    let chi2_reduced = chi2 / dof;
    let j = problem.jacobian(&u)?;
    let (a, _) = problem.normal(&j, &f);
    let (covariance, stderr) = match a.clone().try_inverse().filter(|inv| {
        inv.iter().all(|v| v.is_finite()) && inv.diagonal().iter().all(|d| *d >= 0.0)
    }) {
        Some(inv) => {
            let scale: Vec<f64> = params.iter().zip(&u).map(|(p, &u)| p.jacobian(u)).collect();
            let cov: Vec<Vec<f64>> = (0..m)
                .map(|r| {
                    (0..m)
                        .map(|c| scale[r] * scale[c] * inv[(r, c)] * chi2_reduced)
                        .collect()
                })
                .collect();
            let se = (0..m).map(|k| cov[k][k].max(0.0).sqrt()).collect();
            (cov, se)
        }
        None => {
            converged = false;
            message = "parameters not identifiable (singular curvature matrix)".into();
            (vec![vec![f64::INFINITY; m]; m], vec![f64::INFINITY; m])
        }
    };
    Ok(FitResult {
        names: params.iter().map(|p| p.name.clone()).collect(),
        values,
        stderr,
        covariance,
        chi2_reduced,
        r_squared: r_squared(data, &f),
        n_iter,
        converged,
        message,
    })
}
