//! Sampled real series: uniform time traces and general x/y curves.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::qdyn::TimeGrid;

pub type Meta = BTreeMap<String, String>;

/// Real series on a uniform time grid (ns), with free-form annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub meta: Meta,
}

impl TimeTrace {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(invalid(
                "values",
                format!("length {} != grid points {}", values.len(), grid.n_points()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "all samples must be finite"));
        }
        Ok(Self {
            grid,
            values,
            meta: Meta::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let dt = self.grid.dt();
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        dt * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// Mirror a one-sided trace starting at τ = 0 onto `[−T, T]`.
    pub fn even_reflection(&self) -> Result<Self> {
        if self.grid.t_start() != 0.0 {
            return Err(invalid("grid", "even reflection needs a grid starting at 0"));
        }
        let n = self.values.len();
        let mut values = Vec::with_capacity(2 * n - 1);
        values.extend(self.values[1..].iter().rev());
        values.extend_from_slice(&self.values);
        let grid = TimeGrid::new(-self.grid.t_end(), self.grid.t_end(), 2 * n - 1)?;
        Ok(Self {
            grid,
            values,
            meta: self.meta.clone(),
        })
    }

    /// Sub-trace restricted to `[t0, t1]` (inclusive on grid points).
    pub fn window(&self, t0: f64, t1: f64) -> Result<Self> {
        let dt = self.grid.dt();
        let eps = 1e-9 * dt;
        let idx: Vec<usize> = (0..self.len())
            .filter(|&k| {
                let t = self.grid.time(k);
                t >= t0 - eps && t <= t1 + eps
            })
            .collect();
        if idx.len() < 2 {
            return Err(invalid("window", "fewer than two samples inside window"));
        }
        let first = idx[0];
        let last = *idx.last().unwrap();
        let grid = TimeGrid::new(self.grid.time(first), self.grid.time(last), idx.len())?;
        Ok(Self {
            grid,
            values: self.values[first..=last].to_vec(),
            meta: self.meta.clone(),
        })
    }
}

/// Real curve on an arbitrary, strictly increasing abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub meta: Meta,
}

impl Curve {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid("curve", "x and y lengths differ"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("curve", "abscissa must be strictly increasing"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(invalid("curve", "all values must be finite"));
        }
        Ok(Self {
            x,
            y,
            meta: Meta::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn from_trace(trace: &TimeTrace) -> Self {
        Self {
            x: trace.times(),
            y: trace.values.clone(),
            meta: trace.meta.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| {
                if k + 1 == n {
                    b
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_is_even() {
        let g = TimeGrid::new(0.0, 2.0, 3).unwrap();
        let t = TimeTrace::new(g, vec![0.0, 1.0, 2.0]).unwrap();
        let r = t.even_reflection().unwrap();
        assert_eq!(r.values, vec![2.0, 1.0, 0.0, 1.0, 2.0]);
        assert_eq!(r.grid.t_start(), -2.0);
    }

    #[test]
    fn rejects_length_mismatch() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        assert!(TimeTrace::new(g, vec![0.0; 2]).is_err());
    }

    #[test]
    fn window_selects_inclusive_range() {
        let g = TimeGrid::new(0.0, 10.0, 11).unwrap();
        let t = TimeTrace::new(g, (0..11).map(f64::from).collect()).unwrap();
        let w = t.window(2.0, 5.0).unwrap();
        assert_eq!(w.values, vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w.grid.t_start(), 2.0);
    }
}
