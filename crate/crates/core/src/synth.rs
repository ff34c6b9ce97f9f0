//! Poisson photon-count histograms drawn from model curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::photostats::apply_irf;
use crate::qdyn::TimeGrid;
use crate::trace::{Meta, TimeTrace};

/// Means below this are sampled exactly by inversion, above by a rounded
/// normal approximation.
pub const POISSON_NORMAL_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub seed: u64,
    /// Expected counts per bin added after scaling.
    pub background_rate: f64,
    /// Counts per bin for model value 1.
    pub scale: f64,
    /// Gaussian detector jitter (ns); 0 disables.
    pub irf_sigma: f64,
}

impl NoiseSpec {
    pub fn new(seed: u64, background_rate: f64, scale: f64, irf_sigma: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("scale", format!("must be > 0, got {scale}")));
        }
        if !(background_rate >= 0.0 && background_rate.is_finite()) {
            return Err(invalid("background_rate", format!("must be ≥ 0, got {background_rate}")));
        }
        if !(irf_sigma >= 0.0) {
            return Err(invalid("irf_sigma_ns", "must be ≥ 0"));
        }
        Ok(Self {
            seed,
            background_rate,
            scale,
            irf_sigma,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub grid: TimeGrid,
    pub counts: Vec<u64>,
    pub meta: Meta,
}

impl Histogram {
    pub fn to_trace(&self) -> TimeTrace {
        let values = self.counts.iter().map(|&c| c as f64).collect();
        let mut t = TimeTrace::new(self.grid, values).expect("histogram matches its grid");
        t.meta = self.meta.clone();
        t
    }
}

/// Generator for bin `bin`: seeded by `seed`, one ChaCha stream per bin.
pub fn bin_rng(seed: u64, bin: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(bin as u64);
    rng
}

pub fn poisson_sample<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < POISSON_NORMAL_THRESHOLD {
        let u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    } else {
        let z: f64 = rng.sample(StandardNormal);
        (mean + mean.sqrt() * z + 0.5).floor().max(0.0) as u64
    }
}

/// Histogram with bin means `scale·apply_irf(model, irf_sigma) + background_rate`.
pub fn synth_counts(model: &TimeTrace, noise: &NoiseSpec) -> Result<Histogram> {
    if let Some(v) = model.values.iter().find(|v| !(**v >= 0.0)) {
        return Err(invalid("model", format!("model values must be ≥ 0, found {v}")));
    }
    let blurred = apply_irf(model, noise.irf_sigma)?;
    let counts = blurred
        .values
        .par_iter()
        .enumerate()
        .map(|(k, v)| {
            let mean = noise.scale * v.max(0.0) + noise.background_rate;
            poisson_sample(&mut bin_rng(noise.seed, k), mean)
        })
        .collect();
    let mut meta = model.meta.clone();
    meta.insert("seed".into(), noise.seed.to_string());
    meta.insert("scale".into(), noise.scale.to_string());
    meta.insert("background_rate".into(), noise.background_rate.to_string());
    meta.insert("irf_sigma_ns".into(), noise.irf_sigma.to_string());
    Ok(Histogram {
        grid: model.grid,
        counts,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, v: f64) -> TimeTrace {
        TimeTrace::new(TimeGrid::new(0.0, 10.0, n).unwrap(), vec![v; n]).unwrap()
    }

    #[test]
    fn zero_model_gives_zero_counts() {
        let h = synth_counts(&flat(100, 0.0), &NoiseSpec::new(1, 0.0, 1e4, 0.0).unwrap()).unwrap();
        assert!(h.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn same_seed_same_histogram() {
        let n = NoiseSpec::new(42, 3.0, 50.0, 0.1).unwrap();
        let a = synth_counts(&flat(300, 0.5), &n).unwrap();
        let b = synth_counts(&flat(300, 0.5), &n).unwrap();
        assert_eq!(a.counts, b.counts);
        let c = synth_counts(&flat(300, 0.5), &NoiseSpec { seed: 43, ..n }).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn negative_model_rejected() {
        let mut t = flat(10, 1.0);
        t.values[3] = -0.1;
        assert!(synth_counts(&t, &NoiseSpec::new(0, 0.0, 1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn large_flat_sample_mean() {
        let n = 100_000;
        for mean in [3.0, 40.0] {
            let h = synth_counts(&flat(n, 1.0), &NoiseSpec::new(7, 0.0, mean, 0.0).unwrap()).unwrap();
            let m = h.counts.iter().sum::<u64>() as f64 / n as f64;
            assert!((m - mean).abs() < 3.0 * (mean / n as f64).sqrt(), "{m} vs {mean}");
        }
    }
}
