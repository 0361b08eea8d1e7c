//! Exploration noise: per-axis sums of sinusoids with seeded frequencies and
//! phases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Amplitude of every sinusoid (input units).
    pub amplitude: f64,
    /// Sinusoids per input axis.
    pub count: usize,
    /// Frequency band (rad/s) from which frequencies are drawn uniformly.
    pub freq_min: f64,
    pub freq_max: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            amplitude: 1e-5,
            count: 100,
            freq_min: 0.01,
            freq_max: 0.5,
            seed: 20240917,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self, problems: &mut Vec<String>) {
        if self.count == 0 {
            problems.push("noise.count must be positive".into());
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            problems.push(format!(
                "noise.amplitude = {} must be finite and non-negative",
                self.amplitude
            ));
        }
        if !(self.freq_min > 0.0 && self.freq_max > self.freq_min && self.freq_max.is_finite()) {
            problems.push(format!(
                "noise frequency band [{}, {}] must satisfy 0 < freq_min < freq_max",
                self.freq_min, self.freq_max
            ));
        }
    }
}

/// `η_i(t) = a Σ_k sin(ω_ik t + φ_ik)`, deterministic given the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationNoise {
    amplitude: f64,
    /// per axis: (ω, φ)
    terms: Vec<Vec<(f64, f64)>>,
}

impl ExplorationNoise {
    pub fn new(spec: &NoiseSpec, axes: usize) -> Result<Self> {
        let mut problems = Vec::new();
        spec.validate(&mut problems);
        if axes == 0 {
            problems.push("exploration noise needs at least one axis".into());
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let terms = (0..axes)
            .map(|_| {
                let mut axis: Vec<(f64, f64)> = Vec::with_capacity(spec.count);
                while axis.len() < spec.count {
                    let w = rng.random_range(spec.freq_min..spec.freq_max);
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    if axis.iter().all(|&(u, _)| u != w) {
                        axis.push((w, phase));
                    }
                }
                axis
            })
            .collect();
        Ok(ExplorationNoise {
            amplitude: spec.amplitude,
            terms,
        })
    }

    pub fn axes(&self) -> usize {
        self.terms.len()
    }

    /// Bound on `‖η‖∞` from the triangle inequality.
    pub fn sup_bound(&self) -> f64 {
        self.amplitude * self.terms.first().map_or(0, Vec::len) as f64
    }

    pub fn frequencies(&self, axis: usize) -> impl Iterator<Item = f64> + '_ {
        self.terms[axis].iter().map(|&(w, _)| w)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, axis) in out.iter_mut().zip(&self.terms) {
            *o = self.amplitude * axis.iter().map(|&(w, ph)| (w * t + ph).sin()).sum::<f64>();
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.axes()];
        self.eval_into(t, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spec_is_rejected() {
        let spec = NoiseSpec {
            count: 0,
            ..NoiseSpec::default()
        };
        assert!(matches!(ExplorationNoise::new(&spec, 3), Err(Error::Config(_))));
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let spec = NoiseSpec::default();
        let a = ExplorationNoise::new(&spec, 3).unwrap();
        let b = ExplorationNoise::new(&spec, 3).unwrap();
        for k in 0..200 {
            let t = k as f64 * 3.7;
            assert_eq!(a.eval(t), b.eval(t));
        }
        let other = ExplorationNoise::new(&NoiseSpec { seed: 1, ..spec }, 3).unwrap();
        assert_ne!(a.eval(1.0), other.eval(1.0));
    }

    #[test]
    fn noise_is_bounded_with_distinct_frequencies() {
        let spec = NoiseSpec {
            amplitude: 0.3,
            freq_min: 1e-4,
            freq_max: 1.0,
            ..NoiseSpec::default()
        };
        let noise = ExplorationNoise::new(&spec, 3).unwrap();
        assert_close!(noise.sup_bound(), 30.0, 1e-12);
        for axis in 0..3 {
            let mut w: Vec<f64> = noise.frequencies(axis).collect();
            w.sort_by(f64::total_cmp);
            w.dedup();
            assert_eq!(w.len(), 100);
            assert!(w.iter().all(|&x| (1e-4..1.0).contains(&x)));
        }
        for k in 0..5000 {
            let eta = noise.eval(k as f64 * 0.61);
            assert!(eta.iter().all(|x| x.abs() <= noise.sup_bound()));
        }
    }
}
