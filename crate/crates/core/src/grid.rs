//! Uniform time grids and the signals sampled on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DeconvError, Result};

/// A uniform grid `t_j = j * step`, `j = 0..=n_steps`, on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    horizon: f64,
    n_steps: usize,
    step: f64,
}

impl Grid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(DeconvError::InvalidGrid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(DeconvError::InvalidGrid("n_steps must be positive".into()));
        }
        Ok(Self {
            horizon,
            n_steps,
            step: horizon / n_steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.horizon
        } else {
            j as f64 * self.step
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }

    /// Index of the last node with `t_j <= t`.
    pub fn floor_index(&self, t: f64) -> usize {
        let j = (t / self.step + 1e-9).floor();
        (j.max(0.0) as usize).min(self.n_steps)
    }

    /// Grid with `factor` times as many steps on the same horizon.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.n_steps * factor)
    }

    /// Grid containing every `stride`-th node of this one.
    pub fn coarsened(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.n_steps.is_multiple_of(stride) {
            return Err(DeconvError::InvalidGrid(format!(
                "stride {stride} does not divide n_steps {}",
                self.n_steps
            )));
        }
        Self::new(self.horizon, self.n_steps / stride)
    }
}

/// Real values on a [`Grid`].
///
/// Solvers with look-ahead (the forward difference) cannot produce
/// trustworthy values on the tail of the horizon; such nodes stay finite but
/// lie beyond `valid_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: Grid,
    values: Vec<f64>,
    valid_len: usize,
}

impl SampledSignal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(DeconvError::Dimension(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(DeconvError::InvalidSignal(format!(
                "non-finite value {} at node {j}",
                values[j]
            )));
        }
        let valid_len = values.len();
        Ok(Self {
            grid,
            values,
            valid_len,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            valid_len: grid.len(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of leading nodes carrying trustworthy values.
    pub fn valid_len(&self) -> usize {
        self.valid_len
    }

    /// Restricts the valid prefix; never extends it.
    pub fn with_valid_len(mut self, valid_len: usize) -> Self {
        self.valid_len = self.valid_len.min(valid_len);
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Ok(Self::new(self.grid, values)?.with_valid_len(self.valid_len))
    }

    /// Like [`SampledSignal::map`], with the node index.
    pub fn map_indexed(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = self.values.iter().enumerate().map(|(j, &v)| f(j, v)).collect();
        Ok(Self::new(self.grid, values)?.with_valid_len(self.valid_len))
    }

    pub fn ensure_same_grid(&self, other: &SampledSignal) -> Result<()> {
        if self.grid != other.grid {
            return Err(DeconvError::Dimension(format!(
                "grid mismatch: (T={}, n={}) vs (T={}, n={})",
                self.grid.horizon(),
                self.grid.n_steps(),
                other.grid.horizon(),
                other.grid.n_steps()
            )));
        }
        Ok(())
    }

    /// Every `stride`-th sample.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.coarsened(stride)?;
        let values = self.values.iter().step_by(stride).copied().collect();
        let valid = self.valid_len.div_ceil(stride);
        Ok(Self::new(grid, values)?.with_valid_len(valid))
    }

    /// Sup-norm distance on the node range `range` (clipped to both valid
    /// prefixes).
    pub fn sup_distance(&self, other: &SampledSignal, range: std::ops::Range<usize>) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let end = range.end.min(self.valid_len).min(other.valid_len);
        Ok(self.values[range.start.min(end)..end]
            .iter()
            .zip(&other.values[range.start.min(end)..end])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Grid L2 distance (trapezoid rule) on the node range `range`.
    pub fn l2_distance(&self, other: &SampledSignal, range: std::ops::Range<usize>) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let end = range.end.min(self.valid_len).min(other.valid_len);
        let start = range.start.min(end);
        if end - start < 2 {
            return Ok(0.0);
        }
        let sq: Vec<f64> = (start..end)
            .map(|j| (self.values[j] - other.values[j]).powi(2))
            .collect();
        let inner: f64 = sq[1..sq.len() - 1].iter().sum();
        let total = inner + 0.5 * (sq[0] + sq[sq.len() - 1]);
        Ok((total * self.grid.step()).sqrt())
    }
}

/// A clean signal, its noisy observation, and the sup-norm noise bound.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyData {
    pub clean: SampledSignal,
    pub noisy: SampledSignal,
    pub delta: f64,
    pub seed: u64,
}

impl NoisyData {
    /// Adds i.i.d. uniform noise on `[-delta, delta]` drawn from a ChaCha8
    /// stream seeded with `seed`. The largest-magnitude sample is pushed to
    /// exactly `±delta`, so the bound is attained.
    pub fn with_uniform_noise(clean: SampledSignal, delta: f64, seed: u64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(DeconvError::InvalidConfig(format!(
                "noise level must be finite and non-negative, got {delta}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise: Vec<f64> = (0..clean.values().len())
            .map(|_| if delta > 0.0 { rng.gen_range(-delta..=delta) } else { 0.0 })
            .collect();
        if delta > 0.0 {
            let (idx, _) = noise
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (i, w)| if w.abs() > acc.1 { (i, w.abs()) } else { acc });
            noise[idx] = delta.copysign(noise[idx]);
        }
        let values = clean
            .values()
            .iter()
            .zip(&noise)
            .map(|(&g, &w)| {
                // keep |noisy - clean| <= delta after rounding of the sum
                let mut v = g + w;
                while (v - g).abs() > delta {
                    v = if v > g { v.next_down() } else { v.next_up() };
                }
                v
            })
            .collect();
        let noisy = SampledSignal::new(*clean.grid(), values)?;
        Ok(Self {
            clean,
            noisy,
            delta,
            seed,
        })
    }

    /// Wraps an externally measured signal with a declared noise bound.
    pub fn from_measurement(noisy: SampledSignal, delta: f64) -> Self {
        Self {
            clean: noisy.clone(),
            noisy,
            delta,
            seed: 0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.noisy.grid()
    }

    pub fn max_noise(&self) -> f64 {
        self.clean
            .values()
            .iter()
            .zip(self.noisy.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The vertical contour `Re(lambda) = sigma`, truncated to `|mu| <= mu_max`
/// and sampled at `n_quad` equispaced nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub sigma: f64,
    pub mu_max: f64,
    pub n_quad: usize,
}

impl ContourSpec {
    pub fn new(sigma: f64, mu_max: f64, n_quad: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(DeconvError::InvalidContour(format!("sigma must be > 0, got {sigma}")));
        }
        if !(mu_max > 0.0 && mu_max.is_finite()) {
            return Err(DeconvError::InvalidContour(format!("mu_max must be > 0, got {mu_max}")));
        }
        if n_quad < 2 {
            return Err(DeconvError::InvalidContour("n_quad must be at least 2".into()));
        }
        Ok(Self {
            sigma,
            mu_max,
            n_quad,
        })
    }

    /// `sigma = 1/T` and a node spacing of at most `pi / (4T)` in `mu`; the
    /// node count is odd so `mu = 0` is a node and the set is symmetric.
    pub fn for_horizon(horizon: f64, mu_max: f64) -> Result<Self> {
        let spacing = std::f64::consts::PI / (4.0 * horizon);
        let mut n = (2.0 * mu_max / spacing).ceil() as usize + 1;
        if n.is_multiple_of(2) {
            n += 1;
        }
        Self::new(1.0 / horizon, mu_max, n.max(3))
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.mu_max / (self.n_quad - 1) as f64
    }

    /// `mu_k`, symmetric about zero.
    pub fn mu(&self, k: usize) -> f64 {
        let half = (self.n_quad - 1) as f64 / 2.0;
        (k as f64 - half) * self.spacing()
    }

    /// Trapezoid weight of node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.n_quad {
            0.5 * self.spacing()
        } else {
            self.spacing()
        }
    }

    pub fn lambda(&self, k: usize) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.sigma, self.mu(k))
    }
}
