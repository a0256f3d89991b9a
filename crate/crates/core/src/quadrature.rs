//! Lower-triangular convolution quadrature on a uniform grid.
//!
//! Every rule used here has the form
//!
//! ```text
//! (k * u)(t_j) ~ first[j] * u_0 + sum_{m=1..j} interior[j - m] * u_m,   j >= 1
//! ```
//!
//! so the forward operator, its second-kind inverse and the fractional
//! integral all share one weight table. Regular kernels use the composite
//! trapezoid rule; the weakly singular term `scale * r^(-e)` is integrated
//! exactly against the piecewise-linear interpolant of `u` (product
//! integration).

use statrs::function::gamma::gamma;

use crate::error::{DeconvError, Result};
use crate::grid::{Grid, SampledSignal};
use crate::kernel::{gauss8, KernelSpec};

#[derive(Debug, Clone)]
pub(crate) struct LagWeights {
    first: Vec<f64>,
    interior: Vec<f64>,
    // interior reversed, so the history sum is a contiguous dot product
    reversed: Vec<f64>,
}

impl LagWeights {
    fn from_parts(first: Vec<f64>, interior: Vec<f64>) -> Self {
        let reversed = interior.iter().rev().copied().collect();
        Self {
            first,
            interior,
            reversed,
        }
    }

    pub(crate) fn n_steps(&self) -> usize {
        self.interior.len() - 1
    }

    /// Composite trapezoid weights for kernel samples `k(l h)`, `l = 0..=n`.
    pub(crate) fn trapezoid(lag_values: &[f64], h: f64) -> Self {
        let n = lag_values.len() - 1;
        let mut first = vec![0.0; n + 1];
        let mut interior = vec![0.0; n + 1];
        interior[0] = 0.5 * h * lag_values[0];
        for l in 1..=n {
            interior[l] = h * lag_values[l];
            first[l] = 0.5 * h * lag_values[l];
        }
        Self::from_parts(first, interior)
    }

    /// Exact weights of `scale * r^(-exponent)` against piecewise-linear `u`.
    pub(crate) fn product(exponent: f64, scale: f64, n: usize, h: f64) -> Self {
        let hb = h.powf(1.0 - exponent);
        let (left, right): (Vec<f64>, Vec<f64>) = (1..=n + 1)
            .map(|l| cell_moments(exponent, l))
            .map(|(a, b)| (scale * hb * a, scale * hb * b))
            .unzip();
        // left[l-1] = A_l weights the cell's left node, right[l-1] = B_l its right node
        let mut first = vec![0.0; n + 1];
        let mut interior = vec![0.0; n + 1];
        interior[0] = right[0];
        for l in 1..=n {
            interior[l] = left[l - 1] + right[l];
            first[l] = left[l - 1];
        }
        Self::from_parts(first, interior)
    }

    pub(crate) fn add(mut self, other: &LagWeights) -> Self {
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.interior.iter_mut().zip(&other.interior) {
            *a += b;
        }
        Self::from_parts(self.first, self.interior)
    }

    /// Weights for `k` on `n` steps of size `h`.
    pub(crate) fn for_kernel(k: &KernelSpec, n: usize, h: f64) -> Result<Self> {
        let mut lag_values = Vec::with_capacity(n + 1);
        for l in 0..=n {
            let t = l as f64 * h;
            let v = k.evaluate_regular(t);
            if !v.is_finite() {
                return Err(DeconvError::InvalidKernel(format!(
                    "kernel '{}' is not finite at t = {t}",
                    k.name()
                )));
            }
            lag_values.push(v);
        }
        let regular = Self::trapezoid(&lag_values, h);
        Ok(match k.singular() {
            Some(s) => Self::product(s.exponent, s.scale, n, h).add(&regular),
            None => regular,
        })
    }

    /// Weights of the Riemann–Liouville integral of order `order`.
    pub(crate) fn fractional(order: f64, n: usize, h: f64) -> Self {
        Self::product(1.0 - order, 1.0 / gamma(order), n, h)
    }

    pub(crate) fn diagonal(&self) -> f64 {
        self.interior[0]
    }

    /// Quadrature value at node `j`.
    pub(crate) fn apply_at(&self, u: &[f64], j: usize) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let n = self.n_steps();
        self.first[j] * u[0] + dot(&self.reversed[n - j + 1..=n], &u[1..=j])
    }

    pub(crate) fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len()).map(|j| self.apply_at(u, j)).collect()
    }

    /// Solves `w + K w = f` by forward substitution.
    pub(crate) fn solve_second_kind(&self, f: &[f64]) -> Result<Vec<f64>> {
        let diag = 1.0 + self.diagonal();
        if !(diag > 0.0) {
            return Err(DeconvError::StepSize { diagonal: diag });
        }
        let n = self.n_steps();
        let mut w = Vec::with_capacity(f.len());
        w.push(f[0]);
        for j in 1..f.len() {
            let history = self.first[j] * w[0] + dot(&self.reversed[n - j + 1..n], &w[1..j]);
            w.push((f[j] - history) / diag);
        }
        Ok(w)
    }
}

/// `(integral_0^1 (L-1+x)^(-e) x dx, integral_0^1 (L-1+x)^(-e) (1-x) dx)`.
fn cell_moments(e: f64, l: usize) -> (f64, f64) {
    let beta = 1.0 - e;
    match l {
        1 => {
            let a = 1.0 / (2.0 - e);
            (a, 1.0 / beta - a)
        }
        2 => {
            let p1 = (2f64.powf(beta) - 1.0) / beta;
            let p2 = (2f64.powf(beta + 1.0) - 1.0) / (beta + 1.0);
            (p2 - p1, 2.0 * p1 - p2)
        }
        _ => {
            let shift = (l - 1) as f64;
            let left = gauss8(&|x: f64| (shift + x).powf(-e) * x, 0.0, 1.0);
            let right = gauss8(&|x: f64| (shift + x).powf(-e) * (1.0 - x), 0.0, 1.0);
            (left, right)
        }
    }
}

/// Dot product with a fixed, four-way interleaved summation order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `sum_i a[i] * b[len - 1 - i]`, same summation order as [`dot`].
pub(crate) fn dot_reversed(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[n - 1 - i];
        acc[1] += a[i + 1] * b[n - 2 - i];
        acc[2] += a[i + 2] * b[n - 3 - i];
        acc[3] += a[i + 3] * b[n - 4 - i];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[n - 1 - i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `g(t_j) = integral_0^{t_j} k(t_j - s) u(s) ds` on the grid of `u`.
pub fn convolve(k: &KernelSpec, u: &SampledSignal) -> Result<SampledSignal> {
    let grid = *u.grid();
    let weights = LagWeights::for_kernel(k, grid.n_steps(), grid.step())?;
    Ok(SampledSignal::new(grid, weights.apply(u.values()))?.with_valid_len(u.valid_len()))
}

/// Convolution evaluated only at every `stride`-th node, returned on the
/// coarsened grid. Agrees exactly with restricting [`convolve`].
pub(crate) fn convolve_restricted(k: &KernelSpec, u: &SampledSignal, stride: usize) -> Result<SampledSignal> {
    let grid = *u.grid();
    let coarse: Grid = grid.coarsened(stride)?;
    let weights = LagWeights::for_kernel(k, grid.n_steps(), grid.step())?;
    let values = (0..coarse.len())
        .map(|i| weights.apply_at(u.values(), i * stride))
        .collect();
    SampledSignal::new(coarse, values)
}

/// Riemann–Liouville integral of order `order` in `(0, 1)` by product
/// integration of the piecewise-linear interpolant.
pub(crate) fn fractional_integral(f: &SampledSignal, order: f64) -> Result<SampledSignal> {
    if !(order > 0.0 && order < 1.0) {
        return Err(DeconvError::InvalidExponent(order));
    }
    let grid = *f.grid();
    let weights = LagWeights::fractional(order, grid.n_steps(), grid.step());
    Ok(SampledSignal::new(grid, weights.apply(f.values()))?.with_valid_len(f.valid_len()))
}

/// Sup and grid-L2 norms of a residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub sup: f64,
    pub l2: f64,
}

/// `||k * u_hat - g||` in the sup and grid-L2 norms, over the nodes valid in
/// both signals.
pub fn residual_norms(k: &KernelSpec, u_hat: &SampledSignal, g: &SampledSignal) -> Result<ResidualNorms> {
    u_hat.ensure_same_grid(g)?;
    let forward = convolve(k, u_hat)?;
    let range = 0..g.grid().len();
    Ok(ResidualNorms {
        sup: forward.sup_distance(g, range.clone())?,
        l2: forward.l2_distance(g, range)?,
    })
}
