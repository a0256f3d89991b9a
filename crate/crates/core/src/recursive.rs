//! Recursive estimation of `u` from noisy samples `xi_n ~ g(n h)`:
//!
//! ```text
//! alpha v_n + sum_{j<n} (integral_{jh}^{(j+1)h} k(nh - s) ds) v_j = xi_n,   v_0 = (xi_1 - xi_0) / h
//! ```
//!
//! Each step consumes one new sample, so the estimator runs on a stream.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{DeconvError, Result};
use crate::grid::{ContourSpec, NoisyData, SampledSignal};
use crate::kernel::KernelSpec;
use crate::laplace::{transform_unchecked, TransformRule};
use crate::probe::sector_check;
use crate::quadrature::dot_reversed;

/// Sector used by [`epsilon_alpha_probe`] to certify the resolvent bound.
pub const PROBE_SECTOR_PHI: f64 = PI / 12.0;
pub const PROBE_SECTOR_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursiveConfig {
    pub alpha: f64,
    /// Sampling step `h` of the estimator.
    pub step: f64,
    /// Hölder exponent `b` of `g` and `k`, used to couple `h` to `delta`.
    pub holder_b: Option<f64>,
    pub auto_select: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursiveSelection {
    pub alpha: f64,
    pub step: f64,
    pub exponent: f64,
}

/// `h = delta^(1/b)`; `alpha = delta^(a/(d+a))` with rate `d/(d+a)` when
/// `d < a`, otherwise `alpha = delta^(1/2)` with rate `1/2`.
pub fn select_recursive_params_for(delta: f64, a: f64, d: f64, holder_b: f64) -> Result<RecursiveSelection> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(DeconvError::InvalidConfig(format!(
            "noise level must lie in (0, 1) for the parameter rule, got {delta}"
        )));
    }
    if !(holder_b > 0.0 && holder_b <= 1.0) {
        return Err(DeconvError::InvalidConfig(format!(
            "Hölder exponent b must lie in (0, 1], got {holder_b}"
        )));
    }
    if !(a > 0.0 && d > 0.0) {
        return Err(DeconvError::InvalidConfig(format!(
            "exponents must be positive, got a = {a}, d = {d}"
        )));
    }
    let step = delta.powf(1.0 / holder_b);
    let (alpha, exponent) = if d < a {
        (delta.powf(a / (d + a)), d / (d + a))
    } else {
        (delta.sqrt(), 0.5)
    };
    Ok(RecursiveSelection { alpha, step, exponent })
}

pub fn select_recursive_params(delta: f64, k: &KernelSpec, holder_b: f64) -> Result<RecursiveSelection> {
    let d = k.d_exponent().ok_or_else(|| {
        DeconvError::MissingPrior(format!(
            "kernel '{}' carries no decay exponent d; set alpha and h manually",
            k.name()
        ))
    })?;
    select_recursive_params_for(delta, k.a_exponent(), d, holder_b)
}

impl RecursiveConfig {
    pub fn manual(alpha: f64, step: f64) -> Self {
        Self {
            alpha,
            step,
            holder_b: None,
            auto_select: false,
        }
    }

    pub fn auto(delta: f64, k: &KernelSpec, holder_b: f64) -> Result<Self> {
        let sel = select_recursive_params(delta, k, holder_b)?;
        Ok(Self {
            alpha: sel.alpha,
            step: sel.step,
            holder_b: Some(holder_b),
            auto_select: true,
        })
    }
}

/// Estimates `v_0 .. v_{n-1}` together with the cached lag weights
/// `w_l = integral_{(l-1)h}^{lh} k(r) dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    step: f64,
    v_history: Vec<f64>,
    // lag_weights[l - 1] = w_l
    lag_weights: Vec<f64>,
}

impl EstimatorState {
    /// `v_0 = (xi_1 - xi_0) / h`, the one sample of look-ahead the
    /// recursion takes at its start.
    pub fn bootstrap(xi0: f64, xi1: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(DeconvError::InvalidConfig(format!("step must be positive, got {step}")));
        }
        Ok(Self {
            step,
            v_history: vec![(xi1 - xi0) / step],
            lag_weights: Vec::new(),
        })
    }

    pub fn step_index(&self) -> usize {
        self.v_history.len()
    }

    pub fn v_history(&self) -> &[f64] {
        &self.v_history
    }

    pub fn weight_row_cache(&self) -> &[f64] {
        &self.lag_weights
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

/// `w_l = integral_{(l-1)h}^{lh} k(r) dr`; exact for the singular term.
pub fn lag_weight(k: &KernelSpec, lag: usize, step: f64) -> f64 {
    let lo = (lag - 1) as f64 * step;
    k.cell_integral(lo, lo + step)
}

/// Consumes `xi_n` and returns the state advanced by one together with `v_n`.
pub fn recursive_step(
    mut state: EstimatorState,
    xi_n: f64,
    k: &KernelSpec,
    cfg: &RecursiveConfig,
) -> Result<(EstimatorState, f64)> {
    if !(cfg.alpha > 0.0) {
        return Err(DeconvError::DivisionByZero);
    }
    let n = state.v_history.len();
    while state.lag_weights.len() < n {
        let lag = state.lag_weights.len() + 1;
        let w = lag_weight(k, lag, state.step);
        if !w.is_finite() {
            return Err(DeconvError::InvalidKernel(format!(
                "non-finite cell integral at lag {lag}"
            )));
        }
        state.lag_weights.push(w);
    }
    let memory = dot_reversed(&state.lag_weights[..n], &state.v_history);
    let v = (xi_n - memory) / cfg.alpha;
    state.v_history.push(v);
    Ok((state, v))
}

/// Estimator samples `xi_n = g_delta(n h)` drawn from the data grid, with the
/// grid stride matching `h`.
pub fn sample_stride(data_step: f64, step: f64) -> Result<usize> {
    if data_step > step * (1.0 + 1e-9) {
        return Err(DeconvError::GridTooCoarse(format!(
            "data step {data_step:e} is coarser than the estimator step {step:e}"
        )));
    }
    let stride = (step / data_step).round() as usize;
    if stride == 0 || (stride as f64 * data_step - step).abs() > 0.25 * step {
        return Err(DeconvError::GridTooCoarse(format!(
            "estimator step {step:e} is not within 25% of a multiple of {data_step:e}"
        )));
    }
    Ok(stride)
}

/// Runs the recursion over the whole record and returns the piecewise-constant
/// `v_delta(t) = v_j` for `jh <= t < (j+1)h` on the data grid.
pub fn recursive_run(data: &NoisyData, k: &KernelSpec, cfg: &RecursiveConfig) -> Result<SampledSignal> {
    if !(cfg.alpha > 0.0) {
        return Err(DeconvError::DivisionByZero);
    }
    let grid = *data.grid();
    let stride = sample_stride(grid.step(), cfg.step)?;
    let n_samples = grid.n_steps() / stride + 1;
    if n_samples < 2 {
        return Err(DeconvError::StepTooLarge {
            step: cfg.step,
            horizon: grid.horizon(),
        });
    }
    let h = stride as f64 * grid.step();
    let xi: Vec<f64> = (0..n_samples).map(|i| data.noisy.values()[i * stride]).collect();
    let v = run_samples(&xi, k, cfg.alpha, h)?;
    let values = (0..grid.len()).map(|j| v[(j / stride).min(v.len() - 1)]).collect();
    SampledSignal::new(grid, values)
}

/// The recursion on a sample vector; returns `v_0 .. v_{len-1}`.
pub fn run_samples(xi: &[f64], k: &KernelSpec, alpha: f64, step: f64) -> Result<Vec<f64>> {
    if xi.len() < 2 {
        return Err(DeconvError::InvalidSignal("need at least two samples".into()));
    }
    let cfg = RecursiveConfig::manual(alpha, step);
    let mut state = EstimatorState::bootstrap(xi[0], xi[1], step)?;
    for &x in &xi[1..] {
        state = recursive_step(state, x, k, &cfg)?.0;
    }
    Ok(state.v_history)
}

/// Empirical moduli of continuity over windows of width `h`, used to
/// sanity-check the Hölder prior `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityDiagnostics {
    /// `max |g(t) - g(s)|` over `|t - s| <= h`.
    pub gamma_g: f64,
    /// `max_l |w_l - w_{l+1}| / h`, the variation of the kernel's cell
    /// averages between neighbouring windows.
    pub gamma_k: f64,
    /// `log2(gamma_g(2h) / gamma_g(h))`, an estimate of `b` for `g`.
    pub holder_estimate: Option<f64>,
}

pub fn continuity_diagnostics(g: &SampledSignal, k: &KernelSpec, step: f64) -> Result<ContinuityDiagnostics> {
    let stride = sample_stride(g.grid().step(), step)?;
    let h = stride as f64 * g.grid().step();
    let gamma_g = window_oscillation(g.values(), stride);
    let wide = window_oscillation(g.values(), 2 * stride);
    let n_lags = (g.grid().horizon() / h).floor() as usize;
    let weights: Vec<f64> = (1..=n_lags.max(2)).map(|l| lag_weight(k, l, h)).collect();
    let gamma_k = weights
        .windows(2)
        .map(|w| (w[0] - w[1]).abs() / h)
        .fold(0.0, f64::max);
    let holder_estimate = (gamma_g > 0.0 && wide > 0.0).then(|| (wide / gamma_g).log2());
    Ok(ContinuityDiagnostics {
        gamma_g,
        gamma_k,
        holder_estimate,
    })
}

/// Largest `max - min` over windows of `width + 1` consecutive samples.
fn window_oscillation(values: &[f64], width: usize) -> f64 {
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best: f64 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        while maxq.back().is_some_and(|&j| values[j] <= v) {
            maxq.pop_back();
        }
        maxq.push_back(i);
        while minq.back().is_some_and(|&j| values[j] >= v) {
            minq.pop_back();
        }
        minq.push_back(i);
        let start = i.saturating_sub(width);
        while maxq.front().is_some_and(|&j| j < start) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j < start) {
            minq.pop_front();
        }
        best = best.max(values[maxq[0]] - values[minq[0]]);
    }
    best
}

/// Regularisation bias `eps(alpha) = ||alpha (alpha + k)^-1 u||` in the
/// weight `exp(-2 sigma t)`, by Parseval on the truncated contour:
/// `eps^2 = (1 / 2 pi) integral |alpha / (alpha + K)|^2 |U|^2 dmu`.
pub fn epsilon_alpha_probe(
    k: &KernelSpec,
    u_true: &SampledSignal,
    alphas: &[f64],
    contour: &ContourSpec,
) -> Result<Vec<f64>> {
    let report = sector_check(k, contour, PROBE_SECTOR_PHI, PROBE_SECTOR_RADIUS)?;
    if !report.passes {
        return Err(DeconvError::AssumptionViolated(format!(
            "K({}+{}i) enters the sector around the negative axis",
            contour.sigma, report.closest_mu
        )));
    }
    let nodes: Vec<(f64, Complex64, f64)> = (0..contour.n_quad)
        .map(|i| {
            let lambda = contour.lambda(i);
            let kv = k.laplace(lambda)?;
            let u = transform_unchecked(u_true, lambda, TransformRule::PiecewiseLinear);
            Ok((contour.weight(i), kv, u.norm_sqr()))
        })
        .collect::<Result<_>>()?;
    alphas
        .iter()
        .map(|&alpha| {
            if !(alpha > 0.0) {
                return Err(DeconvError::DivisionByZero);
            }
            let total: f64 = nodes
                .iter()
                .map(|(w, kv, u2)| w * (alpha / (*kv + alpha).norm()).powi(2) * u2)
                .sum();
            Ok((total / (2.0 * PI)).sqrt())
        })
        .collect()
}
