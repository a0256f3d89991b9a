//! Deconvolution by splitting `k * u = A (I + S) u`: a stable approximate
//! inverse of `A` (differentiation, or fractional differentiation for Abel
//! kernels) followed by a well-posed second-kind Volterra solve.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{DeconvError, Result};
use crate::grid::{Grid, NoisyData, SampledSignal};
use crate::kernel::KernelSpec;
use crate::quadrature::{self, LagWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolterraMethod {
    /// Forward substitution on the lower-triangular system.
    #[default]
    Direct,
    /// Fixed-point iteration `w <- f - S w`.
    Picard,
}

/// Order of the two stable steps on the Abel path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbelOrder {
    /// Fractional integral of the data, then the forward difference. The
    /// integrated data vanishes at `t = 0`, so no boundary term appears.
    #[default]
    IntegrateFirst,
    /// Forward difference of the data, then the fractional integral. Loses
    /// the `g(0+)` contribution concentrated in the first difference cell.
    DifferenceFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    /// A-priori bound `m2` on the second derivative of the differentiated
    /// signal.
    pub m2_bound: f64,
    /// Differentiation step; `None` selects `2 sqrt(delta / m2)`.
    pub h_diff: Option<f64>,
    /// Abel exponent, cross-checked against the kernel when given.
    pub gamma: Option<f64>,
    pub volterra_tol: f64,
    pub volterra_max_iter: usize,
    pub volterra_method: VolterraMethod,
    pub abel_order: AbelOrder,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            m2_bound: 1.0,
            h_diff: None,
            gamma: None,
            volterra_tol: 1e-8,
            volterra_max_iter: 500,
            volterra_method: VolterraMethod::Direct,
            abel_order: AbelOrder::IntegrateFirst,
        }
    }
}

impl SplitConfig {
    pub fn with_m2(m2_bound: f64) -> Self {
        Self {
            m2_bound,
            ..Self::default()
        }
    }
}

/// `2 sqrt(delta / m2)`, the step balancing truncation and noise.
pub fn optimal_difference_step(delta: f64, m2: f64) -> f64 {
    2.0 * (delta / m2).sqrt()
}

/// Number of grid steps per differentiation step, after rounding `h` to the
/// nearest grid multiple.
pub fn difference_stride(h: f64, grid: &Grid) -> Result<usize> {
    if h >= grid.horizon() {
        return Err(DeconvError::StepTooLarge {
            step: h,
            horizon: grid.horizon(),
        });
    }
    let stride = (h / grid.step()).round() as usize;
    let rounded = stride as f64 * grid.step();
    if stride == 0 || (rounded - h).abs() > 0.25 * h {
        return Err(DeconvError::GridTooCoarse(format!(
            "step {h:e} is not within 25% of a multiple of the grid step {:e}",
            grid.step()
        )));
    }
    if stride >= grid.n_steps() {
        return Err(DeconvError::StepTooLarge {
            step: rounded,
            horizon: grid.horizon(),
        });
    }
    Ok(stride)
}

/// `(g(t + p h) - g(t)) / (p h)` on the first `n + 1 - p` nodes; the tail
/// repeats the last valid value and is marked invalid.
pub fn forward_difference(g: &SampledSignal, stride: usize) -> Result<SampledSignal> {
    let grid = *g.grid();
    let n = grid.n_steps();
    if stride == 0 || stride > n {
        return Err(DeconvError::InvalidConfig(format!("stride {stride} outside 1..={n}")));
    }
    let width = stride as f64 * grid.step();
    let v = g.values();
    let valid = n + 1 - stride;
    let mut out: Vec<f64> = (0..valid).map(|j| (v[j + stride] - v[j]) / width).collect();
    let last = out[valid - 1];
    out.resize(n + 1, last);
    let keep = g.valid_len().saturating_sub(stride).max(1).min(valid);
    Ok(SampledSignal::new(grid, out)?.with_valid_len(keep))
}

/// Stable differentiation of noisy data with step `2 sqrt(delta / m2)`
/// (the grid step when `delta = 0`). Error at most `2 sqrt(m2 delta)` on the
/// valid nodes when `|g''| <= m2`.
pub fn diff_regularizer(data: &NoisyData, m2: f64) -> Result<SampledSignal> {
    if !(m2 > 0.0) {
        return Err(DeconvError::InvalidConfig(format!("m2 must be positive, got {m2}")));
    }
    let grid = *data.grid();
    let stride = if data.delta > 0.0 {
        difference_stride(optimal_difference_step(data.delta, m2), &grid)?
    } else {
        1
    };
    forward_difference(&data.noisy, stride)
}

fn differentiate(data: &NoisyData, cfg: &SplitConfig) -> Result<SampledSignal> {
    match cfg.h_diff {
        Some(h) => forward_difference(&data.noisy, difference_stride(h, data.grid())?),
        None => diff_regularizer(data, cfg.m2_bound),
    }
}

/// Riemann–Liouville integral of order `gamma` in `(0, 1)`, exact on
/// piecewise-linear `f`.
pub fn abel_apply_inverse(f: &SampledSignal, gamma_exp: f64) -> Result<SampledSignal> {
    quadrature::fractional_integral(f, gamma_exp)
}

/// `I^gamma g` for data of an Abel equation, which behaves like
/// `c0 t^(1-gamma)` near zero. The leading term is fitted at node `anchor`
/// and integrated exactly (`I^gamma t^(1-gamma) = Gamma(2-gamma) t`); only
/// the smoother remainder goes through product integration.
fn integrate_abel_data(g: &SampledSignal, gamma_exp: f64, anchor: usize) -> Result<SampledSignal> {
    let grid = *g.grid();
    let beta = 1.0 - gamma_exp;
    let c0 = g.values()[anchor] / grid.node(anchor).powf(beta);
    let remainder = SampledSignal::new(
        grid,
        g.values()
            .iter()
            .enumerate()
            .map(|(j, v)| v - c0 * grid.node(j).powf(beta))
            .collect(),
    )?;
    let leading = c0 * gamma(1.0 + beta);
    let integrated = abel_apply_inverse(&remainder, gamma_exp)?;
    integrated.map_indexed(|j, v| v + leading * grid.node(j))
}

/// Solves `w(t) + integral_0^t s(t - r) w(r) dr = f(t)` on the grid of `f`.
pub fn volterra2_solve(s_kernel: &KernelSpec, f: &SampledSignal, cfg: &SplitConfig) -> Result<SampledSignal> {
    let grid = *f.grid();
    let weights = LagWeights::for_kernel(s_kernel, grid.n_steps(), grid.step())?;
    solve_with_weights(&weights, f, cfg)
}

fn solve_with_weights(weights: &LagWeights, f: &SampledSignal, cfg: &SplitConfig) -> Result<SampledSignal> {
    let diag = 1.0 + weights.diagonal();
    if !(diag > 0.0) {
        return Err(DeconvError::StepSize { diagonal: diag });
    }
    let rhs = f.values();
    let scale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let w = match cfg.volterra_method {
        VolterraMethod::Direct => weights.solve_second_kind(rhs)?,
        VolterraMethod::Picard => picard(weights, rhs, cfg.volterra_tol * scale, cfg.volterra_max_iter)?,
    };
    let residual = w
        .iter()
        .zip(weights.apply(&w))
        .zip(rhs)
        .map(|((wi, sw), fi)| (wi + sw - fi).abs())
        .fold(0.0, f64::max);
    if residual > cfg.volterra_tol * scale {
        return Err(DeconvError::ResidualTooLarge {
            residual,
            tolerance: cfg.volterra_tol * scale,
        });
    }
    Ok(SampledSignal::new(*f.grid(), w)?.with_valid_len(f.valid_len()))
}

fn picard(weights: &LagWeights, f: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut w = f.to_vec();
    let mut update = f64::INFINITY;
    for _ in 0..max_iter {
        let sw = weights.apply(&w);
        let next: Vec<f64> = f.iter().zip(&sw).map(|(fi, s)| fi - s).collect();
        update = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if update <= 0.1 * tol {
            return Ok(w);
        }
    }
    Err(DeconvError::NoConvergence {
        iterations: max_iter,
        last_update: update,
    })
}

/// Kernel `m'(t) / k(0)` of `S` for a kernel that is finite at zero.
pub fn smooth_s_kernel(k: &KernelSpec, grid_step: f64) -> Result<KernelSpec> {
    if k.singular_at_zero() {
        return Err(DeconvError::DecompositionInapplicable(format!(
            "kernel '{}' is singular at 0; use the Abel path or the filter",
            k.name()
        )));
    }
    let k0 = k.k_at_zero().unwrap_or(0.0);
    if k0.abs() < 1e-300 || !k0.is_finite() {
        return Err(DeconvError::DecompositionInapplicable(format!(
            "kernel '{}' has k(0) = {k0}; use the filter",
            k.name()
        )));
    }
    let source = k.clone();
    Ok(KernelSpec::regular(format!("{}'/k(0)", k.name()), move |t| {
        source.regular_derivative(t, grid_step) / k0
    }))
}

/// Smooth kernel with `k(0) != 0`: differentiate the data stably, then solve
/// `u + (k'/k(0)) * u = g'/k(0)`.
pub fn split_deconvolve_smooth(data: &NoisyData, k: &KernelSpec, cfg: &SplitConfig) -> Result<SampledSignal> {
    let grid = *data.grid();
    let s_kernel = smooth_s_kernel(k, grid.step())?;
    let k0 = k.k_at_zero().unwrap_or(1.0);
    let scaled = NoisyData {
        clean: data.clean.map(|v| v / k0)?,
        noisy: data.noisy.map(|v| v / k0)?,
        delta: data.delta / k0.abs(),
        seed: data.seed,
    };
    let f = differentiate(&scaled, cfg)?;
    volterra2_solve(&s_kernel, &f, cfg)
}

/// Exponent and normalising constant `c` with `k = c (t^-gamma / Gamma(1-gamma)) + m`.
fn abel_parts(k: &KernelSpec, cfg: &SplitConfig) -> Result<(f64, f64)> {
    let s = match (k.singular(), cfg.gamma) {
        (Some(s), _) => s,
        (None, Some(_)) => {
            return Err(DeconvError::DecompositionInapplicable(format!(
                "kernel '{}' has no t^-gamma term",
                k.name()
            )))
        }
        (None, None) => {
            return Err(DeconvError::InvalidConfig(
                "Abel path needs a kernel with a t^-gamma term (gamma missing)".into(),
            ))
        }
    };
    if let Some(g) = cfg.gamma {
        if (g - s.exponent).abs() > 1e-12 {
            return Err(DeconvError::InvalidConfig(format!(
                "configured gamma {g} differs from the kernel exponent {}",
                s.exponent
            )));
        }
    }
    let c = s.scale * gamma(1.0 - s.exponent);
    if !(c.abs() > 0.0) {
        return Err(DeconvError::DecompositionInapplicable("zero Abel coefficient".into()));
    }
    Ok((s.exponent, c))
}

/// Kernel of `S = A^-1 B` for `k = t^-gamma / Gamma(1-gamma) + m`, on the
/// nodes of `grid`: `m(0) t^(gamma-1) / Gamma(gamma) + (I^gamma m')(t)`.
/// The regular part is tabulated at the nodes and interpolated linearly.
pub fn abel_s_kernel(gamma_exp: f64, m: &KernelSpec, grid: &Grid) -> Result<KernelSpec> {
    let h = grid.step();
    let derivative = SampledSignal::from_fn(*grid, |t| m.regular_derivative(t, h))?;
    let table = quadrature::fractional_integral(&derivative, gamma_exp)?.into_values();
    let m0 = m.evaluate_regular(0.0);
    let n = grid.n_steps();
    let lookup = move |t: f64| {
        let x = (t / h).max(0.0);
        let i = (x.floor() as usize).min(n - 1);
        let frac = (x - i as f64).min(1.0);
        table[i] + frac * (table[i + 1] - table[i])
    };
    KernelSpec::weakly_singular("abel_s_kernel", 1.0 - gamma_exp, m0 / gamma(gamma_exp), lookup)
}

/// Abel-type kernel `k = c t^-gamma / Gamma(1-gamma) + m`: apply the stable
/// approximate inverse of the Abel operator to the data, then solve
/// `(I + S) u = f`.
pub fn split_deconvolve_abel(data: &NoisyData, k: &KernelSpec, cfg: &SplitConfig) -> Result<SampledSignal> {
    let (gamma_exp, c) = abel_parts(k, cfg)?;
    let grid = *data.grid();
    let source = k.clone();
    let m = KernelSpec::regular("m", move |t| source.evaluate_regular(t) / c);
    let m = if k.has_derivative() {
        let source = k.clone();
        m.with_derivative(move |t| source.regular_derivative(t, 0.0) / c)
    } else {
        m
    };
    let g = data.noisy.map(|v| v / c)?;
    let delta = data.delta / c.abs();
    let f = match cfg.abel_order {
        AbelOrder::IntegrateFirst => {
            let anchor = match cfg.h_diff {
                Some(h) => difference_stride(h, &grid)?,
                None if delta > 0.0 => difference_stride(optimal_difference_step(delta, cfg.m2_bound), &grid)?,
                None => 1,
            };
            let integrated = integrate_abel_data(&g, gamma_exp, anchor)?;
            let bound = delta * grid.horizon().powf(gamma_exp) / gamma(1.0 + gamma_exp);
            let shifted = NoisyData::from_measurement(integrated, bound);
            differentiate(&shifted, cfg)?
        }
        AbelOrder::DifferenceFirst => {
            let shifted = NoisyData::from_measurement(g, delta);
            abel_apply_inverse(&differentiate(&shifted, cfg)?, gamma_exp)?
        }
    };
    let has_regular_part = (0..=grid.n_steps()).any(|j| m.evaluate_regular(grid.node(j)) != 0.0);
    if !has_regular_part {
        return Ok(f);
    }
    let s_kernel = abel_s_kernel(gamma_exp, &m, &grid)?;
    volterra2_solve(&s_kernel, &f, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn exact(grid: Grid, f: impl Fn(f64) -> f64) -> NoisyData {
        NoisyData::from_measurement(SampledSignal::from_fn(grid, f).unwrap(), 0.0)
    }

    fn sup_on_valid(a: &SampledSignal, b: &SampledSignal) -> f64 {
        a.sup_distance(b, 0..a.grid().len()).unwrap()
    }

    #[test]
    fn step_rule_example() {
        assert!((optimal_difference_step(1e-4, 1.0) - 0.02).abs() < 1e-15);
        let grid = Grid::new(1.0, 1000).unwrap();
        assert_eq!(difference_stride(0.02, &grid).unwrap(), 20);
        assert!(matches!(
            difference_stride(1.5, &grid),
            Err(DeconvError::StepTooLarge { .. })
        ));
        assert!(matches!(
            difference_stride(0.0004, &grid),
            Err(DeconvError::GridTooCoarse(_))
        ));
    }

    #[test]
    fn linear_data_differentiates_exactly() {
        let grid = Grid::new(1.0, 100).unwrap();
        let f = diff_regularizer(&exact(grid, |t| 3.0 * t), 1.0).unwrap();
        assert_eq!(f.valid_len(), 100);
        for v in &f.values()[..f.valid_len()] {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn worst_case_alternating_noise_meets_bound() {
        // g = t^2/2, blocks of +-delta alternating with the difference stride
        let grid = Grid::new(1.0, 100_000).unwrap();
        let delta = 1e-6;
        let stride = difference_stride(optimal_difference_step(delta, 1.0), &grid).unwrap();
        let clean = SampledSignal::from_fn(grid, |t| 0.5 * t * t).unwrap();
        let derivative = SampledSignal::from_fn(grid, |t| t).unwrap();
        for sign in [1.0, -1.0] {
            let noisy: Vec<f64> = clean
                .values()
                .iter()
                .enumerate()
                .map(|(j, g)| g + sign * delta * if (j / stride).is_multiple_of(2) { 1.0 } else { -1.0 })
                .collect();
            let data = NoisyData {
                clean: clean.clone(),
                noisy: SampledSignal::new(grid, noisy).unwrap(),
                delta,
                seed: 0,
            };
            let f = diff_regularizer(&data, 1.0).unwrap();
            let err = sup_on_valid(&f, &derivative);
            assert!(err <= 0.002 * (1.0 + 1e-9), "err = {err}");
        }
    }

    #[test]
    fn zero_data_and_fractional_integrals() {
        let grid = Grid::new(1.0, 1000).unwrap();
        let z = abel_apply_inverse(&SampledSignal::zeros(grid), 0.5).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));

        let one = SampledSignal::from_fn(grid, |_| 1.0).unwrap();
        let a = abel_apply_inverse(&one, 0.5).unwrap();
        let expect = SampledSignal::from_fn(grid, |t| 2.0 * (t / PI).sqrt()).unwrap();
        assert!(sup_on_valid(&a, &expect) <= 1e-3);

        let lin = SampledSignal::from_fn(grid, |t| t).unwrap();
        let b = abel_apply_inverse(&lin, 0.5).unwrap();
        let expect = SampledSignal::from_fn(grid, |t| 4.0 / 3.0 * t.powf(1.5) / PI.sqrt()).unwrap();
        assert!(sup_on_valid(&b, &expect) <= 1e-3);

        assert!(matches!(abel_apply_inverse(&one, 1.0), Err(DeconvError::InvalidExponent(_))));
    }

    #[test]
    fn volterra_zero_kernel_is_identity() {
        let grid = Grid::new(1.0, 50).unwrap();
        let f = SampledSignal::from_fn(grid, |t| t.cos()).unwrap();
        let w = volterra2_solve(&KernelSpec::regular("zero", |_| 0.0), &f, &SplitConfig::default()).unwrap();
        assert_eq!(w.values(), f.values());
    }

    #[test]
    fn volterra_constant_kernel_gives_exponential() {
        let grid = Grid::new(1.0, 1000).unwrap();
        let f = SampledSignal::from_fn(grid, |_| 1.0).unwrap();
        let expect = SampledSignal::from_fn(grid, |t| (-t).exp()).unwrap();
        for method in [VolterraMethod::Direct, VolterraMethod::Picard] {
            let cfg = SplitConfig {
                volterra_method: method,
                ..SplitConfig::default()
            };
            let w = volterra2_solve(&KernelSpec::unit(), &f, &cfg).unwrap();
            assert!(sup_on_valid(&w, &expect) <= 1e-4, "{method:?}");
        }
    }

    #[test]
    fn picard_reports_non_convergence() {
        let grid = Grid::new(1.0, 100).unwrap();
        let f = SampledSignal::from_fn(grid, |_| 1.0).unwrap();
        let cfg = SplitConfig {
            volterra_method: VolterraMethod::Picard,
            volterra_max_iter: 2,
            ..SplitConfig::default()
        };
        let big = KernelSpec::regular("big", |_| 50.0);
        assert!(matches!(
            volterra2_solve(&big, &f, &cfg),
            Err(DeconvError::NoConvergence { .. })
        ));
    }

    #[test]
    fn negative_diagonal_is_rejected() {
        let grid = Grid::new(1.0, 4).unwrap();
        let f = SampledSignal::from_fn(grid, |_| 1.0).unwrap();
        let k = KernelSpec::regular("neg", |_| -20.0);
        assert!(matches!(
            volterra2_solve(&k, &f, &SplitConfig::default()),
            Err(DeconvError::StepSize { .. })
        ));
    }

    #[test]
    fn smooth_path_examples() {
        // k = 1, u = 1, g = t, delta = 1e-6
        let grid = Grid::new(1.0, 10_000).unwrap();
        let clean = SampledSignal::from_fn(grid, |t| t).unwrap();
        let data = NoisyData::with_uniform_noise(clean, 1e-6, 1).unwrap();
        let u = split_deconvolve_smooth(&data, &KernelSpec::unit(), &SplitConfig::default()).unwrap();
        let one = SampledSignal::from_fn(grid, |_| 1.0).unwrap();
        assert!(sup_on_valid(&u, &one) <= 2e-3);

        // k = e^-t, u = sin t: g = (sin t - cos t + e^-t) / 2
        let grid = Grid::new(1.0, 2000).unwrap();
        let g = exact(grid, |t| 0.5 * (t.sin() - t.cos() + (-t).exp()));
        let u = split_deconvolve_smooth(&g, &KernelSpec::exp_decay(), &SplitConfig::default()).unwrap();
        let truth = SampledSignal::from_fn(grid, f64::sin).unwrap();
        assert!(sup_on_valid(&u, &truth) <= 5e-3);
    }

    #[test]
    fn smooth_path_rejects_inapplicable_kernels() {
        let grid = Grid::new(1.0, 100).unwrap();
        let data = exact(grid, |t| t);
        let cfg = SplitConfig::default();
        assert!(matches!(
            split_deconvolve_smooth(&data, &KernelSpec::unit_conv_exp(), &cfg),
            Err(DeconvError::DecompositionInapplicable(_))
        ));
        assert!(matches!(
            split_deconvolve_smooth(&data, &KernelSpec::abel(0.5).unwrap(), &cfg),
            Err(DeconvError::DecompositionInapplicable(_))
        ));
        assert!(matches!(
            split_deconvolve_abel(&data, &KernelSpec::exp_decay(), &cfg),
            Err(DeconvError::InvalidConfig(_))
        ));
    }

    #[test]
    fn pure_abel_examples() {
        let grid = Grid::new(1.0, 2000).unwrap();
        let k = KernelSpec::abel(0.5).unwrap();
        let cfg = SplitConfig::default();

        let g = exact(grid, |t| 2.0 * (t / PI).sqrt());
        let u = split_deconvolve_abel(&g, &k, &cfg).unwrap();
        let one = SampledSignal::from_fn(grid, |_| 1.0).unwrap();
        assert!(sup_on_valid(&u, &one) <= 1e-2);

        let g = exact(grid, |t| 4.0 / 3.0 * t.powf(1.5) / PI.sqrt());
        let u = split_deconvolve_abel(&g, &k, &cfg).unwrap();
        let lin = SampledSignal::from_fn(grid, |t| t).unwrap();
        assert!(sup_on_valid(&u, &lin) <= 1e-2);
    }

    #[test]
    fn difference_first_loses_the_boundary_term() {
        let grid = Grid::new(1.0, 2000).unwrap();
        let k = KernelSpec::abel(0.5).unwrap();
        let g = exact(grid, |t| 2.0 * (t / PI).sqrt());
        let cfg = SplitConfig {
            abel_order: AbelOrder::DifferenceFirst,
            ..SplitConfig::default()
        };
        let u = split_deconvolve_abel(&g, &k, &cfg).unwrap();
        let one = SampledSignal::from_fn(grid, |_| 1.0).unwrap();
        assert!(sup_on_valid(&u, &one) > 1e-1);
    }

    #[test]
    fn abel_s_kernel_matches_brute_force_composition() {
        // S u = d/dt I^gamma (m * u); for u = 1 and m = 0.1 e^-t,
        // m * u = 0.1 (1 - e^-t)
        let gamma_exp = 0.5;
        let coarse = Grid::new(1.0, 50).unwrap();
        let m = KernelSpec::regular("m", |t| 0.1 * (-t).exp()).with_derivative(|t| -0.1 * (-t).exp());
        let s = abel_s_kernel(gamma_exp, &m, &coarse).unwrap();
        let su = quadrature::convolve(&s, &SampledSignal::from_fn(coarse, |_| 1.0).unwrap()).unwrap();

        let fine = Grid::new(1.0, 20_000).unwrap();
        let mu = SampledSignal::from_fn(fine, |t| -0.1 * (-t).exp_m1()).unwrap();
        let integrated = abel_apply_inverse(&mu, gamma_exp).unwrap();
        let v = integrated.values();
        let h = fine.step();
        for j in (5..=45).step_by(10) {
            let i = j * 400;
            let derivative = (v[i + 1] - v[i - 1]) / (2.0 * h);
            assert!((su.values()[j] - derivative).abs() < 2e-3, "node {j}");
        }
    }

    #[test]
    fn abel_with_smooth_part_converges_as_noise_drops() {
        let fine = Grid::new(1.0, 8000).unwrap();
        let k = KernelSpec::abel_plus_smooth(0.5, 0.1).unwrap();
        let u_fine = SampledSignal::from_fn(fine, |t| 1.0 + 0.5 * t).unwrap();
        let clean = quadrature::convolve(&k, &u_fine).unwrap().subsample(4).unwrap();
        let grid = *clean.grid();
        let truth = SampledSignal::from_fn(grid, |t| 1.0 + 0.5 * t).unwrap();
        let mut last = f64::INFINITY;
        for delta in [1e-4, 1e-5, 1e-6] {
            let data = NoisyData::with_uniform_noise(clean.clone(), delta, 3).unwrap();
            let u = split_deconvolve_abel(&data, &k, &SplitConfig::default()).unwrap();
            let err = sup_on_valid(&u, &truth);
            assert!(err < last, "delta {delta}: {err} vs {last}");
            last = err;
        }
    }
}
