//! Truncated Laplace transforms of sampled signals.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::grid::{ContourSpec, SampledSignal};

/// How the samples are turned into a function before transforming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformRule {
    /// Exact transform of the piecewise-linear interpolant (Filon-type
    /// weights). Stays accurate when `|lambda| h` is not small.
    #[default]
    PiecewiseLinear,
    /// Composite trapezoid rule on the nodes.
    Trapezoid,
}

// re-anchor the running exponential against drift every this many steps
const REANCHOR: usize = 64;

/// `integral_0^T exp(-lambda t) g(t) dt`, with `Re(lambda) = sigma > 0`.
pub fn laplace_transform_data(g: &SampledSignal, lambda: Complex64, sigma: f64) -> Result<Complex64> {
    laplace_transform_with(g, lambda, sigma, TransformRule::Trapezoid)
}

pub fn laplace_transform_with(
    g: &SampledSignal,
    lambda: Complex64,
    sigma: f64,
    rule: TransformRule,
) -> Result<Complex64> {
    if !(sigma > 0.0 && lambda.re > 0.0) {
        return Err(DeconvError::InvalidContour(format!(
            "transform needs Re(lambda) > 0, got {} (sigma = {sigma})",
            lambda.re
        )));
    }
    if (lambda.re - sigma).abs() > 1e-12 * (1.0 + sigma) {
        return Err(DeconvError::InvalidContour(format!(
            "Re(lambda) = {} is off the contour sigma = {sigma}",
            lambda.re
        )));
    }
    Ok(transform_unchecked(g, lambda, rule))
}

/// Transform at every node of `contour`.
pub fn transform_on_contour(g: &SampledSignal, contour: &ContourSpec, rule: TransformRule) -> Vec<Complex64> {
    (0..contour.n_quad)
        .into_par_iter()
        .map(|k| transform_unchecked(g, contour.lambda(k), rule))
        .collect()
}

pub(crate) fn transform_unchecked(g: &SampledSignal, lambda: Complex64, rule: TransformRule) -> Complex64 {
    let grid = g.grid();
    let h = grid.step();
    let n = grid.n_steps();
    let values = g.values();
    let z = lambda * h;
    let (left, centre, right) = match rule {
        TransformRule::Trapezoid => (Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)),
        TransformRule::PiecewiseLinear => filon_weights(z),
    };
    let step = (-z).exp();
    let mut interior = Complex64::new(0.0, 0.0);
    let mut e = Complex64::new(1.0, 0.0);
    for (j, &v) in values.iter().enumerate().take(n).skip(1) {
        e = if j % REANCHOR == 0 {
            (-lambda * grid.node(j)).exp()
        } else {
            e * step
        };
        interior += e * v;
    }
    let last = (-lambda * grid.horizon()).exp();
    (left * values[0] + centre * interior + right * last * values[n]) * h
}

/// Weights `(l, c, r)` of the left node, interior nodes and right node for
/// the exact transform of a piecewise-linear function, with `z = lambda h`.
fn filon_weights(z: Complex64) -> (Complex64, Complex64, Complex64) {
    if z.norm() < 0.5 {
        filon_series(z)
    } else {
        filon_closed(z)
    }
}

// l = sum (-z)^k/(k+2)!, r = sum z^k/(k+2)!, c = l + r
fn filon_series(z: Complex64) -> (Complex64, Complex64, Complex64) {
    let mut l = Complex64::new(0.0, 0.0);
    let mut r = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(0.5, 0.0);
    for k in 0..18 {
        r += term;
        l += if k % 2 == 0 { term } else { -term };
        term = term * z / (k as f64 + 3.0);
    }
    (l, l + r, r)
}

fn filon_closed(z: Complex64) -> (Complex64, Complex64, Complex64) {
    let z2 = z * z;
    let em = (-z).exp();
    let ep = z.exp();
    let l = (z - 1.0 + em) / z2;
    let r = (ep - 1.0 - z) / z2;
    let c = (ep + em - 2.0) / z2;
    (l, c, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn ones(n: usize) -> SampledSignal {
        SampledSignal::from_fn(Grid::new(1.0, n).unwrap(), |_| 1.0).unwrap()
    }

    #[test]
    fn zero_signal_has_zero_transform() {
        let g = SampledSignal::zeros(Grid::new(1.0, 50).unwrap());
        let v = laplace_transform_data(&g, Complex64::new(1.0, 3.0), 1.0).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn constant_signal_matches_closed_form() {
        let g = ones(10_000);
        let v = laplace_transform_data(&g, Complex64::new(1.0, 0.0), 1.0).unwrap();
        let exact = 1.0 - (-1.0f64).exp();
        assert!((v.re - exact).abs() <= 1e-6);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn exponential_signal_matches_closed_form() {
        let g = SampledSignal::from_fn(Grid::new(1.0, 10_000).unwrap(), |t| (-t).exp()).unwrap();
        let v = laplace_transform_data(&g, Complex64::new(1.0, 0.0), 1.0).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((v.re - exact).abs() <= 1e-6);
    }

    #[test]
    fn piecewise_linear_rule_is_exact_for_linear_data() {
        // integral_0^1 t e^{-lambda t} dt = (1 - e^{-lambda}(1 + lambda)) / lambda^2
        let g = SampledSignal::from_fn(Grid::new(1.0, 7).unwrap(), |t| t).unwrap();
        for lambda in [Complex64::new(1.0, 0.0), Complex64::new(1.0, 40.0), Complex64::new(1.0, 0.01)] {
            let v = laplace_transform_with(&g, lambda, 1.0, TransformRule::PiecewiseLinear).unwrap();
            let exact = (1.0 - (-lambda).exp() * (1.0 + lambda)) / (lambda * lambda);
            assert!((v - exact).norm() < 1e-14, "lambda = {lambda}");
        }
    }

    #[test]
    fn filon_series_and_closed_form_agree_at_switch() {
        for z in [Complex64::new(0.0, 0.5), Complex64::new(0.3, 0.4), Complex64::new(-0.5, 0.0)] {
            let a = filon_series(z);
            let b = filon_closed(z);
            assert!((a.0 - b.0).norm() < 1e-14);
            assert!((a.1 - b.1).norm() < 1e-14);
            assert!((a.2 - b.2).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_points_off_the_right_half_plane() {
        let g = ones(10);
        assert!(laplace_transform_data(&g, Complex64::new(0.0, 1.0), 0.0).is_err());
        assert!(laplace_transform_data(&g, Complex64::new(-1.0, 1.0), 1.0).is_err());
        assert!(laplace_transform_data(&g, Complex64::new(2.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn contour_transform_is_conjugate_symmetric() {
        let g = SampledSignal::from_fn(Grid::new(1.0, 300).unwrap(), |t| t.sin() + 0.2).unwrap();
        let contour = ContourSpec::for_horizon(1.0, 60.0).unwrap();
        let values = transform_on_contour(&g, &contour, TransformRule::PiecewiseLinear);
        let n = contour.n_quad;
        for k in 0..n {
            assert!((values[k] - values[n - 1 - k].conj()).norm() < 1e-13);
        }
    }
}
