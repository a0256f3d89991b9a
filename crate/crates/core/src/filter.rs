//! Filtered inverse Laplace transform along a vertical contour:
//!
//! ```text
//! u_delta(t) = (1 / 2 pi) integral exp(lambda t) K(lambda)^-1 G_delta(lambda) (lambda/N + 1)^-m dmu
//! ```
//!
//! with `lambda = sigma + i mu`, and the a-priori choice of `N` from the
//! noise level.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::grid::{ContourSpec, NoisyData, SampledSignal};
use crate::kernel::KernelSpec;
use crate::laplace::{transform_on_contour, TransformRule};

/// Which branch of the parameter rule produced `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRegime {
    /// `0 < d < 1`
    SmallD,
    /// `d = 1`, where the rate carries a logarithmic factor
    DEqualOne,
    /// `d > 1`
    LargeD,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSelection {
    pub n_scale: f64,
    /// Predicted exponent of the error in `delta`; for `d = 1` this is the
    /// exponent of the log-corrected rate `|ln delta| / exp(|ln delta| / (a + 2))`.
    pub exponent: f64,
    pub regime: SelectionRegime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub m_order: u32,
    pub n_scale: f64,
    pub contour: ContourSpec,
    pub regime: SelectionRegime,
    pub rule: TransformRule,
}

/// Smallest integer `m` with `m > a + 1`.
pub fn default_m_order(a: f64) -> u32 {
    a.ceil().max(0.0) as u32 + 2
}

// tolerance for treating d as exactly one
const D_ONE_TOL: f64 = 1e-12;

/// `N(delta)` and the predicted rate exponent for growth exponent `a` and
/// decay exponent `d`.
pub fn select_filter_n_for(delta: f64, a: f64, d: f64) -> Result<FilterSelection> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(DeconvError::InvalidConfig(format!(
            "noise level must lie in (0, 1) for the N rule, got {delta}"
        )));
    }
    if !(d > 0.0) {
        return Err(DeconvError::InvalidConfig(format!(
            "decay exponent d = {d} is outside the rate theory (d > 0 required)"
        )));
    }
    let sel = if (d - 1.0).abs() <= D_ONE_TOL {
        FilterSelection {
            n_scale: (delta.ln().abs() / (a + 2.0)).exp(),
            exponent: 1.0 / (a + 2.0),
            regime: SelectionRegime::DEqualOne,
        }
    } else if d < 1.0 {
        FilterSelection {
            n_scale: delta.powf(-1.0 / (a + d + 1.0)),
            exponent: d / (a + d + 1.0),
            regime: SelectionRegime::SmallD,
        }
    } else {
        FilterSelection {
            n_scale: delta.powf(-1.0 / (a + 2.0)),
            exponent: 1.0 / (a + 2.0),
            regime: SelectionRegime::LargeD,
        }
    };
    Ok(sel)
}

/// [`select_filter_n_for`] with the constants carried by the kernel.
pub fn select_filter_n(delta: f64, k: &KernelSpec) -> Result<FilterSelection> {
    let d = k.d_exponent().ok_or_else(|| {
        DeconvError::MissingPrior(format!(
            "kernel '{}' carries no decay exponent d; use a manual N",
            k.name()
        ))
    })?;
    select_filter_n_for(delta, k.a_exponent(), d)
}

impl FilterConfig {
    /// `N` from the noise level, `m = ceil(a) + 2`, `sigma = 1/T`,
    /// `mu_max = 10 N`.
    pub fn auto(delta: f64, k: &KernelSpec, horizon: f64) -> Result<Self> {
        let sel = select_filter_n(delta, k)?;
        let mut cfg = Self::manual(sel.n_scale, default_m_order(k.a_exponent()), horizon)?;
        cfg.regime = sel.regime;
        Ok(cfg)
    }

    pub fn manual(n_scale: f64, m_order: u32, horizon: f64) -> Result<Self> {
        if !(n_scale > 0.0 && n_scale.is_finite()) {
            return Err(DeconvError::InvalidConfig(format!("N must be positive, got {n_scale}")));
        }
        if m_order == 0 {
            return Err(DeconvError::InvalidConfig("filter order m must be positive".into()));
        }
        Ok(Self {
            m_order,
            n_scale,
            contour: ContourSpec::for_horizon(horizon, 10.0 * n_scale)?,
            regime: SelectionRegime::Manual,
            rule: TransformRule::default(),
        })
    }

    pub fn with_contour(mut self, contour: ContourSpec) -> Self {
        self.contour = contour;
        self
    }

    pub fn with_rule(mut self, rule: TransformRule) -> Self {
        self.rule = rule;
        self
    }

    /// `m > a + 1`, the order needed for sup-norm guarantees.
    pub fn sup_norm_admissible(&self, a: f64) -> bool {
        f64::from(self.m_order) > a + 1.0
    }

    fn check_order(&self, a: f64) -> Result<()> {
        if f64::from(self.m_order) > a + 0.5 {
            Ok(())
        } else {
            Err(DeconvError::InvalidConfig(format!(
                "filter order m = {} must exceed a + 1/2 = {}",
                self.m_order,
                a + 0.5
            )))
        }
    }
}

/// `(lambda/N + 1)^-m` by repeated division.
pub fn filter_factor(lambda: Complex64, n_scale: f64, m_order: u32) -> Complex64 {
    let base = lambda / n_scale + 1.0;
    let mut f = Complex64::new(1.0, 0.0);
    for _ in 0..m_order {
        f /= base;
    }
    f
}

const MIN_SYMBOL: f64 = 1e-14;
const IMAG_TOL: f64 = 1e-8;
// nodes per parallel block of the reconstruction
const BLOCK: usize = 64;

/// The quadrature coefficients `w_k / (2 pi) * F(lambda_k) / K(lambda_k)`.
fn spectral_multipliers(k: &KernelSpec, cfg: &FilterConfig) -> Result<Vec<Complex64>> {
    let c = &cfg.contour;
    (0..c.n_quad)
        .map(|i| {
            let lambda = c.lambda(i);
            let kv = k.laplace(lambda)?;
            if !(kv.norm() >= MIN_SYMBOL) {
                return Err(DeconvError::NearZeroSymbol {
                    mu: c.mu(i),
                    magnitude: kv.norm(),
                });
            }
            Ok(filter_factor(lambda, cfg.n_scale, cfg.m_order) / kv * (c.weight(i) / (2.0 * PI)))
        })
        .collect()
}

pub fn deconvolve_filtered(data: &NoisyData, k: &KernelSpec, cfg: &FilterConfig) -> Result<SampledSignal> {
    cfg.check_order(k.a_exponent())?;
    let g = &data.noisy;
    let spectrum = transform_on_contour(g, &cfg.contour, cfg.rule);
    let coeffs: Vec<Complex64> = spectral_multipliers(k, cfg)?
        .into_iter()
        .zip(spectrum)
        .map(|(m, gv)| m * gv)
        .collect();
    invert_on_grid(&coeffs, &cfg.contour, g.grid())
}

/// `u(t_j) = Re sum_k exp(lambda_k t_j) coeffs_k`, after checking that the
/// imaginary part cancels.
fn invert_on_grid(coeffs: &[Complex64], contour: &ContourSpec, grid: &crate::grid::Grid) -> Result<SampledSignal> {
    let h = grid.step();
    let n_nodes = grid.len();
    let blocks: Vec<Result<Vec<f64>>> = (0..n_nodes.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(n_nodes);
            let mut acc = vec![Complex64::new(0.0, 0.0); end - start];
            for (i, &c) in coeffs.iter().enumerate() {
                let lambda = contour.lambda(i);
                let step = (lambda * h).exp();
                let mut e = (lambda * grid.node(start)).exp() * c;
                for slot in acc.iter_mut() {
                    *slot += e;
                    e *= step;
                }
            }
            acc.iter()
                .enumerate()
                .map(|(off, v)| {
                    if v.im.abs() > IMAG_TOL * (1.0 + v.re.abs()) {
                        Err(DeconvError::ContourResolution {
                            t: grid.node(start + off),
                            residue: v.im.abs(),
                        })
                    } else {
                        Ok(v.re)
                    }
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(n_nodes);
    for block in blocks {
        values.extend(block?);
    }
    SampledSignal::new(*grid, values)
}

/// Bound on `sup |u_delta|` per unit `delta` when the data is pure noise:
/// `exp(sigma T) / sigma * (1 / 2 pi) integral |F / K| dmu`.
pub fn noise_gain(k: &KernelSpec, cfg: &FilterConfig, horizon: f64) -> Result<f64> {
    let sigma = cfg.contour.sigma;
    let total: f64 = spectral_multipliers(k, cfg)?.iter().map(|c| c.norm()).sum();
    Ok(total * (sigma * horizon).exp() / sigma)
}
