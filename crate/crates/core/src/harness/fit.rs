//! Log-log rate fits of error against noise level.

use serde::Serialize;

use crate::error::{DeconvError, Result};

pub const MIN_DELTAS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (zero for an exact power law).
    pub stderr: f64,
    pub theoretical_exponent: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub n_deltas: usize,
}

/// Per-delta medians of the positive, finite errors, ordered by decreasing
/// delta.
pub fn median_by_delta(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut deltas: Vec<f64> = points.iter().map(|p| p.0).collect();
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    deltas
        .into_iter()
        .filter_map(|d| {
            let mut errs: Vec<f64> = points
                .iter()
                .filter(|p| p.0 == d && p.1.is_finite() && p.1 > 0.0)
                .map(|p| p.1)
                .collect();
            if errs.is_empty() {
                return None;
            }
            errs.sort_by(f64::total_cmp);
            let mid = errs.len() / 2;
            let median = if errs.len() % 2 == 1 {
                errs[mid]
            } else {
                0.5 * (errs[mid - 1] + errs[mid])
            };
            Some((d, median))
        })
        .collect()
}

/// OLS of `ln(error)` on `ln(delta)` over per-delta medians; passes when
/// the slope is within `tolerance` of `theoretical`.
pub fn fit_rate(points: &[(f64, f64)], theoretical: f64, tolerance: f64) -> Result<RateFitResult> {
    fit_medians(&median_by_delta(points), theoretical, tolerance)
}

/// [`fit_rate`] after dividing each error by `|ln delta|`.
pub fn fit_rate_log_corrected(points: &[(f64, f64)], theoretical: f64, tolerance: f64) -> Result<RateFitResult> {
    let corrected: Vec<(f64, f64)> = median_by_delta(points)
        .into_iter()
        .map(|(d, e)| (d, e / d.ln().abs()))
        .collect();
    fit_medians(&corrected, theoretical, tolerance)
}

fn fit_medians(medians: &[(f64, f64)], theoretical: f64, tolerance: f64) -> Result<RateFitResult> {
    let usable: Vec<(f64, f64)> = medians.iter().copied().filter(|(d, _)| *d > 0.0).collect();
    if usable.len() < MIN_DELTAS {
        return Err(DeconvError::InsufficientData {
            needed: MIN_DELTAS,
            got: usable.len(),
        });
    }
    let n = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(RateFitResult {
        slope,
        intercept,
        stderr,
        theoretical_exponent: theoretical,
        tolerance,
        pass: (slope - theoretical).abs() <= tolerance,
        n_deltas: usable.len(),
    })
}

/// Medians strictly decrease as delta decreases.
pub fn is_monotone_decreasing(points: &[(f64, f64)]) -> bool {
    let medians = median_by_delta(points);
    medians.len() >= 2 && medians.windows(2).all(|w| w[1].1 < w[0].1)
}
