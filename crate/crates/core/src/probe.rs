//! Numerical probes of the kernel symbol on the contour: the sector
//! condition and the resolvent bound `|alpha / (alpha + K)|`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{DeconvError, Result};
use crate::grid::ContourSpec;
use crate::kernel::KernelSpec;

/// Result of sampling `K` on the contour against the excluded sector
/// `{ z : |z| < r, pi - phi < arg z < pi + phi }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorReport {
    pub phi: f64,
    pub radius: f64,
    /// Minimum of `Re K` over the nodes.
    pub min_re: f64,
    /// Minimum of `|K|` over the nodes.
    pub min_abs: f64,
    /// Smallest distance from a sampled value to the closed sector; zero
    /// when some value lies inside.
    pub closest_approach: f64,
    /// `mu` of the node realising `closest_approach`.
    pub closest_mu: f64,
    /// No sampled value lies in the open sector.
    pub passes: bool,
}

impl SectorReport {
    /// `min Re K >= -tol`: the values stay in the closed right half-plane.
    pub fn right_half_plane(&self, tol: f64) -> bool {
        self.min_re >= -tol
    }
}

pub fn sector_check(k: &KernelSpec, contour: &ContourSpec, phi: f64, radius: f64) -> Result<SectorReport> {
    let mut report = SectorReport {
        phi,
        radius,
        min_re: f64::INFINITY,
        min_abs: f64::INFINITY,
        closest_approach: f64::INFINITY,
        closest_mu: 0.0,
        passes: true,
    };
    for i in 0..contour.n_quad {
        let z = k.laplace(contour.lambda(i))?;
        report.min_re = report.min_re.min(z.re);
        report.min_abs = report.min_abs.min(z.norm());
        if in_open_sector(z, phi, radius) {
            report.passes = false;
        }
        let dist = sector_distance(z, phi, radius);
        if dist < report.closest_approach {
            report.closest_approach = dist;
            report.closest_mu = contour.mu(i);
        }
    }
    Ok(report)
}

fn in_open_sector(z: Complex64, phi: f64, radius: f64) -> bool {
    // angular distance from the negative real axis
    let off_axis = PI - z.arg().abs();
    z.norm() < radius && off_axis < phi
}

/// Distance from `z` to the closed circular sector of half-angle `phi`
/// around the negative real axis.
fn sector_distance(z: Complex64, phi: f64, radius: f64) -> f64 {
    let rho = z.norm();
    let off_axis = PI - z.arg().abs();
    if off_axis <= phi {
        return (rho - radius).max(0.0);
    }
    // nearest point lies on one of the two bounding segments
    let edge = Complex64::from_polar(1.0, PI - phi);
    let zz = Complex64::new(z.re, z.im.abs());
    let along = (zz.re * edge.re + zz.im * edge.im).clamp(0.0, radius);
    (zz - edge * along).norm()
}

/// `max |alpha / (alpha + K(lambda))|` over the contour nodes.
pub fn resolvent_bound_probe(k: &KernelSpec, alpha: f64, contour: &ContourSpec) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(DeconvError::DivisionByZero);
    }
    let mut worst: f64 = 0.0;
    for i in 0..contour.n_quad {
        let lambda = contour.lambda(i);
        let kv = k.laplace(lambda)?;
        let denom = kv + alpha;
        if denom.norm() <= f64::EPSILON * (alpha + kv.norm()) {
            return Err(DeconvError::SingularResolvent {
                re: lambda.re,
                im: lambda.im,
            });
        }
        worst = worst.max(alpha / denom.norm());
    }
    Ok(worst)
}
