//! Convolution kernels `k(t)` paired with their Laplace transforms.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{DeconvError, Result};
use crate::grid::ContourSpec;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type TransformFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// The weakly singular term `scale * t^(-exponent)`, `0 < exponent < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakSingularity {
    pub exponent: f64,
    pub scale: f64,
}

/// A kernel `k(t) = scale * t^(-gamma) + m(t)` (the singular term is optional)
/// together with the constants of the growth bound `|K(lambda)| >= c |lambda|^(-a)`
/// on the contour and, when known, the decay exponent `d` of `|K^-1 G|`.
#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    singular: Option<WeakSingularity>,
    regular: RealFn,
    regular_derivative: Option<RealFn>,
    regular_antiderivative: Option<RealFn>,
    laplace: Option<TransformFn>,
    a_exponent: f64,
    c_lower: f64,
    d_exponent: Option<f64>,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("singular", &self.singular)
            .field("a_exponent", &self.a_exponent)
            .field("c_lower", &self.c_lower)
            .field("d_exponent", &self.d_exponent)
            .field("has_laplace", &self.laplace.is_some())
            .finish()
    }
}

impl KernelSpec {
    /// A kernel that is finite on `[0, T]`.
    pub fn regular(name: impl Into<String>, k: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            singular: None,
            regular: Arc::new(k),
            regular_derivative: None,
            regular_antiderivative: None,
            laplace: None,
            a_exponent: 0.0,
            c_lower: 1.0,
            d_exponent: None,
        }
    }

    /// `k(t) = scale * t^(-exponent) + m(t)`.
    pub fn weakly_singular(
        name: impl Into<String>,
        exponent: f64,
        scale: f64,
        m: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(DeconvError::InvalidExponent(exponent));
        }
        let mut k = Self::regular(name, m);
        k.singular = Some(WeakSingularity { exponent, scale });
        Ok(k)
    }

    pub fn with_laplace(mut self, f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Self {
        self.laplace = Some(Arc::new(f));
        self
    }

    /// Derivative of the regular part `m`.
    pub fn with_derivative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.regular_derivative = Some(Arc::new(f));
        self
    }

    /// `t -> integral_0^t m(s) ds` for the regular part `m`.
    pub fn with_antiderivative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.regular_antiderivative = Some(Arc::new(f));
        self
    }

    pub fn with_growth(mut self, a_exponent: f64, c_lower: f64) -> Self {
        self.a_exponent = a_exponent;
        self.c_lower = c_lower;
        self
    }

    pub fn with_decay(mut self, d_exponent: f64) -> Self {
        self.d_exponent = Some(d_exponent);
        self
    }

    /// `k(t) = 1`, `K = 1/lambda`, `a = 1`.
    pub fn unit() -> Self {
        Self::regular("unit", |_| 1.0)
            .with_derivative(|_| 0.0)
            .with_antiderivative(|t| t)
            .with_laplace(|l| 1.0 / l)
            .with_growth(1.0, 1.0)
    }

    /// `k(t) = exp(-t)`, `K = 1/(1+lambda)`, `a = 1`. The constant
    /// `c = 1/2` holds on contours with `sigma >= 1`.
    pub fn exp_decay() -> Self {
        Self::regular("exp_decay", |t| (-t).exp())
            .with_derivative(|t| -(-t).exp())
            .with_antiderivative(|t| -(-t).exp_m1())
            .with_laplace(|l| 1.0 / (1.0 + l))
            .with_growth(1.0, 0.5)
    }

    /// Abel kernel `t^(-gamma) / Gamma(1-gamma)`, `K = lambda^(gamma-1)`,
    /// `a = 1 - gamma`.
    pub fn abel(gamma_exp: f64) -> Result<Self> {
        Self::abel_plus_smooth(gamma_exp, 0.0).map(|k| {
            let mut k = k;
            k.name = "abel".into();
            k
        })
    }

    /// `t^(-gamma) / Gamma(1-gamma) + m_scale * exp(-t)`.
    pub fn abel_plus_smooth(gamma_exp: f64, m_scale: f64) -> Result<Self> {
        if !(gamma_exp > 0.0 && gamma_exp < 1.0) {
            return Err(DeconvError::InvalidExponent(gamma_exp));
        }
        let scale = 1.0 / gamma(1.0 - gamma_exp);
        let k = Self::weakly_singular("abel_plus_smooth", gamma_exp, scale, move |t| m_scale * (-t).exp())?
            .with_derivative(move |t| -m_scale * (-t).exp())
            .with_antiderivative(move |t| -m_scale * (-t).exp_m1())
            .with_laplace(move |l| l.powf(gamma_exp - 1.0) + m_scale / (1.0 + l))
            .with_growth(1.0 - gamma_exp, ((1.0 - gamma_exp) * FRAC_PI_2).cos());
        Ok(k)
    }

    /// `k = 1 * exp(-t) = 1 - exp(-t)`, `K = 1/(lambda (1+lambda))`, `a = 2`.
    /// Not completely monotone: its symbol approaches the negative real axis.
    pub fn unit_conv_exp() -> Self {
        Self::regular("unit_conv_exp", |t| -(-t).exp_m1())
            .with_derivative(|t| (-t).exp())
            .with_antiderivative(|t| t + (-t).exp_m1())
            .with_laplace(|l| 1.0 / (l * (1.0 + l)))
            .with_growth(2.0, 0.5)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn singular(&self) -> Option<WeakSingularity> {
        self.singular
    }

    pub fn singular_at_zero(&self) -> bool {
        self.singular.is_some()
    }

    pub fn a_exponent(&self) -> f64 {
        self.a_exponent
    }

    pub fn c_lower(&self) -> f64 {
        self.c_lower
    }

    pub fn d_exponent(&self) -> Option<f64> {
        self.d_exponent
    }

    /// `k(0)`, defined only for kernels without a singular term.
    pub fn k_at_zero(&self) -> Option<f64> {
        if self.singular.is_some() {
            None
        } else {
            Some((self.regular)(0.0))
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let m = (self.regular)(t);
        match self.singular {
            Some(s) if t > 0.0 => m + s.scale * t.powf(-s.exponent),
            Some(_) => f64::INFINITY,
            None => m,
        }
    }

    /// The regular part `m(t)`.
    pub fn evaluate_regular(&self, t: f64) -> f64 {
        (self.regular)(t)
    }

    /// `m'(t)`, analytic when supplied, otherwise a second-order difference
    /// with step `h` (one-sided near `t = 0`).
    pub fn regular_derivative(&self, t: f64, h: f64) -> f64 {
        if let Some(d) = &self.regular_derivative {
            return d(t);
        }
        let m = &self.regular;
        if t < h {
            (-3.0 * m(t) + 4.0 * m(t + h) - m(t + 2.0 * h)) / (2.0 * h)
        } else {
            (m(t + h) - m(t - h)) / (2.0 * h)
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.regular_derivative.is_some()
    }

    pub fn regular_antiderivative(&self) -> Option<&RealFn> {
        self.regular_antiderivative.as_ref()
    }

    pub fn has_laplace(&self) -> bool {
        self.laplace.is_some()
    }

    pub fn laplace(&self, lambda: Complex64) -> Result<Complex64> {
        self.laplace
            .as_ref()
            .map(|f| f(lambda))
            .ok_or_else(|| DeconvError::IncompleteSpec(format!("kernel '{}' has no Laplace transform", self.name)))
    }

    /// `integral_a^b k(r) dr` for `0 <= a < b`; the singular term is
    /// integrated exactly.
    pub fn cell_integral(&self, a: f64, b: f64) -> f64 {
        let singular = match self.singular {
            Some(s) => s.scale * power_difference(a, b, 1.0 - s.exponent) / (1.0 - s.exponent),
            None => 0.0,
        };
        let regular = match &self.regular_antiderivative {
            Some(f) => f(b) - f(a),
            None => adaptive_gauss(&*self.regular, a, b, 1e-14, 30),
        };
        singular + regular
    }
}

/// `b^p - a^p` for `0 <= a < b`, without cancellation when `a` is close to `b`.
pub(crate) fn power_difference(a: f64, b: f64, p: f64) -> f64 {
    if a <= 0.0 {
        return b.powf(p);
    }
    a.powf(p) * (p * (b / a).ln()).exp_m1()
}

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

pub(crate) fn gauss8(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
        s += w * (f(c - r * x) + f(c + r * x));
    }
    s * r
}

/// Adaptive bisection on 8-point Gauss–Legendre panels.
pub(crate) fn adaptive_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = gauss8(f, a, b);
    let m = 0.5 * (a + b);
    let left = gauss8(f, a, m);
    let right = gauss8(f, m, b);
    let split = left + right;
    if depth == 0 || (split - whole).abs() <= tol * split.abs().max(1e-300) {
        split
    } else {
        adaptive_gauss(f, a, m, tol, depth - 1) + adaptive_gauss(f, m, b, tol, depth - 1)
    }
}

/// Spot-checks `|K(lambda)| >= c |lambda|^(-a)` at every node of the contour.
pub fn validate_kernel(k: &KernelSpec, contour: &ContourSpec) -> Result<()> {
    for i in 0..contour.n_quad {
        let lambda = contour.lambda(i);
        let value = k.laplace(lambda)?;
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(DeconvError::InvalidKernel(format!(
                "non-finite K at mu = {}",
                contour.mu(i)
            )));
        }
        let bound = k.c_lower * lambda.norm().powf(-k.a_exponent);
        if value.norm() < bound * (1.0 - 1e-12) {
            return Err(DeconvError::InvalidKernel(format!(
                "|K| = {:e} below c|lambda|^-a = {:e} at mu = {}",
                value.norm(),
                bound,
                contour.mu(i)
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_satisfy_growth_bound_on_unit_contour() {
        let contour = ContourSpec::for_horizon(1.0, 500.0).unwrap();
        for k in [
            KernelSpec::unit(),
            KernelSpec::exp_decay(),
            KernelSpec::abel(0.5).unwrap(),
            KernelSpec::abel_plus_smooth(0.3, 0.2).unwrap(),
            KernelSpec::unit_conv_exp(),
        ] {
            validate_kernel(&k, &contour).unwrap_or_else(|e| panic!("{}: {e}", k.name()));
        }
    }

    #[test]
    fn cell_integral_matches_closed_forms() {
        let k = KernelSpec::exp_decay();
        let h = 0.1;
        for l in 1..20 {
            let a = (l - 1) as f64 * h;
            let expect = (-a).exp() * (1.0 - (-h).exp());
            assert!((k.cell_integral(a, a + h) - expect).abs() < 1e-15);
        }
        let abel = KernelSpec::abel(0.5).unwrap();
        let expect = 2.0 * 0.25f64.sqrt() / std::f64::consts::PI.sqrt();
        assert!((abel.cell_integral(0.0, 0.25) - expect).abs() < 1e-15);
    }

    #[test]
    fn adaptive_gauss_without_antiderivative() {
        let k = KernelSpec::regular("cos", f64::cos);
        let v = k.cell_integral(0.3, 1.7);
        assert!((v - (1.7f64.sin() - 0.3f64.sin())).abs() < 1e-14);
    }

    #[test]
    fn power_difference_is_accurate_for_close_arguments() {
        let a = 1e5;
        let b = 1e5 + 1.0;
        let exact = 0.5 / (a + 0.5f64).sqrt(); // midpoint estimate, relative error ~1e-11
        let got = power_difference(a, b, 0.5);
        assert!((got - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn numerical_derivative_fallback() {
        let k = KernelSpec::regular("sin", f64::sin);
        assert!((k.regular_derivative(0.0, 1e-4) - 1.0).abs() < 1e-7);
        assert!((k.regular_derivative(0.5, 1e-4) - 0.5f64.cos()).abs() < 1e-7);
    }
}
