//! Synthetic deconvolution problems with known solutions and certified
//! exponents.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{DeconvError, Result};
use crate::grid::{Grid, NoisyData, SampledSignal};
use crate::kernel::{KernelSpec, RealFn};
use crate::quadrature::{convolve, convolve_restricted};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelId {
    /// `k = 1`
    Unit,
    /// `k = exp(-t)`
    ExpDecay,
    /// `k = t^-gamma / Gamma(1 - gamma)`
    Abel { gamma: f64 },
    /// `k = t^-gamma / Gamma(1 - gamma) + m_scale exp(-t)`
    AbelPlusSmooth { gamma: f64, m_scale: f64 },
    /// `k = 1 - exp(-t)`, the convolution of `Unit` and `ExpDecay`
    UnitConvExp,
    Custom,
}

impl KernelId {
    pub fn name(&self) -> &'static str {
        match self {
            KernelId::Unit => "unit",
            KernelId::ExpDecay => "exp_decay",
            KernelId::Abel { .. } => "abel",
            KernelId::AbelPlusSmooth { .. } => "abel_plus_smooth",
            KernelId::UnitConvExp => "unit_conv_exp",
            KernelId::Custom => "custom",
        }
    }

    /// The built-in kernel; `None` for `Custom`.
    pub fn build(&self) -> Result<Option<KernelSpec>> {
        Ok(Some(match *self {
            KernelId::Unit => KernelSpec::unit(),
            KernelId::ExpDecay => KernelSpec::exp_decay(),
            KernelId::Abel { gamma } => KernelSpec::abel(gamma)?,
            KernelId::AbelPlusSmooth { gamma, m_scale } => KernelSpec::abel_plus_smooth(gamma, m_scale)?,
            KernelId::UnitConvExp => KernelSpec::unit_conv_exp(),
            KernelId::Custom => return Ok(None),
        }))
    }

    /// Growth exponent `a` of `|K(lambda)| >= c |lambda|^-a`.
    pub fn a_exponent(&self) -> Option<f64> {
        match *self {
            KernelId::Unit | KernelId::ExpDecay => Some(1.0),
            KernelId::Abel { gamma } | KernelId::AbelPlusSmooth { gamma, .. } => Some(1.0 - gamma),
            KernelId::UnitConvExp => Some(2.0),
            KernelId::Custom => None,
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthId {
    /// `u = 1`
    Const,
    /// `u = t`
    Linear,
    /// `u = sin t`
    Sine,
    /// `u = A (3x^2 - 2x^3)`, `x = t/T`, scaled so that
    /// `||u|| + ||u'|| + ||u''|| <= 1` in the sup norm.
    PolyBoundedW2,
    /// `u = t^p / Gamma(p + 1)`, whose transform is `lambda^-(p+1)`.
    Power { exponent: f64 },
    Custom,
}

impl TruthId {
    pub fn name(&self) -> &'static str {
        match self {
            TruthId::Const => "const",
            TruthId::Linear => "linear",
            TruthId::Sine => "sine",
            TruthId::PolyBoundedW2 => "poly_bounded_w2",
            TruthId::Power { .. } => "power",
            TruthId::Custom => "custom",
        }
    }

    /// Decay exponent `d` of `|U(lambda)| <= c / (1 + |lambda|^(1+d))`.
    pub fn d_exponent(&self) -> Option<f64> {
        match *self {
            TruthId::Const => Some(0.0),
            TruthId::Linear | TruthId::Sine => Some(1.0),
            TruthId::PolyBoundedW2 => Some(2.0),
            TruthId::Power { exponent } => Some(exponent),
            TruthId::Custom => None,
        }
    }

    /// The truth as a function of `t` on a horizon `T`; `None` for `Custom`.
    pub fn function(&self, horizon: f64) -> Option<RealFn> {
        Some(match *self {
            TruthId::Const => Arc::new(|_| 1.0),
            TruthId::Linear => Arc::new(|t| t),
            TruthId::Sine => Arc::new(f64::sin),
            TruthId::PolyBoundedW2 => {
                let amp = poly_w2_amplitude(horizon);
                Arc::new(move |t| {
                    let x = t / horizon;
                    amp * x * x * (3.0 - 2.0 * x)
                })
            }
            TruthId::Power { exponent } => {
                let norm = gamma(exponent + 1.0);
                Arc::new(move |t| t.powf(exponent) / norm)
            }
            TruthId::Custom => return None,
        })
    }
}

impl fmt::Display for TruthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `A = 1 / (1 + 1.5/T + 6/T^2)`: the sup norms of `3x^2 - 2x^3` and its
/// first two `t`-derivatives are `1`, `1.5/T` and `6/T^2`.
pub fn poly_w2_amplitude(horizon: f64) -> f64 {
    1.0 / (1.0 + 1.5 / horizon + 6.0 / (horizon * horizon))
}

/// `(a, d)` for a built-in kernel/truth pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedConstants {
    pub a: f64,
    pub d: f64,
}

impl CertifiedConstants {
    /// The filter and recursive rate theory needs `d > 0`; pairs with
    /// `d = 0` are usable for qualitative runs only.
    pub fn in_rate_theory(&self) -> bool {
        self.d > 0.0
    }
}

pub fn certified_constants(kernel: KernelId, truth: TruthId) -> Result<CertifiedConstants> {
    let a = kernel
        .a_exponent()
        .ok_or_else(|| DeconvError::NotCertified(format!("kernel '{kernel}'")))?;
    let d = truth
        .d_exponent()
        .ok_or_else(|| DeconvError::NotCertified(format!("truth '{truth}'")))?;
    Ok(CertifiedConstants { a, d })
}

/// A user-supplied ground truth.
#[derive(Clone)]
pub struct CustomTruth {
    pub name: String,
    pub function: RealFn,
    pub d_exponent: Option<f64>,
}

impl fmt::Debug for CustomTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTruth")
            .field("name", &self.name)
            .field("d_exponent", &self.d_exponent)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kernel: KernelId,
    pub truth: TruthId,
    pub horizon: f64,
    pub n_steps: usize,
    pub oversample: usize,
    pub delta: f64,
    pub seed: u64,
    pub custom_kernel: Option<KernelSpec>,
    pub custom_truth: Option<CustomTruth>,
}

impl ProblemSpec {
    pub fn new(kernel: KernelId, truth: TruthId) -> Self {
        Self {
            kernel,
            truth,
            horizon: 1.0,
            n_steps: 1000,
            oversample: 4,
            delta: 0.0,
            seed: 0,
            custom_kernel: None,
            custom_truth: None,
        }
    }

    pub fn with_grid(mut self, horizon: f64, n_steps: usize) -> Self {
        self.horizon = horizon;
        self.n_steps = n_steps;
        self
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    pub fn with_noise(mut self, delta: f64, seed: u64) -> Self {
        self.delta = delta;
        self.seed = seed;
        self
    }

    pub fn with_custom_kernel(mut self, k: KernelSpec) -> Self {
        self.kernel = KernelId::Custom;
        self.custom_kernel = Some(k);
        self
    }

    pub fn with_custom_truth(
        mut self,
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d_exponent: Option<f64>,
    ) -> Self {
        self.truth = TruthId::Custom;
        self.custom_truth = Some(CustomTruth {
            name: name.into(),
            function: Arc::new(f),
            d_exponent,
        });
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.horizon, self.n_steps)
    }

    pub fn kernel_name(&self) -> String {
        match (&self.kernel, &self.custom_kernel) {
            (KernelId::Custom, Some(k)) => k.name().to_string(),
            (id, _) => id.name().to_string(),
        }
    }

    pub fn truth_name(&self) -> String {
        match (&self.truth, &self.custom_truth) {
            (TruthId::Custom, Some(t)) => t.name.clone(),
            (id, _) => id.name().to_string(),
        }
    }

    fn kernel_spec(&self) -> Result<KernelSpec> {
        match self.kernel.build()? {
            Some(k) => Ok(k),
            None => self
                .custom_kernel
                .clone()
                .ok_or_else(|| DeconvError::IncompleteSpec("custom kernel selected but none supplied".into())),
        }
    }

    fn truth_fn(&self) -> Result<(RealFn, Option<f64>)> {
        match self.truth.function(self.horizon) {
            Some(f) => Ok((f, self.truth.d_exponent())),
            None => self
                .custom_truth
                .as_ref()
                .map(|t| (t.function.clone(), t.d_exponent))
                .ok_or_else(|| DeconvError::IncompleteSpec("custom truth selected but none supplied".into())),
        }
    }
}

/// A kernel, the true solution on the working grid and noisy data for it.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    /// Carries `d` when the truth has a certified or declared exponent.
    pub kernel: KernelSpec,
    pub u_true: SampledSignal,
    pub data: NoisyData,
}

/// Builds the problem; `g` is computed on a grid `oversample` times finer
/// and restricted to the working grid.
pub fn make_problem(spec: ProblemSpec) -> Result<Problem> {
    if spec.oversample < 2 {
        return Err(DeconvError::InvalidConfig(format!(
            "oversample must be at least 2, got {}",
            spec.oversample
        )));
    }
    let grid = spec.grid()?;
    let (truth, d) = spec.truth_fn()?;
    let kernel = spec.kernel_spec()?;
    let kernel = match d {
        Some(d) => kernel.with_decay(d),
        None => kernel,
    };
    let fine = grid.refined(spec.oversample)?;
    let u_fine = SampledSignal::from_fn(fine, |t| truth(t))?;
    let clean = convolve_restricted(&kernel, &u_fine, spec.oversample)?;
    let u_true = SampledSignal::from_fn(grid, |t| truth(t))?;
    let data = NoisyData::with_uniform_noise(clean, spec.delta, spec.seed)?;
    Ok(Problem {
        spec,
        kernel,
        u_true,
        data,
    })
}

impl Problem {
    /// Fresh noise at level `delta` on the same clean data.
    pub fn renoise(&self, delta: f64, seed: u64) -> Result<NoisyData> {
        NoisyData::with_uniform_noise(self.data.clean.clone(), delta, seed)
    }

    /// `sup |g_fine restricted - k * u on the working grid|`: how far the
    /// solver's own forward model is from the data generator.
    pub fn discretization_floor(&self) -> Result<f64> {
        let coarse = convolve(&self.kernel, &self.u_true)?;
        coarse.sup_distance(&self.data.clean, 0..coarse.grid().len())
    }
}
