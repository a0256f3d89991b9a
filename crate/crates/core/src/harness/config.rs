//! TOML configuration for problems, methods and sweeps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::laplace::TransformRule;
use crate::problems::{KernelId, ProblemSpec, TruthId};
use crate::splitting::{AbelOrder, VolterraMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Filter,
    #[serde(alias = "split")]
    SplitSmooth,
    #[serde(alias = "abel")]
    SplitAbel,
    Recursive,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Filter => "filter",
            Method::SplitSmooth => "split_smooth",
            Method::SplitAbel => "split_abel",
            Method::Recursive => "recursive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    Sup,
    L2,
}

impl Norm {
    pub fn name(&self) -> &'static str {
        match self {
            Norm::Sup => "sup",
            Norm::L2 => "l2",
        }
    }
}

/// How a sweep is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Chosen from the method and the parameter regime.
    #[default]
    Auto,
    PowerLaw,
    LogCorrected,
    Monotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Filter order; default `ceil(a) + 2`.
    pub m: Option<u32>,
    /// Filter scale `N`; default from the noise level.
    pub n_scale: Option<f64>,
    /// Contour truncation; default `10 N`.
    pub mu_max: Option<f64>,
    pub rule: TransformRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub m2: f64,
    /// Differentiation step; default `2 sqrt(delta / m2)`.
    pub h_diff: Option<f64>,
    pub volterra: VolterraMethod,
    pub volterra_tol: f64,
    pub volterra_max_iter: usize,
    pub abel_order: AbelOrder,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            m2: 1.0,
            h_diff: None,
            volterra: VolterraMethod::Direct,
            volterra_tol: 1e-8,
            volterra_max_iter: 500,
            abel_order: AbelOrder::IntegrateFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecursiveParams {
    pub holder_b: f64,
    /// Overrides the automatic `alpha`.
    pub alpha: Option<f64>,
    /// Overrides the automatic step `h = delta^(1/b)`.
    pub step: Option<f64>,
}

impl Default for RecursiveParams {
    fn default() -> Self {
        Self {
            holder_b: 1.0,
            alpha: None,
            step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodParams {
    pub filter: FilterParams,
    pub split: SplitParams,
    pub recursive: RecursiveParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kernel: String,
    pub gamma: Option<f64>,
    pub m_scale: Option<f64>,
    pub truth: String,
    /// Exponent `p` of the `power` truth.
    pub power: Option<f64>,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}
fn default_steps() -> usize {
    1000
}
fn default_oversample() -> usize {
    4
}
fn default_trials() -> usize {
    1
}
fn default_tolerance() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub method: Method,
    pub deltas: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub check: CheckKind,
}

/// A whole config file: one problem, optional sweep, per-method sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub filter: FilterParams,
    #[serde(default)]
    pub split: SplitParams,
    #[serde(default)]
    pub recursive: RecursiveParams,
}

pub fn parse_config(text: &str) -> Result<Config> {
    toml::from_str(text).map_err(|e| DeconvError::Parse(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<Config> {
    parse_config(&std::fs::read_to_string(path)?)
}

impl Config {
    pub fn params(&self) -> MethodParams {
        MethodParams {
            filter: self.filter,
            split: self.split,
            recursive: self.recursive,
        }
    }

    /// The problem, with the seed replaced when `seed` is given.
    pub fn problem_spec(&self, seed: Option<u64>) -> Result<ProblemSpec> {
        let p = &self.problem;
        let need_gamma = || {
            p.gamma
                .ok_or_else(|| DeconvError::InvalidConfig(format!("kernel '{}' needs gamma", p.kernel)))
        };
        let kernel = match p.kernel.as_str() {
            "unit" => KernelId::Unit,
            "exp_decay" => KernelId::ExpDecay,
            "abel" => KernelId::Abel { gamma: need_gamma()? },
            "abel_plus_smooth" => KernelId::AbelPlusSmooth {
                gamma: need_gamma()?,
                m_scale: p.m_scale.unwrap_or(0.1),
            },
            "unit_conv_exp" => KernelId::UnitConvExp,
            "custom" => {
                return Err(DeconvError::IncompleteSpec(
                    "custom kernels are supplied through the library API, not the config file".into(),
                ))
            }
            other => return Err(DeconvError::InvalidConfig(format!("unknown kernel '{other}'"))),
        };
        let truth = match p.truth.as_str() {
            "const" => TruthId::Const,
            "linear" => TruthId::Linear,
            "sine" => TruthId::Sine,
            "poly_bounded_w2" => TruthId::PolyBoundedW2,
            "power" => TruthId::Power {
                exponent: p
                    .power
                    .ok_or_else(|| DeconvError::InvalidConfig("truth 'power' needs power = p".into()))?,
            },
            "custom" => {
                return Err(DeconvError::IncompleteSpec(
                    "custom truths are supplied through the library API, not the config file".into(),
                ))
            }
            other => return Err(DeconvError::InvalidConfig(format!("unknown truth '{other}'"))),
        };
        Ok(ProblemSpec::new(kernel, truth)
            .with_grid(p.horizon, p.n_steps)
            .with_oversample(p.oversample)
            .with_noise(p.delta, seed.unwrap_or(p.seed)))
    }
}
