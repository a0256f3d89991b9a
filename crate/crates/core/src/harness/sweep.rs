//! Noise-level sweeps: run a method over many `(delta, seed)` pairs and
//! judge the error decay.

use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{DeconvError, Result};
use crate::filter::{default_m_order, deconvolve_filtered, select_filter_n, FilterConfig, SelectionRegime};
use crate::grid::{ContourSpec, NoisyData, SampledSignal};
use crate::harness::config::{CheckKind, Config, Method, MethodParams, Norm};
use crate::harness::fit::{fit_rate, fit_rate_log_corrected, is_monotone_decreasing, RateFitResult};
use crate::kernel::KernelSpec;
use crate::problems::{make_problem, Problem, ProblemSpec};
use crate::recursive::{recursive_run, select_recursive_params, RecursiveConfig};
use crate::splitting::{split_deconvolve_abel, split_deconvolve_smooth, SplitConfig};

/// Warm-up excluded from recursive errors, in estimator steps.
pub const RECURSIVE_WARMUP_STEPS: f64 = 5.0;
/// Fraction of the horizon on which filter errors are measured.
pub const FILTER_WINDOW: f64 = 0.9;

/// Parameters a method actually used; `None` where one does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UsedParams {
    pub n_scale: Option<f64>,
    pub m: Option<f64>,
    pub alpha: Option<f64>,
    pub h: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MethodOutput {
    pub estimate: SampledSignal,
    pub params: UsedParams,
    /// Nodes on which the estimate is compared with the truth.
    pub error_range: Range<usize>,
}

fn filter_config(data: &NoisyData, k: &KernelSpec, params: &MethodParams) -> Result<FilterConfig> {
    let p = &params.filter;
    let horizon = data.grid().horizon();
    let m = p.m.unwrap_or_else(|| default_m_order(k.a_exponent()));
    let mut cfg = match p.n_scale {
        Some(n) => FilterConfig::manual(n, m, horizon)?,
        None => {
            let mut cfg = FilterConfig::auto(data.delta, k, horizon)?;
            cfg.m_order = m;
            cfg
        }
    };
    if let Some(mu_max) = p.mu_max {
        cfg = cfg.with_contour(ContourSpec::for_horizon(horizon, mu_max)?);
    }
    Ok(cfg.with_rule(p.rule))
}

fn split_config(params: &MethodParams) -> SplitConfig {
    let p = &params.split;
    SplitConfig {
        m2_bound: p.m2,
        h_diff: p.h_diff,
        gamma: None,
        volterra_tol: p.volterra_tol,
        volterra_max_iter: p.volterra_max_iter,
        volterra_method: p.volterra,
        abel_order: p.abel_order,
    }
}

/// Recursive configuration: explicit `alpha`/`step` override the automatic
/// choice from the noise level.
pub fn recursive_config(delta: f64, k: &KernelSpec, params: &MethodParams) -> Result<RecursiveConfig> {
    let p = &params.recursive;
    match (p.alpha, p.step) {
        (Some(alpha), Some(step)) => Ok(RecursiveConfig::manual(alpha, step)),
        _ => {
            let mut cfg = RecursiveConfig::auto(delta, k, p.holder_b)?;
            if let Some(alpha) = p.alpha {
                cfg.alpha = alpha;
            }
            if let Some(step) = p.step {
                cfg.step = step;
            }
            Ok(cfg)
        }
    }
}

/// Runs one method on one data set.
pub fn run_method(method: Method, data: &NoisyData, k: &KernelSpec, params: &MethodParams) -> Result<MethodOutput> {
    let grid = *data.grid();
    match method {
        Method::Filter => {
            let cfg = filter_config(data, k, params)?;
            let estimate = deconvolve_filtered(data, k, &cfg)?;
            Ok(MethodOutput {
                estimate,
                params: UsedParams {
                    n_scale: Some(cfg.n_scale),
                    m: Some(f64::from(cfg.m_order)),
                    sigma: Some(cfg.contour.sigma),
                    ..UsedParams::default()
                },
                error_range: 0..grid.floor_index(FILTER_WINDOW * grid.horizon()) + 1,
            })
        }
        Method::SplitSmooth | Method::SplitAbel => {
            let cfg = split_config(params);
            let estimate = if method == Method::SplitSmooth {
                split_deconvolve_smooth(data, k, &cfg)?
            } else {
                split_deconvolve_abel(data, k, &cfg)?
            };
            let stride = grid.len() - estimate.valid_len();
            Ok(MethodOutput {
                error_range: 0..estimate.valid_len(),
                estimate,
                params: UsedParams {
                    h: Some(stride as f64 * grid.step()),
                    ..UsedParams::default()
                },
            })
        }
        Method::Recursive => {
            let cfg = recursive_config(data.delta, k, params)?;
            let estimate = recursive_run(data, k, &cfg)?;
            let start = ((RECURSIVE_WARMUP_STEPS * cfg.step) / grid.step() - 1e-9).ceil() as usize;
            Ok(MethodOutput {
                estimate,
                params: UsedParams {
                    alpha: Some(cfg.alpha),
                    h: Some(cfg.step),
                    ..UsedParams::default()
                },
                error_range: start.min(grid.len())..grid.len(),
            })
        }
    }
}

/// Error of an estimate against the truth on `range`.
pub fn measure_error(estimate: &SampledSignal, truth: &SampledSignal, range: Range<usize>, norm: Norm) -> Result<f64> {
    match norm {
        Norm::Sup => estimate.sup_distance(truth, range),
        Norm::L2 => estimate.l2_distance(truth, range),
    }
}

/// The decision rule applied to a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateCheck {
    /// Fitted slope within tolerance of `exponent`.
    PowerLaw { exponent: f64 },
    /// Monotone decay, and the slope of `error / |ln delta|` inside
    /// `[low - tol, high + tol]`.
    LogCorrected { low: f64, high: f64 },
    /// Medians strictly decrease with delta.
    Monotone,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub problem: ProblemSpec,
    pub method: Method,
    /// Strictly decreasing, all positive.
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub norm: Norm,
    pub tolerance: f64,
    pub params: MethodParams,
    pub check: CheckKind,
}

impl SweepPlan {
    pub fn new(problem: ProblemSpec, method: Method, deltas: Vec<f64>) -> Self {
        Self {
            problem,
            method,
            deltas,
            trials: 1,
            norm: Norm::Sup,
            tolerance: 0.15,
            params: MethodParams::default(),
            check: CheckKind::Auto,
        }
    }

    pub fn from_config(cfg: &Config, seed: Option<u64>) -> Result<Self> {
        let sweep = cfg
            .sweep
            .as_ref()
            .ok_or_else(|| DeconvError::InvalidConfig("config has no [sweep] section".into()))?;
        Ok(Self {
            problem: cfg.problem_spec(seed)?,
            method: sweep.method,
            deltas: sweep.deltas.clone(),
            trials: sweep.trials,
            norm: sweep.norm,
            tolerance: sweep.tolerance,
            params: cfg.params(),
            check: sweep.check,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(DeconvError::InvalidConfig("deltas must be positive and non-empty".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(DeconvError::InvalidConfig("deltas must be strictly decreasing".into()));
        }
        if self.trials == 0 {
            return Err(DeconvError::InvalidConfig("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// The rule used to judge this plan.
    pub fn rate_check(&self, k: &KernelSpec) -> Result<RateCheck> {
        let a = k.a_exponent();
        let regime = |delta: f64| -> Result<(f64, SelectionRegime)> {
            let sel = select_filter_n(delta, k)?;
            Ok((sel.exponent, sel.regime))
        };
        let power = || -> Result<RateCheck> {
            let exponent = match self.method {
                Method::Filter => regime(self.deltas[0])?.0,
                Method::SplitSmooth => 0.5,
                Method::Recursive => select_recursive_params(self.deltas[0], k, self.params.recursive.holder_b)?.exponent,
                Method::SplitAbel => {
                    return Err(DeconvError::InvalidConfig(
                        "the Abel path has no rate; use check = \"monotone\"".into(),
                    ))
                }
            };
            Ok(RateCheck::PowerLaw { exponent })
        };
        let log_corrected = RateCheck::LogCorrected {
            low: 0.9 / (a + 1.9),
            high: 1.0 / (a + 2.0),
        };
        match self.check {
            CheckKind::PowerLaw => power(),
            CheckKind::LogCorrected => Ok(log_corrected),
            CheckKind::Monotone => Ok(RateCheck::Monotone),
            CheckKind::Auto => match self.method {
                Method::SplitAbel => Ok(RateCheck::Monotone),
                Method::Filter if k.d_exponent().is_none() => Ok(RateCheck::Monotone),
                Method::Filter if regime(self.deltas[0])?.1 == SelectionRegime::DEqualOne => Ok(log_corrected),
                _ => power(),
            },
        }
    }
}

/// One `(delta, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub kernel_id: String,
    pub truth_id: String,
    pub delta: f64,
    pub seed: u64,
    pub norm: Norm,
    /// `None` when the method failed on this row.
    pub error: Option<f64>,
    pub failure: Option<String>,
    pub params: UsedParams,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// `(delta, error)` of the successful rows.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.error.map(|e| (r.delta, e))).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.failure.is_some())
    }
}

/// Generates the clean data once, then runs every `(delta, trial)` pair in
/// parallel with seed `problem.seed + trial`.
pub fn run_sweep(plan: &SweepPlan) -> Result<(Problem, SweepTable)> {
    plan.validate()?;
    let problem = make_problem(plan.problem.clone())?;
    let table = run_sweep_on(plan, &problem);
    Ok((problem, table))
}

pub fn run_sweep_on(plan: &SweepPlan, problem: &Problem) -> SweepTable {
    let jobs: Vec<(f64, u64)> = plan
        .deltas
        .iter()
        .flat_map(|&d| (0..plan.trials as u64).map(move |t| (d, problem.spec.seed.wrapping_add(t))))
        .collect();
    let kernel_id = problem.spec.kernel_name();
    let truth_id = problem.spec.truth_name();
    let rows = jobs
        .par_iter()
        .map(|&(delta, seed)| {
            let started = Instant::now();
            let outcome = problem.renoise(delta, seed).and_then(|data| {
                let out = run_method(plan.method, &data, &problem.kernel, &plan.params)?;
                let err = measure_error(&out.estimate, &problem.u_true, out.error_range.clone(), plan.norm)?;
                Ok((err, out.params))
            });
            let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
            let (error, failure, params) = match outcome {
                Ok((e, p)) => (Some(e), None, p),
                Err(e) => (None, Some(e.to_string()), UsedParams::default()),
            };
            SweepRow {
                method: plan.method,
                kernel_id: kernel_id.clone(),
                truth_id: truth_id.clone(),
                delta,
                seed,
                norm: plan.norm,
                error,
                failure,
                params,
                runtime_ms,
            }
        })
        .collect();
    SweepTable { rows }
}

/// Verdict of a [`RateCheck`] on a table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub check: RateCheck,
    pub fit: Option<RateFitResult>,
    pub monotone: bool,
    pub pass: bool,
    pub summary: String,
}

pub fn evaluate(table: &SweepTable, check: RateCheck, tolerance: f64) -> Result<CheckOutcome> {
    let points = table.points();
    let monotone = is_monotone_decreasing(&points);
    let outcome = match check {
        RateCheck::PowerLaw { exponent } => {
            let fit = fit_rate(&points, exponent, tolerance)?;
            CheckOutcome {
                check,
                fit: Some(fit),
                monotone,
                pass: fit.pass,
                summary: format!(
                    "slope {:.4} (stderr {:.4}) vs expected {:.4} +- {}",
                    fit.slope, fit.stderr, exponent, tolerance
                ),
            }
        }
        RateCheck::LogCorrected { low, high } => {
            let mid = 0.5 * (low + high);
            let fit = fit_rate_log_corrected(&points, mid, tolerance)?;
            let inside = fit.slope >= low - tolerance && fit.slope <= high + tolerance;
            CheckOutcome {
                check,
                fit: Some(fit),
                monotone,
                pass: monotone && inside,
                summary: format!(
                    "log-corrected slope {:.4} in [{:.4}, {:.4}] widened by {}; monotone {}",
                    fit.slope, low, high, tolerance, monotone
                ),
            }
        }
        RateCheck::Monotone => CheckOutcome {
            check,
            fit: None,
            monotone,
            pass: monotone,
            summary: format!("monotone decay {monotone}"),
        },
    };
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{KernelId, TruthId};

    #[test]
    fn sweep_shape_contract() {
        let spec = ProblemSpec::new(KernelId::ExpDecay, TruthId::PolyBoundedW2)
            .with_grid(1.0, 400)
            .with_noise(0.0, 1);
        let mut plan = SweepPlan::new(spec, Method::SplitSmooth, vec![1e-2, 1e-3, 1e-4]);
        plan.trials = 3;
        let (_, table) = run_sweep(&plan).unwrap();
        assert_eq!(table.rows.len(), 9);
        assert!(table.rows.iter().all(|r| r.error.is_some_and(f64::is_finite)));
        assert!(is_monotone_decreasing(&table.points()));
        assert_eq!(table.rows[1].seed, 2);
    }

    #[test]
    fn failures_stay_in_their_rows() {
        // the smooth split is inapplicable to a singular kernel
        let spec = ProblemSpec::new(KernelId::Abel { gamma: 0.5 }, TruthId::Const).with_grid(1.0, 100);
        let plan = SweepPlan::new(spec, Method::SplitSmooth, vec![1e-2, 1e-3]);
        let (_, table) = run_sweep(&plan).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.failures().count(), 2);
    }

    #[test]
    fn recursive_rows_carry_square_root_alpha() {
        let spec = ProblemSpec::new(KernelId::ExpDecay, TruthId::Sine).with_grid(1.0, 1000);
        let plan = SweepPlan::new(spec, Method::Recursive, vec![1e-2, 1e-3]);
        let (_, table) = run_sweep(&plan).unwrap();
        for r in &table.rows {
            assert!((r.params.alpha.unwrap() - r.delta.sqrt()).abs() < 1e-15);
            assert_eq!(r.params.h, Some(r.delta));
        }
    }

    #[test]
    fn plan_validation() {
        let spec = ProblemSpec::new(KernelId::Unit, TruthId::Const);
        assert!(SweepPlan::new(spec.clone(), Method::Filter, vec![1e-3, 1e-2]).validate().is_err());
        assert!(SweepPlan::new(spec.clone(), Method::Filter, vec![]).validate().is_err());
        assert!(SweepPlan::new(spec, Method::Filter, vec![1e-2, 0.0]).validate().is_err());
    }

    #[test]
    fn automatic_checks() {
        let k = KernelSpec::exp_decay().with_decay(1.0);
        let spec = ProblemSpec::new(KernelId::ExpDecay, TruthId::Sine);
        let plan = SweepPlan::new(spec.clone(), Method::Filter, vec![1e-2]);
        assert!(matches!(plan.rate_check(&k).unwrap(), RateCheck::LogCorrected { .. }));
        let plan = SweepPlan::new(spec.clone(), Method::Recursive, vec![1e-2]);
        assert_eq!(plan.rate_check(&k).unwrap(), RateCheck::PowerLaw { exponent: 0.5 });
        let plan = SweepPlan::new(spec, Method::SplitAbel, vec![1e-2]);
        assert_eq!(plan.rate_check(&k).unwrap(), RateCheck::Monotone);
    }
}
