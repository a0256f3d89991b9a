//! C ABI over `deconv-core`.
//!
//! Every function returns a [`DeconvStatus`]; on failure the message is kept
//! per thread and read with [`deconv_last_error`]. Objects are opaque handles
//! released with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use deconv_core::error::DeconvError;
use deconv_core::grid::{Grid, NoisyData, SampledSignal};
use deconv_core::harness::config::{parse_config, Config, Method, MethodParams};
use deconv_core::harness::fit::fit_rate;
use deconv_core::harness::sweep::run_method;
use deconv_core::kernel::KernelSpec;
use deconv_core::problems::{make_problem, Problem};
use deconv_core::recursive::{recursive_step, EstimatorState, RecursiveConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeconvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Config = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeconvMethod {
    Filter = 0,
    SplitSmooth = 1,
    SplitAbel = 2,
    Recursive = 3,
}

impl From<DeconvMethod> for Method {
    fn from(m: DeconvMethod) -> Self {
        match m {
            DeconvMethod::Filter => Method::Filter,
            DeconvMethod::SplitSmooth => Method::SplitSmooth,
            DeconvMethod::SplitAbel => Method::SplitAbel,
            DeconvMethod::Recursive => Method::Recursive,
        }
    }
}

/// Result of a log-log rate fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeconvRateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub theoretical_exponent: f64,
    pub pass: bool,
}

/// A convolution kernel.
pub struct DeconvKernel(KernelSpec);

/// A generated problem together with the config it came from.
pub struct DeconvProblem {
    problem: Problem,
    params: MethodParams,
}

/// A reconstructed signal.
pub struct DeconvSignal(SampledSignal);

/// Online recursive estimator fed one sample at a time.
pub struct DeconvEstimator {
    kernel: KernelSpec,
    config: RecursiveConfig,
    first: Option<f64>,
    state: Option<EstimatorState>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &DeconvError) -> DeconvStatus {
    use DeconvError::*;
    match e {
        InvalidConfig(_) | Parse(_) | IncompleteSpec(_) | NotCertified(_) | MissingPrior(_) => DeconvStatus::Config,
        Io(_) => DeconvStatus::Io,
        InvalidGrid(_) | InvalidSignal(_) | Dimension(_) | InvalidKernel(_) | InvalidContour(_)
        | InvalidExponent(_) | InsufficientData { .. } | GridTooCoarse(_) | StepTooLarge { .. } => {
            DeconvStatus::InvalidArgument
        }
        _ => DeconvStatus::Numerical,
    }
}

enum Failure {
    Status(DeconvStatus, String),
    Core(DeconvError),
}

impl From<DeconvError> for Failure {
    fn from(e: DeconvError) -> Self {
        Failure::Core(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(DeconvStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(DeconvStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DeconvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DeconvStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            DeconvStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_into(src: &[f64], buf: *mut f64, cap: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if cap < src.len() {
        return Err(invalid(format!("buffer holds {cap} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn deconv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Built-in kernel by name: `unit`, `exp_decay`, `abel`, `abel_plus_smooth`,
/// `unit_conv_exp`. `gamma` and `m_scale` are read only by the Abel kernels.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_kernel_builtin(
    name: *const c_char,
    gamma: f64,
    m_scale: f64,
    out: *mut *mut DeconvKernel,
) -> DeconvStatus {
    guard(|| {
        let k = match str_arg(name, "name")? {
            "unit" => KernelSpec::unit(),
            "exp_decay" => KernelSpec::exp_decay(),
            "abel" => KernelSpec::abel(gamma)?,
            "abel_plus_smooth" => KernelSpec::abel_plus_smooth(gamma, m_scale)?,
            "unit_conv_exp" => KernelSpec::unit_conv_exp(),
            other => return Err(invalid(format!("unknown kernel '{other}'"))),
        };
        write_out(out, DeconvKernel(k))
    })
}

/// # Safety
/// `kernel` must come from [`deconv_kernel_builtin`] or be null.
#[no_mangle]
pub unsafe extern "C" fn deconv_kernel_free(kernel: *mut DeconvKernel) {
    free_handle(kernel)
}

/// Builds a problem from a TOML config string. `seed` replaces the config
/// seed when `use_seed` is true.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_problem_from_config(
    config: *const c_char,
    use_seed: bool,
    seed: u64,
    out: *mut *mut DeconvProblem,
) -> DeconvStatus {
    guard(|| {
        let cfg: Config = parse_config(str_arg(config, "config")?)?;
        let problem = make_problem(cfg.problem_spec(use_seed.then_some(seed))?)?;
        write_out(
            out,
            DeconvProblem {
                problem,
                params: cfg.params(),
            },
        )
    })
}

/// # Safety
/// `problem` must come from [`deconv_problem_from_config`] or be null.
#[no_mangle]
pub unsafe extern "C" fn deconv_problem_free(problem: *mut DeconvProblem) {
    free_handle(problem)
}

/// Number of grid nodes.
///
/// # Safety
/// `problem` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_problem_len(problem: *const DeconvProblem, len: *mut usize) -> DeconvStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        *len.as_mut().ok_or_else(|| null("len"))? = p.problem.u_true.values().len();
        Ok(())
    })
}

/// Copies the true solution into `buf`, which holds `cap` values.
///
/// # Safety
/// `problem` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn deconv_problem_copy_truth(
    problem: *const DeconvProblem,
    buf: *mut f64,
    cap: usize,
) -> DeconvStatus {
    guard(|| copy_into(handle(problem, "problem")?.problem.u_true.values(), buf, cap))
}

/// Copies the noisy data into `buf`, which holds `cap` values.
///
/// # Safety
/// `problem` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn deconv_problem_copy_noisy(
    problem: *const DeconvProblem,
    buf: *mut f64,
    cap: usize,
) -> DeconvStatus {
    guard(|| copy_into(handle(problem, "problem")?.problem.data.noisy.values(), buf, cap))
}

/// Solves the problem with the method parameters from its config.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_solve_problem(
    problem: *const DeconvProblem,
    method: DeconvMethod,
    out: *mut *mut DeconvSignal,
) -> DeconvStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        let result = run_method(method.into(), &p.problem.data, &p.problem.kernel, &p.params)?;
        write_out(out, DeconvSignal(result.estimate))
    })
}

/// Solves `k * u = g` for measured `g` sampled at `len` equispaced nodes on
/// `[0, horizon]` with noise bound `delta`, using automatic parameters.
/// `d_exponent` is the decay exponent of the solution's transform; pass a
/// negative value if it is unknown (the filter and recursive methods need it).
///
/// # Safety
/// `kernel` must be a live handle; `g` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn deconv_solve_data(
    kernel: *const DeconvKernel,
    g: *const f64,
    len: usize,
    horizon: f64,
    delta: f64,
    d_exponent: f64,
    method: DeconvMethod,
    out: *mut *mut DeconvSignal,
) -> DeconvStatus {
    guard(|| {
        let k = handle(kernel, "kernel")?;
        let values = slice_arg(g, len, "g")?;
        if len < 2 {
            return Err(invalid("need at least two samples"));
        }
        let grid = Grid::new(horizon, len - 1)?;
        let data = NoisyData::from_measurement(SampledSignal::new(grid, values.to_vec())?, delta);
        let k = if d_exponent >= 0.0 {
            k.0.clone().with_decay(d_exponent)
        } else {
            k.0.clone()
        };
        let result = run_method(method.into(), &data, &k, &MethodParams::default())?;
        write_out(out, DeconvSignal(result.estimate))
    })
}

/// # Safety
/// `signal` must come from a solve call or be null.
#[no_mangle]
pub unsafe extern "C" fn deconv_signal_free(signal: *mut DeconvSignal) {
    free_handle(signal)
}

/// Total number of nodes.
///
/// # Safety
/// `signal` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_signal_len(signal: *const DeconvSignal, len: *mut usize) -> DeconvStatus {
    guard(|| {
        *len.as_mut().ok_or_else(|| null("len"))? = handle(signal, "signal")?.0.values().len();
        Ok(())
    })
}

/// Number of leading nodes on which the estimate is defined.
///
/// # Safety
/// `signal` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_signal_valid_len(signal: *const DeconvSignal, len: *mut usize) -> DeconvStatus {
    guard(|| {
        *len.as_mut().ok_or_else(|| null("len"))? = handle(signal, "signal")?.0.valid_len();
        Ok(())
    })
}

/// Copies all node values into `buf`, which holds `cap` values.
///
/// # Safety
/// `signal` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn deconv_signal_copy(signal: *const DeconvSignal, buf: *mut f64, cap: usize) -> DeconvStatus {
    guard(|| copy_into(handle(signal, "signal")?.0.values(), buf, cap))
}

/// Online estimator with regularisation `alpha` and sampling step `step`.
///
/// # Safety
/// `kernel` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_estimator_new(
    kernel: *const DeconvKernel,
    alpha: f64,
    step: f64,
    out: *mut *mut DeconvEstimator,
) -> DeconvStatus {
    guard(|| {
        let k = handle(kernel, "kernel")?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(DeconvError::DivisionByZero.into());
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {step}")));
        }
        write_out(
            out,
            DeconvEstimator {
                kernel: k.0.clone(),
                config: RecursiveConfig::manual(alpha, step),
                first: None,
                state: None,
            },
        )
    })
}

/// Feeds one sample. Writes the estimates it releases into `values` (room
/// for two) and their number into `count`: none for the first sample, `v_0`
/// and `v_1` for the second, one per sample afterwards.
///
/// # Safety
/// `estimator` must be a live handle; `values` must hold two doubles and
/// `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_estimator_push(
    estimator: *mut DeconvEstimator,
    xi: f64,
    values: *mut f64,
    count: *mut usize,
) -> DeconvStatus {
    guard(|| {
        let est = estimator.as_mut().ok_or_else(|| null("estimator"))?;
        let count = count.as_mut().ok_or_else(|| null("count"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        let mut released = Vec::with_capacity(2);
        let state = match (est.state.take(), est.first) {
            (Some(s), _) => s,
            (None, None) => {
                est.first = Some(xi);
                *count = 0;
                return Ok(());
            }
            (None, Some(xi0)) => {
                let s = EstimatorState::bootstrap(xi0, xi, est.config.step)?;
                released.push(s.v_history()[0]);
                s
            }
        };
        let (next, v) = recursive_step(state, xi, &est.kernel, &est.config)?;
        est.state = Some(next);
        released.push(v);
        ptr::copy_nonoverlapping(released.as_ptr(), values, released.len());
        *count = released.len();
        Ok(())
    })
}

/// # Safety
/// `estimator` must come from [`deconv_estimator_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn deconv_estimator_free(estimator: *mut DeconvEstimator) {
    free_handle(estimator)
}

/// Least-squares slope of `log error` against `log delta` over per-delta
/// medians; `pass` when within `tolerance` of `theoretical`.
///
/// # Safety
/// `deltas` and `errors` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn deconv_fit_rate(
    deltas: *const f64,
    errors: *const f64,
    len: usize,
    theoretical: f64,
    tolerance: f64,
    out: *mut DeconvRateFit,
) -> DeconvStatus {
    guard(|| {
        let d = slice_arg(deltas, len, "deltas")?;
        let e = slice_arg(errors, len, "errors")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let points: Vec<(f64, f64)> = d.iter().copied().zip(e.iter().copied()).collect();
        let fit = fit_rate(&points, theoretical, tolerance)?;
        *out = DeconvRateFit {
            slope: fit.slope,
            intercept: fit.intercept,
            stderr_slope: fit.stderr,
            theoretical_exponent: fit.theoretical_exponent,
            pass: fit.pass,
        };
        Ok(())
    })
}
