//! Experiment harness: configs, noise sweeps, rate fits and reports.

pub mod config;
pub mod fit;
pub mod report;
pub mod sweep;

pub use config::{load_config, parse_config, CheckKind, Config, Method, MethodParams, Norm};
pub use fit::{fit_rate, fit_rate_log_corrected, is_monotone_decreasing, median_by_delta, RateFitResult};
pub use report::{write_csv, write_svg, CSV_HEADER};
pub use sweep::{evaluate, run_method, run_sweep, CheckOutcome, MethodOutput, RateCheck, SweepPlan, SweepRow, SweepTable};
