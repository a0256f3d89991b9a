use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use deconv_core::grid::{NoisyData, SampledSignal};
use deconv_core::harness::config::{load_config, Config, Method};
use deconv_core::harness::report::{write_csv, write_svg};
use deconv_core::harness::sweep::{evaluate, recursive_config, run_method, run_sweep, SweepPlan};
use deconv_core::problems::make_problem;
use deconv_core::recursive::{recursive_step, EstimatorState};

#[derive(Parser)]
#[command(name = "deconv", version, about = "Stable deconvolution of noisy convolution data")]
struct Cli {
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes truth.csv, clean.csv and noisy.csv for a problem.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstructs u and prints `t,u_hat,u_true`.
    Deconvolve {
        #[arg(long, value_enum)]
        method: CliMethod,
        #[arg(long)]
        spec: PathBuf,
        /// Reads one sample per stdin line and prints one estimate per line
        /// (recursive method only).
        #[arg(long)]
        stream: bool,
        /// Noisy data as `t,value` CSV on the problem grid, replacing the
        /// generated data.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Runs a noise sweep and checks the error rate; exits 0 iff it passes.
    Rates {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Fills the runtime_ms column (makes the CSV run-dependent).
        #[arg(long)]
        timings: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMethod {
    Filter,
    Split,
    Abel,
    Recursive,
}

impl From<CliMethod> for Method {
    fn from(m: CliMethod) -> Self {
        match m {
            CliMethod::Filter => Method::Filter,
            CliMethod::Split => Method::SplitSmooth,
            CliMethod::Abel => Method::SplitAbel,
            CliMethod::Recursive => Method::Recursive,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Generate { spec, out } => {
            generate(&load(&spec)?, cli.seed, &out)?;
            Ok(true)
        }
        Command::Deconvolve {
            method,
            spec,
            stream,
            data,
        } => {
            let cfg = load(&spec)?;
            if stream {
                if !matches!(method, CliMethod::Recursive) {
                    bail!("--stream is only available for the recursive method");
                }
                stream_recursive(&cfg, cli.seed)?;
            } else {
                deconvolve(&cfg, method.into(), cli.seed, data.as_deref())?;
            }
            Ok(true)
        }
        Command::Rates {
            plan,
            out,
            format,
            timings,
        } => rates(&load(&plan)?, cli.seed, &out, format, timings),
    }
}

fn load(path: &Path) -> anyhow::Result<Config> {
    load_config(path).with_context(|| format!("reading {}", path.display()))
}

fn write_signal(path: &Path, s: &SampledSignal) -> anyhow::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "t,value")?;
    for (t, v) in s.grid().nodes().zip(s.values()) {
        writeln!(w, "{t},{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn generate(cfg: &Config, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let problem = make_problem(cfg.problem_spec(seed)?)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_signal(&out.join("truth.csv"), &problem.u_true)?;
    write_signal(&out.join("clean.csv"), &problem.data.clean)?;
    write_signal(&out.join("noisy.csv"), &problem.data.noisy)?;
    Ok(())
}

fn read_signal(path: &Path, like: &SampledSignal) -> anyhow::Result<SampledSignal> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('t')) {
            continue;
        }
        let field = line
            .split(',')
            .nth(1)
            .with_context(|| format!("line {}: expected t,value", i + 1))?;
        values.push(
            field
                .trim()
                .parse::<f64>()
                .with_context(|| format!("line {}: bad value '{field}'", i + 1))?,
        );
    }
    if values.len() != like.values().len() {
        bail!(
            "{} has {} samples but the problem grid has {}",
            path.display(),
            values.len(),
            like.values().len()
        );
    }
    Ok(SampledSignal::new(*like.grid(), values)?)
}

fn deconvolve(cfg: &Config, method: Method, seed: Option<u64>, data: Option<&Path>) -> anyhow::Result<()> {
    let problem = make_problem(cfg.problem_spec(seed)?)?;
    let (noisy, known_truth) = match data {
        Some(path) => (
            NoisyData::from_measurement(read_signal(path, &problem.data.noisy)?, problem.spec.delta),
            false,
        ),
        None => (problem.data.clone(), true),
    };
    let out = run_method(method, &noisy, &problem.kernel, &cfg.params())?;
    let mut w = BufWriter::new(io::stdout().lock());
    writeln!(w, "t,u_hat,u_true")?;
    let nodes = problem.u_true.grid().nodes();
    for (j, t) in nodes.enumerate().take(out.estimate.valid_len()) {
        let truth = if known_truth {
            problem.u_true.values()[j].to_string()
        } else {
            String::new()
        };
        writeln!(w, "{t},{},{truth}", out.estimate.values()[j])?;
    }
    w.flush()?;
    Ok(())
}

fn stream_recursive(cfg: &Config, seed: Option<u64>) -> anyhow::Result<()> {
    let problem = make_problem(cfg.problem_spec(seed)?)?;
    let rc = recursive_config(problem.spec.delta, &problem.kernel, &cfg.params())
        .context("recursive parameters: set [recursive] alpha and step, or a positive problem.delta")?;
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut first: Option<f64> = None;
    let mut state: Option<EstimatorState> = None;
    for (i, line) in stdin.lock().lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let xi: f64 = line
            .parse()
            .with_context(|| format!("input line {}: bad sample '{line}'", i + 1))?;
        let current = match (state.take(), first) {
            (Some(s), _) => s,
            (None, None) => {
                first = Some(xi);
                continue;
            }
            (None, Some(xi0)) => {
                let s = EstimatorState::bootstrap(xi0, xi, rc.step)?;
                writeln!(out, "{}", s.v_history()[0])?;
                s
            }
        };
        let (next, v) = recursive_step(current, xi, &problem.kernel, &rc)?;
        writeln!(out, "{v}")?;
        out.flush()?;
        state = Some(next);
    }
    Ok(())
}

fn rates(cfg: &Config, seed: Option<u64>, out: &Path, format: Format, timings: bool) -> anyhow::Result<bool> {
    let plan = SweepPlan::from_config(cfg, seed)?;
    let (problem, table) = run_sweep(&plan)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv_path = out.join("rates.csv");
    let mut w = BufWriter::new(fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?);
    write_csv(&table.rows, timings, &mut w)?;
    w.flush()?;
    for r in table.failures() {
        eprintln!("delta {} seed {}: {}", r.delta, r.seed, r.failure.as_deref().unwrap_or(""));
    }
    let outcome = plan
        .rate_check(&problem.kernel)
        .and_then(|check| evaluate(&table, check, plan.tolerance));
    if format == Format::Svg {
        let svg_path = out.join("rates.svg");
        let mut w = BufWriter::new(fs::File::create(&svg_path).with_context(|| format!("creating {}", svg_path.display()))?);
        write_svg(&table, outcome.as_ref().ok(), &mut w)?;
        w.flush()?;
    }
    match outcome {
        Ok(o) => {
            eprintln!("{}: {}", if o.pass { "PASS" } else { "FAIL" }, o.summary);
            Ok(o.pass)
        }
        Err(e) => {
            eprintln!("FAIL: {e}");
            Ok(false)
        }
    }
}
