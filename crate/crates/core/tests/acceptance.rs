//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deconv_core::grid::{ContourSpec, Grid, NoisyData, SampledSignal};
use deconv_core::harness::config::Method;
use deconv_core::harness::sweep::{evaluate, run_sweep, RateCheck, SweepPlan};
use deconv_core::kernel::KernelSpec;
use deconv_core::probe::{resolvent_bound_probe, sector_check};
use deconv_core::problems::{make_problem, KernelId, ProblemSpec, TruthId};
use deconv_core::quadrature::convolve;
use deconv_core::recursive::{epsilon_alpha_probe, run_samples};
use deconv_core::splitting::{abel_apply_inverse, diff_regularizer, volterra2_solve, SplitConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 difference bound, 200 random pairs", Duration::from_secs(10), crit_difference_bound),
        ("2 split smooth rate 1/2", Duration::from_secs(60), crit_split_rate),
        ("3 filter rate, 0<d<1", Duration::from_secs(120), crit_filter_small_d),
        ("4 filter rate, d>1", Duration::from_secs(120), crit_filter_large_d),
        ("5 filter rate, d=1 log-corrected", Duration::from_secs(120), crit_filter_d_one),
        ("6 recursive rate, d>=a", Duration::from_secs(120), crit_recursive_d_ge_a),
        ("7 recursive rate, d<a", Duration::from_secs(120), crit_recursive_d_lt_a),
        ("8 regularisation bias probe", Duration::from_secs(10), crit_epsilon_probe),
        ("9 sector and resolvent bound", Duration::from_secs(5), crit_sector),
        ("10 oracle equivalences", Duration::from_secs(120), crit_oracles),
        ("11 byte-identical rate CSVs", Duration::from_secs(120), crit_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let started = Instant::now();
        let v = f();
        let elapsed = started.elapsed();
        let in_time = elapsed <= limit;
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.2}s, limit {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

/// `g = a0 + a1 t + sum c_k sin(w_k t + p_k)` with `sum |c_k| w_k^2 = m2`.
struct RandomSmooth {
    a0: f64,
    a1: f64,
    terms: Vec<(f64, f64, f64)>,
}

impl RandomSmooth {
    fn draw(rng: &mut ChaCha8Rng, m2: f64) -> Self {
        let n = rng.gen_range(1..=4);
        let mut terms: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..20.0), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let curvature: f64 = terms.iter().map(|(c, w, _)| c.abs() * w * w).sum();
        let scale = m2 * rng.gen_range(0.5..=1.0) / curvature;
        terms.iter_mut().for_each(|t| t.0 *= scale);
        Self {
            a0: rng.gen_range(-1.0..1.0),
            a1: rng.gen_range(-1.0..1.0),
            terms,
        }
    }

    fn value(&self, t: f64) -> f64 {
        self.a0 + self.a1 * t + self.terms.iter().map(|(c, w, p)| c * (w * t + p).sin()).sum::<f64>()
    }

    fn slope(&self, t: f64) -> f64 {
        self.a1 + self.terms.iter().map(|(c, w, p)| c * w * (w * t + p).cos()).sum::<f64>()
    }
}

/// Signs alternate in blocks of `block` nodes from a random phase, so that
/// every difference across one block sees the full `2 delta`.
fn adversarial_data(clean: &SampledSignal, delta: f64, block: usize, rng: &mut ChaCha8Rng) -> NoisyData {
    let phase = rng.gen_range(0..2 * block);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let values = clean
        .values()
        .iter()
        .enumerate()
        .map(|(j, &g)| {
            let s = if ((j + phase) / block).is_multiple_of(2) { sign } else { -sign };
            let mut v = g + s * delta;
            while (v - g).abs() > delta {
                v = if v > g { v.next_down() } else { v.next_up() };
            }
            v
        })
        .collect();
    NoisyData {
        noisy: SampledSignal::new(*clean.grid(), values).unwrap(),
        clean: clean.clone(),
        delta,
        seed: 0,
    }
}

fn crit_difference_bound() -> Verdict {
    let m2 = 1.0;
    let grid = Grid::new(1.0, 10_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let g = RandomSmooth::draw(&mut rng, m2);
        let clean = SampledSignal::from_fn(grid, |t| g.value(t)).unwrap();
        let g_max = clean.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for delta in [1e-3, 1e-4, 1e-5, 1e-6] {
            let stride = (2.0 * (delta / m2).sqrt() / grid.step()).round() as usize;
            let data = adversarial_data(&clean, delta, stride, &mut rng);
            let d = diff_regularizer(&data, m2).unwrap();
            let h = grid.step() * (grid.len() - d.valid_len()) as f64;
            // floor: the gap from rounding h to the grid plus rounding error
            let floor = 0.5 * (m2 * h / 2.0 + 2.0 * delta / h - 2.0 * (m2 * delta).sqrt())
                + 4.0 * f64::EPSILON * g_max / h;
            let bound = 2.0 * (m2 * delta).sqrt() + 2.0 * floor;
            let err = (0..d.valid_len())
                .map(|j| (d.values()[j] - g.slope(grid.node(j))).abs())
                .fold(0.0, f64::max);
            worst = worst.max(err / bound);
            if err > bound {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0,
        format!("{violations} violations of 800, worst error/bound {worst:.4}"),
    )
}

fn rate_sweep(spec: ProblemSpec, method: Method, deltas: &[f64], trials: usize, check: RateCheck) -> Verdict {
    let mut plan = SweepPlan::new(spec, method, deltas.to_vec());
    plan.trials = trials;
    let (_, table) = match run_sweep(&plan) {
        Ok(t) => t,
        Err(e) => return verdict(false, format!("sweep failed: {e}")),
    };
    let failures = table.failures().count();
    match evaluate(&table, check, 0.15) {
        Ok(o) => verdict(o.pass && failures == 0, format!("{}; {failures} failed rows", o.summary)),
        Err(e) => verdict(false, format!("fit failed: {e}")),
    }
}

fn crit_split_rate() -> Verdict {
    let spec = ProblemSpec::new(KernelId::ExpDecay, TruthId::PolyBoundedW2).with_grid(1.0, 5000);
    rate_sweep(
        spec,
        Method::SplitSmooth,
        &[1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
        5,
        RateCheck::PowerLaw { exponent: 0.5 },
    )
}

const FILTER_DELTAS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

fn crit_filter_small_d() -> Verdict {
    // u = t^(1/2) / Gamma(3/2), U = lambda^(-3/2): d = 1/2, a = 1
    let spec = ProblemSpec::new(KernelId::ExpDecay, TruthId::Power { exponent: 0.5 }).with_grid(1.0, 2000);
    rate_sweep(spec, Method::Filter, &FILTER_DELTAS, 3, RateCheck::PowerLaw { exponent: 0.5 / 2.5 })
}

fn crit_filter_large_d() -> Verdict {
    let spec = ProblemSpec::new(KernelId::ExpDecay, TruthId::PolyBoundedW2).with_grid(1.0, 2000);
    rate_sweep(spec, Method::Filter, &FILTER_DELTAS, 3, RateCheck::PowerLaw { exponent: 1.0 / 3.0 })
}

fn crit_filter_d_one() -> Verdict {
    let spec = ProblemSpec::new(KernelId::ExpDecay, TruthId::Sine).with_grid(1.0, 2000);
    // envelopes of the d = 0.9 and d = 1.1 branches for a = 1
    let check = RateCheck::LogCorrected {
        low: 0.9 / 2.9,
        high: 1.0 / 3.0,
    };
    rate_sweep(spec, Method::Filter, &FILTER_DELTAS, 3, check)
}

const RECURSIVE_DELTAS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

fn crit_recursive_d_ge_a() -> Verdict {
    let spec = ProblemSpec::new(KernelId::ExpDecay, TruthId::Sine)
        .with_grid(1.0, 100_000)
        .with_oversample(2);
    rate_sweep(spec, Method::Recursive, &RECURSIVE_DELTAS, 3, RateCheck::PowerLaw { exponent: 0.5 })
}

fn crit_recursive_d_lt_a() -> Verdict {
    let spec = ProblemSpec::new(KernelId::UnitConvExp, TruthId::Sine)
        .with_grid(1.0, 100_000)
        .with_oversample(2);
    rate_sweep(spec, Method::Recursive, &RECURSIVE_DELTAS, 3, RateCheck::PowerLaw { exponent: 1.0 / 3.0 })
}

fn crit_epsilon_probe() -> Verdict {
    let problem = make_problem(ProblemSpec::new(KernelId::ExpDecay, TruthId::Const).with_grid(1.0, 2000)).unwrap();
    let contour = ContourSpec::for_horizon(1.0, 1000.0).unwrap();
    let alphas: Vec<f64> = (0..=6).map(|i| 10f64.powi(-i)).collect();
    let eps = match epsilon_alpha_probe(&problem.kernel, &problem.u_true, &alphas, &contour) {
        Ok(e) => e,
        Err(e) => return verdict(false, e.to_string()),
    };
    let monotone = eps.windows(2).all(|w| w[1] <= 1.01 * w[0]);
    let ratio = eps[6] / eps[0];
    verdict(
        monotone && ratio <= 0.1,
        format!("non-increasing {monotone}, eps(1e-6)/eps(1) = {ratio:.3e}"),
    )
}

fn crit_sector() -> Verdict {
    let kernels = [
        KernelSpec::unit(),
        KernelSpec::exp_decay(),
        KernelSpec::abel(0.25).unwrap(),
        KernelSpec::abel(0.5).unwrap(),
        KernelSpec::abel(0.75).unwrap(),
        KernelSpec::abel_plus_smooth(0.5, 0.1).unwrap(),
    ];
    let contour = ContourSpec::for_horizon(1.0, 1e4).unwrap();
    let mut worst_re = f64::INFINITY;
    let mut worst_bound = 0.0f64;
    for k in &kernels {
        let report = sector_check(k, &contour, PI / 12.0, 1.0).unwrap();
        worst_re = worst_re.min(report.min_re);
        for i in 0..=8 {
            let b = resolvent_bound_probe(k, 10f64.powi(-i), &contour).unwrap();
            worst_bound = worst_bound.max(b);
        }
    }
    verdict(
        worst_re >= -1e-10 && worst_bound <= 1.0 + 1e-10,
        format!("min Re K {worst_re:.3e}, max resolvent bound {worst_bound:.12}"),
    )
}

/// `w_l` of the recursion in closed form.
fn exact_lag_weights(k: &str, n: usize, h: f64) -> Vec<f64> {
    (1..=n)
        .map(|l| {
            let (a, b) = ((l - 1) as f64 * h, l as f64 * h);
            match k {
                "exp" => (-a).exp() - (-b).exp(),
                // t^(-1/2) / Gamma(1/2)
                _ => 2.0 * (b.sqrt() - a.sqrt()) / PI.sqrt(),
            }
        })
        .collect()
}

fn crit_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // the recursion against a direct evaluation of its defining sums
    let mut worst_rec = 0.0f64;
    for (name, k) in [("exp", KernelSpec::exp_decay()), ("abel", KernelSpec::abel(0.5).unwrap())] {
        for _ in 0..5 {
            let n = 500;
            let h = 1.0 / n as f64;
            let alpha = rng.gen_range(0.1..1.0);
            let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w = exact_lag_weights(name, n, h);
            let mut v = vec![(xi[1] - xi[0]) / h];
            for j in 1..n {
                let memory: f64 = (1..=j).map(|l| w[l - 1] * v[j - l]).sum();
                v.push((xi[j] - memory) / alpha);
            }
            let got = run_samples(&xi, &k, alpha, h).unwrap();
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let diff = v.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_rec = worst_rec.max(diff / scale);
        }
    }

    // second-kind solves: residual of the returned solution
    let grid = Grid::new(1.0, 400).unwrap();
    let cfg = SplitConfig::default();
    let mut round_trip_failures = 0;
    let mut worst_residual = 0.0f64;
    for _ in 0..100 {
        let (c1, b1, c2) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.0..5.0), rng.gen_range(-1.0..1.0));
        let s = KernelSpec::regular("random", move |t| c1 * (-b1 * t).exp() + c2 * t);
        let f = RandomSmooth::draw(&mut rng, 5.0);
        let f = SampledSignal::from_fn(grid, |t| f.value(t)).unwrap();
        let w = match volterra2_solve(&s, &f, &cfg) {
            Ok(w) => w,
            Err(_) => {
                round_trip_failures += 1;
                continue;
            }
        };
        let sw = convolve(&s, &w).unwrap();
        let f_norm = f.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let residual = (0..grid.len())
            .map(|j| (w.values()[j] + sw.values()[j] - f.values()[j]).abs())
            .fold(0.0, f64::max);
        let rel = residual / (cfg.volterra_tol * (1.0 + f_norm));
        worst_residual = worst_residual.max(rel);
        if rel > 1.0 {
            round_trip_failures += 1;
        }
    }

    // I^0.3 I^0.4 = I^0.7
    let grid = Grid::new(1.0, 1000).unwrap();
    let mut worst_semigroup = 0.0f64;
    for _ in 0..10 {
        let f = RandomSmooth::draw(&mut rng, 10.0);
        let f = SampledSignal::from_fn(grid, |t| f.value(t)).unwrap();
        let lhs = abel_apply_inverse(&abel_apply_inverse(&f, 0.4).unwrap(), 0.3).unwrap();
        let rhs = abel_apply_inverse(&f, 0.7).unwrap();
        worst_semigroup = worst_semigroup.max(lhs.sup_distance(&rhs, 0..grid.len()).unwrap());
    }

    verdict(
        worst_rec <= 1e-12 && round_trip_failures == 0 && worst_semigroup <= 1e-3,
        format!(
            "recursion rel diff {worst_rec:.2e}, {round_trip_failures} of 100 solves over tolerance \
             (worst residual/tol {worst_residual:.2e}), semigroup sup {worst_semigroup:.2e}"
        ),
    )
}

const DETERMINISM_PLAN: &str = r#"
[problem]
kernel = "exp_decay"
truth = "sine"
n_steps = 2000

[sweep]
method = "filter"
deltas = [1e-2, 1e-3, 1e-4, 1e-5]
trials = 3
"#;

fn crit_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    std::fs::write(&plan, DETERMINISM_PLAN).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_deconv"))
            .args(["rates", "--plan"])
            .arg(&plan)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            return verdict(
                false,
                format!("run {run} exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)),
            );
        }
        outputs.push(std::fs::read(out.join("rates.csv")).unwrap());
    }
    let lines = String::from_utf8_lossy(&outputs[0]).lines().count();
    verdict(
        outputs[0] == outputs[1] && lines == 13,
        format!("identical {}, {lines} lines", outputs[0] == outputs[1]),
    )
}
