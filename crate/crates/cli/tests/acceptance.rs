//! Acceptance suite: runs each numbered criterion at its stated tolerance,
//! prints one PASS/FAIL line per criterion, and fails if any criterion does.
//!
//! The long criteria drive the same `run` entry point as the binary, with
//! the default configuration of each experiment.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use mfplay::approx::{GaussianPolicy, Mlp};
use mfplay::envs::{EnvSpec, Point};
use mfplay::learner::{train_with, LearnerConfig};
use mfplay::meanfield::{DensityGrid, MASS_TOLERANCE};
use mfplay::oracle::{fictitious_play, monotone_ring};
use mfplay_cli::{parse_config_with, run, Summary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run_experiment(text: &str, dir: &Path, sets: &[&str]) -> (Summary, Duration) {
    let mut all = vec![format!("output={}", dir.display())];
    all.extend(sets.iter().map(|s| s.to_string()));
    let config = parse_config_with(text, &all).expect("valid config");
    let t = Instant::now();
    let summary = run(&config).unwrap_or_else(|e| panic!("{} run failed: {e}", config.experiment.name()));
    (summary, t.elapsed())
}

fn num(s: &Summary, key: &str) -> f64 {
    s.get_f64(key).unwrap_or_else(|| panic!("summary lacks {key}"))
}

fn lqr_reproduction(dir: &Path) -> Outcome {
    let (s, took) = run_experiment("experiment = lqr", dir, &[]);
    let (mean_err, var_err) = (num(&s, "mean_error"), num(&s, "var_rel_error"));
    let pass = mean_err <= 0.05 && var_err <= 0.25 && took <= Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "mean ({:.4}, {:.4}) vs ({}, {}), variance ({:.5}, {:.5}) vs {:.5} [{:.1}%], {:.0}s",
            num(&s, "learned_mean_x"),
            num(&s, "learned_mean_y"),
            num(&s, "analytic_mean_x"),
            num(&s, "analytic_mean_y"),
            num(&s, "learned_var_x"),
            num(&s, "learned_var_y"),
            num(&s, "analytic_var_x"),
            100.0 * var_err,
            took.as_secs_f64()
        ),
    )
}

/// Criteria 2 and 3 share one sweep over alpha in {1, 2, 3} with 6 repeats.
fn congestion_sweep(dir: &Path) -> (Outcome, Outcome) {
    let (s, took) = run_experiment("experiment = congestion\nenv.alpha = 1.0, 2.0, 3.0", dir, &[]);
    let alphas = ["1", "2", "3"];
    let worst_ratio = alphas.iter().map(|a| num(&s, &format!("alpha.{a}.stabilization_ratio_max"))).fold(0.0, f64::max);
    let per_run = took.as_secs_f64() / 18.0;
    let stab = outcome(
        worst_ratio < 0.1 && per_run <= 900.0,
        format!("worst final-200 std / range over 18 runs = {worst_ratio:.4}, {per_run:.1}s per run"),
    );
    let d: Vec<f64> = alphas.iter().map(|a| num(&s, &format!("alpha.{a}.dispersion"))).collect();
    let mono = outcome(d.windows(2).all(|w| w[1] > w[0]), format!("dispersion {:.4} < {:.4} < {:.4}", d[0], d[1], d[2]));
    (stab, mono)
}

fn bimodal_spread(dir: &Path) -> (Outcome, String) {
    let (s, _) = run_experiment("experiment = congestion-bimodal", dir, &[]);
    let worst = num(&s, "alpha.1.basin_min");
    let main = outcome(
        worst >= 0.2,
        format!(
            "smallest basin over 6 runs {:.3} (mean left {:.3}, right {:.3})",
            worst,
            num(&s, "alpha.1.basin_left"),
            num(&s, "alpha.1.basin_right")
        ),
    );
    let (inst, _) = run_experiment("experiment = congestion-bimodal", &dir.join("instantaneous"), &["learner.belief=instantaneous"]);
    let info = format!(
        "instantaneous-measure ablation: smallest basin {:.3} (mean left {:.3}, right {:.3})",
        num(&inst, "alpha.1.basin_min"),
        num(&inst, "alpha.1.basin_left"),
        num(&inst, "alpha.1.basin_right")
    );
    (main, info)
}

fn demand_behaviour(dir: &Path) -> Outcome {
    let base = "experiment = demand\nrepeats = 1\nenv.init_mean = -0.6,0.3";
    let (free, _) = run_experiment(base, &dir.join("eta0"), &["env.eta=0"]);
    let (costly, _) = run_experiment(base, &dir.join("eta2"), &[]);
    let dev = num(&free, "path_deviation_max");
    let (learned, tracer) = (num(&costly, "learned_return"), num(&costly, "tracer_return"));
    let (first, late) = (num(&costly, "init.0.first_step_reward"), num(&costly, "init.0.late_reward"));
    outcome(
        dev < 0.15 && learned > tracer && first < 0.0 && late > 0.0,
        format!(
            "eta=0 max path distance {dev:.3}; eta=2 return {learned:.3} vs tracer {tracer:.3}, first step {first:.3}, second half {late:.3}"
        ),
    )
}

fn fictitious_play_convergence() -> Outcome {
    let t = Instant::now();
    let fp = fictitious_play(&monotone_ring(), 500).unwrap();
    let took = t.elapsed();
    let running = fp.running_min();
    let monotone = running.windows(2).all(|w| w[1] <= w[0]);
    let last = *running.last().unwrap();
    outcome(
        monotone && last < 1e-3 && took < Duration::from_secs(10),
        format!("running minimum {last:.2e} after 500 iterations, {:.3}s", took.as_secs_f64()),
    )
}

fn potential_identity(dir: &Path) -> Outcome {
    let (s, took) = run_experiment("experiment = oracle-potential", dir, &[]);
    let worst = num(&s, "max_discrepancy");
    outcome(
        worst < 1e-12 && took < Duration::from_secs(1),
        format!("max discrepancy {worst:.2e} over 100 deviations, {:.3}s", took.as_secs_f64()),
    )
}

fn scaling_rate(dir: &Path) -> Outcome {
    let (s, took) = run_experiment("experiment = oracle-scaling", dir, &[]);
    let slope = num(&s, "slope");
    outcome(
        (-0.7..=-0.3).contains(&slope) && took < Duration::from_secs(300),
        format!("log-log slope {slope:.3}, {:.2}s", took.as_secs_f64()),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error of analytic gradients against central differences.
fn gradient_error() -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (seed, (i, hid, o)) in [(2, 64, 2), (3, 64, 1), (4, 8, 1), (1, 5, 3)].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let net = Mlp::init(i, hid, o, &mut rng);
        let x: Vec<f64> = (0..i).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..o).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |n: &Mlp, x: &[f64]| n.forward(x).unwrap().iter().zip(&w).map(|(y, wi)| y * wi).sum::<f64>();
        let (gp, gx) = net.backward(&x, &w).unwrap();
        for p in 0..net.num_params() {
            let (mut up, mut dn) = (net.clone(), net.clone());
            up.params_mut()[p] += h;
            dn.params_mut()[p] -= h;
            let fd = (f(&up, &x) - f(&dn, &x)) / (2.0 * h);
            if fd.abs().max(gp[p].abs()) > 1e-7 {
                worst = worst.max(rel_err(gp[p], fd));
            }
        }
        for j in 0..i {
            let (mut xu, mut xd) = (x.clone(), x.clone());
            xu[j] += h;
            xd[j] -= h;
            worst = worst.max(rel_err(gx[j], (f(&net, &xu) - f(&net, &xd)) / (2.0 * h)));
        }
        let policy = GaussianPolicy::new(net.clone(), 0.1);
        let a: Vec<f64> = (0..o).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = policy.logprob_grad(&x, &a).unwrap();
        for p in 0..net.num_params() {
            let (mut up, mut dn) = (policy.clone(), policy.clone());
            up.mean.params_mut()[p] += h;
            dn.mean.params_mut()[p] -= h;
            let fd = (up.log_prob(&x, &a).unwrap() - dn.log_prob(&x, &a).unwrap()) / (2.0 * h);
            if fd.abs().max(g[p].abs()) > 1e-5 {
                worst = worst.max(rel_err(g[p], fd));
            }
        }
    }
    worst
}

/// Largest mass error over every rollout grid and belief of short runs,
/// plus binned random clouds.
fn mass_error() -> f64 {
    let mut worst = 0.0f64;
    for spec in [EnvSpec::congestion(2.0), EnvSpec::congestion_bimodal(1.0), EnvSpec::demand([-0.2, 0.3], 2.0), EnvSpec::lqr()] {
        let cfg = LearnerConfig { agents: 64, episodes: 5, hidden: 8, ..Default::default() };
        train_with(&spec, &cfg, |state, roll, _| {
            for g in roll.grids.iter().chain(state.beliefs.iter().map(|b| b.average())) {
                worst = worst.max((g.total_mass() - 1.0).abs());
            }
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point> = (0..10_000).map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
        worst = worst.max((DensityGrid::empirical(spec.grid, &pts).unwrap().total_mass() - 1.0).abs());
    }
    worst
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "config") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn numerical_hygiene(dir: &Path) -> Outcome {
    let t = Instant::now();
    let grad = gradient_error();
    let mass = mass_error();
    let text = "experiment = demand\nagents = 50\nepisodes = 20\nrepeats = 2\nsnapshot_every = 5\nenv.init_mean = -0.6,0.3";
    run_experiment(text, &dir.join("a"), &[]);
    run_experiment(text, &dir.join("b"), &[]);
    let (a, b) = (files(&dir.join("a")), files(&dir.join("b")));
    let identical = !a.is_empty() && a == b;
    let took = t.elapsed();
    outcome(
        grad < 1e-4 && mass <= MASS_TOLERANCE && identical && took < Duration::from_secs(120),
        format!(
            "gradient rel. error {grad:.1e}, mass error {mass:.1e}, {} files byte-identical: {identical}, {:.1}s",
            a.len(),
            took.as_secs_f64()
        ),
    )
}

fn report(n: usize, name: &str, o: &Outcome) -> bool {
    println!("criterion {n} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let d = |n: &str| root.path().join(n);
    let mut all = true;

    all &= report(1, "LQR reproduction", &lqr_reproduction(&d("lqr")));
    let (stab, mono) = congestion_sweep(&d("congestion"));
    all &= report(2, "stabilization", &stab);
    all &= report(3, "dispersion monotonicity", &mono);
    let (bimodal, ablation) = bimodal_spread(&d("bimodal"));
    all &= report(4, "bimodal spread", &bimodal);
    println!("  info: {ablation}");
    all &= report(5, "demand-path behaviour", &demand_behaviour(&d("demand")));
    all &= report(6, "fictitious-play convergence", &fictitious_play_convergence());
    all &= report(7, "potential identity", &potential_identity(&d("potential")));
    all &= report(8, "1/sqrt(N) scaling", &scaling_rate(&d("scaling")));
    all &= report(9, "numerical hygiene", &numerical_hygiene(&d("hygiene")));

    if !all {
        eprintln!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
}
