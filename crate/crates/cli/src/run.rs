//! Experiment orchestration.
//!
//! A run writes everything into the configured output directory:
//!
//! - `config`: the fully resolved configuration
//! - `trace_<tag>.csv`: per-episode training statistics of one run, and
//!   `trace_<setting>_mean.csv` averaged over the repeats
//! - `terminal_<tag>.csv`: positions at the end of the last training episode
//! - `belief_<tag>_e<n>.csv`: belief at the final time index after episode `n`
//! - experiment-specific evaluation files (paths, step rewards, oracle traces)
//! - `summary`: `key = value` metrics with stable keys
//! - `plot/`: whitespace-delimited series from [`crate::plotdata`]
//!
//! Run `r` of a setting uses seed `seed + r`. No file depends on anything
//! but the configuration, so reruns are byte-identical.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mfplay::envs::{EnvError, EnvSpec, Point};
use mfplay::experiments::{
    basin_fractions, early_late_means, greedy_policy, mean_path, path_deviation, path_tracer, simulate,
    stationary_stats,
};
use mfplay::learner::{
    convergence_metrics, episode_seed, mean_pairwise_distance, mix, rollout, train_with, LearnerError, TrainState, Trace,
};
use mfplay::oracle::potential::random_game;
use mfplay::oracle::{
    fictitious_play, lqr_analytic, loglog_slope, monotone_ring, potential_identity_check, scaling_csv,
    scaling_experiment, GameError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, Experiment, RunConfig};
use crate::plotdata::{emit_plotdata, PlotError};

/// Episodes in the stabilization window.
pub const STABILIZATION_WINDOW: usize = 200;
/// First time index counted as stationary in the regulator game.
pub const STATIONARY_FROM: usize = 10;
/// Stream that separates evaluation noise from training noise.
pub const EVAL_STREAM: u64 = 0x0e7a_1000;
pub const BIMODAL_PEAKS: [Point; 2] = [[-1.0, 0.0], [0.0, 0.0]];

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error("run {tag} {error}")]
    Diverged { tag: String, error: LearnerError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Oracle(#[from] GameError),
    #[error(transparent)]
    Plot(#[from] PlotError),
}

impl RunError {
    /// 2 for configuration problems, 3 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Diverged { .. } => 3,
            _ => 1,
        }
    }
}

impl From<EnvError> for RunError {
    fn from(e: EnvError) -> Self {
        RunError::Setup(e.to_string())
    }
}

/// Ordered `key = value` metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path, source })
    }
}

/// Runs the configured experiment, writes its artifacts, and returns the
/// summary. A diverged run still leaves its partial trace and a summary
/// with `status = diverged`.
pub fn run(config: &RunConfig) -> Result<Summary, RunError> {
    let out = Output::create(&config.output)?;
    out.write("config", &config.to_string())?;
    let mut summary = Summary::default();
    summary.push("experiment", config.experiment.name());
    summary.push("seed", config.seed);
    let result = match config.experiment {
        Experiment::Congestion | Experiment::CongestionBimodal => run_congestion(config, &out, &mut summary),
        Experiment::Demand => run_demand(config, &out, &mut summary),
        Experiment::Lqr => run_lqr(config, &out, &mut summary),
        Experiment::OracleFp => run_oracle_fp(config, &out, &mut summary),
        Experiment::OracleScaling => run_oracle_scaling(config, &out, &mut summary),
        Experiment::OraclePotential => run_oracle_potential(config, &out, &mut summary),
    };
    match result {
        Ok(()) => {
            summary.push("status", "ok");
            out.write("summary", &summary.to_string())?;
            emit_plotdata(&out.dir)?;
            Ok(summary)
        }
        Err(e) => {
            let status = if matches!(e, RunError::Diverged { .. }) { "diverged" } else { "failed" };
            summary.push("status", status);
            out.write("summary", &summary.to_string())?;
            Err(e)
        }
    }
}

struct Trained {
    state: TrainState,
    trace: Trace,
    terminal: Vec<Point>,
}

/// Trains one run, writing its trace, terminal positions, and belief
/// snapshots under `tag`.
fn train_run(config: &RunConfig, spec: &EnvSpec, seed: u64, tag: &str, out: &Output) -> Result<Trained, RunError> {
    let lc = config.learner_config(seed);
    lc.validate().map_err(|e| RunError::Setup(e.to_string()))?;
    let every = config.snapshot_every;
    let mut terminal = Vec::new();
    let mut write_error = None;
    let result = train_with(spec, &lc, |state, roll, rec| {
        let last = rec.episode + 1 == lc.episodes;
        if last {
            terminal = roll.log.terminal_positions();
        }
        if every > 0 && ((rec.episode + 1) % every == 0 || last) && write_error.is_none() {
            let grid = state.beliefs[spec.horizon].average().to_csv();
            write_error = out.write(&format!("belief_{tag}_e{}.csv", rec.episode + 1), &grid).err();
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let (state, trace) = match result {
        Ok(done) => done,
        Err(failure) => {
            out.write(&format!("trace_{tag}.csv"), &failure.trace.to_csv())?;
            return Err(match failure.error {
                error @ LearnerError::Diverged { .. } => RunError::Diverged { tag: tag.to_string(), error },
                other => RunError::Setup(other.to_string()),
            });
        }
    };
    if lc.episodes == 0 {
        let roll = rollout(spec, &state, lc.agents, episode_seed(seed, 0)).map_err(|e| RunError::Setup(e.to_string()))?;
        terminal = roll.log.terminal_positions();
    }
    out.write(&format!("trace_{tag}.csv"), &trace.to_csv())?;
    out.write(&format!("terminal_{tag}.csv"), &points_csv(&terminal))?;
    Ok(Trained { state, trace, terminal })
}

fn points_csv(points: &[Point]) -> String {
    let mut s = String::from("x,y\n");
    for p in points {
        s.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    s
}

fn path_csv(points: &[Point]) -> String {
    let mut s = String::from("k,x,y\n");
    for (k, p) in points.iter().enumerate() {
        s.push_str(&format!("{k},{},{}\n", p[0], p[1]));
    }
    s
}

/// `episode,mean_return` averaged over runs of equal length.
fn mean_trace_csv(traces: &[Trace]) -> String {
    let mut s = String::from("episode,mean_return\n");
    let len = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    for e in 0..len {
        let m = traces.iter().map(|t| t.records[e].mean_return).sum::<f64>() / traces.len() as f64;
        s.push_str(&format!("{e},{m}\n"));
    }
    s
}

fn run_seed(config: &RunConfig, r: usize) -> u64 {
    config.seed.wrapping_add(r as u64)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// One-shot congestion: every alpha of the sweep, `repeats` runs each,
/// starting from the first initial mean.
fn run_congestion(config: &RunConfig, out: &Output, summary: &mut Summary) -> Result<(), RunError> {
    let bimodal = config.experiment == Experiment::CongestionBimodal;
    summary.push("alphas", join(&config.env.alphas));
    summary.push("repeats", config.repeats);
    let mut dispersions = Vec::new();
    for &alpha in &config.env.alphas {
        let spec = config.env_spec(alpha, config.env.init_means[0])?;
        let (mut disp, mut ratio, mut last, mut basins) = (vec![], vec![], vec![], vec![]);
        let mut traces = Vec::new();
        for r in 0..config.repeats {
            let run = train_run(config, &spec, run_seed(config, r), &format!("a{alpha}_r{r}"), out)?;
            disp.push(mean_pairwise_distance(&run.terminal));
            if let Some(c) = convergence_metrics(&run.trace, STABILIZATION_WINDOW) {
                ratio.push(c.stabilization_ratio());
                last.push(c.window_mean);
            }
            if bimodal {
                basins.push(basin_fractions(&run.terminal, &BIMODAL_PEAKS));
            }
            traces.push(run.trace);
        }
        out.write(&format!("trace_a{alpha}_mean.csv"), &mean_trace_csv(&traces))?;
        let key = |name: &str| format!("alpha.{alpha}.{name}");
        summary.push(key("dispersion"), mean(&disp));
        summary.push(key("stabilization_ratio"), mean(&ratio));
        summary.push(key("stabilization_ratio_max"), ratio.iter().fold(0.0f64, |m, r| m.max(*r)));
        summary.push(key("final_return"), mean(&last));
        if bimodal {
            let left: Vec<f64> = basins.iter().map(|b| b[0]).collect();
            let right: Vec<f64> = basins.iter().map(|b| b[1]).collect();
            summary.push(key("basin_left"), mean(&left));
            summary.push(key("basin_right"), mean(&right));
            let smallest = basins.iter().map(|b| b[0].min(b[1])).fold(f64::INFINITY, f64::min);
            summary.push(key("basin_min"), smallest);
        }
        dispersions.push(mean(&disp));
    }
    if !bimodal {
        summary.push("dispersion_increasing", dispersions.windows(2).all(|w| w[1] > w[0]));
    }
    Ok(())
}

/// Demand game: one setting per initial mean. Each trained policy is
/// evaluated greedily next to the path tracer on identical noise.
fn run_demand(config: &RunConfig, out: &Output, summary: &mut Summary) -> Result<(), RunError> {
    let alpha = config.env.alphas[0];
    summary.push("repeats", config.repeats);
    let spec0 = config.env_spec(alpha, config.env.init_means[0])?;
    let path = spec0.demand_path().expect("demand spec").clone();
    let points = (0..=spec0.horizon).map(|k| path.position(k as f64)).collect::<Result<Vec<_>, _>>()?;
    out.write("demand_path.csv", &path_csv(&points))?;
    let (mut all_learned, mut all_tracer, mut worst_dev) = (vec![], vec![], 0.0f64);
    for (i, &init) in config.env.init_means.iter().enumerate() {
        let spec = config.env_spec(alpha, init)?;
        let (mut learned, mut tracer, mut dev, mut first, mut late) = (vec![], vec![], vec![], vec![], vec![]);
        let mut traces = Vec::new();
        for r in 0..config.repeats {
            let seed = run_seed(config, r);
            let tag = format!("i{i}_r{r}");
            let run = train_run(config, &spec, seed, &tag, out)?;
            let eval_seed = mix(seed, EVAL_STREAM);
            let setup = |e: LearnerError| RunError::Setup(e.to_string());
            let g = simulate(&spec, config.eval_agents, eval_seed, greedy_policy(&run.state)).map_err(setup)?;
            let t = simulate(&spec, config.eval_agents, eval_seed, path_tracer(&spec)?).map_err(setup)?;
            out.write(&format!("meanpath_{tag}.csv"), &path_csv(&mean_path(&g.log)))?;
            let (gs, ts) = (g.log.mean_step_rewards(), t.log.mean_step_rewards());
            let mut steps = String::from("k,learned,tracer\n");
            for (k, (a, b)) in gs.iter().zip(&ts).enumerate() {
                steps.push_str(&format!("{k},{a},{b}\n"));
            }
            out.write(&format!("steps_{tag}.csv"), &steps)?;
            learned.push(g.log.mean_return);
            tracer.push(t.log.mean_return);
            dev.push(path_deviation(&g.log, &path, 1)?);
            first.push(gs.first().copied().unwrap_or(0.0));
            late.push(early_late_means(&gs, gs.len() / 2).1);
            traces.push(run.trace);
        }
        out.write(&format!("trace_i{i}_mean.csv"), &mean_trace_csv(&traces))?;
        let key = |name: &str| format!("init.{i}.{name}");
        summary.push(key("mean"), format!("{},{}", init[0], init[1]));
        summary.push(key("learned_return"), mean(&learned));
        summary.push(key("tracer_return"), mean(&tracer));
        summary.push(key("path_deviation"), mean(&dev));
        summary.push(key("first_step_reward"), mean(&first));
        summary.push(key("late_reward"), mean(&late));
        worst_dev = dev.iter().fold(worst_dev, |m, d| m.max(*d));
        all_learned.extend(learned);
        all_tracer.extend(tracer);
    }
    summary.push("learned_return", mean(&all_learned));
    summary.push("tracer_return", mean(&all_tracer));
    summary.push("path_deviation_max", worst_dev);
    Ok(())
}

/// Regulator game: learned stationary statistics next to the Riccati
/// solution.
fn run_lqr(config: &RunConfig, out: &Output, summary: &mut Summary) -> Result<(), RunError> {
    let spec = config.env_spec(config.env.alphas[0], config.env.init_means[0])?;
    let (mut mx, mut my, mut vx, mut vy) = (vec![], vec![], vec![], vec![]);
    let mut traces = Vec::new();
    for r in 0..config.repeats {
        let seed = run_seed(config, r);
        let tag = format!("r{r}");
        let run = train_run(config, &spec, seed, &tag, out)?;
        let g = simulate(&spec, config.eval_agents, mix(seed, EVAL_STREAM), greedy_policy(&run.state))
            .map_err(|e| RunError::Setup(e.to_string()))?;
        out.write(&format!("meanpath_{tag}.csv"), &path_csv(&mean_path(&g.log)))?;
        out.write(&format!("eval_terminal_{tag}.csv"), &points_csv(&g.log.terminal_positions()))?;
        let (m, v) = stationary_stats(&g.log, STATIONARY_FROM);
        mx.push(m[0]);
        my.push(m[1]);
        vx.push(v[0]);
        vy.push(v[1]);
        traces.push(run.trace);
    }
    out.write("trace_mean.csv", &mean_trace_csv(&traces))?;
    let learned_mean = [mean(&mx), mean(&my)];
    let learned_var = [mean(&vx), mean(&vy)];
    summary.push("learned_mean_x", learned_mean[0]);
    summary.push("learned_mean_y", learned_mean[1]);
    summary.push("learned_var_x", learned_var[0]);
    summary.push("learned_var_y", learned_var[1]);
    match lqr_analytic(&spec) {
        Ok(sol) => {
            summary.push("analytic_mean_x", sol.mean[0]);
            summary.push("analytic_mean_y", sol.mean[1]);
            summary.push("analytic_var_x", sol.variance[0]);
            summary.push("analytic_var_y", sol.variance[1]);
            summary.push("analytic_gain", sol.gain[0][0]);
            let mean_err = (0..2).map(|i| (learned_mean[i] - sol.mean[i]).abs()).fold(0.0, f64::max);
            let var_err = (0..2).map(|i| (learned_var[i] / sol.variance[i] - 1.0).abs()).fold(0.0, f64::max);
            summary.push("mean_error", mean_err);
            summary.push("var_rel_error", var_err);
        }
        Err(e) => summary.push("analytic_error", e),
    }
    Ok(())
}

fn run_oracle_fp(config: &RunConfig, out: &Output, summary: &mut Summary) -> Result<(), RunError> {
    let fp = fictitious_play(&monotone_ring(), config.oracle.iterations)?;
    out.write("exploitability.csv", &fp.trace_csv())?;
    let running = fp.running_min();
    summary.push("iterations", config.oracle.iterations);
    summary.push("final_exploitability", fp.exploitability.last().copied().unwrap_or(f64::NAN));
    summary.push("min_exploitability", running.last().copied().unwrap_or(f64::NAN));
    match fp.exploitability.iter().position(|&e| e < 1e-3) {
        Some(i) => summary.push("first_below_1e-3", i + 1),
        None => summary.push("first_below_1e-3", "none"),
    }
    Ok(())
}

fn run_oracle_scaling(config: &RunConfig, out: &Output, summary: &mut Summary) -> Result<(), RunError> {
    let game = monotone_ring();
    let policy = fictitious_play(&game, config.oracle.iterations)?.policy;
    let rows = scaling_experiment(&game, &policy, &config.oracle.sizes, config.oracle.trials, config.seed)?;
    out.write("scaling.csv", &scaling_csv(&rows))?;
    summary.push("trials", config.oracle.trials);
    for r in &rows {
        summary.push(format!("gap.{}", r.agents), r.mean);
    }
    match loglog_slope(&rows) {
        Some(s) => summary.push("slope", s),
        None => summary.push("slope", "none"),
    }
    Ok(())
}

fn run_oracle_potential(config: &RunConfig, _out: &Output, summary: &mut Summary) -> Result<(), RunError> {
    let o = &config.oracle;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let game = random_game(&mut rng, o.states, o.actions, o.horizon);
    let worst = potential_identity_check(&game, o.players, o.samples, &mut rng)?;
    summary.push("players", o.players);
    summary.push("samples", o.samples);
    summary.push("max_discrepancy", worst);
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_with;

    fn quick(experiment: &str, dir: &Path, extra: &[&str]) -> RunConfig {
        let mut sets: Vec<String> = vec![format!("output={}", dir.display())];
        sets.extend(extra.iter().map(|s| s.to_string()));
        parse_config_with(&format!("experiment={experiment}"), &sets).unwrap()
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::default();
        s.push("a", 1.5);
        s.push("b.c", "x,y");
        assert_eq!(Summary::parse(&s.to_string()), s);
        assert_eq!(s.get_f64("a"), Some(1.5));
        assert_eq!(s.get("missing"), None);
    }

    #[test]
    fn mean_trace_averages_runs() {
        let mk = |v: &[f64]| Trace {
            records: v
                .iter()
                .enumerate()
                .map(|(i, &r)| mfplay::learner::EpisodeRecord {
                    episode: i,
                    mean_return: r,
                    belief_drift: 0.0,
                    belief_step: 0.0,
                    actor_grad_norm: 0.0,
                    critic_loss: 0.0,
                    actor_step_norm: 0.0,
                    critic_step_norm: 0.0,
                })
                .collect(),
        };
        let csv = mean_trace_csv(&[mk(&[1.0, 2.0]), mk(&[3.0, 6.0])]);
        assert_eq!(csv, "episode,mean_return\n0,2\n1,4\n");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Setup("x".into()).exit_code(), 2);
        let d = RunError::Diverged { tag: "r0".into(), error: LearnerError::Diverged { episode: 3 } };
        assert_eq!(d.exit_code(), 3);
        assert_eq!(d.to_string(), "run r0 diverged at episode 3");
    }

    #[test]
    fn small_congestion_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let c = quick(
            "congestion",
            dir.path(),
            &["agents=20", "episodes=6", "repeats=2", "env.alpha=1,2", "snapshot_every=3", "learner.hidden=4"],
        );
        let s = run(&c).unwrap();
        assert_eq!(s.get("status"), Some("ok"));
        for f in ["trace_a1_r0.csv", "trace_a2_r1.csv", "trace_a1_mean.csv", "terminal_a2_r0.csv", "belief_a1_r0_e3.csv", "belief_a1_r0_e6.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(s.get_f64("alpha.2.dispersion").is_some());
        assert!(s.get("dispersion_increasing").is_some());
        let terminal = fs::read_to_string(dir.path().join("terminal_a1_r0.csv")).unwrap();
        assert_eq!(terminal.lines().count(), 21);
    }

    #[test]
    fn divergence_leaves_partial_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let c = quick(
            "lqr",
            dir.path(),
            &["agents=5", "episodes=50", "learner.hidden=4", "learner.divergence_limit=1e-9", "snapshot_every=0"],
        );
        let err = run(&c).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let s = Summary::parse(&fs::read_to_string(dir.path().join("summary")).unwrap());
        assert_eq!(s.get("status"), Some("diverged"));
        assert!(dir.path().join("trace_r0.csv").exists());
    }

    #[test]
    fn oracle_potential_summary() {
        let dir = tempfile::tempdir().unwrap();
        let s = run(&quick("oracle-potential", dir.path(), &[])).unwrap();
        assert!(s.get_f64("max_discrepancy").unwrap() < 1e-12);
    }
}
