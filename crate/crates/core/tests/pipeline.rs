use mfplay::envs::EnvSpec;
use mfplay::experiments::{greedy_policy, path_deviation, path_tracer, simulate, stationary_stats};
use mfplay::learner::{convergence_metrics, train, train_with, LearnerConfig};
use mfplay::meanfield::MASS_TOLERANCE;
use mfplay::oracle::potential::random_game;
use mfplay::oracle::{
    exploitability, fictitious_play, induced_flow, lqr_analytic, monotone_ring, nplayer_gap, potential_identity_check,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(agents: usize, episodes: usize, seed: u64) -> LearnerConfig {
    LearnerConfig { agents, episodes, seed, hidden: 16, actor_lr: 1e-3, critic_lr: 1e-3, ..Default::default() }
}

#[test]
fn every_grid_stays_normalized_through_training() {
    let spec = EnvSpec::demand([-0.2, 0.0], 2.0);
    let mut checked = 0;
    let (state, trace) = train_with(&spec, &small(40, 15, 1), |state, roll, _| {
        for g in &roll.grids {
            assert!((g.total_mass() - 1.0).abs() < MASS_TOLERANCE);
            checked += 1;
        }
        for b in &state.beliefs {
            assert!((b.average().total_mass() - 1.0).abs() < MASS_TOLERANCE);
        }
    })
    .unwrap();
    assert_eq!(checked, 15 * 31);
    assert_eq!(trace.records.len(), 15);
    assert!(state.beliefs.iter().all(|b| b.count() == 15));
}

#[test]
fn regulator_learning_moves_towards_the_riccati_solution() {
    let spec = EnvSpec::lqr();
    let (state, trace) = train(&spec, &small(50, 300, 2)).unwrap();
    let r = trace.mean_returns();
    let early = r[..20].iter().sum::<f64>() / 20.0;
    let late = r[r.len() - 20..].iter().sum::<f64>() / 20.0;
    assert!(late > early, "{early} -> {late}");
    let sol = lqr_analytic(&spec).unwrap();
    let eval = simulate(&spec, 500, 7, greedy_policy(&state)).unwrap();
    let (m, _) = stationary_stats(&eval.log, 10);
    let start = ((spec.init_mean[0] - sol.mean[0]).powi(2) + (spec.init_mean[1] - sol.mean[1]).powi(2)).sqrt();
    let end = ((m[0] - sol.mean[0]).powi(2) + (m[1] - sol.mean[1]).powi(2)).sqrt();
    assert!(end < start, "{end} vs {start}");
}

#[test]
fn tracer_follows_the_path_up_to_noise() {
    let mut spec = EnvSpec::demand([-0.6, 0.3], 0.0);
    spec.init_std = 0.0;
    spec.dynamics.sigma1 = 0.0;
    let roll = simulate(&spec, 5, 0, path_tracer(&spec).unwrap()).unwrap();
    assert!(path_deviation(&roll.log, spec.demand_path().unwrap(), 1).unwrap() < 1e-12);
}

#[test]
fn convergence_summary_of_a_real_trace() {
    let (_, trace) = train(&EnvSpec::congestion(1.0), &small(100, 60, 3)).unwrap();
    let c = convergence_metrics(&trace, 20).unwrap();
    assert_eq!(c.window, 20);
    assert_eq!(c.belief_drift.len(), 60);
    assert!(c.return_range >= c.window_std);
}

#[test]
fn oracle_equilibrium_and_finite_populations() {
    let game = monotone_ring();
    let fp = fictitious_play(&game, 300).unwrap();
    assert!(exploitability(&game, &fp.policy).unwrap() < 2e-3);
    let flow = induced_flow(&game, &fp.policy).unwrap();
    assert!(flow.distance(&fp.flow) < 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g16 = nplayer_gap(&game, &fp.policy, 16, 200, &mut rng).unwrap();
    let g1024 = nplayer_gap(&game, &fp.policy, 1024, 200, &mut rng).unwrap();
    assert!(g1024.mean < g16.mean);
}

#[test]
fn potential_identity_on_several_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (players, states, horizon) in [(2, 2, 1), (2, 3, 2), (3, 2, 2)] {
        let game = random_game(&mut rng, states, 2, horizon);
        assert!(potential_identity_check(&game, players, 10, &mut rng).unwrap() < 1e-12);
    }
}
