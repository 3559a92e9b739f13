//! Cross-checks against independent computations: BFS distances, a dense
//! simplex, closed-form games and path sampling.

mod common;

use density_deception::deception::Mode;
use density_deception::flow::{flow_program, per_goal};
use density_deception::game::{max_entropy_solution, saddle_gap, solve_zero_sum, AllocationStrategy, UtilityMatrix};
use density_deception::mdp::{sample_paths, Cell};
use density_deception::observer::{path_log_likelihood, ExtReal};
use density_deception::pipeline::{deceptive_prefix, Pipeline, Stage};
use density_deception::prediction::min_expected_time;
use density_deception::scenario::parse_scenario;
use density_deception::solver::{LinearProgram, RowKind, Sense, Solver};

use common::simplex::{self, Outcome};

fn grid_pipeline(last: Stage) -> Pipeline {
    let mut p = Pipeline::new(parse_scenario(common::scenario_path()).unwrap()).unwrap();
    p.run(last).unwrap();
    p
}

#[test]
fn grid_min_time_matches_bfs() {
    let p = grid_pipeline(Stage::Synthesize);
    let world = &p.model.world;
    let dist = common::bfs_distances(world, Cell::new(2, 0));
    let goal_dist: Vec<usize> = world.goal_states().iter().map(|&g| dist[g].unwrap()).collect();
    assert_eq!(goal_dist[..2], [11, 13]);
    let target = p.true_target().unwrap();
    let expected: f64 = target.weights().iter().zip(&goal_dist).map(|(w, &d)| w * d as f64).sum();
    assert!((p.t_min.unwrap() - expected).abs() < 1e-6, "{:?} vs {expected}", p.t_min);
    assert_eq!(p.horizon, Some(5));
}

#[test]
fn flow_lp_agrees_with_simplex() {
    let m = parse_scenario(common::scenario_path()).unwrap().build().unwrap();
    for target in [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.2, 0.3, 0.5]] {
        let (mut lp, _) = flow_program(&m.mdp, &m.partition, &per_goal(&m.partition), &target, Sense::Minimize).unwrap();
        for j in 0..lp.num_vars() {
            lp.set_cost(j, 1.0);
        }
        let Outcome::Optimal { value, .. } = simplex::solve(&lp) else { panic!("simplex failed") };
        let sigma = AllocationStrategy::new(target.to_vec()).unwrap();
        let ours = min_expected_time(&m.mdp, &m.partition, &sigma, &Solver::default()).unwrap();
        assert!((ours - value).abs() < 1e-6, "{ours} vs {value}");
    }
}

fn game_value_lp(u: &UtilityMatrix) -> LinearProgram {
    let k = u.size();
    let mut lp = LinearProgram::new(Sense::Maximize);
    let sigma: Vec<usize> = (0..k).map(|_| lp.add_var(0.0, 0.0)).collect();
    let v = lp.add_var(f64::NEG_INFINITY, 1.0);
    for j in 0..k {
        let mut terms: Vec<(usize, f64)> = (0..k).map(|i| (sigma[i], u.get(i, j))).collect();
        terms.push((v, -1.0));
        lp.add_row(terms, RowKind::Ge, 0.0);
    }
    lp.add_row(sigma.iter().map(|&s| (s, 1.0)).collect(), RowKind::Eq, 1.0);
    lp
}

#[test]
fn game_values_agree_with_simplex() {
    let matrices = [
        vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]],
        vec![vec![3.0, -1.0], vec![-2.0, 1.0]],
        vec![vec![0.0, 0.0, 6.0], vec![0.0, 2.0, 0.0], vec![-1.0, 0.0, 0.0]],
        vec![vec![4.0, 2.0, 1.0], vec![5.0, 3.0, 2.0], vec![0.0, 7.0, 1.5]],
    ];
    for entries in matrices {
        let u = UtilityMatrix::new(entries).unwrap();
        let Outcome::Optimal { value, .. } = simplex::solve(&game_value_lp(&u)) else { panic!("simplex failed") };
        let sol = solve_zero_sum(&u).unwrap();
        assert!((sol.value - value).abs() < 1e-6, "{} vs {value}", sol.value);
        assert!(saddle_gap(&u, &sol).unwrap() < 1e-6);
    }
}

#[test]
fn rock_paper_scissors_is_uniform() {
    let u = UtilityMatrix::new(vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]]).unwrap();
    let sol = max_entropy_solution(&u).unwrap();
    for w in sol.team1.weights().iter().chain(sol.team2.weights()) {
        assert!((w - 1.0 / 3.0).abs() < 1e-6);
    }
}

#[test]
fn two_by_two_mixed_equilibrium() {
    // Closed form for a 2x2 game without a saddle point.
    let (a, b, c, d) = (3.0, -1.0, -2.0, 1.0);
    let u = UtilityMatrix::new(vec![vec![a, b], vec![c, d]]).unwrap();
    let den = a - b - c + d;
    let p = (d - c) / den;
    let q = (d - b) / den;
    let value = (a * d - b * c) / den;
    let sol = max_entropy_solution(&u).unwrap();
    assert!((sol.team1.weights()[0] - p).abs() < 1e-6);
    assert!((sol.team2.weights()[0] - q).abs() < 1e-6);
    assert!((sol.value - value).abs() < 1e-6);
}

#[test]
fn sampled_log_ratio_matches_relative_term() {
    let p = grid_pipeline(Stage::Evaluate);
    let ext = p.extended.as_ref().unwrap();
    let outcome = p.synthesis(Mode::Exaggeration).unwrap();
    let eps = p.scenario.epsilon;
    let predicted = p.ordered_predictions();
    let truth = ext.lift_policy(&predicted[0]);
    let decoy = ext.lift_policy(&predicted[1]);
    let exact = outcome.evaluation.as_ref().unwrap().report.relative[1];

    let n = 20_000;
    let paths = sample_paths(ext.mdp(), &outcome.result.policy, n, 99, 10_000).unwrap();
    let samples: Vec<f64> = paths
        .iter()
        .map(|path| {
            deceptive_prefix(ext, path)
                .steps
                .iter()
                .map(|&(s, a)| ((decoy.prob(s, a) + eps) / (truth.prob(s, a) + eps)).ln())
                .sum()
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let stderr = (var / n as f64).sqrt();
    assert!((mean - exact).abs() <= 3.0 * stderr + 1e-9, "mean {mean} +- {stderr} vs exact {exact}");
}

#[test]
fn path_likelihood_includes_transitions() {
    let p = grid_pipeline(Stage::Synthesize);
    let ext = p.extended.as_ref().unwrap();
    let policy = &p.synthesis(Mode::Ambiguity).unwrap().result.policy;
    for path in sample_paths(ext.mdp(), policy, 50, 5, 10_000).unwrap() {
        let ExtReal::Finite(v) = path_log_likelihood(&path, policy, ext.mdp()) else { panic!("own path impossible") };
        let own: f64 = path.steps.iter().map(|&(s, a)| policy.prob(s, a).ln()).sum();
        // Deterministic grid moves and a point-mass start add nothing.
        assert!((v - own).abs() < 1e-9);
    }
}
