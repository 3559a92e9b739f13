//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use density_deception::deception::{exaggeration_program, synthesize_ambiguity, synthesize_exaggeration, DeceptionSpec, Mode};
use density_deception::game::{best_response_value, max_entropy_solution, Player, UtilityMatrix};
use density_deception::mdp::{partition_states, policy_occupancy, ExtendedMdp, Mdp, Policy};
use density_deception::observer::{estimate_kl_monte_carlo, kl_path_divergence};
use density_deception::pipeline::{Pipeline, Stage};
use density_deception::prediction::{check_cost_condition, min_cost, predict_policy, CostFunction, PredictionSpec};
use density_deception::scenario::{parse_scenario, Model};
use density_deception::game::AllocationStrategy;
use density_deception::solver::Solver;
use density_deception::Error;

use common::simplex;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn grid_model() -> Model {
    parse_scenario(common::scenario_path()).unwrap().build().unwrap()
}

struct Runs {
    pipelines: Vec<(f64, Pipeline)>,
    elapsed: Duration,
}

/// The full grid pipeline at beta = 1 and beta = 6, both modes.
fn runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let started = Instant::now();
        let pipelines = [1.0, 6.0]
            .into_iter()
            .map(|beta| {
                let mut s = parse_scenario(common::scenario_path()).unwrap();
                s.beta = beta;
                s.modes = vec![Mode::Exaggeration, Mode::Ambiguity];
                let mut p = Pipeline::new(s).unwrap();
                p.run(Stage::Evaluate).map_err(|(st, e)| format!("{}: {e}", st.name())).unwrap();
                (beta, p)
            })
            .collect();
        Runs { pipelines, elapsed: started.elapsed() }
    })
}

fn pipeline(beta: f64) -> &'static Pipeline {
    &runs().pipelines.iter().find(|(b, _)| *b == beta).unwrap().1
}

fn game_reproduction() -> Result<String, String> {
    let started = Instant::now();
    let cases = [
        (
            vec![vec![0.0, 0.0, 6.0], vec![0.0, 2.0, 0.0], vec![-1.0, 0.0, 0.0]],
            [0.5, 0.5, 0.0],
            [1.0, 0.0, 0.0],
        ),
        (
            vec![vec![0.0, 0.0, -1.0], vec![0.0, 2.0, 0.0], vec![6.0, 0.0, 0.0]],
            [0.0, 0.5, 0.5],
            [0.0, 0.0, 1.0],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (k, (entries, s1, s2)) in cases.into_iter().enumerate() {
        let u = UtilityMatrix::new(entries).map_err(err)?;
        let sol = max_entropy_solution(&u).map_err(err)?;
        let lo = best_response_value(&u, &sol.team1, Player::One);
        let hi = best_response_value(&u, &sol.team2, Player::Two);
        ensure(lo.abs() <= 1e-7 && hi.abs() <= 1e-7 && sol.value.abs() <= 1e-7, format!("U{}: value {} / {lo} / {hi}", k + 1, sol.value))?;
        for (got, want) in sol.team1.weights().iter().zip(s1).chain(sol.team2.weights().iter().zip(s2)) {
            worst = worst.max((got - want).abs());
        }
    }
    let elapsed = started.elapsed();
    ensure(worst <= 1e-6, format!("strategy error {worst:.2e}"))?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("max strategy error {worst:.1e}, {elapsed:.2?}"))
}

fn cost_condition() -> Result<String, String> {
    let m = grid_model();
    let target = AllocationStrategy::new(vec![0.5, 0.5, 0.0]).unwrap();
    let spec = PredictionSpec::new(&m.mdp, &m.partition, target.clone(), CostFunction::constant(&m.mdp, 10.0), 6.0).map_err(err)?;
    let check = check_cost_condition(&spec);
    ensure(check.satisfied, "c = 10, beta = 6 should pass")?;
    let res = predict_policy(&spec, &Solver::default()).map_err(err)?;
    let min_theta = res.theta.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    ensure(res.objective >= -1e-8, format!("objective {}", res.objective))?;
    ensure(min_theta >= -1e-8, format!("min theta {min_theta}"))?;

    let bad = PredictionSpec::new(&m.mdp, &m.partition, target, CostFunction::constant(&m.mdp, 8.0), 6.0).map_err(err)?;
    ensure(!check_cost_condition(&bad).satisfied, "c = 8, beta = 6 should fail")?;
    match predict_policy(&bad, &Solver::default()) {
        Err(Error::CostCondition { .. }) => {}
        other => return Err(format!("c = 8 solve was not refused: {:?}", other.map(|r| r.objective))),
    }
    Ok(format!("objective {:.4}, min theta {min_theta:.4}, c = 8 refused", res.objective))
}

fn constraint_exactness() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for beta in [1.0, 6.0] {
        for mode in [Mode::Exaggeration, Mode::Ambiguity] {
            let ev = pipeline(beta).synthesis(mode).unwrap().evaluation.as_ref().unwrap();
            for (r, want) in ev.reach.iter().zip([0.5, 0.5, 0.0]) {
                worst = worst.max((r - want).abs());
            }
        }
    }
    ensure(worst <= 1e-4, format!("reach error {worst:.2e}"))?;
    Ok(format!("max reach error {worst:.1e} over 4 policies"))
}

fn kl_mdps() -> Vec<(Mdp, Vec<usize>, Policy, Policy)> {
    let a = Mdp::new(vec![vec![vec![(1, 1.0)], vec![(0, 0.5), (1, 0.5)]], vec![vec![(1, 1.0)]]], vec![1.0, 0.0]).unwrap();
    let a_pi = Policy::new(&a, vec![vec![0.5, 0.5], vec![1.0]]).unwrap();
    let a_bar = Policy::new(&a, vec![vec![0.8, 0.2], vec![1.0]]).unwrap();

    let b = Mdp::new(
        vec![
            vec![vec![(3, 0.8), (1, 0.2)], vec![(1, 0.8), (3, 0.2)]],
            vec![vec![(0, 0.8), (2, 0.2)], vec![(2, 0.8), (0, 0.2)]],
            vec![vec![(1, 0.8), (4, 0.2)], vec![(4, 0.8), (1, 0.2)]],
            vec![vec![(3, 1.0)]],
            vec![vec![(4, 1.0)]],
        ],
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
    )
    .unwrap();
    let b_pi = Policy::new(&b, vec![vec![0.3, 0.7], vec![0.4, 0.6], vec![0.2, 0.8], vec![1.0], vec![1.0]]).unwrap();
    let b_bar = Policy::new(&b, vec![vec![0.6, 0.4], vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0], vec![1.0]]).unwrap();

    let c = Mdp::new(
        vec![
            vec![vec![(1, 0.6), (2, 0.4)], vec![(3, 1.0)], vec![(0, 0.5), (4, 0.5)]],
            vec![vec![(0, 0.3), (2, 0.7)], vec![(4, 0.9), (1, 0.1)]],
            vec![vec![(3, 0.5), (5, 0.5)], vec![(1, 1.0)]],
            vec![vec![(0, 0.2), (5, 0.8)], vec![(2, 0.5), (4, 0.5)]],
            vec![vec![(4, 1.0)]],
            vec![vec![(5, 1.0)]],
        ],
        vec![0.5, 0.0, 0.5, 0.0, 0.0, 0.0],
    )
    .unwrap();
    let c_pi = Policy::new(
        &c,
        vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.4], vec![0.7, 0.3], vec![0.5, 0.5], vec![1.0], vec![1.0]],
    )
    .unwrap();
    let c_bar = Policy::new(
        &c,
        vec![vec![0.4, 0.4, 0.2], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.9, 0.1], vec![1.0], vec![1.0]],
    )
    .unwrap();
    vec![(a, vec![1], a_pi, a_bar), (b, vec![3, 4], b_pi, b_bar), (c, vec![4, 5], c_pi, c_bar)]
}

fn kl_identity() -> Result<String, String> {
    let started = Instant::now();
    let mut details = Vec::new();
    for (k, (mdp, goals, pi, bar)) in kl_mdps().into_iter().enumerate() {
        let part = partition_states(&mdp, &goals).map_err(err)?;
        let x = policy_occupancy(&mdp, &pi, &part).map_err(err)?;
        let exact = kl_path_divergence(&x, &pi, &bar, 0.0).map_err(err)?.finite().ok_or("infinite KL")?;
        let est = estimate_kl_monte_carlo(&mdp, &pi, &bar, 100_000, 17 + k as u64, 10_000).map_err(err)?;
        let mc = est.estimate.finite().ok_or("infinite estimate")?;
        let z = (exact - mc).abs() / est.stderr;
        ensure(z <= 3.0, format!("mdp {}: exact {exact}, estimate {mc} +- {}", k + 1, est.stderr))?;
        details.push(format!("{z:.2}"));
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("|exact - mc| / stderr = [{}], {elapsed:.2?}", details.join(", ")))
}

fn exaggeration_dominance() -> Result<String, String> {
    let ev = pipeline(1.0).synthesis(Mode::Exaggeration).unwrap().evaluation.as_ref().unwrap();
    let (ours, min_time, truth) = (ev.report.exaggeration, ev.min_time.exaggeration, ev.truth_policy.exaggeration);
    ensure(ours > min_time, format!("{ours} <= min-time {min_time}"))?;
    ensure(ours > truth, format!("{ours} <= truth policy {truth}"))?;
    Ok(format!("score {ours:.4} vs min-time {min_time:.4}, truth policy {truth:.4}"))
}

fn ambiguity_dominance() -> Result<String, String> {
    let p = pipeline(1.0);
    let amb = &p.synthesis(Mode::Ambiguity).unwrap().evaluation.as_ref().unwrap().report;
    let exa = &p.synthesis(Mode::Exaggeration).unwrap().evaluation.as_ref().unwrap().report;
    let max_kl = |r: &density_deception::observer::DeceptivenessReport| r.kl.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
    let (ka, ke) = (max_kl(amb), max_kl(exa));
    ensure(ka <= ke, format!("max KL {ka} > {ke}"))?;
    ensure(amb.ambiguity >= exa.ambiguity, format!("score {} < {}", amb.ambiguity, exa.ambiguity))?;
    Ok(format!("max KL {ka:.4} vs {ke:.4}"))
}

fn density_entropy(d: &[f64]) -> f64 {
    let t: f64 = d.iter().sum();
    -d.iter().filter(|&&v| v > 0.0).map(|&v| (v / t) * (v / t).ln()).sum::<f64>()
}

fn beta_scatter() -> Result<String, String> {
    let mut out = Vec::new();
    for target in 0..2 {
        let h1 = density_entropy(&pipeline(1.0).predictions[target].result.state_density());
        let h6 = density_entropy(&pipeline(6.0).predictions[target].result.state_density());
        ensure(h6 > h1, format!("target {}: {h6} <= {h1}", target + 1))?;
        out.push(format!("{h1:.3} -> {h6:.3}"));
    }
    Ok(format!("density entropy beta 1 -> 6: {}", out.join(", ")))
}

fn small_beta_limit() -> Result<String, String> {
    let m = grid_model();
    let target = AllocationStrategy::new(vec![0.5, 0.5, 0.0]).unwrap();
    let cost = CostFunction::constant(&m.mdp, 10.0);
    let spec = PredictionSpec::new(&m.mdp, &m.partition, target.clone(), cost.clone(), 1e-3).map_err(err)?;
    let res = predict_policy(&spec, &Solver::default()).map_err(err)?;
    let linear: f64 = (0..m.mdp.num_states())
        .flat_map(|s| (0..m.mdp.num_actions(s)).map(move |a| (s, a)))
        .map(|(s, a)| res.occupancy.value(s, a) * cost.get(s, a))
        .sum();
    let (lp, _) = min_cost(&m.mdp, &m.partition, &target, &cost, &Solver::default()).map_err(err)?;
    let rel = (linear - lp).abs() / lp;
    ensure(rel <= 1e-3, format!("sum x c = {linear}, LP = {lp}"))?;
    Ok(format!("sum x c = {linear:.5}, LP {lp:.5}, gap {rel:.1e}"))
}

/// States s0, s1 and goal g; both start states can step to each other or to g.
fn tiny() -> (Mdp, Vec<Policy>) {
    let mdp = Mdp::new(
        vec![vec![vec![(1, 1.0)], vec![(2, 1.0)]], vec![vec![(0, 1.0)], vec![(2, 1.0)]], vec![vec![(2, 1.0)]]],
        vec![0.5, 0.5, 0.0],
    )
    .unwrap();
    let p1 = Policy::new(&mdp, vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0]]).unwrap();
    let p2 = Policy::new(&mdp, vec![vec![0.4, 0.6], vec![0.4, 0.6], vec![1.0]]).unwrap();
    (mdp, vec![p1, p2])
}

fn tiny_oracles() -> Result<String, String> {
    const EPS: f64 = 1e-6;
    let (mdp, predicted) = tiny();
    let part = partition_states(&mdp, &[2]).map_err(err)?;
    let ext = ExtendedMdp::new(&mdp, 1).map_err(err)?;
    let spec = DeceptionSpec::new(&ext, &part, predicted.clone(), AllocationStrategy::new(vec![1.0]).unwrap(), EPS).map_err(err)?;
    let solver = Solver::default();

    let exa = synthesize_exaggeration(&spec, &solver).map_err(err)?;
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let (lp, _) = exaggeration_program(&spec, i).map_err(err)?;
        let simplex::Outcome::Optimal { value, .. } = simplex::solve(&lp) else {
            return Err(format!("simplex failed on program {}", i + 1));
        };
        // Each start state either crosses over (reward, then one more step) or stops.
        let r = |s: usize, a: usize| ((predicted[i].prob(s, a) + EPS) / (predicted[0].prob(s, a) + EPS)).ln();
        let closed = 0.5 * (r(0, 0) - 1.0).max(r(0, 1)) + 0.5 * (r(1, 0) - 1.0).max(r(1, 1));
        worst = worst.max((exa.values[i] - value).abs()).max((value - closed).abs());
    }
    ensure(worst <= 1e-6, format!("exaggeration values {:?} off by {worst:.2e}", exa.values))?;

    let amb = synthesize_ambiguity(&spec, &solver).map_err(err)?;
    let z = amb.z.unwrap();
    let kl = |p: f64, q: f64, i: usize| {
        let term = |v: f64, pb: f64| if v > 0.0 { v * (v / (pb + EPS)).ln() } else { 0.0 };
        let pi = &predicted[i];
        0.5 * (term(p, pi.prob(0, 0)) + term(1.0 - p, pi.prob(0, 1)))
            + 0.5 * (term(q, pi.prob(1, 0)) + term(1.0 - q, pi.prob(1, 1)))
    };
    let (mut best, mut best_z) = (f64::INFINITY, 0.0);
    for a in 0..=200 {
        for b in 0..=200 {
            let (p, q) = (a as f64 * 5e-3, b as f64 * 5e-3);
            let zz = kl(p, q, 0).max(kl(p, q, 1));
            let obj = 0.5 * p + 0.5 * q + zz;
            if obj < best {
                best = obj;
                best_z = zz;
            }
        }
    }
    ensure((amb.objective - best).abs() <= 5e-3, format!("ambiguity objective {} vs grid {best}", amb.objective))?;
    ensure((z - best_z).abs() <= 5e-3, format!("z* {z} vs grid {best_z}"))?;
    Ok(format!("v* error {worst:.1e}; z* {z:.5} vs grid {best_z:.5}"))
}

fn scale_runtime() -> Result<String, String> {
    let elapsed = runs().elapsed;
    ensure(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!("2 beta values x 2 modes in {elapsed:.2?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("game reproduction", game_reproduction),
        ("cost condition enforcement", cost_condition),
        ("constraint exactness", constraint_exactness),
        ("KL identity oracle", kl_identity),
        ("exaggeration dominance", exaggeration_dominance),
        ("ambiguity dominance", ambiguity_dominance),
        ("beta scatter", beta_scatter),
        ("small-beta limit", small_beta_limit),
        ("tiny-instance oracles", tiny_oracles),
        ("scale and runtime", scale_runtime),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
