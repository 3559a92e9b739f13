//! End-to-end orchestration: game, prediction, synthesis, evaluation.
//!
//! Every stage stores its output on [`Pipeline`] as soon as it finishes, so a
//! failing run still leaves the earlier results available for reporting.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::deception::{self, choose_switch_time, min_time_occupancy, DeceptionSpec, Mode, SynthesisResult};
use crate::error::{Error, Result};
use crate::game::{max_entropy_solution, saddle_gap, AllocationStrategy, GameSolution};
use crate::mdp::{
    default_horizon_cap, policy_from_occupancy, policy_occupancy, reach_probabilities, sample_paths, ExtendedMdp,
    OccupancyMeasure, PathSample, Policy, StatePartition,
};
use crate::observer::{deceptiveness_exaggeration, likelihood_ratio_decision, DeceptivenessReport, Hypothesis};
use crate::prediction::{check_cost_condition, min_expected_time, predict_policy, PredictionResult, PredictionSpec};
use crate::scenario::{Model, Scenario, SwitchTime};
use crate::solver::{Solver, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    SolveGame,
    Predict,
    Synthesize,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::SolveGame, Stage::Predict, Stage::Synthesize, Stage::Evaluate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::SolveGame => "solve-game",
            Stage::Predict => "predict",
            Stage::Synthesize => "synthesize",
            Stage::Evaluate => "evaluate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub solution: GameSolution,
    pub saddle_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub target: AllocationStrategy,
    pub result: PredictionResult,
    pub reach: Vec<f64>,
    pub cost_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtSummary {
    /// Zero-based scenario index of the decoy tested against the truth.
    pub decoy: usize,
    pub trials: usize,
    pub paths: usize,
    pub threshold: f64,
    pub decoy_decisions: usize,
    pub truth_decisions: usize,
    pub undecided: usize,
}

impl LrtSummary {
    pub fn decoy_fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.decoy_decisions as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Scores of the synthesized occupancy. Indices follow the deception order
    /// (truth first); see [`Pipeline::order`].
    pub report: DeceptivenessReport,
    pub min_time: DeceptivenessReport,
    pub truth_policy: DeceptivenessReport,
    pub reach: Vec<f64>,
    pub reach_residual: f64,
    pub lrt: Option<LrtSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOutcome {
    pub mode: Mode,
    pub result: SynthesisResult,
    pub evaluation: Option<Evaluation>,
}

/// How long each stage took, in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub scenario: Scenario,
    pub model: Model,
    pub solver: Solver,
    pub games: Vec<GameOutcome>,
    pub predictions: Vec<PredictionOutcome>,
    pub t_min: Option<f64>,
    pub horizon: Option<usize>,
    pub extended: Option<ExtendedMdp>,
    pub extended_partition: Option<StatePartition>,
    pub syntheses: Vec<SynthesisOutcome>,
    pub completed: Vec<Stage>,
    pub timings: Timings,
}

impl Pipeline {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let model = scenario.build()?;
        let initial_dead: f64 = model.partition.dead().iter().map(|&s| model.mdp.initial()[s]).sum();
        if initial_dead > 0.0 {
            return Err(Error::Validation(vec!["start distribution puts mass on cells that reach no goal".into()]));
        }
        let solver = Solver::new(SolverSettings::with_tolerance(scenario.tolerance));
        Ok(Self {
            scenario,
            model,
            solver,
            games: Vec::new(),
            predictions: Vec::new(),
            t_min: None,
            horizon: None,
            extended: None,
            extended_partition: None,
            syntheses: Vec::new(),
            completed: Vec::new(),
            timings: Timings::default(),
        })
    }

    /// Scenario indices in deception order: the true matrix first, then the rest.
    pub fn order(&self) -> Vec<usize> {
        let t = self.scenario.true_index;
        std::iter::once(t).chain((0..self.scenario.num_matrices()).filter(|&i| i != t)).collect()
    }

    pub fn true_target(&self) -> Option<&AllocationStrategy> {
        self.games.get(self.scenario.true_index).map(|g| &g.solution.team1)
    }

    /// Predicted base policies in deception order.
    pub fn ordered_predictions(&self) -> Vec<Policy> {
        self.order().into_iter().map(|i| self.predictions[i].result.policy.clone()).collect()
    }

    /// Run every stage up to and including `last`. Returns the failing stage
    /// together with its error.
    pub fn run(&mut self, last: Stage) -> std::result::Result<(), (Stage, Error)> {
        for stage in Stage::ALL.into_iter().filter(|&s| s <= last) {
            if self.completed.contains(&stage) {
                continue;
            }
            let started = Instant::now();
            let outcome = match stage {
                Stage::SolveGame => self.solve_games(),
                Stage::Predict => self.predict(),
                Stage::Synthesize => self.synthesize(),
                Stage::Evaluate => self.evaluate(),
            };
            self.timings.stages.push((stage.name().to_string(), started.elapsed().as_secs_f64()));
            outcome.map_err(|e| (stage, e))?;
            self.completed.push(stage);
        }
        Ok(())
    }

    fn solve_games(&mut self) -> Result<()> {
        for u in &self.scenario.utilities {
            let solution = max_entropy_solution(u)?;
            let gap = saddle_gap(u, &solution)?;
            self.games.push(GameOutcome { solution, saddle_gap: gap });
        }
        Ok(())
    }

    fn predict(&mut self) -> Result<()> {
        let model = &self.model;
        for game in &self.games {
            let target = game.solution.team1.clone();
            let spec = PredictionSpec::new(
                &model.mdp,
                &model.partition,
                target.clone(),
                model.cost.clone(),
                self.scenario.beta,
            )?;
            let cost_margin = check_cost_condition(&spec).worst_margin();
            let result = predict_policy(&spec, &self.solver)?;
            let reach = reach_probabilities(&model.mdp, &result.policy, &model.partition)?;
            self.predictions.push(PredictionOutcome { target, result, reach, cost_margin });
        }
        Ok(())
    }

    fn synthesize(&mut self) -> Result<()> {
        let target = self.true_target().expect("games solved").clone();
        let t_min = min_expected_time(&self.model.mdp, &self.model.partition, &target, &self.solver)?;
        self.t_min = Some(t_min);
        let horizon = match self.scenario.switch {
            SwitchTime::Fixed(t) => t,
            SwitchTime::Multiple(k) => choose_switch_time(k, t_min)?,
        };
        self.horizon = Some(horizon);
        let ext = ExtendedMdp::new(&self.model.mdp, horizon)?;
        let ext_partition = ext.partition(&self.model.partition)?;
        let predicted = self.ordered_predictions();
        let spec = DeceptionSpec::new(&ext, &self.model.partition, predicted, target, self.scenario.epsilon)?;
        let mut results = Vec::new();
        for &mode in &self.scenario.modes {
            let result = deception::synthesize(&spec, mode, &self.solver)?;
            results.push(SynthesisOutcome { mode, result, evaluation: None });
        }
        self.syntheses = results;
        self.extended = Some(ext);
        self.extended_partition = Some(ext_partition);
        Ok(())
    }

    fn evaluate(&mut self) -> Result<()> {
        let ext = self.extended.as_ref().expect("synthesis ran");
        let ext_partition = self.extended_partition.as_ref().expect("synthesis ran");
        let target = self.true_target().expect("games solved").clone();
        let predicted = self.ordered_predictions();
        let lifted: Vec<Policy> = predicted.iter().map(|p| ext.lift_policy(p)).collect();
        let eps = self.scenario.epsilon;
        let score = |x: &OccupancyMeasure, pi: &Policy| -> Result<DeceptivenessReport> {
            deceptiveness_exaggeration(&ext.deception_phase(x), pi, &lifted, 0, eps)
        };

        let spec = DeceptionSpec::new(ext, &self.model.partition, predicted, target.clone(), eps)?;
        let baseline_x = min_time_occupancy(&spec, &self.solver)?;
        let baseline_pi = policy_from_occupancy(&baseline_x, ext.mdp())?;
        let min_time = score(&baseline_x, &baseline_pi)?;
        let truth_x = policy_occupancy(ext.mdp(), &lifted[0], ext_partition)?;
        let truth_policy = score(&truth_x, &lifted[0])?;

        let order = self.order();
        let mut evaluations = Vec::with_capacity(self.syntheses.len());
        for (k, syn) in self.syntheses.iter().enumerate() {
            let r = &syn.result;
            let report = score(&r.occupancy, &r.policy)?;
            let reach = ext.aggregate_goals(&reach_probabilities(ext.mdp(), &r.policy, ext_partition)?);
            let reach_residual =
                reach.iter().zip(target.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let lrt = if lifted.len() > 1 {
                let decoy = (1..lifted.len())
                    .max_by(|&a, &b| report.relative[a].total_cmp(&report.relative[b]).then(b.cmp(&a)))
                    .unwrap();
                let seed = self.scenario.seed.wrapping_add(1_000_003 * k as u64);
                let mut summary = likelihood_ratio_experiment(
                    ext,
                    &r.policy,
                    &lifted[decoy],
                    &lifted[0],
                    self.scenario.evaluation.paths,
                    self.scenario.evaluation.trials,
                    self.scenario.evaluation.threshold,
                    seed,
                )?;
                summary.decoy = order[decoy];
                Some(summary)
            } else {
                None
            };
            evaluations.push(Evaluation {
                report,
                min_time: min_time.clone(),
                truth_policy: truth_policy.clone(),
                reach,
                reach_residual,
                lrt,
            });
        }
        for (syn, ev) in self.syntheses.iter_mut().zip(evaluations) {
            syn.evaluation = Some(ev);
        }
        Ok(())
    }

    pub fn synthesis(&self, mode: Mode) -> Option<&SynthesisOutcome> {
        self.syntheses.iter().find(|s| s.mode == mode)
    }
}

/// Keep only the steps taken during the deceptive phase.
pub fn deceptive_prefix(ext: &ExtendedMdp, path: &PathSample) -> PathSample {
    let steps: Vec<_> = path.steps.iter().copied().take_while(|&(s, _)| ext.in_deception_phase(s)).collect();
    let terminal = path.states().nth(steps.len()).expect("prefix ends on a visited state");
    PathSample { truncated: path.truncated && steps.len() == path.steps.len(), steps, terminal }
}

/// Repeated likelihood-ratio tests of `decoy` against `truth` on deceptive-phase
/// paths drawn from `policy`. Trial `t` uses seed `seed + t`.
#[allow(clippy::too_many_arguments)]
pub fn likelihood_ratio_experiment(
    ext: &ExtendedMdp,
    policy: &Policy,
    decoy: &Policy,
    truth: &Policy,
    paths: usize,
    trials: usize,
    threshold: f64,
    seed: u64,
) -> Result<LrtSummary> {
    let cap = default_horizon_cap(ext.mdp());
    let mut summary = LrtSummary {
        decoy: 0,
        trials,
        paths,
        threshold,
        decoy_decisions: 0,
        truth_decisions: 0,
        undecided: 0,
    };
    for t in 0..trials {
        let sampled = sample_paths(ext.mdp(), policy, paths, seed.wrapping_add(t as u64), cap)?;
        let prefixes: Vec<PathSample> = sampled.iter().map(|p| deceptive_prefix(ext, p)).collect();
        match likelihood_ratio_decision(&prefixes, decoy, truth, threshold) {
            Ok(Hypothesis::First) => summary.decoy_decisions += 1,
            Ok(Hypothesis::Second) => summary.truth_decisions += 1,
            Err(_) => summary.undecided += 1,
        }
    }
    Ok(summary)
}
