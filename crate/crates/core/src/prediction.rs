//! The adversary's expected behavior: entropy-regularized occupancy programs.
//!
//! For a target allocation the predictor solves
//!
//! ```text
//! min  sum_{s,a} x(s,a) [ c(s,a) + beta log(x(s,a) / nu(s)) ]
//! s.t. flow balance on transient states, goal inflow = target
//! ```
//!
//! and reads the predicted policy off the optimal occupancy. A finite optimum
//! is guaranteed when `c(s,a) >= beta log|A(s)|`; that condition is checked
//! before every solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{flow_program, per_goal, VarLayout};
use crate::game::AllocationStrategy;
use crate::mdp::{policy_from_occupancy, Mdp, OccupancyMeasure, Policy, StateId, StatePartition};
use crate::solver::{
    xlogx_over_y, AffineExpr, EntropyTarget, EntropyTerm, RelativeEntropyProgram, Sense, SolveReport,
    SolveStatus, Solver,
};

/// Per-(state, action) nonnegative cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    table: Vec<Vec<f64>>,
}

impl CostFunction {
    pub fn constant(mdp: &Mdp, c: f64) -> Self {
        Self { table: (0..mdp.num_states()).map(|s| vec![c; mdp.num_actions(s)]).collect() }
    }

    pub fn new(mdp: &Mdp, table: Vec<Vec<f64>>) -> Result<Self> {
        if table.len() != mdp.num_states()
            || table.iter().enumerate().any(|(s, row)| row.len() != mdp.num_actions(s))
        {
            return Err(Error::InvalidArgument("cost table does not match the MDP".into()));
        }
        Ok(Self { table })
    }

    pub fn get(&self, s: StateId, a: usize) -> f64 {
        self.table[s][a]
    }

    pub fn set(&mut self, s: StateId, a: usize, c: f64) {
        self.table[s][a] = c;
    }
}

#[derive(Debug, Clone)]
pub struct PredictionSpec<'a> {
    pub mdp: &'a Mdp,
    pub partition: &'a StatePartition,
    pub target: AllocationStrategy,
    pub cost: CostFunction,
    pub beta: f64,
}

impl<'a> PredictionSpec<'a> {
    pub fn new(
        mdp: &'a Mdp,
        partition: &'a StatePartition,
        target: AllocationStrategy,
        cost: CostFunction,
        beta: f64,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if !(beta.is_finite() && beta >= 0.0) {
            problems.push(format!("beta must be finite and nonnegative, got {beta}"));
        }
        if target.len() != partition.goals().len() {
            problems.push(format!(
                "target has {} entries but there are {} goals",
                target.len(),
                partition.goals().len()
            ));
        }
        if cost.table.len() != mdp.num_states() {
            problems.push("cost table does not match the MDP".to_string());
        } else if cost.table.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
            problems.push("costs must be finite and nonnegative".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self { mdp, partition, target, cost, beta })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCheck {
    pub satisfied: bool,
    /// `min_a c(s,a) - beta log|A(s)|` for every transient state.
    pub margins: Vec<(StateId, f64)>,
}

impl CostCheck {
    pub fn worst_margin(&self) -> f64 {
        self.margins.iter().map(|&(_, m)| m).fold(f64::INFINITY, f64::min)
    }
}

/// Check `c(s,a) >= beta log|A(s)|` on every transient state.
pub fn check_cost_condition(spec: &PredictionSpec<'_>) -> CostCheck {
    let margins: Vec<(StateId, f64)> = spec
        .partition
        .transient()
        .iter()
        .map(|&s| {
            let bound = spec.beta * (spec.mdp.num_actions(s) as f64).ln();
            let min_cost = (0..spec.mdp.num_actions(s)).map(|a| spec.cost.get(s, a)).fold(f64::INFINITY, f64::min);
            (s, min_cost - bound)
        })
        .collect();
    let satisfied = margins.iter().all(|&(_, m)| m >= 0.0);
    CostCheck { satisfied, margins }
}

/// Whether some occupancy satisfies balance and realizes `target` at the goals.
pub fn check_allocation_feasibility(
    mdp: &Mdp,
    partition: &StatePartition,
    target: &AllocationStrategy,
    solver: &Solver,
) -> Result<bool> {
    let (lp, _) = flow_program(mdp, partition, &per_goal(partition), target.weights(), Sense::Minimize)?;
    let report = solver.solve_lp(&lp)?;
    match report.status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::Infeasible => Ok(false),
        status => Err(Error::Solver { stage: "check_allocation_feasibility".into(), status }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub policy: Policy,
    pub occupancy: OccupancyMeasure,
    /// Entropy-regularized cost at the optimum.
    pub objective: f64,
    /// Per-state contribution `theta(s)` to the objective.
    pub theta: Vec<(StateId, f64)>,
    pub report: SolveReport,
}

impl PredictionResult {
    /// Expected residence time per state.
    pub fn state_density(&self) -> Vec<f64> {
        (0..self.occupancy.num_states()).map(|s| self.occupancy.state_total(s)).collect()
    }
}

fn reject_dead_initial_mass(mdp: &Mdp, partition: &StatePartition) -> Result<()> {
    let dead: f64 = partition.dead().iter().map(|&s| mdp.initial()[s]).sum();
    if dead > 0.0 {
        return Err(Error::Validation(vec![format!(
            "initial distribution puts mass {dead} on states that cannot reach any goal"
        )]));
    }
    Ok(())
}

/// Per-state objective contributions of an occupancy.
pub fn theta(spec: &PredictionSpec<'_>, x: &OccupancyMeasure) -> Vec<(StateId, f64)> {
    spec.partition
        .transient()
        .iter()
        .map(|&s| {
            let nu = x.state_total(s);
            let value = x
                .row(s)
                .iter()
                .enumerate()
                .map(|(a, &v)| v * spec.cost.get(s, a) + spec.beta * xlogx_over_y(v, nu))
                .sum();
            (s, value)
        })
        .collect()
}

/// Solve the entropy-regularized program and extract the predicted policy.
pub fn predict_policy(spec: &PredictionSpec<'_>, solver: &Solver) -> Result<PredictionResult> {
    reject_dead_initial_mass(spec.mdp, spec.partition)?;
    let check = check_cost_condition(spec);
    if !check.satisfied {
        return Err(Error::CostCondition {
            violations: check.margins.iter().filter(|&&(_, m)| m < 0.0).count(),
            worst_margin: check.worst_margin(),
        });
    }
    if !check_allocation_feasibility(spec.mdp, spec.partition, &spec.target, solver)? {
        return Err(Error::Infeasible { stage: "check_allocation_feasibility".into() });
    }

    let (mut lp, layout) =
        flow_program(spec.mdp, spec.partition, &per_goal(spec.partition), spec.target.weights(), Sense::Minimize)?;
    for &s in spec.partition.transient() {
        for a in 0..spec.mdp.num_actions(s) {
            lp.set_cost(layout.var(s, a).unwrap(), spec.cost.get(s, a));
        }
    }
    let mut rep = RelativeEntropyProgram::new(lp);
    if spec.beta > 0.0 {
        add_policy_entropy(&mut rep, spec.mdp, spec.partition, &layout, spec.beta);
    }
    let report = solver.solve_rep(&rep)?.require_optimal("predict_policy")?;
    let occupancy = layout.occupancy(spec.mdp, &report.primal)?;
    let policy = policy_from_occupancy(&occupancy, spec.mdp)?;
    let theta = theta(spec, &occupancy);
    let objective = theta.iter().map(|&(_, v)| v).sum();
    Ok(PredictionResult { policy, occupancy, objective, theta, report })
}

/// `beta * x(s,a) log(x(s,a) / nu(s))` for every transient pair.
fn add_policy_entropy(
    rep: &mut RelativeEntropyProgram,
    mdp: &Mdp,
    partition: &StatePartition,
    layout: &VarLayout,
    beta: f64,
) {
    for &s in partition.transient() {
        let nu = AffineExpr::linear(layout.nu_terms(mdp, s));
        for a in 0..mdp.num_actions(s) {
            rep.add_term(EntropyTerm {
                weight: beta,
                numerator: layout.var(s, a).unwrap(),
                denominator: nu.clone(),
                target: EntropyTarget::Objective,
            });
        }
    }
}

/// Minimum expected number of steps to realize `target`.
pub fn min_expected_time(
    mdp: &Mdp,
    partition: &StatePartition,
    target: &AllocationStrategy,
    solver: &Solver,
) -> Result<f64> {
    Ok(min_expected_time_occupancy(mdp, partition, target, solver)?.0)
}

/// Minimum expected time together with an optimal occupancy.
pub fn min_expected_time_occupancy(
    mdp: &Mdp,
    partition: &StatePartition,
    target: &AllocationStrategy,
    solver: &Solver,
) -> Result<(f64, OccupancyMeasure)> {
    min_linear_cost(mdp, partition, target, &CostFunction::constant(mdp, 1.0), solver, "min_expected_time")
}

/// Pure min-cost occupancy program (`beta = 0`).
pub fn min_cost(
    mdp: &Mdp,
    partition: &StatePartition,
    target: &AllocationStrategy,
    cost: &CostFunction,
    solver: &Solver,
) -> Result<(f64, OccupancyMeasure)> {
    min_linear_cost(mdp, partition, target, cost, solver, "min_cost")
}

fn min_linear_cost(
    mdp: &Mdp,
    partition: &StatePartition,
    target: &AllocationStrategy,
    cost: &CostFunction,
    solver: &Solver,
    stage: &str,
) -> Result<(f64, OccupancyMeasure)> {
    let (mut lp, layout) = flow_program(mdp, partition, &per_goal(partition), target.weights(), Sense::Minimize)?;
    for &s in partition.transient() {
        for a in 0..mdp.num_actions(s) {
            lp.set_cost(layout.var(s, a).unwrap(), cost.get(s, a));
        }
    }
    let report = solver.solve_lp(&lp)?.require_optimal(stage)?;
    let x = layout.occupancy(mdp, &report.primal)?;
    Ok((report.objective, x))
}
