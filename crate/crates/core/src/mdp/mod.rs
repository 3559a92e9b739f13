//! Finite MDPs, stationary policies and occupancy measures.
//!
//! States and actions are plain indices. Every state owns its own action
//! list; transitions are stored sparsely as `(successor, probability)` pairs.

mod analysis;
mod extended;
mod grid;
mod sampling;

pub use analysis::{absorption_probabilities, policy_occupancy, reach_probabilities, Absorption};
pub use extended::ExtendedMdp;
pub use grid::{build_grid_mdp, Cell, GridAction, GridWorld};
pub use sampling::{default_horizon_cap, sample_paths, PathSample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;

/// Below this `nu(s)` the uniform branch of the policy rule is taken.
pub const NU_POSITIVE: f64 = 1e-12;

/// Solver round-off below zero that is silently clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

const PROB_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    /// `transitions[s][a]` is the successor distribution of action `a` in `s`.
    transitions: Vec<Vec<Vec<(StateId, f64)>>>,
    initial: Vec<f64>,
    action_labels: Vec<Vec<String>>,
}

impl Mdp {
    pub fn new(transitions: Vec<Vec<Vec<(StateId, f64)>>>, initial: Vec<f64>) -> Result<Self> {
        let labels = transitions
            .iter()
            .map(|acts| (0..acts.len()).map(|a| format!("a{a}")).collect())
            .collect();
        Self::with_labels(transitions, initial, labels)
    }

    pub fn with_labels(
        transitions: Vec<Vec<Vec<(StateId, f64)>>>,
        initial: Vec<f64>,
        action_labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        let n = transitions.len();
        if n == 0 {
            return Err(Error::InvalidModel("MDP has no states".into()));
        }
        if initial.len() != n {
            return Err(Error::InvalidModel(format!(
                "initial distribution has {} entries for {n} states",
                initial.len()
            )));
        }
        if action_labels.len() != n {
            return Err(Error::InvalidModel("action label table does not match state count".into()));
        }
        for (s, acts) in transitions.iter().enumerate() {
            if acts.is_empty() {
                return Err(Error::InvalidModel(format!("state {s} has no actions")));
            }
            if action_labels[s].len() != acts.len() {
                return Err(Error::InvalidModel(format!("state {s}: label count differs from action count")));
            }
            for (a, succ) in acts.iter().enumerate() {
                let mut total = 0.0;
                for &(t, p) in succ {
                    if t >= n {
                        return Err(Error::InvalidModel(format!("({s}, {a}) leads to unknown state {t}")));
                    }
                    if !p.is_finite() || p < 0.0 {
                        return Err(Error::InvalidModel(format!("({s}, {a}) has invalid probability {p}")));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROB_TOLERANCE {
                    return Err(Error::InvalidModel(format!(
                        "transition ({s}, {a}) sums to {total}, expected 1"
                    )));
                }
            }
        }
        let mut total = 0.0;
        for &p in &initial {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidModel(format!("initial distribution has invalid entry {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidModel(format!("initial distribution sums to {total}")));
        }
        Ok(Self { transitions, initial, action_labels })
    }

    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn num_actions(&self, s: StateId) -> usize {
        self.transitions[s].len()
    }

    pub fn successors(&self, s: StateId, a: usize) -> &[(StateId, f64)] {
        &self.transitions[s][a]
    }

    pub fn transition_prob(&self, s: StateId, a: usize, next: StateId) -> f64 {
        self.transitions[s][a].iter().filter(|&&(t, _)| t == next).map(|&(_, p)| p).sum()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn action_label(&self, s: StateId, a: usize) -> &str {
        &self.action_labels[s][a]
    }

    /// Every action self-loops with probability one.
    pub fn is_absorbing(&self, s: StateId) -> bool {
        self.transitions[s]
            .iter()
            .all(|succ| (self.transition_prob_in(succ, s) - 1.0).abs() <= PROB_TOLERANCE)
    }

    fn transition_prob_in(&self, succ: &[(StateId, f64)], target: StateId) -> f64 {
        succ.iter().filter(|&&(t, _)| t == target).map(|&(_, p)| p).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateRole {
    /// Index into the partition's ordered goal list.
    Goal(usize),
    Dead,
    Transient,
}

/// Goals, states that cannot reach any goal, and the remaining transient states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePartition {
    goals: Vec<StateId>,
    dead: Vec<StateId>,
    transient: Vec<StateId>,
    roles: Vec<StateRole>,
}

impl StatePartition {
    pub fn goals(&self) -> &[StateId] {
        &self.goals
    }

    pub fn dead(&self) -> &[StateId] {
        &self.dead
    }

    pub fn transient(&self) -> &[StateId] {
        &self.transient
    }

    pub fn role(&self, s: StateId) -> StateRole {
        self.roles[s]
    }

    pub fn is_transient(&self, s: StateId) -> bool {
        self.roles[s] == StateRole::Transient
    }

    pub fn num_states(&self) -> usize {
        self.roles.len()
    }
}

/// Split the state space by backward reachability from the goals.
pub fn partition_states(mdp: &Mdp, goals: &[StateId]) -> Result<StatePartition> {
    let n = mdp.num_states();
    let mut roles = vec![StateRole::Dead; n];
    for (i, &g) in goals.iter().enumerate() {
        if g >= n {
            return Err(Error::InvalidArgument(format!("goal {g} out of range")));
        }
        if !mdp.is_absorbing(g) {
            return Err(Error::NonAbsorbingGoal(g));
        }
        if let StateRole::Goal(_) = roles[g] {
            return Err(Error::InvalidArgument(format!("goal {g} listed twice")));
        }
        roles[g] = StateRole::Goal(i);
    }

    let mut predecessors: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..mdp.num_actions(s) {
            for &(t, p) in mdp.successors(s, a) {
                if p > 0.0 && t != s {
                    predecessors[t].push(s);
                }
            }
        }
    }
    let mut reaches = vec![false; n];
    let mut queue: std::collections::VecDeque<StateId> = goals.iter().copied().collect();
    for &g in goals {
        reaches[g] = true;
    }
    while let Some(t) = queue.pop_front() {
        for &s in &predecessors[t] {
            if !reaches[s] {
                reaches[s] = true;
                queue.push_back(s);
            }
        }
    }

    let mut dead = Vec::new();
    let mut transient = Vec::new();
    for s in 0..n {
        match roles[s] {
            StateRole::Goal(_) => {}
            _ if reaches[s] => {
                roles[s] = StateRole::Transient;
                transient.push(s);
            }
            _ => dead.push(s),
        }
    }
    Ok(StatePartition { goals: goals.to_vec(), dead, transient, roles })
}

/// Stationary randomized policy, one distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    rows: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(mdp: &Mdp, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != mdp.num_states() {
            return Err(Error::InvalidArgument(format!(
                "policy has {} rows for {} states",
                rows.len(),
                mdp.num_states()
            )));
        }
        for (s, row) in rows.iter().enumerate() {
            if row.len() != mdp.num_actions(s) {
                return Err(Error::InvalidArgument(format!("policy row {s} has wrong length")));
            }
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::InvalidArgument(format!("policy row {s} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("policy row {s} sums to {total}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn uniform(mdp: &Mdp) -> Self {
        let rows = (0..mdp.num_states())
            .map(|s| {
                let k = mdp.num_actions(s);
                vec![1.0 / k as f64; k]
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.rows[s]
    }

    pub fn prob(&self, s: StateId, a: usize) -> f64 {
        self.rows[s][a]
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Expected visit counts `x(s, a)` over transient states. Rows of
/// non-transient states are kept as zeros so indexing stays uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    values: Vec<Vec<f64>>,
}

impl OccupancyMeasure {
    /// Clamps entries in `[-1e-9, 0)` to zero and rejects anything more negative.
    pub fn new(mdp: &Mdp, mut values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != mdp.num_states() {
            return Err(Error::InvalidArgument("occupancy table does not match state count".into()));
        }
        for (s, row) in values.iter_mut().enumerate() {
            if row.len() != mdp.num_actions(s) {
                return Err(Error::InvalidArgument(format!("occupancy row {s} has wrong length")));
            }
            for (a, v) in row.iter_mut().enumerate() {
                if !v.is_finite() || *v < -CLAMP_TOLERANCE {
                    return Err(Error::Numerical(format!("occupancy x({s}, {a}) = {v} is negative")));
                }
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Ok(Self { values })
    }

    pub fn zeros(mdp: &Mdp) -> Self {
        let values = (0..mdp.num_states()).map(|s| vec![0.0; mdp.num_actions(s)]).collect();
        Self { values }
    }

    pub fn value(&self, s: StateId, a: usize) -> f64 {
        self.values[s][a]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    /// `nu(s) = sum_a x(s, a)`.
    pub fn state_total(&self, s: StateId) -> f64 {
        self.values[s].iter().sum()
    }

    /// `eta(s, s') = sum_a x(s, a) P(s, a, s')`.
    pub fn flow(&self, mdp: &Mdp, s: StateId, next: StateId) -> f64 {
        self.values[s]
            .iter()
            .enumerate()
            .map(|(a, &x)| x * mdp.transition_prob(s, a, next))
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }

    /// Keep only the rows selected by `keep`.
    pub fn restrict(&self, keep: impl Fn(StateId) -> bool) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(s, row)| if keep(s) { row.clone() } else { vec![0.0; row.len()] })
            .collect();
        Self { values }
    }

    /// Largest violation of `nu(s) - sum_{s'} eta(s', s) = alpha(s)` over transient states.
    pub fn flow_residual(&self, mdp: &Mdp, partition: &StatePartition) -> f64 {
        let n = mdp.num_states();
        let mut inflow = vec![0.0; n];
        for &s in partition.transient() {
            for (a, &x) in self.values[s].iter().enumerate() {
                for &(t, p) in mdp.successors(s, a) {
                    inflow[t] += x * p;
                }
            }
        }
        partition
            .transient()
            .iter()
            .map(|&s| (self.state_total(s) - inflow[s] - mdp.initial()[s]).abs())
            .fold(0.0, f64::max)
    }

    /// Expected inflow into each goal from transient states, in partition order.
    pub fn goal_inflow(&self, mdp: &Mdp, partition: &StatePartition) -> Vec<f64> {
        let mut inflow = vec![0.0; partition.goals().len()];
        for &s in partition.transient() {
            for (a, &x) in self.values[s].iter().enumerate() {
                for &(t, p) in mdp.successors(s, a) {
                    if let StateRole::Goal(i) = partition.role(t) {
                        inflow[i] += x * p;
                    }
                }
            }
        }
        inflow
    }
}

/// Normalize occupancy rows into a policy; rows with `nu(s) <= 1e-12` become uniform.
pub fn policy_from_occupancy(x: &OccupancyMeasure, mdp: &Mdp) -> Result<Policy> {
    if x.num_states() != mdp.num_states() {
        return Err(Error::InvalidArgument("occupancy does not match MDP".into()));
    }
    let mut rows = Vec::with_capacity(mdp.num_states());
    for s in 0..mdp.num_states() {
        let row = x.row(s);
        if row.len() != mdp.num_actions(s) {
            return Err(Error::InvalidArgument(format!("occupancy row {s} has wrong length")));
        }
        if let Some(v) = row.iter().find(|v| **v < -CLAMP_TOLERANCE) {
            return Err(Error::Numerical(format!("occupancy at state {s} is negative ({v})")));
        }
        let clamped: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
        let nu: f64 = clamped.iter().sum();
        if nu > NU_POSITIVE {
            rows.push(clamped.iter().map(|v| v / nu).collect());
        } else {
            let k = row.len();
            rows.push(vec![1.0 / k as f64; k]);
        }
    }
    Ok(Policy { rows })
}
