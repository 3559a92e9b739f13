//! Occupancy-measure variables and the balance/goal-inflow constraints
//! shared by every program in the crate.

use crate::error::{Error, Result};
use crate::mdp::{Mdp, OccupancyMeasure, StateId, StatePartition, StateRole};
use crate::solver::{LinearProgram, RowKind, Sense, VarId};

/// Maps `(transient state, action)` to LP variable ids.
#[derive(Debug, Clone)]
pub struct VarLayout {
    offsets: Vec<Option<VarId>>,
}

impl VarLayout {
    pub fn var(&self, s: StateId, a: usize) -> Option<VarId> {
        self.offsets[s].map(|o| o + a)
    }

    /// `(var, 1.0)` for every action of `s`, i.e. the expression `nu(s)`.
    pub fn nu_terms(&self, mdp: &Mdp, s: StateId) -> Vec<(VarId, f64)> {
        match self.offsets[s] {
            Some(o) => (0..mdp.num_actions(s)).map(|a| (o + a, 1.0)).collect(),
            None => Vec::new(),
        }
    }

    pub fn occupancy(&self, mdp: &Mdp, primal: &[f64]) -> Result<OccupancyMeasure> {
        let rows = (0..mdp.num_states())
            .map(|s| match self.offsets[s] {
                Some(o) => primal[o..o + mdp.num_actions(s)].to_vec(),
                None => vec![0.0; mdp.num_actions(s)],
            })
            .collect();
        OccupancyMeasure::new(mdp, rows)
    }
}

pub(crate) fn merge_terms(mut terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    terms.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (j, a) in terms {
        match out.last_mut() {
            Some((lj, la)) if *lj == j => *la += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

/// Build `x >= 0` variables for all transient state-action pairs together with
///
/// * flow balance `nu(s) - sum_{s'} eta(s', s) = alpha(s)` for transient `s`, and
/// * goal inflow: for each group `g`, `sum_{goal in g} sum_s eta(s, goal) = target[g] - alpha(g)`.
///
/// `group[i]` names the target entry of the `i`-th partition goal.
pub fn flow_program(
    mdp: &Mdp,
    partition: &StatePartition,
    group: &[usize],
    targets: &[f64],
    sense: Sense,
) -> Result<(LinearProgram, VarLayout)> {
    if group.len() != partition.goals().len() || group.iter().any(|&g| g >= targets.len()) {
        return Err(Error::InvalidArgument("goal grouping does not match the partition".into()));
    }
    let mut lp = LinearProgram::new(sense);
    let mut offsets = vec![None; mdp.num_states()];
    for &s in partition.transient() {
        let first = lp.num_vars();
        for _ in 0..mdp.num_actions(s) {
            lp.add_var(0.0, 0.0);
        }
        offsets[s] = Some(first);
    }
    let layout = VarLayout { offsets };

    let mut balance: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); mdp.num_states()];
    let mut inflow: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); targets.len()];
    for &s in partition.transient() {
        for a in 0..mdp.num_actions(s) {
            let v = layout.var(s, a).expect("transient state has variables");
            balance[s].push((v, 1.0));
            for &(t, p) in mdp.successors(s, a) {
                match partition.role(t) {
                    StateRole::Transient => balance[t].push((v, -p)),
                    StateRole::Goal(i) => inflow[group[i]].push((v, p)),
                    StateRole::Dead => {}
                }
            }
        }
    }
    for &s in partition.transient() {
        let terms = merge_terms(std::mem::take(&mut balance[s]));
        lp.add_row(terms, RowKind::Eq, mdp.initial()[s]);
    }
    let mut initial_on_goal = vec![0.0; targets.len()];
    for (i, &g) in partition.goals().iter().enumerate() {
        initial_on_goal[group[i]] += mdp.initial()[g];
    }
    for (g, terms) in inflow.into_iter().enumerate() {
        lp.add_row(merge_terms(terms), RowKind::Eq, targets[g] - initial_on_goal[g]);
    }
    Ok((lp, layout))
}

/// Identity grouping: one target per partition goal.
pub fn per_goal(partition: &StatePartition) -> Vec<usize> {
    (0..partition.goals().len()).collect()
}
