use nalgebra::{DMatrix, DVector};

use super::{Mdp, OccupancyMeasure, Policy, StateId, StatePartition, StateRole};
use crate::error::{Error, Result};

/// Where the initial mass ends up under a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Absorption {
    /// Probability of reaching each goal, in partition order.
    pub goals: Vec<f64>,
    /// Probability of never reaching a goal: ending in a dead state or
    /// cycling forever among transient states.
    pub dead: f64,
}

/// Transient states the chain can visit from the initial distribution.
/// Unvisited states cannot affect reach probabilities or occupancy, and
/// leaving them out keeps an irrelevant trap from making the system singular.
fn visited_transient(mdp: &Mdp, policy: &Policy, partition: &StatePartition) -> Vec<StateId> {
    let mut seen = vec![false; mdp.num_states()];
    let mut stack: Vec<StateId> =
        partition.transient().iter().copied().filter(|&s| mdp.initial()[s] > 0.0).collect();
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(s) = stack.pop() {
        for (act, &pi) in policy.row(s).iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for &(t, p) in mdp.successors(s, act) {
                if p > 0.0 && !seen[t] && partition.is_transient(t) {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
    }
    partition.transient().iter().copied().filter(|&s| seen[s]).collect()
}

/// The subset of `states` from which the chain can leave the transient set.
fn escaping(mdp: &Mdp, policy: &Policy, partition: &StatePartition, states: &[StateId]) -> Vec<StateId> {
    let mut escapes = vec![false; mdp.num_states()];
    let mut changed = true;
    while changed {
        changed = false;
        for &s in states {
            if escapes[s] {
                continue;
            }
            let exits = policy.row(s).iter().enumerate().any(|(act, &pi)| {
                pi > 0.0
                    && mdp.successors(s, act).iter().any(|&(t, p)| p > 0.0 && (!partition.is_transient(t) || escapes[t]))
            });
            if exits {
                escapes[s] = true;
                changed = true;
            }
        }
    }
    states.iter().copied().filter(|&s| escapes[s]).collect()
}

fn index_of(states: &[StateId], n: usize) -> Vec<Option<usize>> {
    let mut idx = vec![None; n];
    for (i, &s) in states.iter().enumerate() {
        idx[s] = Some(i);
    }
    idx
}

/// `I - Q` where `Q` is the chain's block over `states`.
fn fundamental_system(mdp: &Mdp, policy: &Policy, states: &[StateId], idx: &[Option<usize>]) -> DMatrix<f64> {
    let m = states.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    for (i, &s) in states.iter().enumerate() {
        for (act, &pi) in policy.row(s).iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for &(t, p) in mdp.successors(s, act) {
                if let Some(j) = idx[t] {
                    a[(i, j)] -= pi * p;
                }
            }
        }
    }
    a
}

fn check_policy(mdp: &Mdp, policy: &Policy, partition: &StatePartition) -> Result<()> {
    if policy.num_states() != mdp.num_states() || partition.num_states() != mdp.num_states() {
        return Err(Error::InvalidArgument("policy/partition do not match the MDP".into()));
    }
    Ok(())
}

/// Goal-reach and dead-absorption probabilities from the initial distribution.
pub fn absorption_probabilities(
    mdp: &Mdp,
    policy: &Policy,
    partition: &StatePartition,
) -> Result<Absorption> {
    check_policy(mdp, policy, partition)?;
    let visited = visited_transient(mdp, policy, partition);
    let states = escaping(mdp, policy, partition, &visited);
    let idx = index_of(&states, mdp.num_states());
    let k = partition.goals().len();
    let m = states.len();
    let alpha = mdp.initial();

    let mut goals = vec![0.0; k];
    let mut dead = 0.0;
    for s in 0..mdp.num_states() {
        match partition.role(s) {
            StateRole::Goal(i) => goals[i] += alpha[s],
            StateRole::Dead => dead += alpha[s],
            StateRole::Transient if idx[s].is_none() => dead += alpha[s],
            StateRole::Transient => {}
        }
    }
    if m == 0 {
        return Ok(Absorption { goals, dead });
    }

    // Columns 0..k are one-step goal absorption, column k is dead absorption.
    let mut rhs = DMatrix::<f64>::zeros(m, k + 1);
    for (i, &s) in states.iter().enumerate() {
        for (act, &pi) in policy.row(s).iter().enumerate() {
            for &(t, p) in mdp.successors(s, act) {
                match partition.role(t) {
                    StateRole::Goal(g) => rhs[(i, g)] += pi * p,
                    StateRole::Dead => rhs[(i, k)] += pi * p,
                    StateRole::Transient if idx[t].is_none() => rhs[(i, k)] += pi * p,
                    StateRole::Transient => {}
                }
            }
        }
    }
    let system = fundamental_system(mdp, policy, &states, &idx);
    let lu = system.lu();
    let h = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("absorption system is singular (improper policy)".into()))?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("absorption system produced non-finite values".into()));
    }
    for (i, &s) in states.iter().enumerate() {
        if alpha[s] == 0.0 {
            continue;
        }
        for g in 0..k {
            goals[g] += alpha[s] * h[(i, g)];
        }
        dead += alpha[s] * h[(i, k)];
    }
    for v in goals.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(Absorption { goals, dead: dead.clamp(0.0, 1.0) })
}

/// `Pr(alpha |= <> g)` for every goal, in partition order.
pub fn reach_probabilities(mdp: &Mdp, policy: &Policy, partition: &StatePartition) -> Result<Vec<f64>> {
    Ok(absorption_probabilities(mdp, policy, partition)?.goals)
}

/// Occupancy measure induced by running `policy` from the initial distribution.
pub fn policy_occupancy(mdp: &Mdp, policy: &Policy, partition: &StatePartition) -> Result<OccupancyMeasure> {
    check_policy(mdp, policy, partition)?;
    let states = visited_transient(mdp, policy, partition);
    let idx = index_of(&states, mdp.num_states());
    let m = states.len();
    let mut values: Vec<Vec<f64>> = (0..mdp.num_states()).map(|s| vec![0.0; mdp.num_actions(s)]).collect();
    if m == 0 {
        return OccupancyMeasure::new(mdp, values);
    }
    let system = fundamental_system(mdp, policy, &states, &idx).transpose();
    let alpha = DVector::from_iterator(m, states.iter().map(|&s| mdp.initial()[s]));
    let nu = system
        .lu()
        .solve(&alpha)
        .ok_or_else(|| Error::Numerical("occupancy system is singular (improper policy)".into()))?;
    for (i, &s) in states.iter().enumerate() {
        let visits = nu[i].max(0.0);
        for (a, v) in values[s].iter_mut().enumerate() {
            *v = visits * policy.prob(s, a);
        }
    }
    OccupancyMeasure::new(mdp, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{partition_states, policy_from_occupancy};

    #[test]
    fn chain_reaches_its_goal() {
        let mdp = Mdp::new(
            vec![vec![vec![(1, 1.0)]], vec![vec![(2, 1.0)]], vec![vec![(2, 1.0)]]],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let part = partition_states(&mdp, &[2]).unwrap();
        let pi = Policy::uniform(&mdp);
        assert!((reach_probabilities(&mdp, &pi, &part).unwrap()[0] - 1.0).abs() < 1e-12);
        let x = policy_occupancy(&mdp, &pi, &part).unwrap();
        assert!((x.total() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fair_fork_splits_evenly() {
        let mdp = Mdp::new(
            vec![
                vec![vec![(1, 1.0)], vec![(2, 1.0)]],
                vec![vec![(1, 1.0)]],
                vec![vec![(2, 1.0)]],
            ],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let part = partition_states(&mdp, &[1, 2]).unwrap();
        let reach = reach_probabilities(&mdp, &Policy::uniform(&mdp), &part).unwrap();
        assert!((reach[0] - 0.5).abs() < 1e-12 && (reach[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dead_mass_is_accounted() {
        // 0 -> goal 1 or dead 2 with equal probability.
        let mdp = Mdp::new(
            vec![
                vec![vec![(1, 0.5), (2, 0.5)]],
                vec![vec![(1, 1.0)]],
                vec![vec![(2, 1.0)]],
            ],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let part = partition_states(&mdp, &[1]).unwrap();
        let abs = absorption_probabilities(&mdp, &Policy::uniform(&mdp), &part).unwrap();
        assert!((abs.goals[0] - 0.5).abs() < 1e-12);
        assert!((abs.dead - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unvisited_trap_is_ignored() {
        // State 1 only loops on itself under `pi`, but the chain never enters it.
        let mdp = Mdp::new(
            vec![
                vec![vec![(2, 1.0)], vec![(1, 1.0)]],
                vec![vec![(1, 1.0)], vec![(2, 1.0)]],
                vec![vec![(2, 1.0)]],
            ],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let part = partition_states(&mdp, &[2]).unwrap();
        let pi = Policy::new(&mdp, vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0]]).unwrap();
        assert!((reach_probabilities(&mdp, &pi, &part).unwrap()[0] - 1.0).abs() < 1e-12);
        let x = policy_occupancy(&mdp, &pi, &part).unwrap();
        assert_eq!(x.row(1), &[0.0, 0.0]);

        let trapped = Policy::new(&mdp, vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0]]).unwrap();
        assert!(policy_occupancy(&mdp, &trapped, &part).is_err());
        let abs = absorption_probabilities(&mdp, &trapped, &part).unwrap();
        assert_eq!((abs.goals[0], abs.dead), (0.0, 1.0));

        // A small leak into the trap is lost from the goal.
        let leaky = Policy::new(&mdp, vec![vec![0.75, 0.25], vec![1.0, 0.0], vec![1.0]]).unwrap();
        let abs = absorption_probabilities(&mdp, &leaky, &part).unwrap();
        assert!((abs.goals[0] - 0.75).abs() < 1e-12 && (abs.dead - 0.25).abs() < 1e-12);
    }

    #[test]
    fn occupancy_round_trip_on_loop() {
        // 0 <-> 1 with exits to goal 2.
        let mdp = Mdp::new(
            vec![
                vec![vec![(1, 1.0)], vec![(2, 1.0)]],
                vec![vec![(0, 1.0)], vec![(2, 0.5), (1, 0.5)]],
                vec![vec![(2, 1.0)]],
            ],
            vec![0.6, 0.4, 0.0],
        )
        .unwrap();
        let part = partition_states(&mdp, &[2]).unwrap();
        let pi = Policy::new(&mdp, vec![vec![0.3, 0.7], vec![0.2, 0.8], vec![1.0]]).unwrap();
        let x = policy_occupancy(&mdp, &pi, &part).unwrap();
        assert!(x.flow_residual(&mdp, &part) < 1e-12);
        let back = policy_from_occupancy(&x, &mdp).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                assert!((back.prob(s, a) - pi.prob(s, a)).abs() < 1e-12);
            }
        }
    }
}
