#![allow(dead_code)]

pub mod simplex;

use std::collections::VecDeque;

use density_deception::mdp::{partition_states, Cell, GridWorld, Mdp, Policy, StatePartition};
use proptest::prelude::*;

/// Shortest number of moves from `from` to every free cell (None if unreachable).
pub fn bfs_distances(world: &GridWorld, from: Cell) -> Vec<Option<usize>> {
    use density_deception::mdp::GridAction;
    let mut dist = vec![None; world.num_states()];
    let start = world.state_of(from).expect("free start cell");
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        let here = world.cell_of(s);
        for a in GridAction::ALL {
            let t = world.state_of(world.step(here, a)).unwrap();
            if dist[t].is_none() {
                dist[t] = Some(dist[s].unwrap() + 1);
                queue.push_back(t);
            }
        }
    }
    dist
}

/// The fixed grid used throughout the tests.
pub const OBSTACLES: [(usize, usize); 14] = [
    (1, 2), (2, 2), (1, 3), (2, 3),
    (6, 3), (7, 3), (6, 4), (7, 4),
    (3, 6), (4, 6), (5, 6), (3, 7), (4, 7), (5, 7),
];

pub fn scenario_path() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/grid_world.json").to_string()
}

/// A small random MDP: `n` transient candidates plus `goals` absorbing states
/// at the end. State 0 always has a direct route to goal `n`.
#[derive(Debug, Clone)]
pub struct RandomMdp {
    pub mdp: Mdp,
    pub partition: StatePartition,
    pub goals: Vec<usize>,
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..10, len).prop_map(|w| {
        let total: u32 = w.iter().sum();
        w.iter().map(|&v| v as f64 / total as f64).collect()
    })
}

pub fn random_mdp(max_transient: usize, goals: usize) -> impl Strategy<Value = RandomMdp> {
    (2..=max_transient).prop_flat_map(move |n| {
        let total = n + goals;
        let action = (prop::collection::vec(0..total, 1..=2), distribution(2));
        let state = prop::collection::vec(action, 1..=3);
        (prop::collection::vec(state, n), Just(n))
    })
    .prop_map(move |(raw, n)| {
        let total = n + goals;
        let mut transitions: Vec<Vec<Vec<(usize, f64)>>> = raw
            .into_iter()
            .map(|acts| {
                acts.into_iter()
                    .map(|(succ, w)| {
                        let mut out: Vec<(usize, f64)> = Vec::new();
                        let wsum: f64 = w[..succ.len()].iter().sum();
                        for (k, &t) in succ.iter().enumerate() {
                            let p = w[k] / wsum;
                            match out.iter_mut().find(|(s, _)| *s == t) {
                                Some(e) => e.1 += p,
                                None => out.push((t, p)),
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        transitions[0].push(vec![(n, 1.0)]);
        for g in n..total {
            transitions.push(vec![vec![(g, 1.0)]]);
        }
        // Renormalize against rounding.
        for acts in transitions.iter_mut() {
            for a in acts.iter_mut() {
                let s: f64 = a.iter().map(|e| e.1).sum();
                for e in a.iter_mut() {
                    e.1 /= s;
                }
            }
        }
        let mut initial = vec![0.0; total];
        initial[0] = 1.0;
        let mdp = Mdp::new(transitions, initial).unwrap();
        let goal_ids: Vec<usize> = (n..total).collect();
        let partition = partition_states(&mdp, &goal_ids).unwrap();
        RandomMdp { mdp, partition, goals: goal_ids }
    })
}

/// A strictly positive random policy for `mdp`.
pub fn positive_policy(mdp: &Mdp, raw: &[u32]) -> Policy {
    let mut k = 0;
    let rows = (0..mdp.num_states())
        .map(|s| {
            let w: Vec<f64> = (0..mdp.num_actions(s))
                .map(|_| {
                    k += 1;
                    1.0 + raw[(k - 1) % raw.len()] as f64
                })
                .collect();
            let t: f64 = w.iter().sum();
            w.iter().map(|v| v / t).collect()
        })
        .collect();
    Policy::new(mdp, rows).unwrap()
}
