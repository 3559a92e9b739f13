use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Mdp, Policy, StateId};
use crate::error::{Error, Result};

/// One sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    /// `(s_t, a_t)` for every step taken.
    pub steps: Vec<(StateId, usize)>,
    /// State reached after the last step.
    pub terminal: StateId,
    /// Stopped by the horizon cap rather than absorption.
    pub truncated: bool,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Visited states including the terminal one.
    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.steps.iter().map(|&(s, _)| s).chain(std::iter::once(self.terminal))
    }
}

pub fn default_horizon_cap(mdp: &Mdp) -> usize {
    50 * mdp.num_states()
}

fn draw(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Sample `n` paths from the initial distribution under `policy`.
pub fn sample_paths(
    mdp: &Mdp,
    policy: &Policy,
    n: usize,
    seed: u64,
    horizon_cap: usize,
) -> Result<Vec<PathSample>> {
    if n == 0 || horizon_cap == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and horizon_cap >= 1".into()));
    }
    if policy.num_states() != mdp.num_states() {
        return Err(Error::InvalidArgument("policy does not match MDP".into()));
    }
    let absorbing: Vec<bool> = (0..mdp.num_states()).map(|s| mdp.is_absorbing(s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = draw(&mut rng, mdp.initial().iter().copied());
        let mut steps = Vec::new();
        let mut truncated = false;
        while !absorbing[s] {
            if steps.len() == horizon_cap {
                truncated = true;
                break;
            }
            let a = draw(&mut rng, policy.row(s).iter().copied());
            let succ = mdp.successors(s, a);
            let next = succ[draw(&mut rng, succ.iter().map(|&(_, p)| p))].0;
            steps.push((s, a));
            s = next;
        }
        paths.push(PathSample { steps, terminal: s, truncated });
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Mdp {
        Mdp::new(
            vec![
                vec![vec![(1, 1.0)]],
                vec![vec![(2, 1.0)]],
                vec![vec![(3, 1.0)]],
                vec![vec![(3, 1.0)]],
            ],
            vec![1.0, 0.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_chain_paths() {
        let mdp = chain();
        let paths = sample_paths(&mdp, &Policy::uniform(&mdp), 20, 7, 100).unwrap();
        for p in &paths {
            assert_eq!(p.len(), 3);
            assert!(!p.truncated);
            assert_eq!(p.terminal, 3);
        }
    }

    #[test]
    fn cap_marks_truncation() {
        let mdp = chain();
        let paths = sample_paths(&mdp, &Policy::uniform(&mdp), 1, 7, 2).unwrap();
        assert!(paths[0].truncated);
        assert_eq!(paths[0].len(), 2);
    }

    #[test]
    fn same_seed_same_paths() {
        let mdp = Mdp::new(
            vec![vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]], vec![vec![(1, 1.0)]]],
            vec![1.0, 0.0],
        )
        .unwrap();
        let pi = Policy::uniform(&mdp);
        assert_eq!(sample_paths(&mdp, &pi, 50, 42, 100).unwrap(), sample_paths(&mdp, &pi, 50, 42, 100).unwrap());
    }

    #[test]
    fn rejects_zero_counts() {
        let mdp = chain();
        assert!(sample_paths(&mdp, &Policy::uniform(&mdp), 0, 1, 5).is_err());
        assert!(sample_paths(&mdp, &Policy::uniform(&mdp), 1, 1, 0).is_err());
    }
}
