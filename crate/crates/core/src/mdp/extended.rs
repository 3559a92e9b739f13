use super::{partition_states, Mdp, OccupancyMeasure, Policy, StateId, StatePartition};
use crate::error::{Error, Result};

/// Time-layered copy of a base MDP with layers `1..=T+1`.
///
/// Layered state `<s, t>` is stored at index `(t - 1) * |S| + s`. Layers
/// `t <= T` step into layer `t + 1`; layer `T + 1` steps within itself.
/// Absorbing base states stay put inside their own layer, so reaching any
/// copy of a goal is terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMdp {
    base: Mdp,
    horizon: usize,
    flat: Mdp,
}

impl ExtendedMdp {
    pub fn new(base: &Mdp, horizon: usize) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::InvalidArgument("switch time T must be at least 1".into()));
        }
        let n = base.num_states();
        let layers = horizon + 1;
        let absorbing: Vec<bool> = (0..n).map(|s| base.is_absorbing(s)).collect();
        let mut transitions = Vec::with_capacity(n * layers);
        let mut labels = Vec::with_capacity(n * layers);
        for t in 1..=layers {
            let next_layer = if t <= horizon { t + 1 } else { t };
            for s in 0..n {
                let target_layer = if absorbing[s] { t } else { next_layer };
                let acts = (0..base.num_actions(s))
                    .map(|a| {
                        base.successors(s, a)
                            .iter()
                            .map(|&(s2, p)| ((target_layer - 1) * n + s2, p))
                            .collect()
                    })
                    .collect();
                transitions.push(acts);
                labels.push((0..base.num_actions(s)).map(|a| base.action_label(s, a).to_string()).collect());
            }
        }
        let mut initial = vec![0.0; n * layers];
        initial[..n].copy_from_slice(base.initial());
        let flat = Mdp::with_labels(transitions, initial, labels)?;
        Ok(Self { base: base.clone(), horizon, flat })
    }

    pub fn base(&self) -> &Mdp {
        &self.base
    }

    /// The flattened layered MDP.
    pub fn mdp(&self) -> &Mdp {
        &self.flat
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_layers(&self) -> usize {
        self.horizon + 1
    }

    pub fn state(&self, base_state: StateId, layer: usize) -> StateId {
        debug_assert!(layer >= 1 && layer <= self.num_layers());
        (layer - 1) * self.base.num_states() + base_state
    }

    pub fn layer(&self, s: StateId) -> usize {
        s / self.base.num_states() + 1
    }

    pub fn base_state(&self, s: StateId) -> StateId {
        s % self.base.num_states()
    }

    /// Deceptive phase: layers `1..=T`.
    pub fn in_deception_phase(&self, s: StateId) -> bool {
        self.layer(s) <= self.horizon
    }

    /// Partition whose goals are every layer copy of the base goals, ordered
    /// goal-major (all layers of goal 1, then goal 2, ...).
    pub fn partition(&self, base: &StatePartition) -> Result<StatePartition> {
        let goals: Vec<StateId> = base
            .goals()
            .iter()
            .flat_map(|&g| (1..=self.num_layers()).map(move |t| (g, t)))
            .map(|(g, t)| self.state(g, t))
            .collect();
        partition_states(&self.flat, &goals)
    }

    /// Sum per-copy goal values back onto the base goals.
    pub fn aggregate_goals(&self, per_copy: &[f64]) -> Vec<f64> {
        per_copy.chunks(self.num_layers()).map(|c| c.iter().sum()).collect()
    }

    /// Apply a base-state policy identically in every layer.
    pub fn lift_policy(&self, policy: &Policy) -> Policy {
        let rows = (0..self.flat.num_states())
            .map(|s| policy.row(self.base_state(s)).to_vec())
            .collect();
        Policy::new(&self.flat, rows).expect("lifted policy keeps row structure")
    }

    /// Occupancy restricted to the deceptive phase (layers `<= T`).
    pub fn deception_phase(&self, x: &OccupancyMeasure) -> OccupancyMeasure {
        x.restrict(|s| self.in_deception_phase(s))
    }

    /// Expected residence time per base state, summed over all layers.
    pub fn expected_state_density(&self, x: &OccupancyMeasure) -> Vec<f64> {
        let mut density = vec![0.0; self.base.num_states()];
        for s in 0..x.num_states() {
            density[self.base_state(s)] += x.state_total(s);
        }
        density
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Mdp {
        Mdp::new(vec![vec![vec![(1, 1.0)], vec![(0, 1.0)]], vec![vec![(1, 1.0)]]], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn layered_sizes() {
        let ext = ExtendedMdp::new(&base(), 1).unwrap();
        assert_eq!(ext.mdp().num_states(), 4);
        assert!(ExtendedMdp::new(&base(), 0).is_err());
    }

    #[test]
    fn transitions_advance_then_stay() {
        let ext = ExtendedMdp::new(&base(), 2).unwrap();
        let m = ext.mdp();
        assert_eq!(m.successors(ext.state(0, 1), 1), &[(ext.state(0, 2), 1.0)]);
        assert_eq!(m.successors(ext.state(0, 2), 0), &[(ext.state(1, 3), 1.0)]);
        assert_eq!(m.successors(ext.state(0, 3), 1), &[(ext.state(0, 3), 1.0)]);
        assert_eq!(ext.layer(ext.state(0, 3)), 3);
        assert!(m.is_absorbing(ext.state(1, 1)));
        assert_eq!(&m.initial()[..2], &[1.0, 0.0]);
        assert!(m.initial()[2..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn density_sums_layers() {
        let ext = ExtendedMdp::new(&base(), 1).unwrap();
        let m = ext.mdp();
        let mut rows: Vec<Vec<f64>> = (0..m.num_states()).map(|s| vec![0.0; m.num_actions(s)]).collect();
        rows[ext.state(0, 1)][0] = 0.3;
        rows[ext.state(0, 2)][1] = 0.2;
        let x = OccupancyMeasure::new(m, rows).unwrap();
        let d = ext.expected_state_density(&x);
        assert!((d[0] - 0.5).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn hundred_states_five_layers() {
        let n = 100;
        let trans = (0..n).map(|s| vec![vec![((s + 1) % n, 1.0)]]).collect();
        let mut init = vec![0.0; n];
        init[0] = 1.0;
        let mdp = Mdp::new(trans, init).unwrap();
        assert_eq!(ExtendedMdp::new(&mdp, 5).unwrap().mdp().num_states(), 600);
    }
}
