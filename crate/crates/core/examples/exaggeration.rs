//! Exaggeration on a small fork: the truth heads straight for the left goal,
//! the decoy prediction detours through a side state. With one deceptive step
//! the synthesized policy takes the detour and still ends at the left goal.
//!
//! ```text
//! cargo run --example exaggeration
//! ```

use density_deception::deception::{synthesize_exaggeration, DeceptionSpec};
use density_deception::game::AllocationStrategy;
use density_deception::mdp::{partition_states, ExtendedMdp, Mdp, Policy};
use density_deception::solver::Solver;

fn main() -> density_deception::Result<()> {
    // 0: start, 1: side state, 2: left goal, 3: right goal.
    let mdp = Mdp::with_labels(
        vec![
            vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(3, 1.0)]],
            vec![vec![(2, 1.0)], vec![(3, 1.0)]],
            vec![vec![(2, 1.0)]],
            vec![vec![(3, 1.0)]],
        ],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![
            vec!["detour".into(), "left".into(), "right".into()],
            vec!["left".into(), "right".into()],
            vec!["stay".into()],
            vec!["stay".into()],
        ],
    )?;
    let partition = partition_states(&mdp, &[2, 3])?;
    let truth = Policy::new(&mdp, vec![vec![0.1, 0.8, 0.1], vec![0.9, 0.1], vec![1.0], vec![1.0]])?;
    let decoy = Policy::new(&mdp, vec![vec![0.7, 0.0, 0.3], vec![0.1, 0.9], vec![1.0], vec![1.0]])?;
    let ext = ExtendedMdp::new(&mdp, 1)?;
    let spec = DeceptionSpec::new(&ext, &partition, vec![truth, decoy], AllocationStrategy::new(vec![1.0, 0.0])?, 1e-6)?;
    let res = synthesize_exaggeration(&spec, &Solver::default())?;
    println!("program values {:?}, chosen decoy {}", res.values, res.chosen.unwrap() + 1);
    for s in 0..ext.mdp().num_states() {
        if res.occupancy.state_total(s) > 1e-9 && !ext.mdp().is_absorbing(s) {
            let row: Vec<String> = (0..ext.mdp().num_actions(s))
                .map(|a| format!("{} {:.3}", ext.mdp().action_label(s, a), res.policy.prob(s, a)))
                .collect();
            println!("state {} layer {}: {}", ext.base_state(s), ext.layer(s), row.join(", "));
        }
    }
    Ok(())
}
