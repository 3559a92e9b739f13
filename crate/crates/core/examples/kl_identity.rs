//! The occupancy-weighted log-ratio equals the KL divergence between path
//! distributions. Compare it against a Monte-Carlo estimate on a random walk.
//!
//! ```text
//! cargo run --release --example kl_identity
//! ```

use density_deception::mdp::{partition_states, policy_occupancy, Mdp, Policy};
use density_deception::observer::{estimate_kl_monte_carlo, kl_path_divergence};

fn main() -> density_deception::Result<()> {
    // Noisy corridor 0 - 1 - 2 with goals at both ends (3 left, 4 right).
    let mdp = Mdp::new(
        vec![
            vec![vec![(3, 0.8), (1, 0.2)], vec![(1, 0.8), (3, 0.2)]],
            vec![vec![(0, 0.8), (2, 0.2)], vec![(2, 0.8), (0, 0.2)]],
            vec![vec![(1, 0.8), (4, 0.2)], vec![(4, 0.8), (1, 0.2)]],
            vec![vec![(3, 1.0)]],
            vec![vec![(4, 1.0)]],
        ],
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
    )?;
    let partition = partition_states(&mdp, &[3, 4])?;
    let pi = Policy::new(&mdp, vec![vec![0.3, 0.7], vec![0.4, 0.6], vec![0.2, 0.8], vec![1.0], vec![1.0]])?;
    let other = Policy::new(&mdp, vec![vec![0.6, 0.4], vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0], vec![1.0]])?;
    let x = policy_occupancy(&mdp, &pi, &partition)?;
    let exact = kl_path_divergence(&x, &pi, &other, 0.0)?;
    println!("occupancy identity: {exact}");
    for n in [1_000, 10_000, 100_000] {
        let est = estimate_kl_monte_carlo(&mdp, &pi, &other, n, 5, 1_000)?;
        println!("monte carlo n = {n:>6}: {} +- {:.5}", est.estimate, est.stderr);
    }
    Ok(())
}
