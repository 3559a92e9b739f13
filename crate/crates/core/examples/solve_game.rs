//! Max-entropy equilibria of the two utility matrices in the bundled scenario.
//!
//! ```text
//! cargo run --example solve_game
//! ```

use density_deception::game::{best_response_value, max_entropy_solution, Player, UtilityMatrix};

fn main() -> density_deception::Result<()> {
    let games = [
        ("U1", vec![vec![0.0, 0.0, 6.0], vec![0.0, 2.0, 0.0], vec![-1.0, 0.0, 0.0]]),
        ("U2", vec![vec![0.0, 0.0, -1.0], vec![0.0, 2.0, 0.0], vec![6.0, 0.0, 0.0]]),
    ];
    for (name, entries) in games {
        let u = UtilityMatrix::new(entries)?;
        let sol = max_entropy_solution(&u)?;
        println!("{name}: value {:.6}", sol.value);
        println!("  team 1 {:.6?} (guarantees {:.6})", sol.team1.weights(), best_response_value(&u, &sol.team1, Player::One));
        println!("  team 2 {:.6?} (concedes at most {:.6})", sol.team2.weights(), best_response_value(&u, &sol.team2, Player::Two));
    }
    Ok(())
}
