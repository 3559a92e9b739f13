//! Predicted (max-entropy) behavior on the bundled grid for two values of the
//! inefficiency parameter, printed as ASCII density maps.
//!
//! ```text
//! cargo run --release --example predict_grid
//! ```

use density_deception::game::AllocationStrategy;
use density_deception::mdp::{reach_probabilities, Cell, GridWorld};
use density_deception::prediction::{check_cost_condition, predict_policy, PredictionSpec};
use density_deception::scenario::parse_scenario;
use density_deception::solver::Solver;

fn print_density(world: &GridWorld, density: &[f64]) {
    for row in (0..world.height()).rev() {
        let line: Vec<String> = (0..world.width())
            .map(|col| match world.state_of(Cell::new(col, row)) {
                None => "  ## ".to_string(),
                Some(s) if density[s] < 5e-3 => "   . ".to_string(),
                Some(s) => format!("{:5.2}", density[s]),
            })
            .collect();
        println!("{}", line.join(""));
    }
}

fn entropy(density: &[f64]) -> f64 {
    let total: f64 = density.iter().sum();
    -density.iter().filter(|&&d| d > 0.0).map(|&d| d / total * (d / total).ln()).sum::<f64>()
}

fn main() -> density_deception::Result<()> {
    let scenario = parse_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/grid_world.json"))?;
    let model = scenario.build()?;
    let target = AllocationStrategy::new(vec![0.5, 0.5, 0.0])?;
    for beta in [1.0, 6.0] {
        let spec = PredictionSpec::new(&model.mdp, &model.partition, target.clone(), model.cost.clone(), beta)?;
        let check = check_cost_condition(&spec);
        println!("beta = {beta}: cost condition {} (worst margin {:.3})", check.satisfied, check.worst_margin());
        let res = predict_policy(&spec, &Solver::default())?;
        let density = res.state_density();
        println!(
            "objective {:.4}, reach {:.4?}, density entropy {:.4}",
            res.objective,
            reach_probabilities(&model.mdp, &res.policy, &model.partition)?,
            entropy(&density)
        );
        print_density(&model.world, &density);
        println!();
    }
    Ok(())
}
