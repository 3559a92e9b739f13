//! Write density heatmaps (CSV + PGM) for the two predicted behaviors of the
//! bundled scenario into a directory.
//!
//! ```text
//! cargo run --release --example heatmap -- out/
//! ```

use std::path::PathBuf;

use density_deception::artifacts::write_heatmap;
use density_deception::game::AllocationStrategy;
use density_deception::prediction::{predict_policy, PredictionSpec};
use density_deception::scenario::parse_scenario;
use density_deception::solver::Solver;

fn main() -> density_deception::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "heatmaps".into()));
    let scenario = parse_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/grid_world.json"))?;
    let model = scenario.build()?;
    for (name, weights) in [("truth", vec![0.5, 0.5, 0.0]), ("decoy", vec![0.0, 0.5, 0.5])] {
        for beta in [1.0, 6.0] {
            let spec = PredictionSpec::new(
                &model.mdp,
                &model.partition,
                AllocationStrategy::new(weights.clone())?,
                model.cost.clone(),
                beta,
            )?;
            let res = predict_policy(&spec, &Solver::default())?;
            let files = write_heatmap(&res.state_density(), &model.world, &dir, &format!("{name}_beta{beta}"), 24)?;
            println!("{}", files.pgm.display());
        }
    }
    Ok(())
}
