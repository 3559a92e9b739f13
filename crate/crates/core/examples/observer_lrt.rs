//! An observer runs likelihood-ratio tests on sampled deceptive-phase paths
//! from the full grid pipeline.
//!
//! ```text
//! cargo run --release --example observer_lrt
//! ```

use density_deception::deception::Mode;
use density_deception::pipeline::{likelihood_ratio_experiment, Pipeline, Stage};
use density_deception::scenario::parse_scenario;

fn main() -> density_deception::Result<()> {
    let scenario = parse_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/grid_world.json"))?;
    let mut pipeline = Pipeline::new(scenario)?;
    pipeline.run(Stage::Synthesize).map_err(|(_, e)| e)?;
    let ext = pipeline.extended.as_ref().unwrap();
    let predicted: Vec<_> = pipeline.ordered_predictions().iter().map(|p| ext.lift_policy(p)).collect();
    for mode in [Mode::Exaggeration, Mode::Ambiguity] {
        let policy = &pipeline.synthesis(mode).unwrap().result.policy;
        for (paths, threshold) in [(1, 0.0), (10, 0.0), (500, 0.0), (500, 5.0)] {
            let s = likelihood_ratio_experiment(ext, policy, &predicted[1], &predicted[0], paths, 100, threshold, 11)?;
            println!(
                "{:>12}: {paths:>3} paths, C = {threshold}: decoy {:>3}, truth {:>3}, undecided {}",
                mode.as_str(),
                s.decoy_decisions,
                s.truth_decisions,
                s.undecided
            );
        }
    }
    Ok(())
}
