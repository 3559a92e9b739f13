//! Ambiguity on the bundled grid: minimize the worst divergence from either
//! prediction during the first steps, then finish at the true allocation.
//!
//! ```text
//! cargo run --release --example ambiguity
//! ```

use density_deception::deception::{synthesize_ambiguity, synthesize_exaggeration, DeceptionSpec};
use density_deception::game::AllocationStrategy;
use density_deception::mdp::ExtendedMdp;
use density_deception::observer::deceptiveness_ambiguity;
use density_deception::prediction::{predict_policy, PredictionSpec};
use density_deception::scenario::parse_scenario;
use density_deception::solver::Solver;

fn main() -> density_deception::Result<()> {
    let scenario = parse_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/grid_world.json"))?;
    let model = scenario.build()?;
    let solver = Solver::default();
    let truth = AllocationStrategy::new(vec![0.5, 0.5, 0.0])?;
    let decoy = AllocationStrategy::new(vec![0.0, 0.5, 0.5])?;
    let mut predicted = Vec::new();
    for target in [&truth, &decoy] {
        let spec = PredictionSpec::new(&model.mdp, &model.partition, target.clone(), model.cost.clone(), 1.0)?;
        predicted.push(predict_policy(&spec, &solver)?.policy);
    }
    let ext = ExtendedMdp::new(&model.mdp, 5)?;
    let lifted: Vec<_> = predicted.iter().map(|p| ext.lift_policy(p)).collect();
    let spec = DeceptionSpec::new(&ext, &model.partition, predicted, truth, 1e-6)?;

    for (name, res) in [
        ("ambiguity", synthesize_ambiguity(&spec, &solver)?),
        ("exaggeration", synthesize_exaggeration(&spec, &solver)?),
    ] {
        let report = deceptiveness_ambiguity(&ext.deception_phase(&res.occupancy), &res.policy, &lifted, 1e-6)?;
        println!(
            "{name:>12}: KL to truth {}, KL to decoy {}, ambiguity score {}",
            report.kl[0], report.kl[1], report.ambiguity
        );
    }
    Ok(())
}
