//! Run every stage on the bundled grid scenario and print a summary.
//!
//! ```text
//! cargo run --release --example full_pipeline [scenario.json]
//! ```

use density_deception::deception::Mode;
use density_deception::pipeline::{Pipeline, Stage};
use density_deception::scenario::parse_scenario;

fn main() -> density_deception::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/grid_world.json").to_string());
    let scenario = parse_scenario(&path)?;
    let mut pipeline = Pipeline::new(scenario)?;
    if let Err((stage, e)) = pipeline.run(Stage::Evaluate) {
        eprintln!("stage {} failed: {e}", stage.name());
        return Err(e);
    }

    for (i, g) in pipeline.games.iter().enumerate() {
        println!(
            "matrix {}: value {:+.6}  team1 {:?}  team2 {:?}",
            i + 1,
            g.solution.value,
            g.solution.team1.weights(),
            g.solution.team2.weights()
        );
    }
    for (i, p) in pipeline.predictions.iter().enumerate() {
        println!("prediction {}: objective {:.4}  reach {:?}", i + 1, p.result.objective, p.reach);
    }
    println!("T_min = {:.4}, T = {}", pipeline.t_min.unwrap(), pipeline.horizon.unwrap());
    for mode in [Mode::Exaggeration, Mode::Ambiguity] {
        let Some(s) = pipeline.synthesis(mode) else { continue };
        let ev = s.evaluation.as_ref().unwrap();
        println!("{}:", mode.as_str());
        println!("  objective {:.4}  values {:?}  z {:?}", s.result.objective, s.result.values, s.result.z);
        println!("  post-switch time {:.4}  reach {:?}", s.result.post_switch_time, ev.reach);
        println!(
            "  exaggeration score {:.4} (min-time {:.4}, truth policy {:.4})",
            ev.report.exaggeration, ev.min_time.exaggeration, ev.truth_policy.exaggeration
        );
        println!("  kl {:?}  ambiguity score {}", ev.report.kl, ev.report.ambiguity);
        if let Some(lrt) = &ev.lrt {
            println!(
                "  likelihood-ratio test: decoy chosen in {}/{} trials",
                lrt.decoy_decisions, lrt.trials
            );
        }
    }
    for (name, secs) in &pipeline.timings.stages {
        println!("{name}: {secs:.2}s");
    }
    Ok(())
}
