use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use density_deception::artifacts::{parse_density_csv, render_pgm, write_failure_manifest, write_run};
use density_deception::deception::Mode;
use density_deception::pipeline::{Pipeline, Stage};
use density_deception::scenario::{parse_scenario, Scenario};
use density_deception::{Error, Result};

#[derive(Parser)]
#[command(name = "density-deception", version, about = "Deceptive density control on grid worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every matrix game and pick max-entropy equilibria.
    SolveGame(RunArgs),
    /// Predict the adversary's expected policy for each equilibrium.
    Predict(RunArgs),
    /// Synthesize deceptive policies.
    Synthesize(RunArgs),
    /// Synthesize and score deceptive policies.
    Evaluate(RunArgs),
    /// Full pipeline with all artifacts.
    Run(RunArgs),
    /// Render a density CSV as a PGM heatmap.
    Heatmap(HeatmapArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exaggeration,
    Ambiguity,
    Both,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Run directory (default: runs/<scenario name>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Density CSV with `row,col,value` lines.
    #[arg(long)]
    input: PathBuf,
    /// Output PGM file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    scale: usize,
}

fn load(args: &RunArgs) -> Result<Scenario> {
    let mut s = parse_scenario(&args.scenario)?;
    if let Some(m) = args.mode {
        s.modes = match m {
            ModeArg::Exaggeration => vec![Mode::Exaggeration],
            ModeArg::Ambiguity => vec![Mode::Ambiguity],
            ModeArg::Both => vec![Mode::Exaggeration, Mode::Ambiguity],
        };
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Validation(vec![format!("--tol must be positive, got {tol}")]));
        }
        s.tolerance = tol;
    }
    Ok(s)
}

fn summary(p: &Pipeline, last: Stage) -> serde_json::Value {
    let games: Vec<_> = p
        .games
        .iter()
        .map(|g| json!({ "value": g.solution.value, "team1": g.solution.team1.weights(), "team2": g.solution.team2.weights() }))
        .collect();
    let mut out = json!({ "games": games });
    if last >= Stage::Predict {
        out["predictions"] = json!(p.predictions.iter().map(|pr| json!({ "objective": pr.result.objective, "reach": pr.reach })).collect::<Vec<_>>());
    }
    if last >= Stage::Synthesize {
        out["t_min"] = json!(p.t_min);
        out["horizon"] = json!(p.horizon);
        out["synthesis"] = json!(p
            .syntheses
            .iter()
            .map(|s| {
                let mut v = json!({ "mode": s.mode.as_str(), "objective": s.result.objective });
                if let Some(ev) = &s.evaluation {
                    v["exaggeration_score"] = json!(ev.report.exaggeration);
                    v["ambiguity_score"] = json!(ev.report.ambiguity.to_f64());
                    v["reach"] = json!(ev.reach);
                }
                v
            })
            .collect::<Vec<_>>());
    }
    out
}

fn run(args: &RunArgs, last: Stage) -> Result<()> {
    let scenario = match load(args) {
        Ok(s) => s,
        Err(e) => {
            if let Some(dir) = &args.out {
                write_failure_manifest(dir, "parse-scenario", &e)?;
            }
            return Err(e);
        }
    };
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&scenario.name));
    let mut pipeline = match Pipeline::new(scenario) {
        Ok(p) => p,
        Err(e) => {
            write_failure_manifest(&dir, "build-model", &e)?;
            return Err(e);
        }
    };
    match pipeline.run(last) {
        Ok(()) => {
            let run = write_run(&pipeline, &dir, None)?;
            println!("{}", serde_json::to_string_pretty(&summary(&pipeline, last))?);
            eprintln!("wrote {} files to {}", run.files.len(), run.dir.display());
            Ok(())
        }
        Err((stage, e)) => {
            write_run(&pipeline, &dir, Some((stage, &e)))?;
            eprintln!("stage {} failed; partial results in {}", stage.name(), dir.display());
            Err(e)
        }
    }
}

fn heatmap(args: &HeatmapArgs) -> Result<()> {
    let scenario = parse_scenario(&args.scenario)?;
    let model = scenario.build()?;
    let density = parse_density_csv(&std::fs::read_to_string(&args.input)?, &model.world)?;
    std::fs::write(&args.out, render_pgm(&density, &model.world, args.scale)?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::SolveGame(a) => run(a, Stage::SolveGame),
        Command::Predict(a) => run(a, Stage::Predict),
        Command::Synthesize(a) => run(a, Stage::Synthesize),
        Command::Evaluate(a) | Command::Run(a) => run(a, Stage::Evaluate),
        Command::Heatmap(a) => heatmap(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Validation(problems) = &e {
                for p in problems {
                    eprintln!("  - {p}");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
