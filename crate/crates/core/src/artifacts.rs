//! Run-directory output: density CSVs, PGM heatmaps, policy dumps, the JSON
//! report, per-stage timings and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mdp::{ExtendedMdp, GridAction, GridWorld, OccupancyMeasure, Policy, StatePartition};
use crate::observer::{DeceptivenessReport, ExtReal};
use crate::pipeline::{Pipeline, Stage};
use crate::scenario::SwitchTime;
use crate::solver::SolveReport;

/// Gray level of obstacle cells.
pub const OBSTACLE_LEVEL: u8 = 0;
/// Gray level of free cells with zero density.
pub const ZERO_LEVEL: u8 = 16;
/// Gray level of the densest cell.
pub const MAX_LEVEL: u8 = 255;

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";

/// Pixel scale used for heatmaps written by [`write_run`].
pub const RUN_HEATMAP_SCALE: usize = 16;

fn check_density(density: &[f64], world: &GridWorld) -> Result<()> {
    if density.len() != world.num_states() {
        return Err(Error::InvalidArgument(format!(
            "density has {} entries for {} free cells",
            density.len(),
            world.num_states()
        )));
    }
    if let Some((s, v)) = density.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < -1e-9) {
        return Err(Error::InvalidArgument(format!("density at {} is {v}", world.cell_of(s))));
    }
    Ok(())
}

/// Gray levels per cell, image row 0 being the top grid row.
pub fn gray_levels(density: &[f64], world: &GridWorld) -> Result<Vec<Vec<u8>>> {
    check_density(density, world)?;
    let max = density.iter().copied().fold(0.0, f64::max);
    let span = f64::from(MAX_LEVEL - ZERO_LEVEL);
    let mut image = vec![vec![OBSTACLE_LEVEL; world.width()]; world.height()];
    for (s, &d) in density.iter().enumerate() {
        let c = world.cell_of(s);
        let level = if max > 0.0 { ZERO_LEVEL + (span * d.max(0.0) / max).round() as u8 } else { ZERO_LEVEL };
        image[world.height() - 1 - c.row][c.col] = level;
    }
    Ok(image)
}

/// Plain (`P2`) portable graymap, each cell drawn as a `scale x scale` block.
pub fn render_pgm(density: &[f64], world: &GridWorld, scale: usize) -> Result<String> {
    let scale = scale.max(1);
    let levels = gray_levels(density, world)?;
    let mut out = format!("P2\n{} {}\n{}\n", world.width() * scale, world.height() * scale, MAX_LEVEL);
    for row in &levels {
        let line: Vec<String> =
            row.iter().flat_map(|&v| std::iter::repeat_n(v.to_string(), scale)).collect();
        let line = line.join(" ");
        for _ in 0..scale {
            out.push_str(&line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// `row,col,value` for every free cell, bottom row first.
pub fn density_csv(density: &[f64], world: &GridWorld) -> Result<String> {
    check_density(density, world)?;
    let mut out = String::from("row,col,value\n");
    for (s, &d) in density.iter().enumerate() {
        let c = world.cell_of(s);
        out.push_str(&format!("{},{},{}\n", c.row, c.col, d));
    }
    Ok(out)
}

/// Inverse of [`density_csv`]. Cells missing from the file get zero density.
pub fn parse_density_csv(text: &str, world: &GridWorld) -> Result<Vec<f64>> {
    let mut density = vec![0.0; world.num_states()];
    let mut problems = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [r, c, v] => match (r.parse::<usize>(), c.parse::<usize>(), v.parse::<f64>()) {
                (Ok(r), Ok(c), Ok(v)) => Some((r, c, v)),
                _ => None,
            },
            _ => None,
        };
        match parsed {
            Some((row, col, v)) => match world.state_of(crate::mdp::Cell::new(col, row)) {
                Some(s) => density[s] = v,
                None => problems.push(format!("line {}: ({col}, {row}) is not a free cell", n + 1)),
            },
            None => problems.push(format!("line {}: expected row,col,value", n + 1)),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(density)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapFiles {
    pub csv: PathBuf,
    pub pgm: PathBuf,
}

/// Write `<stem>.csv` and `<stem>.pgm` into `dir`.
pub fn write_heatmap(
    density: &[f64],
    world: &GridWorld,
    dir: &Path,
    stem: &str,
    scale: usize,
) -> Result<HeatmapFiles> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let pgm = dir.join(format!("{stem}.pgm"));
    fs::write(&csv, density_csv(density, world)?)?;
    fs::write(&pgm, render_pgm(density, world, scale)?)?;
    Ok(HeatmapFiles { csv, pgm })
}

fn ext_json(v: ExtReal) -> Value {
    match v {
        ExtReal::Finite(x) => json!(x),
        ExtReal::PosInfinity => json!("+inf"),
        ExtReal::NegInfinity => json!("-inf"),
    }
}

fn solver_json(r: &SolveReport) -> Value {
    json!({
        "status": r.status,
        "objective": r.objective,
        "iterations": r.iterations,
        "residuals": r.residuals,
    })
}

fn deceptiveness_json(r: &DeceptivenessReport, order: &[usize]) -> Value {
    json!({
        "kl": r.kl.iter().zip(order).map(|(&v, &m)| json!({ "matrix": m + 1, "value": ext_json(v) })).collect::<Vec<_>>(),
        "relative": r.relative.iter().zip(order).map(|(&v, &m)| json!({ "matrix": m + 1, "value": v })).collect::<Vec<_>>(),
        "exaggeration": r.exaggeration,
        "ambiguity": ext_json(r.ambiguity),
        "most_likely_matrix": order[r.most_likely] + 1,
    })
}

fn action_map(policy_row: &[f64]) -> Value {
    let mut m = serde_json::Map::new();
    for (a, &p) in GridAction::ALL.iter().zip(policy_row) {
        m.insert(a.label().to_string(), json!(p));
    }
    Value::Object(m)
}

/// Policy and occupancy on transient states; `layer_of` gives `(base state, layer)`.
fn policy_json(
    world: &GridWorld,
    policy: &Policy,
    occupancy: &OccupancyMeasure,
    partition: &StatePartition,
    layer_of: impl Fn(usize) -> (usize, usize),
) -> Value {
    let states: Vec<Value> = partition
        .transient()
        .iter()
        .map(|&s| {
            let (base, layer) = layer_of(s);
            let c = world.cell_of(base);
            json!({
                "cell": [c.col, c.row],
                "layer": layer,
                "residence": occupancy.state_total(s),
                "policy": action_map(policy.row(s)),
                "occupancy": action_map(occupancy.row(s)),
            })
        })
        .collect();
    json!({ "states": states })
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn json(&mut self, name: &str, value: &Value) -> Result<String> {
        fs::write(self.dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
        self.written.push(name.to_string());
        Ok(name.to_string())
    }

    fn heatmap(&mut self, density: &[f64], world: &GridWorld, stem: &str) -> Result<Value> {
        write_heatmap(density, world, self.dir, stem, RUN_HEATMAP_SCALE)?;
        let (csv, pgm) = (format!("{stem}.csv"), format!("{stem}.pgm"));
        self.written.push(csv.clone());
        self.written.push(pgm.clone());
        Ok(json!({ "csv": csv, "pgm": pgm }))
    }
}

/// Machine-readable summary of everything the pipeline computed. Contains no
/// timings, so repeated runs produce identical files.
pub fn build_report(p: &Pipeline, artifacts: &Value) -> Value {
    let s = &p.scenario;
    let order = p.order();
    let switch = match s.switch {
        SwitchTime::Fixed(t) => json!({ "fixed": t }),
        SwitchTime::Multiple(k) => json!({ "multiple": k }),
    };
    let games: Vec<Value> = p
        .games
        .iter()
        .enumerate()
        .map(|(i, g)| {
            json!({
                "matrix": i + 1,
                "value": g.solution.value,
                "team1": g.solution.team1.weights(),
                "team2": g.solution.team2.weights(),
                "saddle_gap": g.saddle_gap,
            })
        })
        .collect();
    let predictions: Vec<Value> = p
        .predictions
        .iter()
        .enumerate()
        .map(|(i, pr)| {
            let residual =
                pr.reach.iter().zip(pr.target.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            json!({
                "matrix": i + 1,
                "target": pr.target.weights(),
                "objective": pr.result.objective,
                "cost_condition_margin": pr.cost_margin,
                "reach": pr.reach,
                "reach_residual": residual,
                "solver": solver_json(&pr.result.report),
                "artifacts": artifacts["predictions"].get(i).cloned().unwrap_or(Value::Null),
            })
        })
        .collect();
    let syntheses: Vec<Value> = p
        .syntheses
        .iter()
        .map(|syn| {
            let r = &syn.result;
            let mode = syn.mode.as_str();
            let mut v = json!({
                "mode": mode,
                "objective": r.objective,
                "post_switch_time": r.post_switch_time,
                "solver": r.reports.iter().map(solver_json).collect::<Vec<_>>(),
                "artifacts": artifacts["synthesis"].get(mode).cloned().unwrap_or(Value::Null),
            });
            if !r.values.is_empty() {
                v["values"] = json!(r
                    .values
                    .iter()
                    .zip(&order)
                    .map(|(&x, &m)| json!({ "matrix": m + 1, "value": x }))
                    .collect::<Vec<_>>());
            }
            if let Some(c) = r.chosen {
                v["chosen_matrix"] = json!(order[c] + 1);
                v["tied_matrices"] = json!(r.tied.iter().map(|&i| order[i] + 1).collect::<Vec<_>>());
            }
            if let Some(z) = r.z {
                v["z"] = json!(z);
            }
            if let Some(ev) = &syn.evaluation {
                v["reach"] = json!(ev.reach);
                v["reach_residual"] = json!(ev.reach_residual);
                v["deceptiveness"] = deceptiveness_json(&ev.report, &order);
                v["baselines"] = json!({
                    "min_time": deceptiveness_json(&ev.min_time, &order),
                    "truth_policy": deceptiveness_json(&ev.truth_policy, &order),
                });
                if let Some(l) = &ev.lrt {
                    v["likelihood_ratio"] = json!({
                        "decoy_matrix": l.decoy + 1,
                        "trials": l.trials,
                        "paths_per_trial": l.paths,
                        "threshold": l.threshold,
                        "decoy_decisions": l.decoy_decisions,
                        "truth_decisions": l.truth_decisions,
                        "undecided": l.undecided,
                        "decoy_fraction": l.decoy_fraction(),
                    });
                }
            }
            v
        })
        .collect();
    json!({
        "schema_version": 1,
        "scenario": s.name,
        "parameters": {
            "beta": s.beta,
            "epsilon": s.epsilon,
            "cost": { "default": s.cost.default, "overrides": s.cost.overrides.len() },
            "switch_time": switch,
            "modes": s.modes.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
            "seed": s.seed,
            "solver_tolerance": s.tolerance,
            "evaluation": s.evaluation,
        },
        "stages_completed": p.completed.iter().map(|st| st.name()).collect::<Vec<_>>(),
        "games": games,
        "predictions": predictions,
        "t_min": p.t_min,
        "horizon": p.horizon,
        "synthesis": syntheses,
        "artifacts": artifacts["files"],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub report: PathBuf,
    pub manifest: PathBuf,
    pub files: Vec<String>,
}

fn write_stage_artifacts(p: &Pipeline, w: &mut Writer<'_>) -> Result<Value> {
    let world = &p.model.world;
    let states: Vec<Value> = (0..world.num_states())
        .map(|s| {
            let c = world.cell_of(s);
            json!({ "state": s, "cell": [c.col, c.row], "role": format!("{:?}", p.model.partition.role(s)) })
        })
        .collect();
    w.json("states.json", &json!({ "width": world.width(), "height": world.height(), "states": states }))?;

    let mut predictions = Vec::new();
    for (i, pr) in p.predictions.iter().enumerate() {
        let stem = format!("prediction_{}", i + 1);
        let heat = w.heatmap(&pr.result.state_density(), world, &format!("{stem}_density"))?;
        let policy = policy_json(world, &pr.result.policy, &pr.result.occupancy, &p.model.partition, |s| (s, 1));
        let pfile = w.json(&format!("{stem}_policy.json"), &policy)?;
        predictions.push(json!({ "density": heat, "policy": pfile }));
    }

    let mut synthesis = serde_json::Map::new();
    if let (Some(ext), Some(ext_part)) = (&p.extended, &p.extended_partition) {
        for syn in &p.syntheses {
            let mode = syn.mode.as_str();
            let x = &syn.result.occupancy;
            let all = w.heatmap(&ext.expected_state_density(x), world, &format!("{mode}_density"))?;
            let deceptive = w.heatmap(
                &ext.expected_state_density(&ext.deception_phase(x)),
                world,
                &format!("{mode}_deceptive_density"),
            )?;
            let policy = layered_policy_json(world, ext, ext_part, &syn.result.policy, x);
            let pfile = w.json(&format!("{mode}_policy.json"), &policy)?;
            synthesis.insert(mode.to_string(), json!({ "density": all, "deceptive_density": deceptive, "policy": pfile }));
        }
    }
    Ok(json!({ "predictions": predictions, "synthesis": synthesis }))
}

fn layered_policy_json(
    world: &GridWorld,
    ext: &ExtendedMdp,
    partition: &StatePartition,
    policy: &Policy,
    x: &OccupancyMeasure,
) -> Value {
    policy_json(world, policy, x, partition, |s| (ext.base_state(s), ext.layer(s)))
}

/// Write every artifact for the stages that completed, then the report,
/// timings and manifest. `failure` marks a run that stopped early.
pub fn write_run(p: &Pipeline, dir: &Path, failure: Option<(Stage, &Error)>) -> Result<RunSummary> {
    fs::create_dir_all(dir)?;
    let mut w = Writer { dir, written: Vec::new() };
    let mut artifacts = write_stage_artifacts(p, &mut w)?;
    w.json(
        TIMINGS_FILE,
        &json!({ "stages": p.timings.stages.iter().map(|(n, t)| json!({ "stage": n, "seconds": t })).collect::<Vec<_>>() }),
    )?;
    let mut files = w.written.clone();
    files.push(REPORT_FILE.to_string());
    artifacts["files"] = json!(files);
    w.json(REPORT_FILE, &build_report(p, &artifacts))?;

    let manifest = match failure {
        None => json!({
            "status": "ok",
            "exit_code": 0,
            "completed_stages": p.completed.iter().map(|s| s.name()).collect::<Vec<_>>(),
            "artifacts": w.written,
        }),
        Some((stage, e)) => json!({
            "status": "failed",
            "failed_stage": stage.name(),
            "error": e.to_string(),
            "exit_code": e.exit_code(),
            "completed_stages": p.completed.iter().map(|s| s.name()).collect::<Vec<_>>(),
            "artifacts": w.written,
        }),
    };
    w.json(MANIFEST_FILE, &manifest)?;
    Ok(RunSummary { dir: dir.to_path_buf(), report: dir.join(REPORT_FILE), manifest: dir.join(MANIFEST_FILE), files: w.written })
}

/// Manifest for a run that failed before a pipeline could be built
/// (e.g. scenario validation).
pub fn write_failure_manifest(dir: &Path, stage: &str, e: &Error) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(MANIFEST_FILE);
    let manifest = json!({
        "status": "failed",
        "failed_stage": stage,
        "error": e.to_string(),
        "details": match e { Error::Validation(v) => json!(v), _ => Value::Null },
        "exit_code": e.exit_code(),
        "completed_stages": [],
        "artifacts": [],
    });
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}
