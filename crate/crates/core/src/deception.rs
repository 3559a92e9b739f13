//! Deceptive occupancy synthesis on the time-layered MDP.
//!
//! Layers `1..=T` form the deceptive phase, layer `T + 1` the goal-directed
//! phase. Both synthesis modes keep the true allocation as a hard constraint
//! on the goal inflow summed over every layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{flow_program, VarLayout};
use crate::game::AllocationStrategy;
use crate::mdp::{policy_from_occupancy, ExtendedMdp, OccupancyMeasure, Policy, StatePartition};
use crate::solver::{
    AffineExpr, EntropyTarget, EntropyTerm, LinearProgram, RelativeEntropyProgram, RowKind, Sense, SolveReport,
    Solver,
};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Relative gap under which two exaggeration values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exaggeration,
    Ambiguity,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exaggeration => "exaggeration",
            Mode::Ambiguity => "ambiguity",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exaggeration" => Ok(Mode::Exaggeration),
            "ambiguity" => Ok(Mode::Ambiguity),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// `k * ceil(t_min)`.
pub fn choose_switch_time(k: usize, t_min: f64) -> Result<usize> {
    if k < 1 {
        return Err(Error::InvalidArgument("switch-time multiple k must be at least 1".into()));
    }
    if !(t_min.is_finite() && t_min > 0.0) {
        return Err(Error::InvalidArgument(format!("minimum expected time must be positive, got {t_min}")));
    }
    // Guard against LP noise pushing an integral value just above itself.
    let rounded = t_min.round();
    let ceil = if (t_min - rounded).abs() < 1e-7 { rounded } else { t_min.ceil() };
    Ok(k * ceil as usize)
}

/// `log((decoy(s,a) + eps) / (truth(s,a) + eps))` per base state and action.
pub fn virtual_reward(decoy: &Policy, truth: &Policy, epsilon: f64) -> Result<Vec<Vec<f64>>> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if decoy.num_states() != truth.num_states()
        || decoy.rows().iter().zip(truth.rows()).any(|(a, b)| a.len() != b.len())
    {
        return Err(Error::InvalidArgument("policies have different shapes".into()));
    }
    Ok(decoy
        .rows()
        .iter()
        .zip(truth.rows())
        .map(|(d, t)| d.iter().zip(t).map(|(&p, &q)| ((p + epsilon) / (q + epsilon)).ln()).collect())
        .collect())
}

#[derive(Debug, Clone)]
pub struct DeceptionSpec<'a> {
    pub extended: &'a ExtendedMdp,
    /// Partition of the base MDP.
    pub partition: &'a StatePartition,
    /// Predicted base-state policies; index 0 belongs to the true matrix.
    pub predicted: Vec<Policy>,
    pub target: AllocationStrategy,
    pub epsilon: f64,
}

impl<'a> DeceptionSpec<'a> {
    pub fn new(
        extended: &'a ExtendedMdp,
        partition: &'a StatePartition,
        predicted: Vec<Policy>,
        target: AllocationStrategy,
        epsilon: f64,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if predicted.is_empty() {
            problems.push("need at least one predicted policy".to_string());
        }
        let base = extended.base();
        for (i, p) in predicted.iter().enumerate() {
            if p.num_states() != base.num_states()
                || (0..base.num_states()).any(|s| p.row(s).len() != base.num_actions(s))
            {
                problems.push(format!("predicted policy {} does not match the base MDP", i + 1));
            }
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            problems.push(format!("epsilon must lie in (0, 1], got {epsilon}"));
        }
        if target.len() != partition.goals().len() {
            problems.push(format!(
                "target has {} entries but there are {} goals",
                target.len(),
                partition.goals().len()
            ));
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self { extended, partition, predicted, target, epsilon })
    }

    pub fn num_predictions(&self) -> usize {
        self.predicted.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub mode: Mode,
    /// Occupancy over layered states.
    pub occupancy: OccupancyMeasure,
    /// Layered policy `x / nu`.
    pub policy: Policy,
    /// Optimal value of each exaggeration program (empty for ambiguity).
    pub values: Vec<f64>,
    /// Zero-based argmax of `values`, smallest index on ties.
    pub chosen: Option<usize>,
    /// Indices whose value ties the maximum.
    pub tied: Vec<usize>,
    /// Optimal epigraph variable of the ambiguity program.
    pub z: Option<f64>,
    pub objective: f64,
    /// Expected number of steps spent in layer `T + 1`.
    pub post_switch_time: f64,
    pub reports: Vec<SolveReport>,
}

struct LayeredProgram {
    lp: LinearProgram,
    layout: VarLayout,
    partition: StatePartition,
}

/// Flow constraints on the layered MDP with goal inflow aggregated over layers.
fn layered_flow(spec: &DeceptionSpec<'_>, sense: Sense) -> Result<LayeredProgram> {
    let ext = spec.extended;
    let partition = ext.partition(spec.partition)?;
    let layers = ext.num_layers();
    let group: Vec<usize> = (0..partition.goals().len()).map(|i| i / layers).collect();
    let (lp, layout) = flow_program(ext.mdp(), &partition, &group, spec.target.weights(), sense)?;
    Ok(LayeredProgram { lp, layout, partition })
}

/// The exaggeration LP for predicted policy `index` (zero-based):
/// maximize deceptive-phase virtual reward minus post-switch residence.
pub fn exaggeration_program(spec: &DeceptionSpec<'_>, index: usize) -> Result<(LinearProgram, VarLayout)> {
    if index >= spec.num_predictions() {
        return Err(Error::InvalidArgument(format!("no predicted policy {index}")));
    }
    let reward = virtual_reward(&spec.predicted[index], &spec.predicted[0], spec.epsilon)?;
    let LayeredProgram { mut lp, layout, partition } = layered_flow(spec, Sense::Maximize)?;
    let ext = spec.extended;
    let mdp = ext.mdp();
    for &s in partition.transient() {
        for a in 0..mdp.num_actions(s) {
            let v = layout.var(s, a).expect("transient state has variables");
            let c = if ext.in_deception_phase(s) { reward[ext.base_state(s)][a] } else { -1.0 };
            lp.set_cost(v, c);
        }
    }
    Ok((lp, layout))
}

fn post_switch_time(ext: &ExtendedMdp, x: &OccupancyMeasure) -> f64 {
    (0..x.num_states()).filter(|&s| !ext.in_deception_phase(s)).map(|s| x.state_total(s)).sum()
}

pub fn synthesize_exaggeration(spec: &DeceptionSpec<'_>, solver: &Solver) -> Result<SynthesisResult> {
    let mut values = Vec::with_capacity(spec.num_predictions());
    let mut occupancies = Vec::with_capacity(spec.num_predictions());
    let mut reports = Vec::with_capacity(spec.num_predictions());
    for i in 0..spec.num_predictions() {
        let (lp, layout) = exaggeration_program(spec, i)?;
        let report = solver.solve_lp(&lp)?.require_optimal(&format!("synthesize_exaggeration (matrix {})", i + 1))?;
        occupancies.push(layout.occupancy(spec.extended.mdp(), &report.primal)?);
        values.push(report.objective);
        reports.push(report);
    }
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| top - v <= TIE_TOLERANCE * (1.0 + top.abs()))
        .map(|(i, _)| i)
        .collect();
    let chosen = tied[0];
    let top = values[chosen];
    let occupancy = occupancies.swap_remove(chosen);
    let policy = policy_from_occupancy(&occupancy, spec.extended.mdp())?;
    let post_switch_time = post_switch_time(spec.extended, &occupancy);
    Ok(SynthesisResult {
        mode: Mode::Exaggeration,
        occupancy,
        policy,
        values,
        chosen: Some(chosen),
        tied,
        z: None,
        objective: top,
        post_switch_time,
        reports,
    })
}

/// The ambiguity program: minimize post-switch residence plus `z`, where
/// `z` bounds the deceptive-phase divergence from every predicted policy.
/// Returns the program, the layout and the id of `z`.
pub fn ambiguity_program(spec: &DeceptionSpec<'_>) -> Result<(RelativeEntropyProgram, VarLayout, usize)> {
    let LayeredProgram { mut lp, layout, partition } = layered_flow(spec, Sense::Minimize)?;
    let ext = spec.extended;
    let mdp = ext.mdp();
    for &s in partition.transient() {
        if !ext.in_deception_phase(s) {
            for a in 0..mdp.num_actions(s) {
                lp.set_cost(layout.var(s, a).unwrap(), 1.0);
            }
        }
    }
    let z = lp.add_var(f64::NEG_INFINITY, 1.0);
    let deceptive: Vec<usize> = partition.transient().iter().copied().filter(|&s| ext.in_deception_phase(s)).collect();
    let mut rows = Vec::with_capacity(spec.num_predictions());
    for predicted in &spec.predicted {
        let mut terms = vec![(z, -1.0)];
        for &s in &deceptive {
            let base = ext.base_state(s);
            for a in 0..mdp.num_actions(s) {
                terms.push((layout.var(s, a).unwrap(), -(predicted.prob(base, a) + spec.epsilon).ln()));
            }
        }
        rows.push(lp.add_row(terms, RowKind::Le, 0.0));
    }
    let mut rep = RelativeEntropyProgram::new(lp);
    for &row in &rows {
        for &s in &deceptive {
            let nu = AffineExpr::linear(layout.nu_terms(mdp, s));
            for a in 0..mdp.num_actions(s) {
                rep.add_term(EntropyTerm {
                    weight: 1.0,
                    numerator: layout.var(s, a).unwrap(),
                    denominator: nu.clone(),
                    target: EntropyTarget::Row(row),
                });
            }
        }
    }
    Ok((rep, layout, z))
}

pub fn synthesize_ambiguity(spec: &DeceptionSpec<'_>, solver: &Solver) -> Result<SynthesisResult> {
    let (rep, layout, z) = ambiguity_program(spec)?;
    let report = solver.solve_rep(&rep)?.require_optimal("synthesize_ambiguity")?;
    let occupancy = layout.occupancy(spec.extended.mdp(), &report.primal)?;
    let policy = policy_from_occupancy(&occupancy, spec.extended.mdp())?;
    let post_switch_time = post_switch_time(spec.extended, &occupancy);
    Ok(SynthesisResult {
        mode: Mode::Ambiguity,
        occupancy,
        policy,
        values: Vec::new(),
        chosen: None,
        tied: Vec::new(),
        z: Some(report.primal[z]),
        objective: report.objective,
        post_switch_time,
        reports: vec![report],
    })
}

pub fn synthesize(spec: &DeceptionSpec<'_>, mode: Mode, solver: &Solver) -> Result<SynthesisResult> {
    match mode {
        Mode::Exaggeration => synthesize_exaggeration(spec, solver),
        Mode::Ambiguity => synthesize_ambiguity(spec, solver),
    }
}

/// Goal-directed baseline: minimum total residence on the layered MDP.
pub fn min_time_occupancy(spec: &DeceptionSpec<'_>, solver: &Solver) -> Result<OccupancyMeasure> {
    let LayeredProgram { mut lp, layout, partition } = layered_flow(spec, Sense::Minimize)?;
    let mdp = spec.extended.mdp();
    for &s in partition.transient() {
        for a in 0..mdp.num_actions(s) {
            lp.set_cost(layout.var(s, a).unwrap(), 1.0);
        }
    }
    let report = solver.solve_lp(&lp)?.require_optimal("min_time_occupancy")?;
    layout.occupancy(mdp, &report.primal)
}
