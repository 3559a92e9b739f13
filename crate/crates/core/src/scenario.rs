//! Scenario files: a single versioned JSON document describing one grid
//! world, the candidate utility matrices and every solver parameter.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "grid_world",
//!   "grid": {
//!     "width": 10, "height": 10,
//!     "obstacles": [[1, 2], [2, 2]],
//!     "start": [{ "cell": [2, 0], "mass": 1.0 }],
//!     "goals": [[0, 9], [4, 9], [9, 9]]
//!   },
//!   "utilities": [[[0, 0, 6], [0, 2, 0], [-1, 0, 0]]],
//!   "true_index": 1,
//!   "beta": 1.0,
//!   "cost": 10.0,
//!   "epsilon": 1e-6,
//!   "horizon": 5,
//!   "mode": "exaggeration",
//!   "seed": 7,
//!   "solver": { "tolerance": 1e-6 },
//!   "evaluation": { "paths": 500, "trials": 100, "threshold": 0.0 }
//! }
//! ```
//!
//! Cells are `[col, row]` with the origin at the bottom-left. `horizon` pins
//! the switch time; `switch_multiple` derives it from the minimum expected
//! time instead. `cost` is either a constant or
//! `{ "default": c, "overrides": [{ "cell": [c, r], "action": "up", "cost": x }] }`.
//! `mode` may also be `"both"`.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::deception::{Mode, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::game::UtilityMatrix;
use crate::mdp::{build_grid_mdp, Cell, GridAction, GridWorld, Mdp, StatePartition};
use crate::prediction::CostFunction;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub obstacles: Vec<Cell>,
    pub start: Vec<(Cell, f64)>,
    pub goals: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostOverride {
    pub cell: Cell,
    pub action: GridAction,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSpec {
    pub default: f64,
    pub overrides: Vec<CostOverride>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchTime {
    Fixed(usize),
    Multiple(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvaluationSpec {
    /// Paths per likelihood-ratio trial.
    pub paths: usize,
    pub trials: usize,
    pub threshold: f64,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self { paths: 500, trials: 100, threshold: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub utilities: Vec<UtilityMatrix>,
    /// Zero-based index of the true matrix.
    pub true_index: usize,
    pub beta: f64,
    pub cost: CostSpec,
    pub epsilon: f64,
    pub switch: SwitchTime,
    pub modes: Vec<Mode>,
    pub seed: u64,
    pub tolerance: f64,
    pub evaluation: EvaluationSpec,
}

/// Grid world, MDP, partition and cost table built from a [`Scenario`].
#[derive(Debug, Clone)]
pub struct Model {
    pub world: GridWorld,
    pub mdp: Mdp,
    pub partition: StatePartition,
    pub cost: CostFunction,
}

impl Scenario {
    pub fn build(&self) -> Result<Model> {
        let g = &self.grid;
        let (world, mdp, partition) = build_grid_mdp(g.width, g.height, &g.obstacles, &g.start, &g.goals)?;
        let mut cost = CostFunction::constant(&mdp, self.cost.default);
        let mut problems = Vec::new();
        for o in &self.cost.overrides {
            match world.state_of(o.cell) {
                Some(s) => {
                    let a = GridAction::ALL.iter().position(|&x| x == o.action).unwrap();
                    cost.set(s, a, o.cost);
                }
                None => problems.push(format!("cost override cell {} is not a free cell", o.cell)),
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Model { world, mdp, partition, cost })
    }

    pub fn num_matrices(&self) -> usize {
        self.utilities.len()
    }
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Validation(vec![format!("malformed JSON: {e}")]))?;
    let Some(root) = value.as_object() else {
        return Err(Error::Validation(vec!["scenario must be a JSON object".into()]));
    };
    let mut p = Parser::default();
    p.scenario(root).ok_or_else(|| Error::Validation(std::mem::take(&mut p.errors))).and_then(|s| {
        if p.errors.is_empty() {
            Ok(s)
        } else {
            Err(Error::Validation(p.errors))
        }
    })
}

#[derive(Default)]
struct Parser {
    errors: Vec<String>,
}

impl Parser {
    fn fail<T>(&mut self, msg: String) -> Option<T> {
        self.errors.push(msg);
        None
    }

    fn required<'v>(&mut self, obj: &'v Map<String, Value>, key: &str, ctx: &str) -> Option<&'v Value> {
        match obj.get(key) {
            Some(v) => Some(v),
            None => self.fail(format!("{ctx}: missing field \"{key}\"")),
        }
    }

    fn number(&mut self, v: &Value, what: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => self.fail(format!("{what}: expected a finite number, got {v}")),
        }
    }

    fn count(&mut self, v: &Value, what: &str) -> Option<usize> {
        match v.as_u64() {
            Some(x) => Some(x as usize),
            None => self.fail(format!("{what}: expected a nonnegative integer, got {v}")),
        }
    }

    fn array<'v>(&mut self, v: &'v Value, what: &str) -> Option<&'v Vec<Value>> {
        match v.as_array() {
            Some(a) => Some(a),
            None => self.fail(format!("{what}: expected an array")),
        }
    }

    fn object<'v>(&mut self, v: &'v Value, what: &str) -> Option<&'v Map<String, Value>> {
        match v.as_object() {
            Some(o) => Some(o),
            None => self.fail(format!("{what}: expected an object")),
        }
    }

    fn cell(&mut self, v: &Value, what: &str) -> Option<Cell> {
        match v.as_array().map(|a| a.as_slice()) {
            Some([c, r]) => {
                let col = self.count(c, &format!("{what} column"));
                let row = self.count(r, &format!("{what} row"));
                Some(Cell::new(col?, row?))
            }
            _ => self.fail(format!("{what}: expected [col, row], got {v}")),
        }
    }

    fn cells(&mut self, v: &Value, what: &str) -> Option<Vec<Cell>> {
        let items = self.array(v, what)?;
        let cells: Vec<Option<Cell>> =
            items.iter().enumerate().map(|(i, c)| self.cell(c, &format!("{what}[{i}]"))).collect();
        cells.into_iter().collect()
    }

    fn grid(&mut self, v: &Value) -> Option<GridSpec> {
        let obj = self.object(v, "grid")?;
        let width = self.required(obj, "width", "grid").and_then(|v| self.count(v, "grid.width"));
        let height = self.required(obj, "height", "grid").and_then(|v| self.count(v, "grid.height"));
        let obstacles = match obj.get("obstacles") {
            Some(v) => self.cells(v, "grid.obstacles"),
            None => Some(Vec::new()),
        };
        let start = self.required(obj, "start", "grid").and_then(|v| self.start(v));
        let goals = self.required(obj, "goals", "grid").and_then(|v| self.cells(v, "grid.goals"));
        Some(GridSpec { width: width?, height: height?, obstacles: obstacles?, start: start?, goals: goals? })
    }

    fn start(&mut self, v: &Value) -> Option<Vec<(Cell, f64)>> {
        let items = self.array(v, "grid.start")?;
        let mut out = Vec::new();
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let ctx = format!("grid.start[{i}]");
            let parsed = self.object(item, &ctx).and_then(|o| {
                let cell = self.required(o, "cell", &ctx).and_then(|c| self.cell(c, &format!("{ctx}.cell")));
                let mass = match o.get("mass") {
                    Some(m) => self.number(m, &format!("{ctx}.mass")),
                    None => Some(1.0),
                };
                Some((cell?, mass?))
            });
            match parsed {
                Some(p) => out.push(p),
                None => ok = false,
            }
        }
        if out.is_empty() && ok {
            return self.fail("grid.start: at least one start cell is required".into());
        }
        ok.then_some(out)
    }

    fn matrix(&mut self, v: &Value, what: &str, k: Option<usize>) -> Option<UtilityMatrix> {
        let rows = self.array(v, what)?;
        let mut entries = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let r = self.array(row, &format!("{what} row {i}"))?;
            let vals: Vec<Option<f64>> =
                r.iter().enumerate().map(|(j, x)| self.number(x, &format!("{what}[{i}][{j}]"))).collect();
            entries.push(vals.into_iter().collect::<Option<Vec<f64>>>()?);
        }
        let n = entries.len();
        if entries.iter().any(|r| r.len() != n) {
            return self.fail(format!("{what}: matrix must be square, got {} rows of lengths {:?}", n, entries.iter().map(Vec::len).collect::<Vec<_>>()));
        }
        if let Some(k) = k {
            if n != k {
                return self.fail(format!("{what}: matrix is {n}x{n} but there are {k} goals"));
            }
        }
        match UtilityMatrix::new(entries) {
            Ok(u) => Some(u),
            Err(e) => self.fail(format!("{what}: {e}")),
        }
    }

    fn cost(&mut self, v: &Value) -> Option<CostSpec> {
        if let Some(c) = v.as_f64() {
            if !(c.is_finite() && c >= 0.0) {
                return self.fail(format!("cost: must be finite and nonnegative, got {c}"));
            }
            return Some(CostSpec { default: c, overrides: Vec::new() });
        }
        let obj = self.object(v, "cost")?;
        let default = self.required(obj, "default", "cost").and_then(|d| self.number(d, "cost.default"));
        let mut overrides = Vec::new();
        let mut ok = true;
        if let Some(list) = obj.get("overrides") {
            for (i, item) in self.array(list, "cost.overrides")?.iter().enumerate() {
                let ctx = format!("cost.overrides[{i}]");
                let parsed = self.object(item, &ctx).and_then(|o| {
                    let cell = self.required(o, "cell", &ctx).and_then(|c| self.cell(c, &format!("{ctx}.cell")));
                    let action = self.required(o, "action", &ctx).and_then(|a| {
                        match a.as_str().and_then(GridAction::from_label) {
                            Some(a) => Some(a),
                            None => self.fail(format!("{ctx}.action: expected up/down/right/left, got {a}")),
                        }
                    });
                    let cost = self.required(o, "cost", &ctx).and_then(|c| self.number(c, &format!("{ctx}.cost")));
                    Some(CostOverride { cell: cell?, action: action?, cost: cost? })
                });
                match parsed {
                    Some(o) if o.cost >= 0.0 => overrides.push(o),
                    Some(_) => {
                        ok = false;
                        self.errors.push(format!("{ctx}.cost: must be nonnegative"));
                    }
                    None => ok = false,
                }
            }
        }
        let default = default?;
        if default < 0.0 {
            return self.fail("cost.default: must be nonnegative".into());
        }
        ok.then_some(CostSpec { default, overrides })
    }

    fn modes(&mut self, v: &Value) -> Option<Vec<Mode>> {
        match v.as_str() {
            Some("exaggeration") => Some(vec![Mode::Exaggeration]),
            Some("ambiguity") => Some(vec![Mode::Ambiguity]),
            Some("both") => Some(vec![Mode::Exaggeration, Mode::Ambiguity]),
            _ => self.fail(format!("mode: expected \"exaggeration\", \"ambiguity\" or \"both\", got {v}")),
        }
    }

    fn evaluation(&mut self, v: &Value) -> Option<EvaluationSpec> {
        let obj = self.object(v, "evaluation")?;
        let mut spec = EvaluationSpec::default();
        if let Some(p) = obj.get("paths") {
            spec.paths = self.count(p, "evaluation.paths")?;
        }
        if let Some(t) = obj.get("trials") {
            spec.trials = self.count(t, "evaluation.trials")?;
        }
        if let Some(c) = obj.get("threshold") {
            spec.threshold = self.number(c, "evaluation.threshold")?;
            if spec.threshold < 0.0 {
                return self.fail("evaluation.threshold: must be nonnegative".into());
            }
        }
        Some(spec)
    }

    fn scenario(&mut self, root: &Map<String, Value>) -> Option<Scenario> {
        match root.get("schema_version").and_then(Value::as_u64) {
            Some(SCHEMA_VERSION) => {}
            Some(other) => {
                self.errors.push(format!("schema_version: unsupported version {other} (expected {SCHEMA_VERSION})"))
            }
            None => self.errors.push("schema_version: missing or not an integer".into()),
        }
        let name = root.get("name").and_then(Value::as_str).unwrap_or("scenario").to_string();
        let grid = self.required(root, "grid", "scenario").and_then(|g| self.grid(g));
        let k = grid.as_ref().map(|g| g.goals.len());

        let utilities = self.required(root, "utilities", "scenario").and_then(|u| {
            let list = self.array(u, "utilities")?;
            if list.is_empty() {
                return self.fail("utilities: at least one matrix is required".into());
            }
            let parsed: Vec<Option<UtilityMatrix>> = list
                .iter()
                .enumerate()
                .map(|(i, m)| self.matrix(m, &format!("utilities[{}] (matrix {})", i, i + 1), k))
                .collect();
            parsed.into_iter().collect::<Option<Vec<_>>>()
        });
        let true_index = self.required(root, "true_index", "scenario").and_then(|t| self.count(t, "true_index"));
        let true_index = match (true_index, &utilities) {
            (Some(t), Some(u)) if t == 0 || t > u.len() => {
                self.fail(format!("true_index: {t} is outside 1..={}", u.len()))
            }
            (Some(t), _) => Some(t - 1),
            _ => None,
        };
        let beta = self.required(root, "beta", "scenario").and_then(|b| self.number(b, "beta"));
        let beta = match beta {
            Some(b) if b < 0.0 => self.fail(format!("beta: must be nonnegative, got {b}")),
            b => b,
        };
        let cost = match root.get("cost") {
            Some(c) => self.cost(c),
            None => Some(CostSpec { default: 10.0, overrides: Vec::new() }),
        };
        let epsilon = match root.get("epsilon") {
            Some(e) => match self.number(e, "epsilon") {
                Some(e) if !(e > 0.0 && e <= 1.0) => self.fail(format!("epsilon: must lie in (0, 1], got {e}")),
                e => e,
            },
            None => Some(DEFAULT_EPSILON),
        };
        let switch = match (root.get("horizon"), root.get("switch_multiple")) {
            (Some(_), Some(_)) => self.fail("horizon and switch_multiple are mutually exclusive; give exactly one".into()),
            (None, None) => self.fail("scenario: one of \"horizon\" or \"switch_multiple\" is required".into()),
            (Some(t), None) => match self.count(t, "horizon") {
                Some(0) => self.fail("horizon: must be at least 1".into()),
                t => t.map(SwitchTime::Fixed),
            },
            (None, Some(k)) => match self.count(k, "switch_multiple") {
                Some(0) => self.fail("switch_multiple: must be at least 1".into()),
                k => k.map(SwitchTime::Multiple),
            },
        };
        let modes = match root.get("mode") {
            Some(m) => self.modes(m),
            None => Some(vec![Mode::Exaggeration]),
        };
        let seed = match root.get("seed") {
            Some(s) => match s.as_u64() {
                Some(s) => Some(s),
                None => self.fail(format!("seed: expected a nonnegative integer, got {s}")),
            },
            None => Some(0),
        };
        let tolerance = match root.get("solver") {
            Some(s) => self.object(s, "solver").and_then(|o| match o.get("tolerance") {
                Some(t) => match self.number(t, "solver.tolerance") {
                    Some(t) if t <= 0.0 => self.fail("solver.tolerance: must be positive".into()),
                    t => t,
                },
                None => Some(1e-6),
            }),
            None => Some(1e-6),
        };
        let evaluation = match root.get("evaluation") {
            Some(e) => self.evaluation(e),
            None => Some(EvaluationSpec::default()),
        };
        Some(Scenario {
            name,
            grid: grid?,
            utilities: utilities?,
            true_index: true_index?,
            beta: beta?,
            cost: cost?,
            epsilon: epsilon?,
            switch: switch?,
            modes: modes?,
            seed: seed?,
            tolerance: tolerance?,
            evaluation: evaluation?,
        })
    }
}
