use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{partition_states, Mdp, StateId, StatePartition};
use crate::error::{Error, Result};

/// Grid cell addressed as `(col, row)` with the origin at the bottom-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAction {
    Up,
    Down,
    Right,
    Left,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Up, GridAction::Down, GridAction::Right, GridAction::Left];

    pub fn label(self) -> &'static str {
        match self {
            GridAction::Up => "up",
            GridAction::Down => "down",
            GridAction::Right => "right",
            GridAction::Left => "left",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.label() == label)
    }

    fn offset(self) -> (i64, i64) {
        match self {
            GridAction::Up => (0, 1),
            GridAction::Down => (0, -1),
            GridAction::Right => (1, 0),
            GridAction::Left => (-1, 0),
        }
    }
}

/// Geometry of a grid world and the cell <-> state mapping. Obstacle cells
/// carry no state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    width: usize,
    height: usize,
    obstacles: BTreeSet<Cell>,
    cells: Vec<Cell>,
    index: Vec<Option<StateId>>,
    goals: Vec<StateId>,
}

impl GridWorld {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacles.contains(&cell)
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        self.obstacles.iter().copied()
    }

    pub fn state_of(&self, cell: Cell) -> Option<StateId> {
        if cell.col >= self.width || cell.row >= self.height {
            return None;
        }
        self.index[cell.row * self.width + cell.col]
    }

    pub fn cell_of(&self, s: StateId) -> Cell {
        self.cells[s]
    }

    pub fn num_states(&self) -> usize {
        self.cells.len()
    }

    pub fn goal_states(&self) -> &[StateId] {
        &self.goals
    }

    /// Move one step; walls and obstacles keep the agent in place.
    pub fn step(&self, cell: Cell, action: GridAction) -> Cell {
        let (dc, dr) = action.offset();
        let col = cell.col as i64 + dc;
        let row = cell.row as i64 + dr;
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return cell;
        }
        let next = Cell::new(col as usize, row as usize);
        if self.is_obstacle(next) {
            cell
        } else {
            next
        }
    }
}

/// Deterministic four-action grid world with absorbing goal cells.
pub fn build_grid_mdp(
    width: usize,
    height: usize,
    obstacles: &[Cell],
    start: &[(Cell, f64)],
    goals: &[Cell],
) -> Result<(GridWorld, Mdp, StatePartition)> {
    let mut problems = Vec::new();
    if width == 0 || height == 0 {
        return Err(Error::Validation(vec![format!("grid must be non-empty, got {width}x{height}")]));
    }
    let inside = |c: &Cell| c.col < width && c.row < height;
    let obstacle_set: BTreeSet<Cell> = obstacles.iter().copied().collect();
    for c in obstacles {
        if !inside(c) {
            problems.push(format!("obstacle cell {c} is outside the {width}x{height} grid"));
        }
    }
    let mut check_cell = |what: &str, c: &Cell| {
        if !inside(c) {
            problems.push(format!("{what} cell {c} is outside the {width}x{height} grid"));
        } else if obstacle_set.contains(c) {
            problems.push(format!("{what} cell {c} is an obstacle"));
        }
    };
    for (c, _) in start {
        check_cell("start", c);
    }
    for c in goals {
        check_cell("goal", c);
    }
    let unique_goals: BTreeSet<Cell> = goals.iter().copied().collect();
    if unique_goals.len() != goals.len() {
        problems.push("goal cells must be distinct".to_string());
    }
    if goals.is_empty() {
        problems.push("at least one goal cell is required".to_string());
    }
    let mass: f64 = start.iter().map(|(_, p)| *p).sum();
    if start.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) || (mass - 1.0).abs() > 1e-12 {
        problems.push(format!("start distribution must be nonnegative and sum to 1 (sum = {mass})"));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let mut index = vec![None; width * height];
    let mut cells = Vec::new();
    for row in 0..height {
        for col in 0..width {
            let c = Cell::new(col, row);
            if !obstacle_set.contains(&c) {
                index[row * width + col] = Some(cells.len());
                cells.push(c);
            }
        }
    }
    let goal_states: Vec<StateId> = goals.iter().map(|c| index[c.row * width + c.col].unwrap()).collect();
    let world = GridWorld { width, height, obstacles: obstacle_set, cells, index, goals: goal_states.clone() };

    let n = world.num_states();
    let mut transitions = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for s in 0..n {
        let here = world.cell_of(s);
        let is_goal = goal_states.contains(&s);
        let acts = GridAction::ALL
            .iter()
            .map(|&a| {
                let to = if is_goal { s } else { world.state_of(world.step(here, a)).unwrap() };
                vec![(to, 1.0)]
            })
            .collect();
        transitions.push(acts);
        labels.push(GridAction::ALL.iter().map(|a| a.label().to_string()).collect());
    }
    let mut initial = vec![0.0; n];
    for (c, p) in start {
        initial[world.state_of(*c).unwrap()] += p;
    }
    let mdp = Mdp::with_labels(transitions, initial, labels)?;
    let partition = partition_states(&mdp, &goal_states)?;
    Ok((world, mdp, partition))
}
