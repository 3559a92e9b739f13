//! Zero-sum resource allocation games over goal states.
//!
//! Team 1 (row player) maximizes `s1^T U s2`, Team 2 (column player)
//! minimizes it. The value comes from the maximin LP; equilibrium selection
//! then maximizes Shannon entropy over the player's security polytope, which
//! is exactly that player's set of equilibrium strategies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{
    AffineExpr, EntropyTarget, EntropyTerm, LinearProgram, RelativeEntropyProgram, RowKind, Sense, Solver,
    SolverSettings,
};

/// Strategy weights below this are treated as solver noise and zeroed.
const SNAP: f64 = 1e-8;

/// Slack on the security level so the polytope keeps a feasible point
/// despite round-off in the value.
const SECURITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityMatrix {
    entries: Vec<Vec<f64>>,
}

impl UtilityMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let k = entries.len();
        if k == 0 {
            return Err(Error::InvalidArgument("utility matrix must be at least 1x1".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "utility matrix is not square: row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("utility matrix row {i} has a non-finite entry")));
            }
        }
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Same matrix with `c` added to every entry.
    pub fn shifted(&self, c: f64) -> Self {
        Self { entries: self.entries.iter().map(|r| r.iter().map(|v| v + c).collect()).collect() }
    }
}

/// Probability vector over the goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllocationStrategy {
    weights: Vec<f64>,
}

impl AllocationStrategy {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("allocation strategy is empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!("allocation strategy has a negative entry: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("allocation strategy sums to {total}")));
        }
        Ok(Self { weights })
    }

    pub fn point_mass(k: usize, i: usize) -> Self {
        let mut weights = vec![0.0; k];
        weights[i] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Shannon entropy with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self.weights.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum::<f64>()
    }

    fn from_solver(raw: &[f64]) -> Result<Self> {
        let snapped: Vec<f64> = raw.iter().map(|&w| if w < SNAP { 0.0 } else { w }).collect();
        let total: f64 = snapped.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numerical("solver returned an all-zero strategy".into()));
        }
        Self::new(snapped.iter().map(|w| w / total).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Player {
    /// Maximizer (Team 1).
    One,
    /// Minimizer (Team 2).
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub value: f64,
    pub team1: AllocationStrategy,
    pub team2: AllocationStrategy,
}

fn game_solver() -> Solver {
    Solver::new(SolverSettings::with_tolerance(1e-7))
}

/// Security level of a strategy: `min_j (s^T U)_j` for player one,
/// `max_i (U s)_i` for player two.
pub fn best_response_value(u: &UtilityMatrix, sigma: &AllocationStrategy, player: Player) -> f64 {
    let k = u.size();
    match player {
        Player::One => (0..k)
            .map(|j| (0..k).map(|i| sigma.weights[i] * u.get(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min),
        Player::Two => (0..k)
            .map(|i| (0..k).map(|j| u.get(i, j) * sigma.weights[j]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

fn check_dims(u: &UtilityMatrix, sigma: &AllocationStrategy) -> Result<()> {
    if sigma.len() != u.size() {
        return Err(Error::InvalidArgument(format!(
            "strategy has {} entries for a {}x{} game",
            sigma.len(),
            u.size(),
            u.size()
        )));
    }
    Ok(())
}

/// Security-level LP for one player: variables `sigma_0..sigma_{k-1}, v`.
fn security_lp(u: &UtilityMatrix, player: Player) -> LinearProgram {
    let k = u.size();
    let sense = match player {
        Player::One => Sense::Maximize,
        Player::Two => Sense::Minimize,
    };
    let mut lp = LinearProgram::new(sense);
    let sigma: Vec<usize> = (0..k).map(|_| lp.add_var(0.0, 0.0)).collect();
    let v = lp.add_var(f64::NEG_INFINITY, 1.0);
    for other in 0..k {
        let mut terms: Vec<(usize, f64)> = (0..k)
            .map(|own| {
                let entry = match player {
                    Player::One => u.get(own, other),
                    Player::Two => u.get(other, own),
                };
                (sigma[own], entry)
            })
            .collect();
        terms.push((v, -1.0));
        let kind = match player {
            Player::One => RowKind::Ge,
            Player::Two => RowKind::Le,
        };
        lp.add_row(terms, kind, 0.0);
    }
    lp.add_row(sigma.iter().map(|&s| (s, 1.0)).collect(), RowKind::Eq, 1.0);
    lp
}

/// Game value and a pair of equilibrium strategies.
pub fn solve_zero_sum(u: &UtilityMatrix) -> Result<GameSolution> {
    let solver = game_solver();
    let k = u.size();
    let r1 = solver.solve_lp(&security_lp(u, Player::One))?.require_optimal("solve_zero_sum (team 1)")?;
    let r2 = solver.solve_lp(&security_lp(u, Player::Two))?.require_optimal("solve_zero_sum (team 2)")?;
    let team1 = AllocationStrategy::from_solver(&r1.primal[..k])?;
    let team2 = AllocationStrategy::from_solver(&r2.primal[..k])?;
    let value: f64 = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| team1.weights[i] * u.get(i, j) * team2.weights[j])
        .sum();
    Ok(GameSolution { value, team1, team2 })
}

/// The entropy-maximizing strategy among all of `player`'s equilibrium strategies.
pub fn max_entropy_equilibrium(u: &UtilityMatrix, value: f64, player: Player) -> Result<AllocationStrategy> {
    if !value.is_finite() {
        return Err(Error::InvalidArgument("game value must be finite".into()));
    }
    let k = u.size();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let sigma: Vec<usize> = (0..k).map(|_| lp.add_var(0.0, 0.0)).collect();
    let slack = SECURITY_SLACK * (1.0 + value.abs());
    for other in 0..k {
        let terms: Vec<(usize, f64)> = (0..k)
            .map(|own| {
                let entry = match player {
                    Player::One => u.get(own, other),
                    Player::Two => u.get(other, own),
                };
                (sigma[own], entry)
            })
            .collect();
        match player {
            Player::One => lp.add_row(terms, RowKind::Ge, value - slack),
            Player::Two => lp.add_row(terms, RowKind::Le, value + slack),
        };
    }
    lp.add_row(sigma.iter().map(|&s| (s, 1.0)).collect(), RowKind::Eq, 1.0);
    let mut rep = RelativeEntropyProgram::new(lp);
    for &s in &sigma {
        rep.add_term(EntropyTerm {
            weight: 1.0,
            numerator: s,
            denominator: AffineExpr::constant(1.0),
            target: EntropyTarget::Objective,
        });
    }
    let report = game_solver().solve_rep(&rep)?.require_optimal("max_entropy_equilibrium")?;
    let coarse = AllocationStrategy::from_solver(&report.primal)?;

    // Security constraints in `a . sigma >= b` form.
    let constraints: Vec<(Vec<f64>, f64)> = (0..k)
        .map(|other| match player {
            Player::One => ((0..k).map(|own| u.get(own, other)).collect(), value),
            Player::Two => ((0..k).map(|own| -u.get(other, own)).collect(), -value),
        })
        .collect();
    match polish_max_entropy(&constraints, &coarse.weights) {
        Some(w) => AllocationStrategy::new(w),
        None => Ok(coarse),
    }
}

/// Newton refinement of an interior-point entropy maximizer: keep its support,
/// treat its tight constraints as equalities and solve the KKT system to
/// machine precision. Tight constraints whose multiplier has the wrong sign
/// are released and the solve repeated. `None` if the refined point leaves
/// the polytope or moves away from `start`.
fn polish_max_entropy(constraints: &[(Vec<f64>, f64)], start: &[f64]) -> Option<Vec<f64>> {
    const SUPPORT: f64 = 1e-7;
    const TIGHT: f64 = 1e-7;
    const MAX_MOVE: f64 = 1e-4;
    let support: Vec<usize> = (0..start.len()).filter(|&i| start[i] > SUPPORT).collect();
    let n = support.len();
    let restrict = |a: &[f64]| -> DVector<f64> { DVector::from_iterator(n, support.iter().map(|&i| a[i])) };
    let mut tight: Vec<usize> = (0..constraints.len())
        .filter(|&j| {
            let (a, b) = &constraints[j];
            a.iter().zip(start).map(|(x, y)| x * y).sum::<f64>() - b <= TIGHT * (1.0 + b.abs())
        })
        .collect();

    loop {
        // Independent equality rows: the simplex row first, then tight constraints.
        let mut rows: Vec<(Option<usize>, DVector<f64>, f64)> = Vec::new();
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let candidates = std::iter::once((None, DVector::from_element(n, 1.0), 1.0))
            .chain(tight.iter().map(|&j| (Some(j), restrict(&constraints[j].0), constraints[j].1)));
        for (j, a, b) in candidates {
            let mut r = a.clone();
            for q in &basis {
                r -= q * q.dot(&r);
            }
            let norm = r.norm();
            if norm > 1e-9 * (1.0 + a.norm()) {
                basis.push(r / norm);
                rows.push((j, a, b));
            }
        }
        let m = rows.len();
        if m > n {
            return None;
        }

        let mut x = restrict(start);
        x /= x.sum();
        let mut multipliers = DVector::zeros(m);
        for _ in 0..100 {
            let mut kkt = DMatrix::zeros(n + m, n + m);
            let mut rhs = DVector::zeros(n + m);
            for i in 0..n {
                kkt[(i, i)] = -1.0 / x[i];
                rhs[i] = x[i].ln() + 1.0;
            }
            for (r, (_, a, b)) in rows.iter().enumerate() {
                for i in 0..n {
                    kkt[(n + r, i)] = a[i];
                    kkt[(i, n + r)] = a[i];
                }
                rhs[n + r] = b - a.dot(&x);
            }
            let step = kkt.lu().solve(&rhs)?;
            let dx = step.rows(0, n).into_owned();
            multipliers = step.rows(n, m).into_owned();
            let mut t = 1.0;
            while (0..n).any(|i| x[i] + t * dx[i] <= 0.0) {
                t *= 0.5;
                if t < 1e-12 {
                    return None;
                }
            }
            x += dx.scale(t);
            if t == 1.0 && dx.amax() < 1e-15 {
                break;
            }
        }

        // `log x + 1 = sum_r mu_r a_r`; a binding `a.x >= b` needs `mu_r >= 0`.
        let wrong = rows
            .iter()
            .zip(multipliers.iter())
            .filter_map(|((j, _, _), &mu)| j.map(|j| (j, mu)))
            .filter(|&(_, mu)| mu < -1e-9)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, _)) = wrong {
            tight.retain(|&t| t != j);
            continue;
        }

        let mut full = vec![0.0; start.len()];
        for (&i, &v) in support.iter().zip(x.iter()) {
            full[i] = v;
        }
        let total: f64 = full.iter().sum();
        full.iter_mut().for_each(|v| *v /= total);
        let feasible = constraints
            .iter()
            .all(|(a, b)| a.iter().zip(&full).map(|(x, y)| x * y).sum::<f64>() >= b - 1e-10 * (1.0 + b.abs()));
        let close = full.iter().zip(start).all(|(a, b)| (a - b).abs() <= MAX_MOVE);
        return (feasible && close).then_some(full);
    }
}

/// `solve_zero_sum` followed by max-entropy selection for both players.
pub fn max_entropy_solution(u: &UtilityMatrix) -> Result<GameSolution> {
    let base = solve_zero_sum(u)?;
    let team1 = max_entropy_equilibrium(u, base.value, Player::One)?;
    let team2 = max_entropy_equilibrium(u, base.value, Player::Two)?;
    Ok(GameSolution { value: base.value, team1, team2 })
}

/// Largest deviation of either security level from the reported value.
pub fn saddle_gap(u: &UtilityMatrix, sol: &GameSolution) -> Result<f64> {
    check_dims(u, &sol.team1)?;
    check_dims(u, &sol.team2)?;
    let lo = best_response_value(u, &sol.team1, Player::One);
    let hi = best_response_value(u, &sol.team2, Player::Two);
    Ok((lo - sol.value).abs().max((hi - sol.value).abs()))
}
