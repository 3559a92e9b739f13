//! Linear and relative-entropy programs behind one status/tolerance contract.
//!
//! A [`RelativeEntropyProgram`] is a linear program plus terms
//! `w * x * log(x / y)` where `x` is a variable and `y` an affine expression.
//! Each term is lifted to an epigraph variable `t` with
//! `(-t, x, y)` in the exponential cone and handed to the Clarabel
//! interior-point solver. Residuals are recomputed on the original data so
//! the reported status never relies on the solver's internal scaling.

use std::fmt::Write as _;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub terms: Vec<(VarId, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `sense c^T x` subject to rows and per-variable lower bounds
/// (`f64::NEG_INFINITY` marks a free variable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    sense: Sense,
    lower: Vec<f64>,
    cost: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self { sense, lower: Vec::new(), cost: Vec::new(), rows: Vec::new() }
    }

    pub fn add_var(&mut self, lower: f64, cost: f64) -> VarId {
        self.lower.push(lower);
        self.cost.push(cost);
        self.lower.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(VarId, f64)>, kind: RowKind, rhs: f64) -> usize {
        self.rows.push(Row { terms, kind, rhs });
        self.rows.len() - 1
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.cost[var] = cost;
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn linear_objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let mut problems = Vec::new();
        for (j, (&lb, &c)) in self.lower.iter().zip(&self.cost).enumerate() {
            if lb.is_nan() || lb == f64::INFINITY {
                problems.push(format!("variable {j} has invalid lower bound {lb}"));
            }
            if !c.is_finite() {
                problems.push(format!("variable {j} has non-finite cost {c}"));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                problems.push(format!("row {i} has non-finite right-hand side"));
            }
            for &(j, a) in &row.terms {
                if j >= n {
                    problems.push(format!("row {i} references unknown variable {j}"));
                }
                if !a.is_finite() {
                    problems.push(format!("row {i} has non-finite coefficient"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Plain-text coefficient dump for cross-checking with external solvers.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(out, "sense {sense}");
        let _ = writeln!(out, "vars {}", self.num_vars());
        for (j, (&lb, &c)) in self.lower.iter().zip(&self.cost).enumerate() {
            let lb = if lb == f64::NEG_INFINITY { "-inf".to_string() } else { format!("{lb:e}") };
            let _ = writeln!(out, "var {j} lower {lb} cost {c:e}");
        }
        for (i, row) in self.rows.iter().enumerate() {
            let kind = match row.kind {
                RowKind::Eq => "eq",
                RowKind::Le => "le",
                RowKind::Ge => "ge",
            };
            let _ = write!(out, "row {i} {kind} {:e} :", row.rhs);
            for &(j, a) in &row.terms {
                let _ = write!(out, " {j}:{a:e}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self { terms: Vec::new(), constant: value }
    }

    pub fn linear(terms: Vec<(VarId, f64)>) -> Self {
        Self { terms, constant: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyTarget {
    Objective,
    /// Added to the left side of a `Le` row.
    Row(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTerm {
    pub weight: f64,
    pub numerator: VarId,
    pub denominator: AffineExpr,
    pub target: EntropyTarget,
}

/// `x log(x / y)` with `0 log 0 = 0` and `0 log(0/0) = 0`.
pub fn xlogx_over_y(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if y <= 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeEntropyProgram {
    lp: LinearProgram,
    terms: Vec<EntropyTerm>,
}

impl RelativeEntropyProgram {
    pub fn new(lp: LinearProgram) -> Self {
        Self { lp, terms: Vec::new() }
    }

    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn lp_mut(&mut self) -> &mut LinearProgram {
        &mut self.lp
    }

    pub fn terms(&self) -> &[EntropyTerm] {
        &self.terms
    }

    pub fn add_term(&mut self, term: EntropyTerm) {
        self.terms.push(term);
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        let mut problems = Vec::new();
        for (k, term) in self.terms.iter().enumerate() {
            if !(term.weight.is_finite() && term.weight >= 0.0) {
                problems.push(format!("entropy term {k} has invalid weight {}", term.weight));
            }
            if term.numerator >= n || term.denominator.terms.iter().any(|&(j, _)| j >= n) {
                problems.push(format!("entropy term {k} references an unknown variable"));
            }
            if !term.denominator.constant.is_finite() || term.denominator.terms.iter().any(|(_, a)| !a.is_finite()) {
                problems.push(format!("entropy term {k} has a non-finite denominator"));
            }
            if term.denominator.terms.is_empty() && term.denominator.constant < 0.0 {
                problems.push(format!("entropy term {k} has a negative constant denominator"));
            }
            match term.target {
                EntropyTarget::Objective if self.lp.sense == Sense::Maximize => {
                    problems.push(format!("entropy term {k} in a maximization objective is not convex"));
                }
                EntropyTarget::Row(r) => match self.lp.rows.get(r) {
                    Some(row) if row.kind == RowKind::Le => {}
                    Some(_) => problems.push(format!("entropy term {k} targets row {r}, which is not a <= row")),
                    None => problems.push(format!("entropy term {k} targets unknown row {r}")),
                },
                EntropyTarget::Objective => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Objective including entropy terms.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut value = self.lp.linear_objective(x);
        for term in &self.terms {
            if term.target == EntropyTarget::Objective {
                value += term.weight * xlogx_over_y(x[term.numerator], term.denominator.eval(x));
            }
        }
        value
    }

    pub fn to_text(&self) -> String {
        let mut out = self.lp.to_text();
        for (k, term) in self.terms.iter().enumerate() {
            let target = match term.target {
                EntropyTarget::Objective => "obj".to_string(),
                EntropyTarget::Row(r) => format!("row {r}"),
            };
            let _ = write!(
                out,
                "entropy {k} weight {:e} num {} target {target} den {:e} :",
                term.weight, term.numerator, term.denominator.constant
            );
            for &(j, a) in &term.denominator.terms {
                let _ = write!(out, " {j}:{a:e}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest equality violation.
    pub equality: f64,
    /// Largest inequality or bound violation (entropy rows evaluated exactly).
    pub inequality: f64,
    /// Largest negativity of an entropy numerator or denominator.
    pub cone: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.equality.max(self.inequality).max(self.cone)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: u32,
    /// Seconds.
    pub wall_time: f64,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Turn a non-optimal report into the matching error.
    pub fn require_optimal(self, stage: &str) -> Result<Self> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(Error::Infeasible { stage: stage.to_string() }),
            status => Err(Error::Solver { stage: stage.to_string(), status }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Feasibility/optimality tolerance the report is held to.
    pub tolerance: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iter: 200, verbose: false }
    }
}

impl SolverSettings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self { tolerance, ..Self::default() }
    }
}

/// Stateless front end; each call builds and owns its own solver workspace.
#[derive(Debug, Clone, Copy, Default)]
pub struct Solver {
    pub settings: SolverSettings,
}

impl Solver {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings }
    }

    pub fn solve_lp(&self, p: &LinearProgram) -> Result<SolveReport> {
        p.validate()?;
        Ok(self.run(&RelativeEntropyProgram::new(p.clone())))
    }

    pub fn solve_rep(&self, p: &RelativeEntropyProgram) -> Result<SolveReport> {
        p.validate()?;
        Ok(self.run(p))
    }

    fn run(&self, p: &RelativeEntropyProgram) -> SolveReport {
        let started = Instant::now();
        let lp = &p.lp;
        let n_lp = lp.num_vars();
        let n = n_lp + p.terms.len();
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut q: Vec<f64> = lp.cost.iter().map(|c| sign * c).collect();
        q.resize(n, 0.0);
        let mut row_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); lp.rows.len()];
        for (k, term) in p.terms.iter().enumerate() {
            match term.target {
                EntropyTarget::Objective => q[n_lp + k] += term.weight,
                EntropyTarget::Row(r) => row_terms[r].push((n_lp + k, term.weight)),
            }
        }

        let mut ti = Vec::new();
        let mut tj = Vec::new();
        let mut tv = Vec::new();
        let mut b = Vec::new();
        let mut push_row = |coeffs: &mut dyn Iterator<Item = (VarId, f64)>, rhs: f64, b: &mut Vec<f64>| {
            let r = b.len();
            for (j, a) in coeffs {
                if a != 0.0 {
                    ti.push(r);
                    tj.push(j);
                    tv.push(a);
                }
            }
            b.push(rhs);
        };

        // A constant zero denominator leaves the cone without interior: pin
        // the numerator and the epigraph variable to zero instead.
        let degenerate: Vec<bool> =
            p.terms.iter().map(|t| t.denominator.terms.is_empty() && t.denominator.constant == 0.0).collect();
        let mut cones = Vec::new();
        let mut n_eq = lp.rows.iter().filter(|r| r.kind == RowKind::Eq).count();
        for row in lp.rows.iter().filter(|r| r.kind == RowKind::Eq) {
            push_row(&mut row.terms.iter().copied(), row.rhs, &mut b);
        }
        for (k, term) in p.terms.iter().enumerate() {
            if degenerate[k] {
                push_row(&mut std::iter::once((term.numerator, 1.0)), 0.0, &mut b);
                push_row(&mut std::iter::once((n_lp + k, 1.0)), 0.0, &mut b);
                n_eq += 2;
            }
        }
        if n_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(n_eq));
        }
        let mut n_nonneg = 0;
        for (i, row) in lp.rows.iter().enumerate() {
            match row.kind {
                RowKind::Eq => continue,
                RowKind::Le => {
                    push_row(&mut row.terms.iter().copied().chain(row_terms[i].iter().copied()), row.rhs, &mut b)
                }
                RowKind::Ge => push_row(&mut row.terms.iter().map(|&(j, a)| (j, -a)), -row.rhs, &mut b),
            }
            n_nonneg += 1;
        }
        for (j, &lb) in lp.lower.iter().enumerate() {
            if lb.is_finite() {
                push_row(&mut std::iter::once((j, -1.0)), -lb, &mut b);
                n_nonneg += 1;
            }
        }
        if n_nonneg > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(n_nonneg));
        }
        for (k, term) in p.terms.iter().enumerate() {
            if degenerate[k] {
                continue;
            }
            push_row(&mut std::iter::once((n_lp + k, 1.0)), 0.0, &mut b);
            push_row(&mut std::iter::once((term.numerator, -1.0)), 0.0, &mut b);
            push_row(
                &mut term.denominator.terms.iter().map(|&(j, a)| (j, -a)),
                term.denominator.constant,
                &mut b,
            );
            cones.push(SupportedConeT::ExponentialConeT());
        }

        let m = b.len();
        let a_mat = CscMatrix::new_from_triplets(m, n, ti, tj, tv);
        let p_mat = CscMatrix::zeros((n, n));
        let inner_tol = self.settings.tolerance * 1e-4;
        let settings = DefaultSettings {
            verbose: self.settings.verbose,
            max_iter: self.settings.max_iter,
            tol_feas: inner_tol,
            tol_gap_abs: inner_tol,
            tol_gap_rel: inner_tol,
            ..DefaultSettings::default()
        };

        let fail = |iterations: u32| SolveReport {
            status: SolveStatus::NumericalFailure,
            objective: f64::NAN,
            primal: vec![f64::NAN; n_lp],
            residuals: Residuals::default(),
            iterations,
            wall_time: started.elapsed().as_secs_f64(),
        };
        if m == 0 {
            // Nothing constrains the variables: bounded only if every cost is zero.
            let status = if q.iter().all(|&c| c == 0.0) { SolveStatus::Optimal } else { SolveStatus::Unbounded };
            return SolveReport {
                status,
                objective: 0.0,
                primal: vec![0.0; n_lp],
                residuals: Residuals::default(),
                iterations: 0,
                wall_time: started.elapsed().as_secs_f64(),
            };
        }
        let mut solver = match DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings) {
            Ok(s) => s,
            Err(_) => return fail(0),
        };
        solver.solve();
        let sol = &solver.solution;
        let iterations = sol.iterations;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalFailure,
        };
        if status != SolveStatus::Optimal {
            return SolveReport {
                status,
                objective: f64::NAN,
                primal: vec![f64::NAN; n_lp],
                residuals: Residuals::default(),
                iterations,
                wall_time: started.elapsed().as_secs_f64(),
            };
        }
        // Interior-point iterates may sit a hair outside their bounds; snap
        // them back so callers never see e.g. slightly negative occupancies.
        let primal: Vec<f64> = sol.x[..n_lp].iter().zip(&lp.lower).map(|(&v, &lb)| v.max(lb)).collect();
        let residuals = residuals(p, &primal);
        let objective = p.objective(&primal);
        let status = if residuals.max() <= self.settings.tolerance && objective.is_finite() {
            SolveStatus::Optimal
        } else {
            SolveStatus::NumericalFailure
        };
        SolveReport { status, objective, primal, residuals, iterations, wall_time: started.elapsed().as_secs_f64() }
    }
}

fn residuals(p: &RelativeEntropyProgram, x: &[f64]) -> Residuals {
    let lp = &p.lp;
    let mut entropy_rows = vec![0.0; lp.rows.len()];
    let mut res = Residuals::default();
    for term in &p.terms {
        let y = term.denominator.eval(x);
        res.cone = res.cone.max(-x[term.numerator]).max(-y);
        if let EntropyTarget::Row(r) = term.target {
            entropy_rows[r] += term.weight * xlogx_over_y(x[term.numerator], y);
        }
    }
    for (i, row) in lp.rows.iter().enumerate() {
        let lhs: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>() + entropy_rows[i];
        match row.kind {
            RowKind::Eq => res.equality = res.equality.max((lhs - row.rhs).abs()),
            RowKind::Le => res.inequality = res.inequality.max(lhs - row.rhs),
            RowKind::Ge => res.inequality = res.inequality.max(row.rhs - lhs),
        }
    }
    for (j, &lb) in lp.lower.iter().enumerate() {
        if lb.is_finite() {
            res.inequality = res.inequality.max(lb - x[j]);
        }
    }
    res
}

/// Solve an LP with default settings.
pub fn solve_lp(p: &LinearProgram) -> Result<SolveReport> {
    Solver::default().solve_lp(p)
}

/// Solve a relative-entropy program with default settings.
pub fn solve_rep(p: &RelativeEntropyProgram) -> Result<SolveReport> {
    Solver::default().solve_rep(p)
}
