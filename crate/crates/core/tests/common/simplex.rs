//! Dense two-phase simplex with Bland's rule: a slow, independent LP oracle.

use density_deception::solver::{LinearProgram, RowKind, Sense};

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let row = self.t[r].clone();
        for (i, other) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = other[c];
                if f != 0.0 {
                    for (v, &w) in other.iter_mut().zip(&row) {
                        *v -= f * w;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimize `cost` over the allowed columns. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        loop {
            let m = self.t.len();
            let reduced = |j: usize, tab: &Tableau| {
                cost[j] - (0..m).map(|r| cost[tab.basis[r]] * tab.t[r][j]).sum::<f64>()
            };
            let Some(enter) = (0..allowed).find(|&j| !self.basis.contains(&j) && reduced(j, self) < -EPS) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.t[r][enter];
                if a > EPS {
                    let ratio = self.t[r][self.cols] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - EPS || (ratio <= lratio + EPS && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return false,
            }
        }
    }
}

/// `min c^T x` s.t. `A x = b`, `x >= 0`.
pub fn solve_standard(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Outcome {
    let m = a.len();
    let n = c.len();
    let cols = n + m;
    let mut t = vec![vec![0.0; cols + 1]; m];
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r][j] = sign * a[r][j];
        }
        t[r][n + r] = 1.0;
        t[r][cols] = sign * b[r];
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), cols };
    let phase1: Vec<f64> = (0..cols).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    tab.optimize(&phase1, cols);
    let infeasibility: f64 = (0..m).filter(|&r| tab.basis[r] >= n).map(|r| tab.t[r][cols]).sum();
    if infeasibility > 1e-9 {
        return Outcome::Infeasible;
    }
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[r][j].abs() > 1e-9) {
                tab.pivot(r, j);
            }
        }
    }
    let mut cost = c.to_vec();
    cost.resize(cols, 0.0);
    if !tab.optimize(&cost, n) {
        return Outcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.t[r][cols];
        }
    }
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    Outcome::Optimal { x, value }
}

/// Solve a crate [`LinearProgram`] by conversion to standard form.
/// The returned value is in the program's own sense.
pub fn solve(lp: &LinearProgram) -> Outcome {
    let n = lp.num_vars();
    // Column map: finite lower bound -> one shifted column, free -> two.
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut width = 0;
    for j in 0..n {
        if lp.lower_bounds()[j].is_finite() {
            cols.push(vec![(width, 1.0)]);
            width += 1;
        } else {
            cols.push(vec![(width, 1.0), (width + 1, -1.0)]);
            width += 2;
        }
    }
    let slack_rows: Vec<usize> = lp.rows().iter().enumerate().filter(|(_, r)| r.kind != RowKind::Eq).map(|(i, _)| i).collect();
    let base_width = width;
    width += slack_rows.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, row) in lp.rows().iter().enumerate() {
        let mut coeffs = vec![0.0; width];
        let mut rhs = row.rhs;
        for &(j, v) in &row.terms {
            for &(k, s) in &cols[j][..] {
                coeffs[k] += s * v;
            }
            let lb = lp.lower_bounds()[j];
            if lb.is_finite() {
                rhs -= v * lb;
            }
        }
        if let Some(pos) = slack_rows.iter().position(|&r| r == i) {
            coeffs[base_width + pos] = if row.kind == RowKind::Le { 1.0 } else { -1.0 };
        }
        a.push(coeffs);
        b.push(rhs);
    }
    let flip = if lp.sense() == Sense::Maximize { -1.0 } else { 1.0 };
    let mut c = vec![0.0; width];
    for j in 0..n {
        for &(k, s) in &cols[j][..] {
            c[k] += flip * s * lp.costs()[j];
        }
    }
    match solve_standard(&a, &b, &c) {
        Outcome::Optimal { x: y, .. } => {
            let x: Vec<f64> = (0..n)
                .map(|j| {
                    let lb = lp.lower_bounds()[j];
                    let v: f64 = cols[j].iter().map(|&(k, s)| s * y[k]).sum();
                    if lb.is_finite() { v + lb } else { v }
                })
                .collect();
            let value = lp.linear_objective(&x);
            Outcome::Optimal { x, value }
        }
        other => other,
    }
}
