//! Dense two-phase tableau simplex for small linear programs.
//!
//! Problems here have a handful of variables (epigraph level plus time
//! fractions) and a couple dozen rows, so a dense tableau with Bland's rule
//! is robust, exactly deterministic, and plenty fast. Variables carry finite
//! lower bounds and optional upper bounds; rows are `a . x <= b`.

use super::{SolveReport, Status};

const REDUCED_COST_EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-11;
const PHASE1_TOL: f64 = 1e-7;
const MAX_PIVOTS: usize = 10_000;

/// `maximize objective . x  s.t.  A x <= b,  lower <= x <= upper`.
///
/// Lower bounds must be finite; `f64::INFINITY` upper bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Rows `(a, b)` meaning `a . x <= b`.
    pub constraints: Vec<(Vec<f64>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<(), String> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err("bound vectors must match variable count".into());
        }
        for (a, _) in &self.constraints {
            if a.len() != n {
                return Err("constraint row has wrong arity".into());
            }
        }
        for j in 0..n {
            if !self.lower[j].is_finite() {
                return Err("lower bounds must be finite".into());
            }
            if self.lower[j] > self.upper[j] {
                return Err("lower bound exceeds upper bound".into());
            }
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x` (unscaled data).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in &self.constraints {
            let lhs: f64 = a.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
            worst = worst.max(lhs - b);
        }
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]);
            if self.upper[j].is_finite() {
                worst = worst.max(x[j] - self.upper[j]);
            }
        }
        worst
    }
}

enum Relation {
    Le,
    Ge,
}

/// Solve the LP. Deterministic: Bland's rule for entering and leaving
/// variables, so identical inputs always produce identical pivot sequences.
pub fn solve_lp(lp: &LinearProgram) -> (Vec<f64>, SolveReport) {
    if let Err(_msg) = lp.check() {
        return (
            vec![f64::NAN; lp.num_vars()],
            SolveReport::new(Status::Infeasible, f64::NAN, 0, f64::INFINITY),
        );
    }
    let n = lp.num_vars();

    // Shift to y = x - lower >= 0 and normalize every row so its largest
    // coefficient has magnitude one; rates, energies, and powers otherwise
    // live on wildly different scales.
    let mut rows: Vec<(Vec<f64>, f64, Relation)> = Vec::new();
    for (a, b) in &lp.constraints {
        let shift: f64 = a.iter().zip(lp.lower.iter()).map(|(c, l)| c * l).sum();
        let mut coeffs = a.clone();
        let mut rhs = b - shift;
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            // Constant row: either vacuous or structurally infeasible.
            if rhs < -PHASE1_TOL {
                return (
                    vec![f64::NAN; n],
                    SolveReport::new(Status::Infeasible, f64::NAN, 0, -rhs),
                );
            }
            continue;
        }
        for c in &mut coeffs {
            *c /= scale;
        }
        rhs /= scale;
        if rhs >= 0.0 {
            rows.push((coeffs, rhs, Relation::Le));
        } else {
            // Flip sign so the right-hand side is nonnegative.
            for c in &mut coeffs {
                *c = -*c;
            }
            rows.push((coeffs, -rhs, Relation::Ge));
        }
    }
    for j in 0..n {
        if lp.upper[j].is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, lp.upper[j] - lp.lower[j], Relation::Le));
        }
    }

    let m = rows.len();
    let num_slack = m;
    let num_artificial = rows
        .iter()
        .filter(|r| matches!(r.2, Relation::Ge))
        .count();
    let total = n + num_slack + num_artificial;
    let rhs_col = total;

    let mut tableau = vec![vec![0.0; total + 1]; m + 1];
    let mut basis = vec![0usize; m];
    let mut art_idx = 0;
    for (i, (coeffs, rhs, rel)) in rows.iter().enumerate() {
        tableau[i][..n].copy_from_slice(coeffs);
        tableau[i][rhs_col] = *rhs;
        match rel {
            Relation::Le => {
                tableau[i][n + i] = 1.0;
                basis[i] = n + i;
            }
            Relation::Ge => {
                // Surplus column keeps the slack slot; artificial enters the basis.
                tableau[i][n + i] = -1.0;
                let art = n + num_slack + art_idx;
                art_idx += 1;
                tableau[i][art] = 1.0;
                basis[i] = art;
            }
        }
    }

    let mut pivots = 0usize;

    // Phase 1: maximize -(sum of artificials).
    if num_artificial > 0 {
        for col in n + num_slack..total {
            tableau[m][col] = -1.0;
        }
        for i in 0..m {
            if basis[i] >= n + num_slack {
                for col in 0..=total {
                    let v = tableau[i][col];
                    tableau[m][col] += v;
                }
            }
        }
        let status = iterate(&mut tableau, &mut basis, &mut pivots, |c| c < total);
        if status != Status::Optimal {
            return (
                vec![f64::NAN; n],
                SolveReport::new(status, f64::NAN, pivots, f64::INFINITY),
            );
        }
        if tableau[m][rhs_col] < -PHASE1_TOL {
            return (
                vec![f64::NAN; n],
                SolveReport::new(Status::Infeasible, f64::NAN, pivots, -tableau[m][rhs_col]),
            );
        }
    }

    // Phase 2: the real objective over the shifted variables.
    for col in 0..=total {
        tableau[m][col] = 0.0;
    }
    tableau[m][..n].copy_from_slice(&lp.objective);
    for i in 0..m {
        let basic = basis[i];
        if basic < n {
            let factor = tableau[m][basic];
            if factor.abs() > PIVOT_EPS {
                for col in 0..=total {
                    let v = tableau[i][col];
                    tableau[m][col] -= factor * v;
                }
            }
        }
    }
    let status = iterate(&mut tableau, &mut basis, &mut pivots, |c| c < n + num_slack);

    let mut x = lp.lower.clone();
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] += tableau[i][rhs_col].max(0.0);
        }
    }
    let objective: f64 = lp.objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
    let violation = lp.violation(&x).max(0.0);
    (
        x,
        SolveReport::new(status, objective, pivots, violation),
    )
}

fn iterate(
    tableau: &mut [Vec<f64>],
    basis: &mut [usize],
    pivots: &mut usize,
    allow: impl Fn(usize) -> bool,
) -> Status {
    let m = basis.len();
    let total = tableau[0].len() - 1;
    while *pivots < MAX_PIVOTS {
        // Bland: first improving column.
        let entering = (0..total)
            .find(|&col| allow(col) && tableau[m][col] > REDUCED_COST_EPS);
        let Some(entering) = entering else {
            return Status::Optimal;
        };

        // Minimum ratio; ties broken by smallest basic variable index.
        let mut leaving: Option<usize> = None;
        let mut best = f64::INFINITY;
        for row in 0..m {
            let a = tableau[row][entering];
            if a > PIVOT_EPS {
                let ratio = tableau[row][total] / a;
                let better = ratio < best - 1e-12
                    || ((ratio - best).abs() <= 1e-12
                        && leaving.map_or(true, |r| basis[row] < basis[r]));
                if better {
                    best = ratio;
                    leaving = Some(row);
                }
            }
        }
        let Some(leaving) = leaving else {
            // Unbounded direction: our epigraph formulations always bound the
            // objective, so treat it as a modeling failure.
            return Status::Infeasible;
        };

        pivot(tableau, basis, leaving, entering);
        *pivots += 1;
    }
    Status::IterLimit
}

fn pivot(tableau: &mut [Vec<f64>], basis: &mut [usize], leaving: usize, entering: usize) {
    let m = basis.len();
    let width = tableau[0].len();
    let pivot_val = tableau[leaving][entering];
    for col in 0..width {
        tableau[leaving][col] /= pivot_val;
    }
    for row in 0..=m {
        if row == leaving {
            continue;
        }
        let factor = tableau[row][entering];
        if factor.abs() < PIVOT_EPS {
            continue;
        }
        for col in 0..width {
            tableau[row][col] -= factor * tableau[leaving][col];
        }
    }
    basis[leaving] = entering;
}
