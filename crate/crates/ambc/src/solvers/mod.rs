//! Self-contained small-scale solvers shared by all optimizers: a dense LP
//! simplex, bisection over monotone feasibility queries, projected gradient
//! ascent for smooth concave subproblems, and a brute-force grid oracle for
//! validation.

pub mod bisect;
pub mod grid;
pub mod lp;
pub mod projected;

pub use bisect::bisect_maximin;
pub use grid::grid_oracle;
pub use lp::{solve_lp, LinearProgram};
pub use projected::{project_box, project_box_budget, projected_gradient_max, PgOptions};

use serde::{Deserialize, Serialize};

/// Terminal state of a solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    /// Converged within tolerances.
    Optimal,
    /// No feasible point exists.
    Infeasible,
    /// Iteration cap reached first.
    IterLimit,
}

/// Outcome summary attached to every solver result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: Status,
    /// Objective value at the returned point.
    pub objective: f64,
    /// Iterations (pivots, subgradient steps, or outer sweeps).
    pub iterations: usize,
    /// Largest constraint violation at the returned point.
    pub max_violation: f64,
}

impl SolveReport {
    pub fn new(status: Status, objective: f64, iterations: usize, max_violation: f64) -> Self {
        Self {
            status,
            objective,
            iterations,
            max_violation,
        }
    }
}

/// Tolerances and iteration caps, centralized so inner solves are always
/// tighter than the outer loops that consume them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Outer-loop convergence threshold (dual gap, BCD objective increase).
    pub epsilon: f64,
    /// Inner solve tolerance; kept well below `epsilon`.
    pub inner_tol: f64,
    /// Feasibility tolerance for accepted points.
    pub feas_tol: f64,
    /// Bisection bracket width on objective levels.
    pub bisect_tol: f64,
    /// Block-coordinate sweep cap.
    pub max_outer_iter: usize,
    /// Subgradient iteration cap for the dual ascent.
    pub max_dual_iter: usize,
    /// Projected-gradient iteration cap per feasibility solve.
    pub max_pg_iter: usize,
    /// Grid pitch of the one-dimensional reflection-coefficient search.
    pub alpha_grid: f64,
    /// Random restarts for boundary tracing.
    pub restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            inner_tol: 1e-8,
            feas_tol: 1e-8,
            bisect_tol: 1e-6,
            max_outer_iter: 200,
            max_dual_iter: 2000,
            max_pg_iter: 600,
            alpha_grid: 1e-3,
            restarts: 3,
        }
    }
}
