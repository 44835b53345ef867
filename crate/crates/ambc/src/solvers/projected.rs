//! Projected gradient ascent for smooth concave objectives over simple sets,
//! plus the Euclidean projections used by the power subproblems.

use super::{SolveReport, Status};

/// Clamp `x` into `[lo, hi]` componentwise.
pub fn project_box(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for j in 0..x.len() {
        x[j] = x[j].clamp(lo[j], hi[j]);
    }
}

/// Euclidean projection onto `{ 0 <= y <= hi, weights . y <= budget }` with
/// nonnegative weights.
///
/// The projection is `y_j = clamp(x_j - nu * w_j, 0, hi_j)` where `nu >= 0`
/// is the budget multiplier; `weights . y(nu)` decreases monotonically in
/// `nu`, so `nu` is located by bisection. Zero-weight coordinates are only
/// box-clamped.
pub fn project_box_budget(x: &mut [f64], hi: &[f64], weights: &[f64], budget: f64) {
    // The multiplier must act on the raw coordinates; clamping first would
    // change the projection.
    let spent = |nu: f64, x: &[f64]| -> f64 {
        let mut s = 0.0;
        for j in 0..x.len() {
            if weights[j] > 0.0 {
                s += weights[j] * (x[j] - nu * weights[j]).clamp(0.0, hi[j]);
            }
        }
        s
    };
    let mut nu = 0.0;
    if spent(0.0, x) > budget {
        let mut lo = 0.0;
        let mut up = x
            .iter()
            .zip(weights.iter())
            .filter(|(_, &w)| w > 0.0)
            .map(|(&v, &w)| v.max(0.0) / w)
            .fold(0.0f64, f64::max)
            + 1.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + up);
            if spent(mid, x) > budget {
                lo = mid;
            } else {
                up = mid;
            }
        }
        nu = up;
    }
    for j in 0..x.len() {
        x[j] = (x[j] - nu * weights[j]).clamp(0.0, hi[j]);
    }
}

/// Options for [`projected_gradient_max`].
#[derive(Debug, Clone, Copy)]
pub struct PgOptions {
    /// Stop when the unit-step projected gradient has sup-norm below this.
    pub grad_tol: f64,
    /// Stop when the relative objective change falls below this.
    pub obj_tol: f64,
    pub max_iter: usize,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            obj_tol: 1e-10,
            max_iter: 1000,
        }
    }
}

/// Maximize a smooth concave `f` over a convex set given by its Euclidean
/// projection, by projected gradient ascent with a backtracking line search
/// along the projection arc. The iterate sequence is monotone in objective.
pub fn projected_gradient_max(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64], &mut [f64]),
    project: impl Fn(&mut [f64]),
    x0: &[f64],
    opts: &PgOptions,
) -> (Vec<f64>, SolveReport) {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x);
    let mut fx = f(&x);
    let mut g = vec![0.0; n];
    let mut step = 1.0f64;
    let mut status = Status::IterLimit;
    let mut iterations = 0;
    let mut small_streak = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        grad(&x, &mut g);

        // First-order stationarity: the unit-step projected gradient.
        let mut probe = x.clone();
        for j in 0..n {
            probe[j] += g[j];
        }
        project(&mut probe);
        let pg_norm = probe
            .iter()
            .zip(x.iter())
            .map(|(p, v)| (p - v).abs())
            .fold(0.0f64, f64::max);
        if pg_norm <= opts.grad_tol * (1.0 + fx.abs()) {
            status = Status::Optimal;
            break;
        }

        // Backtracking along the projection arc; the Armijo test keeps the
        // objective trace nondecreasing.
        let mut t = (step * 2.0).min(1e12);
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = x.clone();
            for j in 0..n {
                trial[j] += t * g[j];
            }
            project(&mut trial);
            let directional: f64 = g
                .iter()
                .zip(trial.iter().zip(x.iter()))
                .map(|(gj, (tj, xj))| gj * (tj - xj))
                .sum();
            if directional <= 0.0 {
                // Projection absorbed the whole step; shrink and retry.
                t *= 0.5;
                continue;
            }
            let ft = f(&trial);
            if ft >= fx + 1e-4 * directional && ft >= fx {
                let improvement = ft - fx;
                x = trial;
                fx = ft;
                step = t;
                accepted = true;
                small_streak = if improvement <= opts.obj_tol * (1.0 + fx.abs()) {
                    small_streak + 1
                } else {
                    0
                };
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Backtracking exhausted: no ascent at any representable step.
            status = Status::Optimal;
            break;
        }
        if small_streak >= 3 {
            status = Status::Optimal;
            break;
        }
    }

    let report = SolveReport::new(status, fx, iterations, 0.0);
    (x, report)
}
