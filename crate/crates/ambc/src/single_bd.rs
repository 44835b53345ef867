//! Single-device joint resource allocation by Lagrangian duality.
//!
//! With one device the time fraction is 1, and once the backscatter
//! interference at the legacy user is neglected (it crosses two fades plus
//! the reflection loss, so it is orders of magnitude under the direct
//! signal), the power problem at a fixed reflection coefficient is convex:
//!
//! ```text
//! max  sum_k b_k p_k                          (monotone proxy of the rate)
//! s.t. (1/N) sum_k log2(1 + h_k p_k / noise) >= D        [lu floor]
//!      eta (1-alpha) sum_k w_k p_k           >= E_min    [energy floor]
//!      sum_k p_k = budget,  0 <= p_k <= peak
//! ```
//!
//! Dual ascent iterates the three multipliers by diminishing-step
//! subgradients, recovering the per-subcarrier powers in closed form at
//! every dual point ([`theorem1_power`]): a water-filling level against the
//! peak cap. After the subgradient loop hits its gap criterion, a
//! deterministic nested-bisection refinement drives the duality gap to the
//! inner tolerance, so the returned objective does not depend on the
//! starting dual point. The optimal reflection coefficient comes from a
//! one-dimensional grid search with golden-section refinement.

use serde::{Deserialize, Serialize};

use crate::channel::LinkGains;
use crate::error::Error;
use crate::solvers::{SolveReport, SolverOptions, Status};
use crate::system::{log2_1p, SystemConfig};

use std::f64::consts::LN_2;

/// Multipliers of the three coupling constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualVars {
    /// Legacy-user rate floor multiplier, nonnegative.
    pub lu_rate: f64,
    /// Harvested-energy floor multiplier, nonnegative.
    pub energy: f64,
    /// Total-power budget multiplier, sign-free (positive at any optimum).
    pub budget: f64,
}

impl DualVars {
    pub fn zero() -> Self {
        Self {
            lu_rate: 0.0,
            energy: 0.0,
            budget: 0.0,
        }
    }
}

/// Result of a single-device solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingleBdSolution {
    /// Power reflection coefficient.
    pub reflect: f64,
    /// Subcarrier powers in W.
    pub power: Vec<f64>,
    /// Device throughput in bps/Hz.
    pub throughput: f64,
    /// Multipliers at termination.
    pub duals: DualVars,
    pub report: SolveReport,
}

/// Per-subcarrier gains of device 0, bundled to keep signatures short.
#[derive(Clone, Copy)]
struct Carriers<'a> {
    /// Round-trip gains `|F_k G_k|^2`.
    cross: &'a [f64],
    /// Forward gains `|F_k|^2`.
    forward: &'a [f64],
    /// Legacy gains `|H_k|^2`.
    legacy: &'a [f64],
}

impl<'a> Carriers<'a> {
    fn new(gains: &'a LinkGains) -> Self {
        Self {
            cross: &gains.backscatter[0],
            forward: &gains.forward[0],
            legacy: &gains.legacy,
        }
    }

    fn len(&self) -> usize {
        self.cross.len()
    }
}

/// Effective full-budget level: more than `N * peak` is unreachable.
fn effective_budget(sys: &SystemConfig) -> f64 {
    sys.total_power
        .min(sys.peak_power * sys.num_subcarriers as f64)
}

fn per_carrier_power(c: &Carriers, k: usize, duals: &DualVars, alpha: f64, sys: &SystemConfig) -> f64 {
    let linear_slope =
        c.cross[k] + duals.energy * sys.harvest_eff[0] * c.forward[k] * (1.0 - alpha);
    let denom = duals.budget - linear_slope;
    if denom <= 0.0 {
        // The Lagrangian grows with this subcarrier's power everywhere.
        return sys.peak_power;
    }
    // noise/|H|^2 may be infinite on a dead legacy subcarrier; the max(0)
    // then zeroes the allocation, which is the correct limit.
    let floor = sys.noise_power / c.legacy[k];
    let level = duals.lu_rate / (LN_2 * sys.num_subcarriers as f64 * denom) - floor;
    level.max(0.0).min(sys.peak_power)
}

/// Closed-form maximizer of the per-subcarrier Lagrangian over `[0, peak]`.
///
/// When the budget multiplier does not exceed the Lagrangian's linear slope
/// the peak is optimal; otherwise the stationary point is a water-filling
/// level against `noise/|H_k|^2`, clamped into the box. Rates are base-2,
/// so the log derivative carries a `1/ln 2`.
pub fn theorem1_power(
    k: usize,
    duals: &DualVars,
    alpha: f64,
    gains: &LinkGains,
    sys: &SystemConfig,
) -> f64 {
    per_carrier_power(&Carriers::new(gains), k, duals, alpha, sys)
}

fn lagrangian_k(c: &Carriers, p: f64, k: usize, duals: &DualVars, alpha: f64, sys: &SystemConfig) -> f64 {
    let n = sys.num_subcarriers as f64;
    let lu = if c.legacy[k] > 0.0 {
        duals.lu_rate / n * log2_1p(c.legacy[k] * p / sys.noise_power)
    } else {
        0.0
    };
    c.cross[k] * p + lu
        + duals.energy * sys.harvest_eff[0] * c.forward[k] * (1.0 - alpha) * p
        - duals.budget * p
}

/// Per-subcarrier Lagrangian `L_k(p)`, the quantity [`theorem1_power`]
/// maximizes; public so validation code can grid-check the closed form.
pub fn subcarrier_lagrangian(
    p: f64,
    k: usize,
    duals: &DualVars,
    alpha: f64,
    gains: &LinkGains,
    sys: &SystemConfig,
) -> f64 {
    lagrangian_k(&Carriers::new(gains), p, k, duals, alpha, sys)
}

fn primal_at(c: &Carriers, duals: &DualVars, alpha: f64, sys: &SystemConfig) -> Vec<f64> {
    (0..c.len())
        .map(|k| per_carrier_power(c, k, duals, alpha, sys))
        .collect()
}

fn lu_rate_of(c: &Carriers, p: &[f64], sys: &SystemConfig) -> f64 {
    let n = sys.num_subcarriers as f64;
    c.legacy
        .iter()
        .zip(p.iter())
        .map(|(h, pk)| log2_1p(h * pk / sys.noise_power))
        .sum::<f64>()
        / n
}

fn energy_of(c: &Carriers, p: &[f64], alpha: f64, sys: &SystemConfig) -> f64 {
    sys.harvest_eff[0]
        * (1.0 - alpha)
        * c.forward
            .iter()
            .zip(p.iter())
            .map(|(w, pk)| w * pk)
            .sum::<f64>()
}

fn objective_of(c: &Carriers, p: &[f64]) -> f64 {
    c.cross.iter().zip(p.iter()).map(|(b, pk)| b * pk).sum()
}

/// Dual function value at the given duals, using its maximizing primal `p`.
fn dual_value(c: &Carriers, duals: &DualVars, alpha: f64, sys: &SystemConfig, p: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += lagrangian_k(c, pk, k, duals, alpha, sys);
    }
    acc - duals.lu_rate * sys.lu_rate_min - duals.energy * sys.energy_min[0]
        + duals.budget * effective_budget(sys)
}

/// Constraint residuals at `p`; positive means satisfied with slack.
struct Residuals {
    lu: f64,
    energy: f64,
    /// `budget - sum(p)`: positive when under budget.
    power: f64,
}

fn residuals(c: &Carriers, p: &[f64], alpha: f64, sys: &SystemConfig) -> Residuals {
    Residuals {
        lu: lu_rate_of(c, p, sys) - sys.lu_rate_min,
        energy: energy_of(c, p, alpha, sys) - sys.energy_min[0],
        power: effective_budget(sys) - p.iter().sum::<f64>(),
    }
}

/// Innermost level: pick the budget multiplier so the closed-form powers
/// spend exactly the budget. `sum p` is nonincreasing in the multiplier, so
/// bisection applies; at multiplier 0 every subcarrier sits at the peak.
///
/// With a zero rate multiplier the closed form is bang-bang in the budget
/// multiplier and no single value spends the budget exactly, so the primal
/// is recovered by blending the two bracket endpoints: non-marginal
/// subcarriers agree on both sides, and the marginal one absorbs the
/// leftover budget (its Lagrangian is flat there, so any split is optimal).
fn solve_budget_level(
    c: &Carriers,
    lu_rate: f64,
    energy: f64,
    alpha: f64,
    sys: &SystemConfig,
) -> (DualVars, Vec<f64>) {
    let budget = effective_budget(sys);
    let primal = |mu: f64| -> Vec<f64> {
        let d = DualVars {
            lu_rate,
            energy,
            budget: mu,
        };
        primal_at(c, &d, alpha, sys)
    };
    let at_zero = primal(0.0);
    if at_zero.iter().sum::<f64>() <= budget + 1e-15 * budget {
        let d = DualVars {
            lu_rate,
            energy,
            budget: 0.0,
        };
        return (d, at_zero);
    }
    // Any multiplier above every subcarrier's zero-power stationarity slope
    // shuts the whole spectrum off.
    let n = sys.num_subcarriers as f64;
    let mut hi = 0.0f64;
    for k in 0..c.len() {
        let slope = c.cross[k]
            + energy * sys.harvest_eff[0] * c.forward[k] * (1.0 - alpha)
            + lu_rate * c.legacy[k] / (LN_2 * n * sys.noise_power);
        hi = hi.max(slope);
    }
    hi = hi * (1.0 + 1e-9) + 1e-300;
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if primal(mid).iter().sum::<f64>() > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    let p_lo = primal(lo);
    let p_hi = primal(hi);
    let s_lo: f64 = p_lo.iter().sum();
    let s_hi: f64 = p_hi.iter().sum();
    let p = if s_lo - s_hi > 1e-300 {
        let t = ((budget - s_hi) / (s_lo - s_hi)).clamp(0.0, 1.0);
        p_hi.iter()
            .zip(p_lo.iter())
            .map(|(a, b)| a + t * (b - a))
            .collect()
    } else {
        p_hi
    };
    let d = DualVars {
        lu_rate,
        energy,
        budget: hi,
    };
    (d, p)
}

/// Middle level: raise the energy multiplier until the harvested energy at
/// the (budget-resolved) primal meets the floor. The residual is monotone
/// in the multiplier by convexity of the partially-minimized dual.
fn solve_energy_level(
    c: &Carriers,
    lu_rate: f64,
    alpha: f64,
    sys: &SystemConfig,
) -> Option<(DualVars, Vec<f64>)> {
    let residual_at = |theta: f64| -> f64 {
        let (_, p) = solve_budget_level(c, lu_rate, theta, alpha, sys);
        residuals(c, &p, alpha, sys).energy
    };
    if sys.energy_min[0] <= 0.0 || residual_at(0.0) >= 0.0 {
        return Some(solve_budget_level(c, lu_rate, 0.0, alpha, sys));
    }
    // Bracket by doubling from a scale where the energy term competes with
    // the rate objective.
    let mean_cross = c.cross.iter().sum::<f64>() / c.len() as f64;
    let mean_fwd = c.forward.iter().sum::<f64>() / c.len() as f64;
    let denom = sys.harvest_eff[0] * mean_fwd * (1.0 - alpha);
    let mut hi = if denom > 0.0 {
        (mean_cross / denom).max(1e-300)
    } else {
        return None; // alpha = 1 with a positive energy floor
    };
    let mut grew = 0;
    while residual_at(hi) < 0.0 {
        hi *= 4.0;
        grew += 1;
        if grew > 100 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if residual_at(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Primal recovery across the multiplier kink: the harvested energy is
    // affine in the powers, both endpoints maximize the same Lagrangian in
    // the limit, and their blend meets the floor with equality.
    let (d, p_hi) = solve_budget_level(c, lu_rate, hi, alpha, sys);
    let (_, p_lo) = solve_budget_level(c, lu_rate, lo, alpha, sys);
    let r_hi = residuals(c, &p_hi, alpha, sys).energy;
    let r_lo = residuals(c, &p_lo, alpha, sys).energy;
    let p = if r_hi - r_lo > 1e-300 && r_lo < 0.0 {
        let t = (r_hi / (r_hi - r_lo)).clamp(0.0, 1.0);
        p_hi.iter()
            .zip(p_lo.iter())
            .map(|(a, b)| a + t * (b - a))
            .collect()
    } else {
        p_hi
    };
    Some((d, p))
}

/// Outer level: raise the legacy-rate multiplier until the legacy rate at
/// the inner-resolved primal meets the floor.
fn solve_dual_nested(c: &Carriers, alpha: f64, sys: &SystemConfig) -> Option<(DualVars, Vec<f64>)> {
    let residual_at = |lambda: f64| -> Option<f64> {
        let (_, p) = solve_energy_level(c, lambda, alpha, sys)?;
        Some(residuals(c, &p, alpha, sys).lu)
    };
    if sys.lu_rate_min <= 0.0 || residual_at(0.0)? >= 0.0 {
        return solve_energy_level(c, 0.0, alpha, sys);
    }
    let n = sys.num_subcarriers as f64;
    let mean_cross = c.cross.iter().sum::<f64>() / c.len() as f64;
    let mut hi = (LN_2 * n * mean_cross * (sys.noise_power + effective_budget(sys) / n)).max(1e-300);
    let mut grew = 0;
    while residual_at(hi)? < 0.0 {
        hi *= 4.0;
        grew += 1;
        if grew > 100 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        match residual_at(mid) {
            Some(r) if r >= 0.0 => hi = mid,
            _ => lo = mid,
        }
    }
    // Primal recovery across the kink. The legacy rate is concave in the
    // powers, so feasibility along the blend is an interval starting at the
    // feasible endpoint; the objective is affine and grows toward the
    // low-multiplier endpoint, so take the largest feasible blend.
    let (d, p_hi) = solve_energy_level(c, hi, alpha, sys)?;
    let (_, p_lo) = solve_energy_level(c, lo, alpha, sys)?;
    let blend = |t: f64| -> Vec<f64> {
        p_hi.iter()
            .zip(p_lo.iter())
            .map(|(a, b)| a + t * (b - a))
            .collect()
    };
    let feasible = |p: &[f64]| residuals(c, p, alpha, sys).lu >= 0.0;
    if !feasible(&p_hi) {
        return Some((d, p_hi)); // within bisection tolerance of the floor
    }
    let mut t_lo = 0.0;
    let mut t_hi = 1.0;
    if feasible(&blend(1.0)) {
        t_lo = 1.0;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (t_lo + t_hi);
            if feasible(&blend(mid)) {
                t_lo = mid;
            } else {
                t_hi = mid;
            }
        }
    }
    Some((d, blend(t_lo)))
}

/// Water-filling for the maximum legacy-user rate under budget and peak
/// caps: `p_k = clamp(level - noise/h_k, 0, peak)` with the level chosen to
/// spend the budget.
fn max_lu_power(c: &Carriers, sys: &SystemConfig) -> Vec<f64> {
    let budget = effective_budget(sys);
    let fill = |level: f64| -> Vec<f64> {
        c.legacy
            .iter()
            .map(|&h| {
                if h > 0.0 {
                    (level - sys.noise_power / h).clamp(0.0, sys.peak_power)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let max_floor = c
        .legacy
        .iter()
        .filter(|&&h| h > 0.0)
        .map(|&h| sys.noise_power / h)
        .fold(0.0f64, f64::max);
    let mut lo = 0.0;
    let mut hi = max_floor + sys.peak_power + budget;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    fill(lo)
}

/// Greedy maximum-energy point: fill peaks in descending forward gain.
fn max_energy_power(c: &Carriers, sys: &SystemConfig) -> Vec<f64> {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c.forward[b].partial_cmp(&c.forward[a]).unwrap().then(a.cmp(&b)));
    let mut remaining = effective_budget(sys);
    let mut p = vec![0.0; c.len()];
    for k in order {
        let take = remaining.min(sys.peak_power);
        p[k] = take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    p
}

/// A full-budget point satisfying both floors with margin, used as the
/// repair anchor, or `None` when the two floors cannot be met jointly.
///
/// Both floor functions are concave along the segment between the rate-max
/// and energy-max points, and the energy is affine, so scanning the blend
/// parameter for the smallest energy-feasible value and checking the rate
/// there is exact on the segment.
fn reference_point(c: &Carriers, alpha: f64, sys: &SystemConfig) -> Option<Vec<f64>> {
    let p_lu = max_lu_power(c, sys);
    if lu_rate_of(c, &p_lu, sys) < sys.lu_rate_min - 1e-9 * sys.lu_rate_min.max(1.0) {
        return None;
    }
    if energy_of(c, &p_lu, alpha, sys) >= sys.energy_min[0] {
        return Some(p_lu);
    }
    let p_en = max_energy_power(c, sys);
    let e_lu = energy_of(c, &p_lu, alpha, sys);
    let e_en = energy_of(c, &p_en, alpha, sys);
    if e_en < sys.energy_min[0] {
        return None;
    }
    // Affine energy along the blend: solve for the first feasible s.
    let s = ((sys.energy_min[0] - e_lu) / (e_en - e_lu)).clamp(0.0, 1.0);
    let blend: Vec<f64> = p_lu
        .iter()
        .zip(p_en.iter())
        .map(|(a, b)| (1.0 - s) * a + s * b)
        .collect();
    if lu_rate_of(c, &blend, sys) >= sys.lu_rate_min - 1e-9 * sys.lu_rate_min.max(1.0) {
        Some(blend)
    } else {
        None
    }
}

/// Projection onto the full-budget capped simplex `{sum p = budget, 0 <= p <= peak}`.
fn project_budget_plane(p: &mut [f64], sys: &SystemConfig) {
    let budget = effective_budget(sys);
    let fill = |shift: f64, p: &[f64]| -> f64 {
        p.iter().map(|&v| (v - shift).clamp(0.0, sys.peak_power)).sum()
    };
    let top = p.iter().cloned().fold(0.0f64, f64::max);
    let mut lo = -(sys.peak_power + 1.0);
    let mut hi = top + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid, p) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = 0.5 * (lo + hi);
    for v in p.iter_mut() {
        *v = (*v - shift).clamp(0.0, sys.peak_power);
    }
    // Absorb the bisection residue on an interior coordinate.
    let spent: f64 = p.iter().sum();
    let mut residue = budget - spent;
    if residue.abs() > 0.0 {
        for v in p.iter_mut() {
            let adjusted = (*v + residue).clamp(0.0, sys.peak_power);
            residue -= adjusted - *v;
            *v = adjusted;
            if residue.abs() <= 1e-18 {
                break;
            }
        }
    }
}

/// Pull the dual iterate's primal point to exact feasibility: project onto
/// the budget plane, then bisect toward the reference point until both
/// floors hold. Both floors are concave along the segment and hold at the
/// reference, so the feasible blend set is an interval containing 1.
fn repair(
    c: &Carriers,
    p: &[f64],
    p_ref: &[f64],
    alpha: f64,
    sys: &SystemConfig,
    tol: f64,
) -> Vec<f64> {
    let mut base = p.to_vec();
    project_budget_plane(&mut base, sys);
    let feasible = |q: &[f64]| -> bool {
        let r = residuals(c, q, alpha, sys);
        r.lu >= -tol * sys.lu_rate_min.max(1.0) && r.energy >= -tol * sys.energy_min[0].max(1e-12)
    };
    if feasible(&base) {
        return base;
    }
    let blend = |t: f64| -> Vec<f64> {
        base.iter()
            .zip(p_ref.iter())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect()
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(&blend(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    blend(hi)
}

/// Throughput of device 0 at time fraction 1.
fn throughput_of(c: &Carriers, p: &[f64], alpha: f64, sys: &SystemConfig) -> f64 {
    let snr = alpha / sys.noise_power * objective_of(c, p);
    log2_1p(snr) / sys.num_subcarriers as f64
}

/// Solve the fixed-`alpha` power problem by dual ascent (Algorithm-style
/// subgradient loop with diminishing steps, terminated on the relative
/// duality-gap criterion) followed by the nested-bisection refinement, then
/// repair the primal point to exact feasibility.
pub fn dual_ascent(
    alpha: f64,
    gains: &LinkGains,
    sys: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SingleBdSolution, Error> {
    dual_ascent_from(alpha, gains, sys, opts, None)
}

/// [`dual_ascent`] with an explicit starting dual point (used for warm
/// starts across neighboring reflection coefficients and for the
/// initialization-invariance checks).
pub fn dual_ascent_from(
    alpha: f64,
    gains: &LinkGains,
    sys: &SystemConfig,
    opts: &SolverOptions,
    init: Option<DualVars>,
) -> Result<SingleBdSolution, Error> {
    sys.validate()?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("reflection coefficient must lie in [0, 1]"));
    }
    let c = Carriers::new(gains);
    if c.len() != sys.num_subcarriers {
        return Err(Error::invalid("gain vectors do not match subcarrier count"));
    }

    // Feasibility pre-check at the constraint-wise maximal points.
    let p_ref = reference_point(&c, alpha, sys).ok_or_else(|| {
        Error::infeasible(format!(
            "legacy-rate and energy floors are jointly unreachable at alpha={alpha}"
        ))
    })?;

    // Subgradient phase: minimize the dual with diminishing steps
    // xi/sqrt(i), component scales set from the first residuals.
    let n = sys.num_subcarriers as f64;
    let mean_cross = (c.cross.iter().sum::<f64>() / n).max(1e-300);
    let mean_fwd = (c.forward.iter().sum::<f64>() / n).max(1e-300);
    let scale = DualVars {
        lu_rate: LN_2 * n * mean_cross * (sys.noise_power + effective_budget(sys) / n),
        energy: mean_cross / (sys.harvest_eff[0].max(1e-6) * mean_fwd * (1.0 - alpha).max(1e-3)),
        budget: mean_cross,
    };
    let mut duals = init.unwrap_or(DualVars {
        lu_rate: 0.5 * scale.lu_rate,
        energy: 0.0,
        budget: scale.budget,
    });
    let mut iterations = 0;
    let mut gap_met = false;
    let mut xi: Option<DualVars> = None;
    for i in 1..=opts.max_dual_iter {
        iterations = i;
        let p = primal_at(&c, &duals, alpha, sys);
        let g = dual_value(&c, &duals, alpha, sys, &p);
        let primal_obj = objective_of(&c, &p);
        if (g - primal_obj) / g.abs().max(1e-300) < opts.epsilon {
            gap_met = true;
            break;
        }
        let r = residuals(&c, &p, alpha, sys);
        // Auto-scale the steps so the first update moves each multiplier by
        // about its own magnitude.
        let xi = xi.get_or_insert_with(|| DualVars {
            lu_rate: scale.lu_rate / r.lu.abs().max(1e-300),
            energy: scale.energy / r.energy.abs().max(1e-300),
            budget: scale.budget / r.power.abs().max(1e-300),
        });
        let stepw = 1.0 / (i as f64).sqrt();
        // Descent on the dual: subtract the constraint residuals.
        duals.lu_rate = (duals.lu_rate - stepw * xi.lu_rate * r.lu).max(0.0);
        duals.energy = (duals.energy - stepw * xi.energy * r.energy).max(0.0);
        duals.budget -= stepw * xi.budget * r.power;
    }

    // Deterministic refinement: nested bisection on the three multipliers
    // with blended primal recovery at each level's kink. This pins the
    // duality gap at the inner tolerance regardless of where the
    // subgradient phase stopped, so results are independent of `init`.
    let (duals, raw) = solve_dual_nested(&c, alpha, sys)
        .ok_or_else(|| Error::infeasible("dual refinement found no bounded multiplier"))?;
    let power = repair(&c, &raw, &p_ref, alpha, sys, opts.feas_tol.max(1e-9));

    let throughput = throughput_of(&c, &power, alpha, sys);
    let best_dual = primal_at(&c, &duals, alpha, sys);
    let g = dual_value(&c, &duals, alpha, sys, &best_dual);
    let gap = (g - objective_of(&c, &power)) / g.abs().max(1e-300);
    let r = residuals(&c, &power, alpha, sys);
    let violation = (-r.lu / sys.lu_rate_min.max(1.0))
        .max(-r.energy / sys.energy_min[0].max(1e-12))
        .max(r.power.abs() / sys.total_power)
        .max(0.0);
    let status = if gap_met || gap < opts.epsilon {
        Status::Optimal
    } else {
        Status::IterLimit
    };
    Ok(SingleBdSolution {
        reflect: alpha,
        power,
        throughput,
        duals,
        report: SolveReport::new(status, throughput, iterations, violation),
    })
}

/// Joint solve: one-dimensional search over the reflection coefficient
/// (grid, then golden-section refinement around the best cell), calling
/// [`dual_ascent`] per candidate.
pub fn solve_single_bd(
    gains: &LinkGains,
    sys: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SingleBdSolution, Error> {
    sys.validate()?;
    let c = Carriers::new(gains);

    // Alpha-independent feasibility data: the legacy rate does not involve
    // alpha, and the maximal harvested energy scales by (1 - alpha).
    let p_lu = max_lu_power(&c, sys);
    if lu_rate_of(&c, &p_lu, sys) < sys.lu_rate_min - 1e-12 {
        return Err(Error::infeasible("legacy rate floor unreachable at full power"));
    }
    // Largest alpha for which the energy floor stays reachable, from the
    // alpha-free part of the reference construction.
    let e_at_zero = energy_of(&c, &max_energy_power(&c, sys), 0.0, sys);
    let alpha_cap = if sys.energy_min[0] <= 0.0 {
        1.0
    } else if e_at_zero <= 0.0 {
        return Err(Error::infeasible("energy floor unreachable even at alpha = 0"));
    } else {
        (1.0 - sys.energy_min[0] / e_at_zero).min(1.0)
    };
    if alpha_cap < 0.0 {
        return Err(Error::infeasible("energy floor exceeds the maximum harvest"));
    }

    let mut best: Option<SingleBdSolution> = None;
    let mut evaluate = |alpha: f64, warm: Option<DualVars>| -> Option<(f64, DualVars)> {
        match dual_ascent_from(alpha, gains, sys, opts, warm) {
            Ok(sol) => {
                let value = sol.throughput;
                let duals = sol.duals;
                if best.as_ref().map_or(true, |b| value > b.throughput) {
                    best = Some(sol);
                }
                Some((value, duals))
            }
            Err(_) => None,
        }
    };

    // Grid pass with warm-started duals.
    let steps = (1.0 / opts.alpha_grid).round() as usize;
    let mut warm: Option<DualVars> = None;
    let mut best_alpha = None;
    let mut best_value = f64::NEG_INFINITY;
    for i in 0..=steps {
        let alpha = (i as f64 / steps as f64).min(alpha_cap);
        if let Some((value, duals)) = evaluate(alpha, warm) {
            warm = Some(duals);
            if value > best_value {
                best_value = value;
                best_alpha = Some(alpha);
            }
        }
        if i as f64 / steps as f64 >= alpha_cap {
            break;
        }
    }
    let center = best_alpha.ok_or_else(|| {
        Error::infeasible("no reflection coefficient admits a feasible point")
    })?;

    // Golden-section refinement inside the bracketing cells.
    let golden = 0.5 * (3.0 - 5.0f64.sqrt());
    let mut lo = (center - opts.alpha_grid).max(0.0);
    let mut hi = (center + opts.alpha_grid).min(alpha_cap);
    for _ in 0..25 {
        if hi - lo < 1e-7 {
            break;
        }
        let a = lo + golden * (hi - lo);
        let b = hi - golden * (hi - lo);
        let fa = evaluate(a, warm).map(|v| v.0).unwrap_or(f64::NEG_INFINITY);
        let fb = evaluate(b, warm).map(|v| v.0).unwrap_or(f64::NEG_INFINITY);
        if fa >= fb {
            hi = b;
        } else {
            lo = a;
        }
    }

    best.ok_or_else(|| Error::infeasible("no feasible reflection coefficient"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn gains_from(cross: Vec<f64>, forward: Vec<f64>, legacy: Vec<f64>) -> LinkGains {
        let n = cross.len();
        LinkGains {
            backscatter: vec![cross],
            forward: vec![forward],
            legacy,
            interference: vec![vec![0.0; n]],
        }
    }

    fn basic_sys(n: usize) -> SystemConfig {
        SystemConfig {
            num_devices: 1,
            num_subcarriers: n,
            cp_len: 0,
            total_power: 1.0,
            peak_power: 1.0,
            noise_power: 1.0,
            harvest_eff: vec![0.5],
            lu_rate_min: 0.0,
            energy_min: vec![0.0],
            epsilon: 1e-4,
        }
    }

    fn random_gains(rng: &mut ChaCha12Rng, n: usize) -> LinkGains {
        gains_from(
            (0..n).map(|_| rng.gen_range(0.1..2.0)).collect(),
            (0..n).map(|_| rng.gen_range(0.1..2.0)).collect(),
            (0..n).map(|_| rng.gen_range(0.1..2.0)).collect(),
        )
    }

    #[test]
    fn closed_form_zero_when_lu_multiplier_zero() {
        let sys = basic_sys(2);
        let gains = gains_from(vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]);
        let duals = DualVars {
            lu_rate: 0.0,
            energy: 0.0,
            budget: 100.0,
        };
        assert_eq!(theorem1_power(0, &duals, 0.5, &gains, &sys), 0.0);
    }

    #[test]
    fn closed_form_peak_when_budget_multiplier_small() {
        let sys = basic_sys(2);
        let gains = gains_from(vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]);
        let duals = DualVars {
            lu_rate: 0.0,
            energy: 2.0,
            budget: 1.2, // below cross + theta*eta*w*(1-alpha) = 1 + 2*0.5*1*0.5 = 1.5
        };
        assert_eq!(theorem1_power(0, &duals, 0.5, &gains, &sys), sys.peak_power);
    }

    #[test]
    fn closed_form_interior_stationarity() {
        // lambda = N ln2, mu = 2, cross = 1, theta = 0, noise/h = 0.5,
        // peak = 1: stationarity 1 + 1/(p + 0.5) - 2 = 0 gives p = 0.5.
        let n = 4;
        let mut sys = basic_sys(n);
        sys.noise_power = 0.5;
        sys.peak_power = 1.0;
        let gains = gains_from(vec![1.0; n], vec![1.0; n], vec![1.0; n]);
        let duals = DualVars {
            lu_rate: n as f64 * LN_2,
            energy: 0.0,
            budget: 2.0,
        };
        let p = theorem1_power(0, &duals, 0.5, &gains, &sys);
        assert!((p - 0.5).abs() < 1e-12, "got {p}");
        // Cross-check by numeric 1-D maximization of the Lagrangian.
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut x = 0.0;
        while x <= 1.0 {
            let v = subcarrier_lagrangian(x, 0, &duals, 0.5, &gains, &sys);
            if v > best.1 {
                best = (x, v);
            }
            x += 1e-5;
        }
        assert!((best.0 - p).abs() <= 1e-4);
    }

    #[test]
    fn closed_form_matches_grid_on_random_duals() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let n = 4;
        for _ in 0..50 {
            let mut sys = basic_sys(n);
            sys.noise_power = rng.gen_range(0.05..1.0);
            sys.peak_power = rng.gen_range(0.3..2.0);
            let gains = random_gains(&mut rng, n);
            let alpha = rng.gen_range(0.0..1.0);
            let cross = gains.backscatter[0][0];
            let slope = cross + 0.3 * sys.harvest_eff[0] * gains.forward[0][0] * (1.0 - alpha);
            let duals = DualVars {
                lu_rate: rng.gen_range(0.1..3.0),
                energy: 0.3,
                // keep away from the flat regime boundary
                budget: slope * rng.gen_range(1.15..3.0),
            };
            let formula = theorem1_power(0, &duals, alpha, &gains, &sys);
            let mut best = (0.0, f64::NEG_INFINITY);
            let steps = (sys.peak_power / 1e-5) as usize;
            for i in 0..=steps {
                let x = sys.peak_power * i as f64 / steps as f64;
                let v = subcarrier_lagrangian(x, 0, &duals, alpha, &gains, &sys);
                if v > best.1 {
                    best = (x, v);
                }
            }
            assert!(
                (best.0 - formula).abs() <= 1e-4,
                "grid {} vs formula {}",
                best.0,
                formula
            );
        }
    }

    #[test]
    fn unconstrained_budget_goes_to_strongest_subcarrier() {
        // No floors, peak >= budget: everything lands on argmax cross gain.
        let n = 4;
        let mut sys = basic_sys(n);
        sys.peak_power = 2.0;
        sys.total_power = 1.0;
        let gains = gains_from(vec![0.3, 1.7, 0.8, 0.2], vec![1.0; n], vec![1.0; n]);
        let sol = dual_ascent(0.7, &gains, &sys, &SolverOptions::default()).unwrap();
        assert!((sol.power[1] - 1.0).abs() < 1e-6, "power {:?}", sol.power);
        assert!(sol.power[0].abs() < 1e-6);
        let spent: f64 = sol.power.iter().sum();
        assert!((spent - 1.0).abs() <= 1e-6, "budget equality");
    }

    #[test]
    fn dual_ascent_matches_simplex_grid_oracle() {
        // Exhaustive oracle over the capped power simplex at step 0.02.
        let mut rng = ChaCha12Rng::seed_from_u64(5150);
        for trial in 0..5 {
            let n = 3;
            let mut sys = basic_sys(n);
            sys.noise_power = 0.4;
            sys.peak_power = 0.7;
            let gains = random_gains(&mut rng, n);
            let alpha = 0.5;
            // Floors chosen from the uniform point so they are feasible.
            let c = Carriers::new(&gains);
            let uniform = vec![sys.total_power / n as f64; n];
            sys.lu_rate_min = 0.5 * lu_rate_of(&c, &uniform, &sys);
            sys.energy_min = vec![0.5 * energy_of(&c, &uniform, alpha, &sys)];

            let sol = dual_ascent(alpha, &gains, &sys, &SolverOptions::default()).unwrap();

            let res = 0.02;
            let mut best = f64::NEG_INFINITY;
            let steps = (1.0 / res) as usize;
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let k = steps - i - j;
                    let p = [
                        i as f64 * res * sys.total_power,
                        j as f64 * res * sys.total_power,
                        k as f64 * res * sys.total_power,
                    ];
                    if p.iter().any(|&v| v > sys.peak_power + 1e-12) {
                        continue;
                    }
                    if lu_rate_of(&c, &p, &sys) < sys.lu_rate_min
                        || energy_of(&c, &p, alpha, &sys) < sys.energy_min[0]
                    {
                        continue;
                    }
                    best = best.max(throughput_of(&c, &p, alpha, &sys));
                }
            }
            assert!(best.is_finite(), "oracle found no feasible grid point");
            assert!(
                (sol.throughput - best).abs() <= 2e-2 * best.abs().max(1e-6),
                "trial {trial}: dual {} vs grid {}",
                sol.throughput,
                best
            );
        }
    }

    #[test]
    fn objective_invariant_to_dual_initialization() {
        let mut rng = ChaCha12Rng::seed_from_u64(909);
        let n = 8;
        let mut sys = basic_sys(n);
        sys.noise_power = 0.3;
        sys.peak_power = 0.5;
        let gains = random_gains(&mut rng, n);
        let c = Carriers::new(&gains);
        let uniform = vec![sys.total_power / n as f64; n];
        sys.lu_rate_min = 0.6 * lu_rate_of(&c, &uniform, &sys);
        sys.energy_min = vec![0.6 * energy_of(&c, &uniform, 0.5, &sys)];
        let reference = dual_ascent(0.5, &gains, &sys, &SolverOptions::default())
            .unwrap()
            .throughput;
        for _ in 0..10 {
            let init = DualVars {
                lu_rate: rng.gen_range(0.0..10.0),
                energy: rng.gen_range(0.0..10.0),
                budget: rng.gen_range(-2.0..10.0),
            };
            let sol =
                dual_ascent_from(0.5, &gains, &sys, &SolverOptions::default(), Some(init)).unwrap();
            assert!(
                (sol.throughput - reference).abs() <= 1e-6,
                "init-dependent objective: {} vs {reference}",
                sol.throughput
            );
        }
    }

    #[test]
    fn gap_criterion_met_at_termination() {
        let mut rng = ChaCha12Rng::seed_from_u64(3231);
        let n = 6;
        let mut sys = basic_sys(n);
        sys.peak_power = 0.4;
        let gains = random_gains(&mut rng, n);
        let sol = dual_ascent(0.6, &gains, &sys, &SolverOptions::default()).unwrap();
        assert_eq!(sol.report.status, Status::Optimal);
        // Refined duals: the dual value bounds the primal objective tightly.
        let c = Carriers::new(&gains);
        let raw = primal_at(&c, &sol.duals, 0.6, &sys);
        let g = dual_value(&c, &sol.duals, 0.6, &sys, &raw);
        let gap = (g - objective_of(&c, &sol.power)) / g.abs().max(1e-300);
        assert!(gap <= 1e-4, "gap {gap}");
        assert!(gap >= -1e-9, "dual value must upper-bound the primal");
    }

    #[test]
    fn budget_holds_with_equality() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..10 {
            let n = 5;
            let mut sys = basic_sys(n);
            sys.peak_power = rng.gen_range(0.3..1.2);
            let gains = random_gains(&mut rng, n);
            let sol = dual_ascent(rng.gen_range(0.1..0.9), &gains, &sys, &SolverOptions::default())
                .unwrap();
            let spent: f64 = sol.power.iter().sum();
            assert!(
                (spent - effective_budget(&sys)).abs() <= 1e-6,
                "spent {spent}"
            );
            assert!(sol.power.iter().all(|&p| (-1e-12..=sys.peak_power + 1e-12).contains(&p)));
        }
    }

    #[test]
    fn no_energy_floor_prefers_full_reflection() {
        let mut rng = ChaCha12Rng::seed_from_u64(88);
        let n = 4;
        let sys = basic_sys(n);
        let gains = random_gains(&mut rng, n);
        let mut opts = SolverOptions::default();
        opts.alpha_grid = 0.05;
        let sol = solve_single_bd(&gains, &sys, &opts).unwrap();
        assert!((sol.reflect - 1.0).abs() < 1e-6, "alpha {}", sol.reflect);
    }

    #[test]
    fn energy_floor_at_maximum_forces_zero_reflection() {
        let mut rng = ChaCha12Rng::seed_from_u64(89);
        let n = 4;
        let mut sys = basic_sys(n);
        let gains = random_gains(&mut rng, n);
        let c = Carriers::new(&gains);
        let e_max = energy_of(&c, &max_energy_power(&c, &sys), 0.0, &sys);
        sys.energy_min = vec![e_max * (1.0 - 1e-9)];
        let mut opts = SolverOptions::default();
        opts.alpha_grid = 0.05;
        let sol = solve_single_bd(&gains, &sys, &opts).unwrap();
        assert!(sol.reflect < 1e-6, "alpha {}", sol.reflect);
    }

    #[test]
    fn joint_solve_matches_alpha_grid_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(4242);
        let n = 8;
        let mut sys = basic_sys(n);
        sys.noise_power = 0.2;
        sys.peak_power = 0.4;
        let gains = random_gains(&mut rng, n);
        let c = Carriers::new(&gains);
        let uniform = vec![sys.total_power / n as f64; n];
        sys.lu_rate_min = 0.4 * lu_rate_of(&c, &uniform, &sys);
        sys.energy_min = vec![0.4 * energy_of(&c, &uniform, 0.5, &sys)];
        let mut opts = SolverOptions::default();
        opts.alpha_grid = 0.02;
        let sol = solve_single_bd(&gains, &sys, &opts).unwrap();
        // Oracle: dense alpha grid, dual ascent per candidate.
        let mut best = f64::NEG_INFINITY;
        for i in 0..=500 {
            let alpha = i as f64 / 500.0;
            if let Ok(s) = dual_ascent(alpha, &gains, &sys, &opts) {
                best = best.max(s.throughput);
            }
        }
        assert!(
            (sol.throughput - best).abs() <= 1e-3 * best.max(1e-9),
            "joint {} vs alpha-grid {}",
            sol.throughput,
            best
        );
    }
}
