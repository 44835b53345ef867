//! Exhaustive grid evaluation, the independent oracle used to validate the
//! iterative solvers at desk scale.

use crate::error::Error;

/// Evaluate `f` on a uniform grid over the box `[lo, hi]` with spacing at
/// most `resolution` per axis and return the grid argmax. Ties break toward
/// the first point in row-major order. Dimensions above 4 are rejected; the
/// point of this oracle is exhaustiveness, which stops being affordable
/// there.
pub fn grid_oracle(
    f: impl Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    resolution: f64,
) -> Result<(Vec<f64>, f64), Error> {
    let dim = lo.len();
    if dim == 0 || dim > 4 {
        return Err(Error::invalid(format!(
            "grid oracle supports 1..=4 dimensions, got {dim}"
        )));
    }
    if hi.len() != dim {
        return Err(Error::invalid("bound vectors differ in length"));
    }
    if !(resolution > 0.0) {
        return Err(Error::invalid("resolution must be positive"));
    }
    let mut points = Vec::with_capacity(dim);
    for j in 0..dim {
        if hi[j] < lo[j] {
            return Err(Error::invalid("empty box"));
        }
        let span = hi[j] - lo[j];
        let count = if span == 0.0 {
            1
        } else {
            (span / resolution).ceil() as usize + 1
        };
        points.push(count);
    }

    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut best_x = Vec::new();
    let mut best_f = f64::NEG_INFINITY;
    loop {
        for j in 0..dim {
            let steps = points[j] - 1;
            x[j] = if steps == 0 {
                lo[j]
            } else {
                lo[j] + (hi[j] - lo[j]) * idx[j] as f64 / steps as f64
            };
        }
        let v = f(&x);
        if v > best_f {
            best_f = v;
            best_x = x.clone();
        }
        // advance mixed-radix counter, last axis fastest
        let mut j = dim;
        loop {
            if j == 0 {
                return Ok((best_x, best_f));
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < points[j] {
                break;
            }
            idx[j] = 0;
        }
    }
}
