//! Scalar root finding and one-dimensional extremum refinement.

use crate::error::{Error, Result};

/// Brent's method on a bracketing interval: inverse quadratic interpolation
/// guarded by bisection. `fa` and `fb` must have opposite signs.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Solver(format!(
            "root bracket endpoints must be finite: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Solver(format!(
            "root bracket does not straddle zero: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            // Inverse quadratic interpolation.
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            // Secant step.
            b - fb * (b - a) / (fb - fa)
        };
        let low = (3.0 * a + b) / 4.0;
        let within = (s > low.min(b) && s < low.max(b))
            && if bisected {
                (s - b).abs() < 0.5 * (b - c).abs()
            } else {
                (s - b).abs() < 0.5 * (c - d).abs()
            };
        if !within {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s);
        if !fs.is_finite() {
            // Retreat to bisection when interpolation left the domain.
            s = 0.5 * (a + b);
            let fs2 = f(s);
            if !fs2.is_finite() {
                return Err(Error::Solver(format!(
                    "function value not finite at {s} during root search"
                )));
            }
            d = c;
            c = b;
            fc = fb;
            if fa.signum() != fs2.signum() {
                b = s;
                fb = fs2;
            } else {
                a = s;
                fa = fs2;
            }
            continue;
        }
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(Error::Solver(format!(
        "root search did not converge within {max_iter} iterations (bracket [{a}, {b}])"
    )))
}

/// Golden-section maximization on `[a, b]` for a function that may be
/// undefined on part of the interval (`None` counts as minus infinity).
/// Returns the best abscissa and value seen; `None` if the function was
/// undefined everywhere it was probed.
pub fn golden_max<F: FnMut(f64) -> Option<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, Option<f64>) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut best_x = 0.5 * (a + b);
    let mut best: Option<f64> = None;
    let record = |x: f64, v: Option<f64>, best_x: &mut f64, best: &mut Option<f64>| {
        if let Some(val) = v {
            if best.map_or(true, |bv| val > bv) {
                *best = Some(val);
                *best_x = x;
            }
        }
    };
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    record(x1, f1, &mut best_x, &mut best);
    record(x2, f2, &mut best_x, &mut best);
    for _ in 0..max_iter {
        if (b - a).abs() < tol {
            break;
        }
        // Missing values are worse than any present value, so the interval
        // shrinks away from undefined regions.
        let keep_left = match (f1, f2) {
            (Some(v1), Some(v2)) => v1 >= v2,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => {
                // Shrink both ends toward the middle.
                a = x1;
                b = x2;
                x1 = b - INVPHI * (b - a);
                x2 = a + INVPHI * (b - a);
                f1 = f(x1);
                f2 = f(x2);
                record(x1, f1, &mut best_x, &mut best);
                record(x2, f2, &mut best_x, &mut best);
                continue;
            }
        };
        if keep_left {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = f(x1);
            record(x1, f1, &mut best_x, &mut best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = f(x2);
            record(x2, f2, &mut best_x, &mut best);
        }
    }
    (best_x, best)
}

/// Golden-section minimization; see [`golden_max`].
pub fn golden_min<F: FnMut(f64) -> Option<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, Option<f64>) {
    let (x, v) = golden_max(|t| f(t).map(|y| -y), a, b, tol, max_iter);
    (x, v.map(|y| -y))
}
