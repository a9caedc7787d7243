//! Bounded scalar Newton-Raphson.

use crate::error::{Error, Result};

/// Result of a bounded Newton solve.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOutcome {
    /// Final iterate (the best one seen if the iteration cap was hit).
    pub root: f64,
    /// True when the last step size dropped below the tolerance.
    pub converged: bool,
    /// Number of iterations taken.
    pub iterations: usize,
}

/// Solves `residual(x) = 0` by Newton-Raphson from `guess`, keeping every
/// iterate clamped to `bounds`.
///
/// `residual` returns the pair `(value, derivative)`. The iteration stops as
/// soon as a step changes the iterate by less than `tol`; if `max_iter` is
/// reached first, the iterate with the smallest absolute residual is returned
/// with `converged = false`.
pub fn newton_solve<F>(
    residual: F,
    guess: f64,
    bounds: (f64, f64),
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome>
where
    F: Fn(f64) -> (f64, f64),
{
    let (lo, hi) = bounds;
    if !(lo <= hi) {
        return Err(Error::solver(format!("empty bounds [{lo}, {hi}]")));
    }
    let mut x = guess.clamp(lo, hi);
    let mut best = (x, f64::INFINITY);

    for iter in 0..max_iter {
        let (f, df) = residual(x);
        if !f.is_finite() {
            return Err(Error::solver(format!(
                "residual non-finite at x = {x} (iteration {iter})"
            )));
        }
        if f.abs() < best.1 {
            best = (x, f.abs());
        }
        if f == 0.0 {
            return Ok(NewtonOutcome {
                root: x,
                converged: true,
                iterations: iter,
            });
        }
        if !df.is_finite() || df == 0.0 {
            return Err(Error::solver(format!(
                "unusable derivative {df} at x = {x}"
            )));
        }
        let next = (x - f / df).clamp(lo, hi);
        let step = (next - x).abs();
        x = next;
        if step < tol {
            return Ok(NewtonOutcome {
                root: x,
                converged: true,
                iterations: iter + 1,
            });
        }
    }
    Ok(NewtonOutcome {
        root: best.0,
        converged: false,
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_root() {
        let out = newton_solve(|x| (x - 2.0, 1.0), 0.0, (-10.0, 10.0), 1e-10, 50).unwrap();
        assert!(out.converged);
        assert_abs_diff_eq!(out.root, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn exponential_root() {
        let out =
            newton_solve(|x| (x.exp() - 1.0, x.exp()), 0.5, (-5.0, 5.0), 1e-10, 50).unwrap();
        assert!(out.converged);
        assert_abs_diff_eq!(out.root, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn iterates_stay_clamped() {
        // Root at 2 lies outside the feasible interval; the solver must pin
        // to the boundary instead of escaping.
        let out = newton_solve(|x| (x - 2.0, 1.0), 0.0, (-1.0, 1.0), 1e-10, 50).unwrap();
        assert!(out.root <= 1.0 && out.root >= -1.0);
        assert_abs_diff_eq!(out.root, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_residual_is_an_error() {
        let err = newton_solve(|_| (f64::NAN, 1.0), 0.0, (-1.0, 1.0), 1e-10, 50);
        assert!(err.is_err());
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        // Slow oscillation: derivative deliberately misreported so Newton
        // cannot converge; best-|residual| iterate must come back flagged.
        let out = newton_solve(|x| (x, 0.1), 1.0, (-10.0, 10.0), 1e-14, 3).unwrap();
        assert!(!out.converged);
        assert!(out.root.abs() <= 1.0);
    }
}
