//! Root bracketing shared by the steady-state and nullcline solvers.

/// Outcome of [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    pub iterations: usize,
    /// Width of the final bracket.
    pub width: f64,
}

/// Bisection on `[lo, hi]` for a function whose values at the endpoints have
/// opposite signs (zero counts as either sign).
///
/// Stops when the bracket is narrower than `tol`, when the midpoint can no
/// longer be split in floating point, or after `max_iter` halvings. Returns
/// `None` when the endpoints do not bracket a sign change.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Option<Bisection>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(Bisection { root: a, iterations: 0, width: 0.0 });
    }
    if fb == 0.0 {
        return Some(Bisection { root: b, iterations: 0, width: 0.0 });
    }
    if !(fa.signum() != fb.signum()) || fa.is_nan() || fb.is_nan() {
        return None;
    }
    let a_positive = fa > 0.0;
    let mut iterations = 0;
    while iterations < max_iter && (b - a) > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm == 0.0 {
            return Some(Bisection { root: mid, iterations, width: 0.0 });
        }
        if (fm > 0.0) == a_positive {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(Bisection {
        root: 0.5 * (a + b),
        iterations,
        width: b - a,
    })
}
