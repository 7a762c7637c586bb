//! Bracketed scalar root finding.

/// Solve `f(x) = 0` for a strictly monotone `f` on `[lo, hi]` with
/// `f(lo)` and `f(hi)` of opposite sign. Newton steps (using `df`) are
/// taken while they stay inside the bracket, otherwise bisection.
///
/// Returns `None` if the bracket is invalid or convergence fails.
pub fn solve_bracketed<F, D>(f: F, df: D, lo: f64, hi: f64, xtol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return None;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 || (hi - lo).abs() <= xtol * (1.0 + x.abs()) {
            return Some(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        x = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_root_of_decreasing_function() {
        let f = |x: f64| (-x).exp() - 0.25;
        let df = |x: f64| -(-x).exp();
        let x = solve_bracketed(f, df, 0.0, 10.0, 1e-14).unwrap();
        assert!((x - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbracketed_input() {
        assert!(solve_bracketed(|x| x + 10.0, |_| 1.0, 0.0, 1.0, 1e-12).is_none());
    }
}
