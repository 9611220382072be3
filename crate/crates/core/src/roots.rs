//! Bracketed scalar root finding: safeguarded Newton and secant/bisection.

use crate::{Error, Result};

const MAX_ITER: usize = 200;

/// Find the root of a monotone-bracketed function with Newton steps,
/// falling back to bisection whenever a step would leave the bracket.
///
/// `lo` and `hi` must bracket a sign change (endpoints with value zero
/// count). Converges when the bracket or step is below `xtol` or the
/// residual is below `ftol`.
pub fn newton_bracketed<F>(mut f: F, lo: f64, hi: f64, x0: f64, xtol: f64, ftol: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (fa, _) = f(a);
    if fa == 0.0 {
        return Ok(a);
    }
    let (fb, _) = f(b);
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Inversion(format!(
            "no sign change on bracket [{a}, {b}]: f = ({fa:.3e}, {fb:.3e})"
        )));
    }
    let sign_a = fa.signum();

    let mut x = x0.clamp(a, b);
    for _ in 0..MAX_ITER {
        let (fx, dfx) = f(x);
        if fx == 0.0 || fx.abs() <= ftol {
            return Ok(x);
        }
        if fx.signum() == sign_a {
            a = x;
        } else {
            b = x;
        }
        if b - a <= xtol {
            return Ok(0.5 * (a + b));
        }
        let newton = x - fx / dfx;
        x = if dfx != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (x - newton).abs() == 0.0 && (fx / dfx).abs() <= xtol {
            return Ok(x);
        }
    }
    Err(Error::Inversion(format!(
        "root iteration did not converge on [{a}, {b}]"
    )))
}
