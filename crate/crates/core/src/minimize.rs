//! Bounded scalar minimization: golden-section search with parabolic
//! interpolation steps (Brent's method, as popularized by `fminbnd`).

/// Outcome of a bounded minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
    /// Whether the bracket shrank below the requested width within budget.
    pub converged: bool,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - √5) / 2

/// Minimizes `f` on `[lo, hi]`, stopping once the bracket is narrower than
/// `xtol` or `max_evals` evaluations have been spent. The returned point is
/// always inside `[lo, hi]` and is the best point evaluated.
pub fn brent_bounded<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_evals: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    assert!(lo <= hi, "empty interval [{lo}, {hi}]");
    assert!(max_evals >= 1);
    let (mut a, mut b) = (lo, hi);

    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut evaluations = 1;

    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    while b - a >= xtol && evaluations < max_evals {
        let xm = 0.5 * (a + b);
        let tol1 = (xtol / 3.0).max(4.0 * f64::EPSILON * x.abs());
        let tol2 = 2.0 * tol1;

        let mut golden = true;
        if e.abs() > tol1 {
            // fit a parabola through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let step = if d.abs() >= tol1 {
            d
        } else if d > 0.0 {
            tol1
        } else {
            -tol1
        };
        let u = (x + step).clamp(lo, hi);
        let fu = f(u);
        evaluations += 1;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    Minimum {
        x,
        fx,
        evaluations,
        converged: b - a < xtol,
    }
}
