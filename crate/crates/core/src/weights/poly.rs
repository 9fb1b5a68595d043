//! Cubic polynomials in a local variable and their real roots on an interval.

/// Horner evaluation of `c[0] + c[1] x + c[2] x^2 + c[3] x^3`.
#[inline]
pub fn eval(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

#[inline]
pub fn eval_deriv(c: &[f64; 4], x: f64) -> f64 {
    (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1]
}

/// Exact integral over `[x0, x1]`.
pub fn integral(c: &[f64; 4], x0: f64, x1: f64) -> f64 {
    let anti = |x: f64| (((c[3] / 4.0 * x + c[2] / 3.0) * x + c[1] / 2.0) * x + c[0]) * x;
    anti(x1) - anti(x0)
}

pub fn is_zero(c: &[f64; 4]) -> bool {
    c.iter().all(|&v| v == 0.0)
}

/// Coefficients of `p(x + d)`.
pub fn taylor_shift(c: &[f64; 4], d: f64) -> [f64; 4] {
    [
        eval(c, d),
        eval_deriv(c, d),
        c[2] + 3.0 * c[3] * d,
        c[3],
    ]
}

/// Real roots of the derivative inside `(x0, x1)`, sorted.
fn critical_points(c: &[f64; 4], x0: f64, x1: f64) -> Vec<f64> {
    let (a, b, cc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    let mut out = Vec::with_capacity(2);
    if a == 0.0 {
        if b != 0.0 {
            out.push(-cc / b);
        }
    } else {
        let disc = b * b - 4.0 * a * cc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // Numerically stable pair.
            let q = -0.5 * (b + b.signum() * sq);
            if q != 0.0 {
                out.push(q / a);
                out.push(cc / q);
            } else {
                out.push(0.0);
            }
        }
    }
    out.retain(|&x| x > x0 && x < x1);
    out.sort_by(|p, q| p.total_cmp(q));
    out.dedup();
    out
}

/// Bisection on a bracket with a strict sign change, down to adjacent floats.
fn bisect(c: &[f64; 4], mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = eval(c, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = eval(c, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign-change points of `p` strictly inside `(x0, x1)`.
///
/// The interval is cut at critical points so each part is monotone; a part
/// contributes a root only if `p` strictly changes sign across it. Tangential
/// zeros are ignored since they do not split the sign structure.
pub fn sign_changes(c: &[f64; 4], x0: f64, x1: f64) -> Vec<f64> {
    if is_zero(c) || x1 <= x0 {
        return Vec::new();
    }
    let mut knots = vec![x0];
    knots.extend(critical_points(c, x0, x1));
    knots.push(x1);
    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (eval(c, a), eval(c, b));
        if fa == 0.0 || fb == 0.0 {
            continue;
        }
        if (fa < 0.0) != (fb < 0.0) {
            roots.push(bisect(c, a, b));
        }
    }
    // A root landing exactly on a critical point shows up as fa or fb == 0.
    for w in knots.windows(3) {
        let m = w[1];
        if eval(c, m) == 0.0 {
            let (fl, fr) = (eval(c, 0.5 * (w[0] + m)), eval(c, 0.5 * (m + w[2])));
            if (fl < 0.0) != (fr < 0.0) && fl != 0.0 && fr != 0.0 {
                roots.push(m);
            }
        }
    }
    roots.retain(|&r| r > x0 && r < x1);
    roots.sort_by(|p, q| p.total_cmp(q));
    roots.dedup();
    roots
}
