//! Gauss–Legendre quadrature over piecewise-smooth integrands.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(10).unwrap()))
}

/// `∫_a^b f(t, piece)` with the interval cut at `breaks` and every smooth part
/// split into `sub` panels. `piece` is the midpoint of the current panel.
pub fn integrate_piecewise(breaks: &[f64], a: f64, b: f64, sub: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut knots = vec![a];
    knots.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    knots.push(b);
    knots.sort_by(|x, y| x.total_cmp(y));
    let sub = sub.max(1);
    let mut total = 0.0;
    for w in knots.windows(2) {
        let len = w[1] - w[0];
        for j in 0..sub {
            let p0 = w[0] + len * j as f64 / sub as f64;
            let p1 = if j + 1 == sub { w[1] } else { w[0] + len * (j + 1) as f64 / sub as f64 };
            let mid = 0.5 * (p0 + p1);
            total += rule().integrate(p0, p1, |t| f(t, mid));
        }
    }
    total
}
