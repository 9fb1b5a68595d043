//! Dormand–Prince 5(4) with Hairer's dense output.
//!
//! Steps never straddle a mandatory stop. Every stage of a step receives the
//! step midpoint as a `piece` anchor so a right-hand side with jumps can tell
//! which side of a breakpoint it is on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// A first-order system `y' = f(t, y)` with `N` components.
pub trait OdeSystem<const N: usize>: Sync {
    /// Right-hand side. `piece` is a time strictly inside the current step.
    fn rhs(&self, t: f64, piece: f64, y: &[f64; N]) -> [f64; N];

    fn in_domain(&self, _y: &[f64; N]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64) -> Self {
        Tolerances { rtol, atol: rtol * 1e-2 }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Tolerances { rtol: self.rtol * factor, atol: self.atol * factor }
    }

    /// Caps `atol` so that states of size `scale` keep the relative accuracy.
    pub fn for_scale(self, scale: f64) -> Self {
        Tolerances { rtol: self.rtol, atol: self.atol.min(self.rtol * scale.abs() * 1e-2) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest accepted normalized error estimate.
    pub max_error: f64,
}

impl Stats {
    pub fn merge(&mut self, o: &Stats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.rhs_evals += o.rhs_evals;
        self.max_error = self.max_error.max(o.max_error);
    }
}

/// One accepted step together with its interpolation coefficients.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn y0(&self) -> [f64; N] {
        self.r[0]
    }

    pub fn y1(&self) -> [f64; N] {
        std::array::from_fn(|i| self.r[0][i] + self.r[1][i])
    }

    /// Interpolated state at `t ∈ [t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        if t == self.t1 {
            return self.y1();
        }
        let th = if h > 0.0 { (t - self.t0) / h } else { 0.0 };
        let th1 = 1.0 - th;
        let mut y = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }

    /// Time derivative of the interpolant.
    pub fn eval_deriv(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let th = (t - self.t0) / h;
        let th1 = 1.0 - th;
        let mut y = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            // d/dθ of r1 + θ(r2 + θ1(r3 + θ(r4 + θ1 r5)))
            let inner = r[3][i] + th1 * r[4][i];
            let d_inner = -r[4][i];
            let mid = r[2][i] + th * inner;
            let d_mid = inner + th * d_inner;
            let outer = r[1][i] + th1 * mid;
            let d_outer = -mid + th1 * d_mid;
            y[i] = (outer + th * d_outer) / h;
        }
        y
    }
}

fn all_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

/// Integrates from `t0` to `t1`, stopping exactly at every time in `stops`.
///
/// `observe` sees each accepted step and may abort the integration by
/// returning an error.
pub fn integrate<const N: usize, S, O>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    stops: &[f64],
    tol: Tolerances,
    mut observe: O,
) -> Result<([f64; N], Stats)>
where
    S: OdeSystem<N> + ?Sized,
    O: FnMut(&DenseStep<N>) -> Result<()>,
{
    let mut stats = Stats::default();
    if !all_finite(&y0) {
        return Err(Error::DomainExit { t: t0, u: y0[0] });
    }
    if t1 <= t0 {
        return Ok((y0, stats));
    }
    let mut targets: Vec<f64> = stops.iter().copied().filter(|&s| s > t0 && s < t1).collect();
    targets.push(t1);
    targets.sort_by(|a, b| a.total_cmp(b));
    targets.dedup();

    let mut t = t0;
    let mut y = y0;
    let mut h = initial_step(sys, t0, &y0, targets[0] - t0, tol);
    stats.rhs_evals += 2;

    for &stop in &targets {
        let mut domain_trouble = false;
        while t < stop {
            let remaining = stop - t;
            let last = h * (1.0 + 1e-6) >= remaining;
            let hh = if last { remaining } else { h };
            let piece = t + 0.5 * hh;
            match try_step(sys, t, piece, &y, hh, tol) {
                StepOutcome::Accepted { y1, err, dense } => {
                    stats.accepted += 1;
                    stats.rhs_evals += 7;
                    stats.max_error = stats.max_error.max(err);
                    let t_new = if last { stop } else { t + hh };
                    observe(&DenseStep { t0: t, t1: t_new, r: dense })?;
                    t = t_new;
                    y = y1;
                    domain_trouble = false;
                    let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
                    // A short final step says nothing about the next segment.
                    if !last || hh * fac >= h {
                        h = hh * fac;
                    }
                    continue;
                }
                StepOutcome::Rejected { err } => {
                    stats.rejected += 1;
                    stats.rhs_evals += 7;
                    h = hh * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                }
                StepOutcome::NonFinite { out_of_domain } => {
                    stats.rejected += 1;
                    domain_trouble |= out_of_domain;
                    h = hh * 0.2;
                }
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(if domain_trouble {
                    Error::DomainExit { t, u: y[0] }
                } else {
                    Error::StepSizeUnderflow { t, h }
                });
            }
        }
    }
    Ok((y, stats))
}

enum StepOutcome<const N: usize> {
    Accepted { y1: [f64; N], err: f64, dense: [[f64; N]; 5] },
    Rejected { err: f64 },
    NonFinite { out_of_domain: bool },
}

fn try_step<const N: usize, S: OdeSystem<N> + ?Sized>(
    sys: &S,
    t: f64,
    piece: f64,
    y: &[f64; N],
    h: f64,
    tol: Tolerances,
) -> StepOutcome<N> {
    macro_rules! stage {
        ($tt:expr, $yy:expr) => {{
            let yy = $yy;
            if !all_finite(&yy) || !sys.in_domain(&yy) {
                return StepOutcome::NonFinite { out_of_domain: all_finite(&yy) };
            }
            let k = sys.rhs($tt, piece, &yy);
            if !all_finite(&k) {
                return StepOutcome::NonFinite { out_of_domain: !sys.in_domain(&yy) };
            }
            k
        }};
    }
    let k1 = stage!(t, *y);
    let k2 = stage!(t + C2 * h, axpy(y, h, &[(A21, &k1)]));
    let k3 = stage!(t + C3 * h, axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = stage!(t + C4 * h, axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = stage!(t + C5 * h, axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = stage!(t + h, axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = stage!(t + h, y1);

    let mut acc = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol.atol + tol.rtol * y[i].abs().max(y1[i].abs());
        acc += (e / sc).powi(2);
    }
    let err = (acc / N as f64).sqrt();
    if !err.is_finite() {
        return StepOutcome::NonFinite { out_of_domain: false };
    }
    if err > 1.0 {
        return StepOutcome::Rejected { err };
    }
    let mut r = [[0.0; N]; 5];
    for i in 0..N {
        let dy = y1[i] - y[i];
        let bspl = h * k1[i] - dy;
        r[0][i] = y[i];
        r[1][i] = dy;
        r[2][i] = bspl;
        r[3][i] = dy - h * k7[i] - bspl;
        r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    StepOutcome::Accepted { y1, err, dense: r }
}

/// Starting step size following the usual two-evaluation heuristic.
fn initial_step<const N: usize, S: OdeSystem<N> + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64; N],
    span: f64,
    tol: Tolerances,
) -> f64 {
    let piece = t0 + 0.5 * span.min(1e-6);
    let f0 = sys.rhs(t0, piece, y0);
    let sc = |i: usize| tol.atol + tol.rtol * y0[i].abs();
    let norm = |v: &[f64; N]| (v.iter().enumerate().map(|(i, x)| (x / sc(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(&f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 || !d1.is_finite() { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[(1.0, &f0)]);
    let f1 = sys.rhs(t0 + h0, piece, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if !d2.is_finite() {
        h0
    } else if d1.max(d2) <= 1e-15 {
        (1e-6f64).max(h0 * 1e-3)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).max(1e-12 * span)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Osc(f64);
    impl OdeSystem<2> for Osc {
        fn rhs(&self, _t: f64, _p: f64, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -self.0 * y[0]]
        }
    }

    struct Jump;
    impl OdeSystem<1> for Jump {
        fn rhs(&self, _t: f64, piece: f64, _y: &[f64; 1]) -> [f64; 1] {
            [if piece < 1.0 { 1.0 } else { -2.0 }]
        }
    }

    #[test]
    fn oscillator_period() {
        let tp = 2.0 * std::f64::consts::PI;
        let (y, st) = integrate(&Osc(1.0), 0.0, [1.0, 0.0], tp, &[], Tolerances::default(), |_| Ok(())).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9, "{y:?}");
        assert!(st.accepted > 10);
    }

    #[test]
    fn stops_make_jumps_exact() {
        let (y, _) = integrate(&Jump, 0.0, [0.0], 2.0, &[1.0], Tolerances::default(), |_| Ok(())).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn observer_sees_contiguous_steps_and_stops() {
        let mut last = 0.0;
        let mut saw_stop = false;
        integrate(&Osc(4.0), 0.0, [1.0, 0.0], 3.0, &[0.7, 1.3], Tolerances::default(), |s| {
            assert_eq!(s.t0, last);
            saw_stop |= s.t1 == 0.7;
            last = s.t1;
            Ok(())
        })
        .unwrap();
        assert_eq!(last, 3.0);
        assert!(saw_stop);
    }

    #[test]
    fn dense_output_matches_exact() {
        let mut worst: f64 = 0.0;
        let mut worst_d: f64 = 0.0;
        integrate(&Osc(1.0), 0.0, [1.0, 0.0], 5.0, &[], Tolerances::default(), |s| {
            for j in 0..=10 {
                let t = s.t0 + (s.t1 - s.t0) * j as f64 / 10.0;
                let y = s.eval(t);
                worst = worst.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
                let d = s.eval_deriv(t);
                worst_d = worst_d.max((d[0] + t.sin()).abs());
            }
            Ok(())
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
        assert!(worst_d < 1e-5, "{worst_d}");
    }

    struct Blowup;
    impl OdeSystem<1> for Blowup {
        fn rhs(&self, _t: f64, _p: f64, y: &[f64; 1]) -> [f64; 1] {
            [y[0] * y[0]]
        }
    }

    #[test]
    fn blowup_underflows() {
        let r = integrate(&Blowup, 0.0, [1.0], 2.0, &[], Tolerances::default(), |_| Ok(()));
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. })), "{r:?}");
    }
}
