//! Simple fields used as fixtures and surrogates.

use std::sync::Arc;

use super::Field;
use crate::hill::HillCoefficient;

/// `v'' + q(t) v = 0`.
#[derive(Clone)]
pub struct LinearField {
    pub q: HillCoefficient,
}

impl LinearField {
    pub fn new(q: HillCoefficient) -> Self {
        LinearField { q }
    }
}

impl Field for LinearField {
    fn period(&self) -> f64 {
        self.q.period()
    }
    fn accel(&self, t: f64, piece: f64, u: f64) -> f64 {
        -self.q.eval_within(t, piece) * u
    }
    fn accel_du(&self, t: f64, piece: f64, _u: f64) -> f64 {
        -self.q.eval_within(t, piece)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.q.breakpoints(t0, t1)
    }
}

/// `v'' + c · max(v, -w) = 0`: linear near the origin, bounded for `v ≤ 0`.
///
/// A constant-coefficient stand-in for a shifted field; its bound on the left
/// half-plane is `c·w`.
#[derive(Debug, Clone, Copy)]
pub struct ClampedLinear {
    pub period: f64,
    pub c: f64,
    pub w: f64,
}

impl ClampedLinear {
    /// Surrogate whose linearization turns `rate` times per period.
    pub fn with_rotation_rate(period: f64, rate: f64, w: f64) -> Self {
        let omega = 2.0 * std::f64::consts::PI * rate / period;
        ClampedLinear { period, c: omega * omega, w }
    }
}

impl Field for ClampedLinear {
    fn period(&self) -> f64 {
        self.period
    }
    fn accel(&self, _t: f64, _piece: f64, v: f64) -> f64 {
        -self.c * v.max(-self.w)
    }
    fn accel_du(&self, _t: f64, _piece: f64, v: f64) -> f64 {
        if v > -self.w {
            -self.c
        } else {
            0.0
        }
    }
    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }
}

type AccelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Field from closures `(t, u) -> u''` and `(t, u) -> ∂u''/∂u`.
#[derive(Clone)]
pub struct FnField {
    period: f64,
    accel: Arc<AccelFn>,
    accel_du: Arc<AccelFn>,
    breaks: Vec<f64>,
}

impl FnField {
    pub fn new(
        period: f64,
        accel: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        accel_du: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnField { period, accel: Arc::new(accel), accel_du: Arc::new(accel_du), breaks: Vec::new() }
    }
}

impl Field for FnField {
    fn period(&self) -> f64 {
        self.period
    }
    fn accel(&self, t: f64, _piece: f64, u: f64) -> f64 {
        (self.accel)(t, u)
    }
    fn accel_du(&self, t: f64, _piece: f64, u: f64) -> f64 {
        (self.accel_du)(t, u)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        periodic_points(&self.breaks, self.period, t0, t1)
    }
}

/// All `b + nT` in `[t0, t1]` for `b` in `base ⊂ [0, T)`.
pub(crate) fn periodic_points(base: &[f64], period: f64, t0: f64, t1: f64) -> Vec<f64> {
    if base.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let n0 = (t0 / period).floor() as i64;
    let n1 = (t1 / period).ceil() as i64;
    for n in n0..=n1 {
        for &b in base {
            let t = n as f64 * period + b;
            if t >= t0 && t <= t1 {
                out.push(t);
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup();
    out
}
