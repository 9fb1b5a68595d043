//! Nonlinearities `g`, their hypothesis checks, the linear extension above a
//! cap `ρ`, and the truncated fields built from them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Field;
use crate::hill::HillCoefficient;
use crate::quad::integrate_piecewise;
use crate::samples::PeriodicOrbit;
use crate::weights::{AprioriConstants, PeriodicWeight};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `s^p`.
    Power { p: f64 },
    /// `s^γ / (1 - (s/δ)^σ)` on `[0, δ)`.
    SingularRational { gamma: f64, sigma: f64, delta: f64 },
    /// `s^γ / (1 + s^σ)`.
    BoundedRational { gamma: f64, sigma: f64 },
    /// Cubic Hermite data on `[0, s_last]`.
    Tabulated { s: Vec<f64>, g: Vec<f64>, dg: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NonlinearityDef", into = "NonlinearityDef")]
pub struct Nonlinearity {
    family: Family,
    scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NonlinearityDef {
    #[serde(flatten)]
    family: Family,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl TryFrom<NonlinearityDef> for Nonlinearity {
    type Error = Error;
    fn try_from(d: NonlinearityDef) -> Result<Self> {
        Nonlinearity::new(d.family)?.with_scale(d.scale)
    }
}

impl From<Nonlinearity> for NonlinearityDef {
    fn from(n: Nonlinearity) -> Self {
        NonlinearityDef { family: n.family, scale: n.scale }
    }
}

/// `s^e` with the conventions `0^0 = 1`, `0^e = 0` for `e > 0`, `∞` for `e < 0`.
#[inline]
fn spow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        if e == 0.0 {
            1.0
        } else if e > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else if e == 2.0 {
        s * s
    } else if e == 1.0 {
        s
    } else {
        s.powf(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `[0, ∞)`.
    HalfLine,
    /// `[0, end)`.
    Open(f64),
    /// `[0, end]`.
    Closed(f64),
}

impl Domain {
    pub fn contains(&self, s: f64) -> bool {
        s >= 0.0
            && match *self {
                Domain::HalfLine => s.is_finite(),
                Domain::Open(e) => s < e,
                Domain::Closed(e) => s <= e,
            }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::HalfLine => write!(f, "[0, inf)"),
            Domain::Open(e) => write!(f, "[0, {e})"),
            Domain::Closed(e) => write!(f, "[0, {e}]"),
        }
    }
}

impl Nonlinearity {
    pub fn new(family: Family) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidNonlinearity(m));
        match &family {
            Family::Power { p } if !(*p > 1.0 && p.is_finite()) => return bad(format!("power needs p > 1, got {p}")),
            Family::SingularRational { gamma, sigma, delta } => {
                if !(*gamma > 1.0 && *sigma >= 1.0 && *delta > 0.0) {
                    return bad(format!("singular rational needs gamma > 1, sigma >= 1, delta > 0 (got {gamma}, {sigma}, {delta})"));
                }
            }
            Family::BoundedRational { gamma, sigma } => {
                if !(*gamma > 1.0 && *sigma > 0.0) {
                    return bad(format!("bounded rational needs gamma > 1, sigma > 0 (got {gamma}, {sigma})"));
                }
            }
            Family::Tabulated { s, g, dg } => {
                if s.len() < 2 || g.len() != s.len() || dg.len() != s.len() {
                    return bad("tabulated data needs >= 2 nodes with matching lengths".into());
                }
                if s[0] != 0.0 || s.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated nodes must start at 0 and increase".into());
                }
            }
            _ => {}
        }
        Ok(Nonlinearity { family, scale: 1.0 })
    }

    pub fn power(p: f64) -> Result<Self> {
        Self::new(Family::Power { p })
    }

    pub fn singular_rational(gamma: f64, sigma: f64, delta: f64) -> Result<Self> {
        Self::new(Family::SingularRational { gamma, sigma, delta })
    }

    pub fn bounded_rational(gamma: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::BoundedRational { gamma, sigma })
    }

    pub fn tabulated(s: Vec<f64>, g: Vec<f64>, dg: Vec<f64>) -> Result<Self> {
        Self::new(Family::Tabulated { s, g, dg })
    }

    /// Multiplies `g` by `lambda ≥ 0`.
    pub fn with_scale(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidNonlinearity(format!("scale must be >= 0, got {lambda}")));
        }
        self.scale = lambda;
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn domain(&self) -> Domain {
        match &self.family {
            Family::Power { .. } | Family::BoundedRational { .. } => Domain::HalfLine,
            Family::SingularRational { delta, .. } => Domain::Open(*delta),
            Family::Tabulated { s, .. } => Domain::Closed(*s.last().unwrap()),
        }
    }

    /// `g`, `g'` or `g''` at `s`.
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if !self.domain().contains(s) {
            return Err(Error::OutOfDomain { value: s, domain: self.domain().to_string() });
        }
        if order > 2 {
            return Err(Error::Precondition(format!("derivative order {order} > 2")));
        }
        Ok(self.scale * self.raw(s, order))
    }

    /// Unchecked evaluation for hot loops; caller guarantees `s` in domain.
    #[inline]
    pub(crate) fn eval_unchecked(&self, s: f64, order: u8) -> f64 {
        self.scale * self.raw(s, order)
    }

    fn raw(&self, s: f64, order: u8) -> f64 {
        match &self.family {
            Family::Power { p } => match order {
                0 => spow(s, *p),
                1 => p * spow(s, p - 1.0),
                _ => p * (p - 1.0) * spow(s, p - 2.0),
            },
            Family::SingularRational { gamma, sigma, delta } => rational(s, *gamma, *sigma, -spow(*delta, -*sigma), order),
            Family::BoundedRational { gamma, sigma } => rational(s, *gamma, *sigma, 1.0, order),
            Family::Tabulated { s: xs, g, dg } => {
                let i = xs.partition_point(|&x| x <= s).clamp(1, xs.len() - 1) - 1;
                let h = xs[i + 1] - xs[i];
                let t = (s - xs[i]) / h;
                let (y0, y1, m0, m1) = (g[i], g[i + 1], dg[i] * h, dg[i + 1] * h);
                match order {
                    0 => {
                        let (t2, t3) = (t * t, t * t * t);
                        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
                    }
                    1 => {
                        let t2 = t * t;
                        ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1) / h
                    }
                    _ => ((12.0 * t - 6.0) * y0 + (6.0 * t - 4.0) * m0 + (-12.0 * t + 6.0) * y1 + (6.0 * t - 2.0) * m1) / (h * h),
                }
            }
        }
    }

    /// Sampled check of the structural hypotheses.
    pub fn check_hypotheses(&self) -> HypothesisReport {
        let n = 10_000;
        let extent = match self.domain() {
            Domain::HalfLine => 10.0,
            Domain::Open(d) => d * (1.0 - 1e-4),
            Domain::Closed(e) => e,
        };
        let g0 = self.eval_unchecked(0.0, 0);
        let dg0 = self.eval_unchecked(0.0, 1);
        let g1 = g0 == 0.0;
        let g2 = dg0.abs() <= 1e-12;
        let mut g3 = true;
        let mut g3_first_failure = None;
        let mut nonneg = g0 >= 0.0;
        for i in 1..=n {
            let s = extent * i as f64 / n as f64;
            let v = self.eval_unchecked(s, 2);
            if !(v > 0.0) && g3 {
                g3 = false;
                g3_first_failure = Some(s);
            }
            nonneg &= self.eval_unchecked(s, 0) >= 0.0;
        }
        let (g4, g4_prime) = match &self.family {
            Family::Power { .. } | Family::BoundedRational { .. } => {
                // g(s)/s increasing along a geometric sweep and growing without bound.
                let mut prev = self.eval_unchecked(1.0, 0);
                let first = prev;
                let mut inc = true;
                for e in 1..=12 {
                    let s = 10f64.powi(e);
                    let r = self.eval_unchecked(s, 0) / s;
                    inc &= r > prev;
                    prev = r;
                }
                (Some(inc && prev >= 2.0 * first && first > 0.0), None)
            }
            Family::SingularRational { delta, .. } => {
                let near = self.eval_unchecked(delta * (1.0 - 1e-12), 0);
                let mid = self.eval_unchecked(delta * 0.5, 0);
                (None, Some(near > 1e6 * mid))
            }
            Family::Tabulated { .. } => (None, None),
        };
        HypothesisReport { g1, g2, g3, g3_first_failure, g4, g4_prime, nonnegative: nonneg, extent, samples: n }
    }

    /// `f(M1 ρ)/(M1 ρ)`.
    pub fn f4_ratio(&self, rho: f64, c: &AprioriConstants) -> Result<f64> {
        let x = c.m1 * rho;
        Ok(self.eval(x, 0)? / x)
    }

    /// The a-priori bound condition `f(M1 ρ)/(M1 ρ) > M2`.
    pub fn check_f4(&self, rho: f64, c: &AprioriConstants) -> Result<bool> {
        Ok(self.f4_ratio(rho, c)? > c.m2)
    }

    /// Linear continuation above `rho`.
    pub fn extend_linear(&self, rho: f64) -> Result<LinearExtension> {
        if !(rho > 0.0) {
            return Err(Error::Precondition(format!("cap must be positive, got {rho}")));
        }
        let f_rho = self.eval(rho, 0)?;
        let df_rho = self.eval(rho, 1)?;
        Ok(LinearExtension { f: self.clone(), rho, f_rho, df_rho })
    }
}

/// `g = N/D` with `N = s^γ`, `D = 1 + c s^σ`. Powers are combined before
/// multiplying so that `0 · ∞` never arises at `s = 0`.
fn rational(s: f64, g: f64, sg: f64, c: f64, order: u8) -> f64 {
    let d = 1.0 + c * spow(s, sg);
    match order {
        0 => spow(s, g) / d,
        1 => (g * spow(s, g - 1.0) + c * (g - sg) * spow(s, g + sg - 1.0)) / (d * d),
        _ => {
            // g'' = (A' D - 2 A D') / D³ with A the numerator of g'.
            let a1 = g * (g - 1.0) * spow(s, g - 2.0) + c * (g - sg) * (g + sg - 1.0) * spow(s, g + sg - 2.0);
            let a_dd = c * sg * (g * spow(s, g + sg - 2.0) + c * (g - sg) * spow(s, g + 2.0 * sg - 2.0));
            (a1 * d - 2.0 * a_dd) / (d * d * d)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `g(0) = 0`.
    pub g1: bool,
    /// `g'(0) = 0`.
    pub g2: bool,
    /// `g'' > 0` on the sampled domain minus the origin.
    pub g3: bool,
    pub g3_first_failure: Option<f64>,
    /// Superlinear growth at infinity, for families on a half-line.
    pub g4: Option<bool>,
    /// Blow-up at the right end, for the singular family.
    pub g4_prime: Option<bool>,
    pub nonnegative: bool,
    pub extent: f64,
    pub samples: usize,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.g1 && self.g2 && self.g3 && self.g4.unwrap_or(true) && self.g4_prime.unwrap_or(true)
    }
}

/// `f̂(s) = f(s)` on `[0, ρ]` and `f(ρ) + f'(ρ)(s - ρ)` above.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExtension {
    f: Nonlinearity,
    rho: f64,
    f_rho: f64,
    df_rho: f64,
}

impl LinearExtension {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn base(&self) -> &Nonlinearity {
        &self.f
    }

    /// `f̂(s)` for `s ≥ 0`.
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        if s <= self.rho {
            self.f.eval_unchecked(s.max(0.0), 0)
        } else {
            self.f_rho + self.df_rho * (s - self.rho)
        }
    }

    #[inline]
    pub fn deriv(&self, s: f64) -> f64 {
        if s <= self.rho {
            self.f.eval_unchecked(s.max(0.0), 1)
        } else {
            self.df_rho
        }
    }

    /// `f̂''`, zero above the cap.
    #[inline]
    pub fn deriv2(&self, s: f64) -> f64 {
        if s <= self.rho {
            self.f.eval_unchecked(s.max(0.0), 2)
        } else {
            0.0
        }
    }
}

/// `u'' + h(t, u) = 0` with `h(t, s) = a(t) f̂(s)` for `s > 0` and `0` otherwise.
#[derive(Debug, Clone)]
pub struct TruncatedField {
    pub weight: PeriodicWeight,
    pub ext: LinearExtension,
}

impl TruncatedField {
    pub fn new(weight: PeriodicWeight, f: &Nonlinearity, rho: f64) -> Result<Self> {
        Ok(TruncatedField { weight, ext: f.extend_linear(rho)? })
    }

    pub fn rho(&self) -> f64 {
        self.ext.rho
    }

    #[inline]
    pub fn h(&self, t: f64, piece: f64, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            self.weight.evaluate_within(t, piece) * self.ext.value(s)
        }
    }

    #[inline]
    pub fn h_s(&self, t: f64, piece: f64, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            self.weight.evaluate_within(t, piece) * self.ext.deriv(s)
        }
    }

    /// Installs a positive T-periodic center, giving the shifted field `h*`.
    pub fn truncate_field(&self, center: Arc<PeriodicOrbit>) -> Result<ShiftedField> {
        ShiftedField::new(self.clone(), center)
    }
}

impl Field for TruncatedField {
    fn period(&self) -> f64 {
        self.weight.period()
    }
    #[inline]
    fn accel(&self, t: f64, piece: f64, u: f64) -> f64 {
        -self.h(t, piece, u)
    }
    #[inline]
    fn accel_du(&self, t: f64, piece: f64, u: f64) -> f64 {
        -self.h_s(t, piece, u)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.weight.breakpoints(t0, t1)
    }
}

/// `u'' + a(t) g(u) = 0` without truncation; leaves its domain at the edge of `g`'s.
#[derive(Debug, Clone)]
pub struct RawField {
    pub weight: PeriodicWeight,
    pub f: Nonlinearity,
}

impl Field for RawField {
    fn period(&self) -> f64 {
        self.weight.period()
    }
    fn accel(&self, t: f64, piece: f64, u: f64) -> f64 {
        if !self.f.domain().contains(u) {
            return f64::NAN;
        }
        -self.weight.evaluate_within(t, piece) * self.f.eval_unchecked(u, 0)
    }
    fn accel_du(&self, t: f64, piece: f64, u: f64) -> f64 {
        if !self.f.domain().contains(u) {
            return f64::NAN;
        }
        -self.weight.evaluate_within(t, piece) * self.f.eval_unchecked(u, 1)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.weight.breakpoints(t0, t1)
    }
    fn in_domain(&self, u: f64) -> bool {
        self.f.domain().contains(u)
    }
}

/// Behaviour a field must expose to be analysed around a center solution.
pub trait CenteredField: Field {
    /// `∫₀ᵀ b` for a function `b` with `|h*(t, v)| ≤ b(t)` whenever `v ≤ 0`.
    fn bound_l1(&self) -> f64;

    /// Scale of the center, used to size the inner circle.
    fn center_scale(&self) -> f64;

    /// Coefficient of the linearization `v'' + q(t) v = 0` at `v = 0`.
    fn linearization(&self) -> HillCoefficient;
}

/// `h*(t, v) = h(t, u*(t) + v) - h(t, u*(t))` around a positive center `u*`.
#[derive(Debug, Clone)]
pub struct ShiftedField {
    base: TruncatedField,
    center: Arc<PeriodicOrbit>,
    center_max: f64,
    bound_l1: f64,
}

impl ShiftedField {
    pub fn new(base: TruncatedField, center: Arc<PeriodicOrbit>) -> Result<Self> {
        let min = center.min();
        if !(min > 0.0) {
            return Err(Error::CenterNotPositive { min });
        }
        let center_max = center.max();
        let fmax = base.ext.value(center_max);
        let tp = base.weight.period();
        let breaks = base.weight.breakpoints(0.0, tp);
        let bound_l1 = integrate_piecewise(&breaks, 0.0, tp, 64, |t, p| {
            let a = base.weight.evaluate_within(t, p);
            a.abs() * fmax + (a * base.ext.value(center.eval(t).0)).abs()
        });
        Ok(ShiftedField { base, center, center_max, bound_l1 })
    }

    pub fn base(&self) -> &TruncatedField {
        &self.base
    }

    pub fn center(&self) -> &Arc<PeriodicOrbit> {
        &self.center
    }

    pub fn center_max(&self) -> f64 {
        self.center_max
    }

    #[inline]
    pub fn h_star(&self, t: f64, piece: f64, v: f64) -> f64 {
        let us = self.center.eval(t).0;
        self.base.h(t, piece, us + v) - self.base.h(t, piece, us)
    }

    /// The dominating function `b(t)`.
    pub fn bound(&self, t: f64) -> f64 {
        let a = self.base.weight.evaluate(t);
        a.abs() * self.base.ext.value(self.center_max) + (a * self.base.ext.value(self.center.eval(t).0)).abs()
    }
}

impl Field for ShiftedField {
    fn period(&self) -> f64 {
        self.base.period()
    }
    #[inline]
    fn accel(&self, t: f64, piece: f64, v: f64) -> f64 {
        -self.h_star(t, piece, v)
    }
    #[inline]
    fn accel_du(&self, t: f64, piece: f64, v: f64) -> f64 {
        let us = self.center.eval(t).0;
        -self.base.h_s(t, piece, us + v)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.base.breakpoints(t0, t1)
    }
}

impl CenteredField for ShiftedField {
    fn bound_l1(&self) -> f64 {
        self.bound_l1
    }
    fn center_scale(&self) -> f64 {
        self.center_max
    }
    fn linearization(&self) -> HillCoefficient {
        let ext = self.base.ext.clone();
        let c = self.center.clone();
        HillCoefficient::weighted(&self.base.weight, move |t| ext.deriv(c.eval(t).0))
    }
}

impl CenteredField for crate::flow::ClampedLinear {
    fn bound_l1(&self) -> f64 {
        self.c * self.w * self.period
    }
    fn center_scale(&self) -> f64 {
        self.w
    }
    fn linearization(&self) -> HillCoefficient {
        HillCoefficient::constant(self.period, self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Tolerances;
    use crate::samples::SampleGrid;
    use proptest::prelude::*;

    #[test]
    fn spec_values() {
        let p = Nonlinearity::power(2.0).unwrap();
        assert_eq!(p.eval(3.0, 0).unwrap(), 9.0);
        assert_eq!(p.eval(0.0, 1).unwrap(), 0.0);
        let s = Nonlinearity::singular_rational(2.0, 2.0, 1.0).unwrap();
        assert!((s.eval(0.5, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(s.eval(1.0, 0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(p.eval(-0.1, 0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn hypotheses() {
        let r = Nonlinearity::power(2.0).unwrap().check_hypotheses();
        assert!(r.g1 && r.g2 && r.g3 && r.g4 == Some(true));
        let r = Nonlinearity::bounded_rational(2.0, 2.0).unwrap().check_hypotheses();
        assert!(r.g1 && r.g2 && !r.g3);
        // Closed form: g'' changes sign at s² = 1/3 for γ = σ = 2.
        let s0 = r.g3_first_failure.unwrap();
        assert!((s0 - (1.0f64 / 3.0).sqrt()).abs() < 2e-3, "{s0}");
        let r = Nonlinearity::singular_rational(2.0, 2.0, 1.0).unwrap().check_hypotheses();
        assert!(r.all_pass(), "{r:?}");
        let lin = Nonlinearity::tabulated(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(!lin.check_hypotheses().g2);
    }

    #[test]
    fn f4_examples() {
        let c = AprioriConstants { epsilon: 0.25, eta: 0.5, m1: 0.25, m2: 64.0 };
        let p = Nonlinearity::power(2.0).unwrap();
        assert!(p.check_f4(257.0, &c).unwrap());
        assert!(!p.check_f4(255.0, &c).unwrap());
        let s = Nonlinearity::singular_rational(2.0, 2.0, 1.0).unwrap();
        let r = s.f4_ratio(0.9999, &c).unwrap();
        let x = 0.25 * 0.9999;
        assert!((r - x / (1.0 - x * x)).abs() < 1e-14);
        let big = Nonlinearity::power(2.0).unwrap().with_scale(1e6).unwrap();
        assert!(big.check_f4(1.0, &c).unwrap());
    }

    #[test]
    fn extension() {
        let e = Nonlinearity::power(2.0).unwrap().extend_linear(1.0).unwrap();
        assert_eq!(e.value(2.0), 3.0);
        assert_eq!(e.value(0.5), 0.25);
        assert_eq!(e.deriv(1.0), 2.0);
        assert_eq!(e.deriv(1.0 + 1e-12), 2.0);
        let mut prev = 0.0;
        for i in 1..=1000 {
            let s = 3.0 * i as f64 / 1000.0;
            let r = e.value(s) / s;
            assert!(r >= prev);
            prev = r;
        }
    }

    fn step_field(rho: f64) -> TruncatedField {
        let w = PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)]).unwrap();
        TruncatedField::new(w, &Nonlinearity::power(2.0).unwrap(), rho).unwrap()
    }

    #[test]
    fn shifted_field_bounds() {
        let tf = step_field(300.0);
        // Any positive periodic function works as a center for the bound check.
        let f = crate::flow::FnField::new(2.0, |t, _| -(std::f64::consts::PI).powi(2) * 0.5 * (std::f64::consts::PI * t).cos(), |_, _| 0.0);
        let g = SampleGrid::new(2.0, &[1.0], 64.0);
        let orbit = Arc::new(PeriodicOrbit::from_field(&f, [1.5, 0.0], &g, Tolerances::default()).unwrap());
        assert!(orbit.min() > 0.0);
        let sf = tf.truncate_field(orbit.clone()).unwrap();
        let umax = orbit.max();
        for i in 0..100 {
            let t = 2.0 * i as f64 / 100.0 + 0.001;
            assert_eq!(sf.h_star(t, t, 0.0), 0.0);
            let us = orbit.eval(t).0;
            let deep = sf.h_star(t, t, -umax - 1.0);
            assert!((deep + tf.weight.evaluate(t) * us * us).abs() < 1e-12);
            for j in 0..100 {
                let v = -3.0 * umax * j as f64 / 99.0;
                assert!(sf.h_star(t, t, v).abs() <= sf.bound(t) + 1e-12);
            }
        }
        assert!(sf.bound_l1() > 0.0);
    }

    #[test]
    fn center_must_be_positive() {
        let f = crate::flow::FnField::new(2.0, |_, _| 0.0, |_, _| 0.0);
        let g = SampleGrid::new(2.0, &[], 16.0);
        let orbit = Arc::new(PeriodicOrbit::from_field(&f, [-0.5, 0.0], &g, Tolerances::default()).unwrap());
        assert!(matches!(step_field(1.0).truncate_field(orbit), Err(Error::CenterNotPositive { .. })));
    }

    #[test]
    fn serde_family() {
        let n: Nonlinearity = serde_json::from_str(r#"{"family":"power","p":2}"#).unwrap();
        assert_eq!(n, Nonlinearity::power(2.0).unwrap());
        let n: Nonlinearity = serde_json::from_str(r#"{"family":"bounded_rational","gamma":2,"sigma":2,"scale":10}"#).unwrap();
        assert_eq!(n.scale(), 10.0);
        assert!(serde_json::from_str::<Nonlinearity>(r#"{"family":"power","p":0.5}"#).is_err());
    }

    fn families() -> impl Strategy<Value = Nonlinearity> {
        prop_oneof![
            (1.1f64..4.0).prop_map(|p| Nonlinearity::power(p).unwrap()),
            (1.1f64..3.0, 1.0f64..3.0, 0.5f64..2.0).prop_map(|(g, s, d)| Nonlinearity::singular_rational(g, s, d).unwrap()),
            (1.1f64..3.0, 0.5f64..3.0).prop_map(|(g, s)| Nonlinearity::bounded_rational(g, s).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn derivatives_consistent(f in families(), x in 0.05f64..0.95) {
            let s = match f.domain() { Domain::Open(d) => x * d, _ => x * 5.0 };
            for order in 0..2u8 {
                let h = 1e-5 * s;
                let fd = (f.eval(s + h, order).unwrap() - f.eval(s - h, order).unwrap()) / (2.0 * h);
                let an = f.eval(s, order + 1).unwrap();
                prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "order {} at {}: {} vs {}", order, s, fd, an);
            }
        }

        #[test]
        fn f4_monotone_in_rho(p in 1.1f64..4.0, r1 in 0.1f64..100.0, dr in 0.01f64..100.0) {
            let f = Nonlinearity::power(p).unwrap();
            let c = AprioriConstants { epsilon: 0.25, eta: 0.5, m1: 0.25, m2: 64.0 };
            prop_assert!(f.f4_ratio(r1 + dr, &c).unwrap() > f.f4_ratio(r1, &c).unwrap());
        }
    }
}
