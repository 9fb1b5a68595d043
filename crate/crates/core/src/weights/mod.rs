//! Piecewise-cubic periodic weights.
//!
//! A weight is stored as a list of segments over one period. Each segment
//! carries a cubic in the local variable `x = t - start`. The effective weight
//! is `scale * (q⁺ - negative_scale * q⁻)` where `q` is the raw piecewise cubic.
//!
//! All integrals are exact: segments are cut at the sign changes of the raw
//! cubic and each part is integrated in closed form.

pub mod poly;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One segment of the raw weight, active on `[start, next start)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    /// Coefficients in `x = t - start`, lowest degree first.
    pub coeffs: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightDef {
    period: f64,
    segments: Vec<SegmentDef>,
    #[serde(default = "one")]
    scale: f64,
    #[serde(default = "one")]
    negative_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDef {
    start: f64,
    coeffs: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

/// A T-periodic piecewise-cubic weight `a(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightDef", into = "WeightDef")]
pub struct PeriodicWeight {
    period: f64,
    segments: Vec<Segment>,
    scale: f64,
    negative_scale: f64,
    /// Sign-homogeneous pieces over one period, cached at construction.
    pieces: Vec<Piece>,
}

/// Sign class of a piece of the effective weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Pos,
    Neg,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    a: f64,
    b: f64,
    seg: usize,
    sign: Sign,
}

/// One interval `[sigma, tau]` where the weight is non-negative with positive mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositiveInterval {
    /// Left end, in `[0, T)`.
    pub sigma: f64,
    /// Right end; may exceed `T` when the interval wraps around the seam.
    pub tau: f64,
    /// `∫ a⁺` over the interval.
    pub mass: f64,
}

impl PositiveInterval {
    pub fn len(&self) -> f64 {
        self.tau - self.sigma
    }

    pub fn is_empty(&self) -> bool {
        self.tau <= self.sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityDecomposition {
    pub intervals: Vec<PositiveInterval>,
}

impl PositivityDecomposition {
    pub fn count(&self) -> usize {
        self.intervals.len()
    }

    pub fn min_len(&self) -> f64 {
        self.intervals.iter().map(|i| i.len()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_len(&self) -> f64 {
        self.intervals.iter().map(|i| i.len()).fold(0.0, f64::max)
    }

    pub fn total_len(&self) -> f64 {
        self.intervals.iter().map(|i| i.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriConstants {
    pub epsilon: f64,
    pub eta: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Number of interior grid points used when ε is chosen automatically.
pub const EPSILON_GRID: usize = 256;

impl TryFrom<WeightDef> for PeriodicWeight {
    type Error = Error;

    fn try_from(d: WeightDef) -> Result<Self> {
        let mut segs = Vec::with_capacity(d.segments.len());
        for s in d.segments {
            if s.coeffs.len() > 4 {
                return Err(Error::InvalidWeight(format!(
                    "segment at {} has degree {} > 3",
                    s.start,
                    s.coeffs.len() - 1
                )));
            }
            let mut c = [0.0; 4];
            c[..s.coeffs.len()].copy_from_slice(&s.coeffs);
            segs.push(Segment { start: s.start, coeffs: c });
        }
        PeriodicWeight::new(d.period, segs)?
            .with_scale(d.scale)?
            .with_negative_scale(d.negative_scale)
    }
}

impl From<PeriodicWeight> for WeightDef {
    fn from(w: PeriodicWeight) -> Self {
        WeightDef {
            period: w.period,
            segments: w
                .segments
                .iter()
                .map(|s| SegmentDef { start: s.start, coeffs: s.coeffs.to_vec() })
                .collect(),
            scale: w.scale,
            negative_scale: w.negative_scale,
        }
    }
}

impl PeriodicWeight {
    pub fn new(period: f64, segments: Vec<Segment>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidWeight(format!("period must be positive, got {period}")));
        }
        if segments.is_empty() {
            return Err(Error::InvalidWeight("no segments".into()));
        }
        if segments[0].start != 0.0 {
            return Err(Error::InvalidWeight("first breakpoint must be 0".into()));
        }
        for w in segments.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::InvalidWeight("breakpoints must be strictly increasing".into()));
            }
        }
        if segments.last().unwrap().start >= period {
            return Err(Error::InvalidWeight("breakpoints must lie in [0, T)".into()));
        }
        if segments.iter().any(|s| s.coeffs.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidWeight("non-finite coefficient".into()));
        }
        let mut w = PeriodicWeight { period, segments, scale: 1.0, negative_scale: 1.0, pieces: Vec::new() };
        w.rebuild_pieces();
        Ok(w)
    }

    /// Piecewise-constant weight from `(start, value)` pairs.
    pub fn step(period: f64, steps: &[(f64, f64)]) -> Result<Self> {
        let segs = steps
            .iter()
            .map(|&(start, v)| Segment { start, coeffs: [v, 0.0, 0.0, 0.0] })
            .collect();
        Self::new(period, segs)
    }

    pub fn zero(period: f64) -> Result<Self> {
        Self::step(period, &[(0.0, 0.0)])
    }

    /// Periodic cubic Hermite interpolant of a smooth function on `n` uniform cells.
    ///
    /// Node derivatives come from a five-point central difference of `f`.
    pub fn interpolate(period: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWeight("interpolation needs at least one cell".into()));
        }
        let h = period / n as f64;
        let d = 1e-3 * h;
        let df = |t: f64| (f(t - 2.0 * d) - 8.0 * f(t - d) + 8.0 * f(t + d) - f(t + 2.0 * d)) / (12.0 * d);
        let mut segs = Vec::with_capacity(n);
        for i in 0..n {
            let t0 = i as f64 * h;
            let t1 = if i + 1 == n { period } else { (i + 1) as f64 * h };
            let hh = t1 - t0;
            let (y0, y1, m0, m1) = (f(t0), f(t1), df(t0), df(t1));
            let c2 = (3.0 * (y1 - y0) / hh - 2.0 * m0 - m1) / hh;
            let c3 = (2.0 * (y0 - y1) / hh + m0 + m1) / (hh * hh);
            segs.push(Segment { start: t0, coeffs: [y0, m0, c2, c3] });
        }
        Self::new(period, segs)
    }

    pub fn with_scale(mut self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidWeight(format!("scale must be >= 0, got {lambda}")));
        }
        self.scale = lambda;
        self.rebuild_pieces();
        Ok(self)
    }

    pub fn with_negative_scale(mut self, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidWeight(format!("negative scale must be >= 0, got {mu}")));
        }
        self.negative_scale = mu;
        self.rebuild_pieces();
        Ok(self)
    }

    /// The weight translated in time: `t ↦ a(t + shift)`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let t = self.period;
        let s = shift.rem_euclid(t);
        let mut segs = Vec::with_capacity(self.segments.len() + 1);
        let k = self.segment_index(s);
        let seg = self.segments[k];
        segs.push(Segment { start: 0.0, coeffs: poly::taylor_shift(&seg.coeffs, s - seg.start) });
        let n = self.segments.len();
        for j in 1..=n {
            let idx = (k + j) % n;
            let sg = self.segments[idx];
            if idx == k {
                // The segment containing `s` also fills the end of the shifted period.
                if sg.start < s {
                    segs.push(Segment { start: sg.start - s + t, coeffs: sg.coeffs });
                }
                break;
            }
            let mut start = sg.start - s;
            if start < 0.0 {
                start += t;
            }
            if start > 0.0 && start < t {
                segs.push(Segment { start, coeffs: sg.coeffs });
            }
        }
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        segs.dedup_by(|a, b| a.start == b.start);
        Self::new(t, segs)?.with_scale(self.scale)?.with_negative_scale(self.negative_scale)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn negative_scale(&self) -> f64 {
        self.negative_scale
    }

    fn segment_end(&self, i: usize) -> f64 {
        self.segments.get(i + 1).map_or(self.period, |s| s.start)
    }

    fn segment_index(&self, tm: f64) -> usize {
        match self.segments.binary_search_by(|s| s.start.total_cmp(&tm)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    fn rebuild_pieces(&mut self) {
        let mut pieces = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            let end = self.segment_end(i) - s.start;
            let mut knots = vec![0.0];
            knots.extend(poly::sign_changes(&s.coeffs, 0.0, end));
            knots.push(end);
            for w in knots.windows(2) {
                let raw = poly::eval(&s.coeffs, 0.5 * (w[0] + w[1]));
                let sign = self.classify(raw, &s.coeffs);
                pieces.push(Piece { a: s.start + w[0], b: s.start + w[1], seg: i, sign });
            }
        }
        self.pieces = pieces;
    }

    fn classify(&self, raw_mid: f64, coeffs: &[f64; 4]) -> Sign {
        if poly::is_zero(coeffs) || self.scale == 0.0 {
            Sign::Zero
        } else if raw_mid > 0.0 {
            Sign::Pos
        } else if raw_mid < 0.0 && self.negative_scale > 0.0 {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    #[inline]
    fn apply_scales(&self, raw: f64) -> f64 {
        if raw >= 0.0 {
            self.scale * raw
        } else {
            self.scale * self.negative_scale * raw
        }
    }

    /// `a(t)`.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.evaluate_within(t, t)
    }

    /// `a(t)` using the segment that contains `piece`.
    ///
    /// Integrators pass a time strictly inside the current step so that values
    /// at a jump are taken from the side being integrated.
    pub fn evaluate_within(&self, t: f64, piece: f64) -> f64 {
        let n = (piece / self.period).floor();
        let base = n * self.period;
        let mut pm = piece - base;
        if pm >= self.period {
            pm -= self.period;
        }
        let i = self.segment_index(pm);
        let seg = &self.segments[i];
        let x = t - base - seg.start;
        self.apply_scales(poly::eval(&seg.coeffs, x))
    }

    /// Positive and negative parts `(∫ a⁺, ∫ a⁻)` over `[t0, t1]`.
    pub fn integrate_parts(&self, t0: f64, t1: f64) -> (f64, f64) {
        if !(t1 > t0) {
            return (0.0, 0.0);
        }
        let tp = self.period;
        let mut pos = 0.0;
        let mut neg = 0.0;
        let n0 = (t0 / tp).floor() as i64;
        let n1 = (t1 / tp).ceil() as i64;
        for n in n0..n1 {
            let base = n as f64 * tp;
            for p in &self.pieces {
                let a = (p.a + base).max(t0);
                let b = (p.b + base).min(t1);
                if b <= a {
                    continue;
                }
                let seg = &self.segments[p.seg];
                let off = base + seg.start;
                let raw = poly::integral(&seg.coeffs, a - off, b - off);
                match p.sign {
                    Sign::Pos => pos += self.scale * raw,
                    Sign::Neg => neg -= self.scale * self.negative_scale * raw,
                    Sign::Zero => {}
                }
            }
        }
        (pos, neg)
    }

    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        let (p, n) = self.integrate_parts(t0, t1);
        p - n
    }

    /// `∫₀ᵀ a`.
    pub fn mean_value(&self) -> f64 {
        self.integral(0.0, self.period)
    }

    /// `∫₀ᵀ |a|`.
    pub fn l1_norm(&self) -> f64 {
        let (p, n) = self.integrate_parts(0.0, self.period);
        p + n
    }

    /// `sup |a|`, from piece endpoints and interior critical points.
    pub fn sup_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            let end = self.segment_end(i) - s.start;
            let c = &s.coeffs;
            let dc = [c[1], 2.0 * c[2], 3.0 * c[3], 0.0];
            let mut xs = vec![0.0, end];
            xs.extend(poly::sign_changes(&dc, 0.0, end));
            for x in xs {
                m = m.max(self.apply_scales(poly::eval(c, x)).abs());
            }
        }
        m
    }

    /// Points in `[t0, t1]` where the weight may lose smoothness: segment
    /// starts and sign changes of the raw cubic.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let tp = self.period;
        let mut out = Vec::new();
        let n0 = (t0 / tp).floor() as i64;
        let n1 = (t1 / tp).ceil() as i64;
        for n in n0..=n1 {
            let base = n as f64 * tp;
            for p in &self.pieces {
                let t = base + p.a;
                if t >= t0 && t <= t1 {
                    out.push(t);
                }
            }
        }
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup();
        out
    }

    /// Maximal closed intervals where `a ≥ 0` with positive mass, merged
    /// across the period seam.
    pub fn positivity_decomposition(&self) -> Result<PositivityDecomposition> {
        let np = self.pieces.len();
        let Some(first_neg) = self.pieces.iter().position(|p| p.sign == Sign::Neg) else {
            return Err(Error::NotAdmissible(
                "weight is non-negative everywhere (empty negative complement)".into(),
            ));
        };
        let tp = self.period;
        // Walk once around the circle starting at a negative piece.
        let mut runs: Vec<Vec<(f64, f64, Sign)>> = Vec::new();
        let mut cur: Vec<(f64, f64, Sign)> = Vec::new();
        for j in 1..=np {
            let idx = (first_neg + j) % np;
            let p = self.pieces[idx];
            let wrap = if first_neg + j >= np { tp } else { 0.0 };
            if p.sign == Sign::Neg {
                if !cur.is_empty() {
                    runs.push(std::mem::take(&mut cur));
                }
            } else {
                cur.push((p.a + wrap, p.b + wrap, p.sign));
            }
        }
        if !cur.is_empty() {
            runs.push(cur);
        }
        let mut intervals = Vec::new();
        for run in runs {
            let Some(lo) = run.iter().position(|p| p.2 == Sign::Pos) else { continue };
            let hi = run.iter().rposition(|p| p.2 == Sign::Pos).unwrap();
            let mut sigma = run[lo].0;
            let mut tau = run[hi].1;
            if sigma >= tp {
                sigma -= tp;
                tau -= tp;
            }
            let (mass, _) = self.integrate_parts(sigma, tau);
            intervals.push(PositiveInterval { sigma, tau, mass });
        }
        if intervals.is_empty() {
            return Err(Error::NotAdmissible("weight has no positive part".into()));
        }
        intervals.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
        Ok(PositivityDecomposition { intervals })
    }

    /// A-priori constants for a given ε, or the grid optimum of `M2` when `None`.
    pub fn apriori_constants(&self, epsilon: Option<f64>) -> Result<AprioriConstants> {
        let dec = self.positivity_decomposition()?;
        match epsilon {
            Some(e) => self.constants_at(&dec, e),
            None => {
                let half = dec.min_len() / 2.0;
                let mut best: Option<AprioriConstants> = None;
                for j in 1..=EPSILON_GRID {
                    let e = j as f64 * half / (EPSILON_GRID + 1) as f64;
                    if let Ok(c) = self.constants_at(&dec, e) {
                        if best.is_none_or(|b| c.m2 < b.m2) {
                            best = Some(c);
                        }
                    }
                }
                best.ok_or_else(|| Error::InvalidEpsilon {
                    epsilon: half,
                    reason: "no grid point gives positive eta".into(),
                })
            }
        }
    }

    fn constants_at(&self, dec: &PositivityDecomposition, eps: f64) -> Result<AprioriConstants> {
        let half = dec.min_len() / 2.0;
        if !(eps > 0.0 && eps < half) {
            return Err(Error::InvalidEpsilon {
                epsilon: eps,
                reason: format!("must lie in (0, {half})"),
            });
        }
        let eta = dec
            .intervals
            .iter()
            .map(|i| self.integrate_parts(i.sigma + eps, i.tau - eps).0)
            .fold(f64::INFINITY, f64::min);
        if !(eta > 0.0) {
            return Err(Error::InvalidEpsilon { epsilon: eps, reason: "eta vanishes".into() });
        }
        let m1 = eps / dec.max_len();
        let m2 = 2.0 / (m1 * eps * eta);
        Ok(AprioriConstants { epsilon: eps, eta, m1, m2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step() -> PeriodicWeight {
        PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)]).unwrap()
    }

    #[test]
    fn evaluate_step() {
        let w = step();
        assert_eq!(w.evaluate(0.5), 1.0);
        assert_eq!(w.evaluate(3.5), -2.0);
        assert_eq!(w.clone().with_negative_scale(3.0).unwrap().evaluate(1.5), -6.0);
    }

    #[test]
    fn evaluate_within_picks_side() {
        let w = step();
        assert_eq!(w.evaluate_within(1.0, 0.9), 1.0);
        assert_eq!(w.evaluate_within(1.0, 1.1), -2.0);
        assert_eq!(w.evaluate_within(2.0, 1.9), -2.0);
        assert_eq!(w.evaluate_within(2.0, 2.1), 1.0);
    }

    #[test]
    fn mean_values() {
        assert_eq!(step().mean_value(), -1.0);
        let m = step().with_negative_scale(0.4).unwrap().mean_value();
        assert!((m - 0.2).abs() < 1e-15);
        let s = PeriodicWeight::interpolate(1.0, 64, |t| (2.0 * std::f64::consts::PI * t).sin()).unwrap();
        assert!(s.mean_value().abs() < 1e-6);
    }

    #[test]
    fn l1_norms() {
        assert_eq!(step().l1_norm(), 3.0);
        assert_eq!(PeriodicWeight::zero(1.0).unwrap().l1_norm(), 0.0);
        assert_eq!(step().with_scale(2.0).unwrap().l1_norm(), 6.0);
    }

    #[test]
    fn decomposition_step() {
        let d = step().positivity_decomposition().unwrap();
        assert_eq!(d.count(), 1);
        assert_eq!((d.intervals[0].sigma, d.intervals[0].tau), (0.0, 1.0));
    }

    #[test]
    fn decomposition_shifted_sine() {
        let tau = 2.0 * std::f64::consts::PI;
        let w = PeriodicWeight::interpolate(1.0, 256, |t| (tau * t).sin() - 0.2).unwrap();
        let d = w.positivity_decomposition().unwrap();
        assert_eq!(d.count(), 1);
        let s0 = 0.2f64.asin() / tau;
        let t0 = (std::f64::consts::PI - 0.2f64.asin()) / tau;
        assert!((d.intervals[0].sigma - s0).abs() < 1e-6);
        assert!((d.intervals[0].tau - t0).abs() < 1e-6);
    }

    #[test]
    fn decomposition_wraps_seam() {
        let w = PeriodicWeight::step(3.0, &[(0.0, 1.0), (1.0, -1.0), (2.0, 1.0)]).unwrap();
        let d = w.positivity_decomposition().unwrap();
        assert_eq!(d.count(), 1);
        assert_eq!((d.intervals[0].sigma, d.intervals[0].tau), (2.0, 4.0));
    }

    #[test]
    fn decomposition_two_bumps() {
        let w = PeriodicWeight::step(4.0, &[(0.0, 1.0), (1.0, -1.0), (2.0, 1.0), (3.0, -1.0)]).unwrap();
        assert_eq!(w.positivity_decomposition().unwrap().count(), 2);
    }

    #[test]
    fn decomposition_rejects_nonnegative() {
        let w = PeriodicWeight::step(1.0, &[(0.0, 1.0)]).unwrap();
        assert!(matches!(w.positivity_decomposition(), Err(Error::NotAdmissible(_))));
        let z = step().with_negative_scale(0.0).unwrap();
        assert!(matches!(z.positivity_decomposition(), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn zero_mass_run_is_dropped() {
        let w = PeriodicWeight::step(4.0, &[(0.0, 1.0), (1.0, -1.0), (2.0, 0.0), (3.0, -1.0)]).unwrap();
        let d = w.positivity_decomposition().unwrap();
        assert_eq!(d.count(), 1);
    }

    #[test]
    fn constants_step() {
        let c = step().apriori_constants(Some(0.25)).unwrap();
        assert_eq!((c.eta, c.m1, c.m2), (0.5, 0.25, 64.0));
        let c = step().apriori_constants(Some(0.49)).unwrap();
        assert!((c.eta - 0.02).abs() < 1e-12);
        assert_eq!(c.m1, 0.49);
        assert!((c.m2 - 2.0 / (0.49 * 0.49 * 0.02)).abs() < 1e-9);
        let c = step().apriori_constants(None).unwrap();
        assert!(c.m2 <= 64.0);
        assert!(matches!(step().apriori_constants(Some(0.5)), Err(Error::InvalidEpsilon { .. })));
        assert!(matches!(step().apriori_constants(Some(0.0)), Err(Error::InvalidEpsilon { .. })));
    }

    #[test]
    fn serde_roundtrip_pads_coefficients() {
        let j = r#"{"period":2,"segments":[{"start":0,"coeffs":[1]},{"start":1,"coeffs":[-2]}]}"#;
        let w: PeriodicWeight = serde_json::from_str(j).unwrap();
        assert_eq!(w, step());
        let back: PeriodicWeight = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<PeriodicWeight>(r#"{"segments":[]}"#).is_err());
    }

    fn arb_weight() -> impl Strategy<Value = PeriodicWeight> {
        (
            0.5f64..4.0,
            prop::collection::vec((0.05f64..1.0, prop::array::uniform4(-3.0f64..3.0)), 1..6),
            0.1f64..3.0,
            0.0f64..3.0,
        )
            .prop_map(|(t, raw, lam, mu)| {
                let total: f64 = raw.iter().map(|r| r.0).sum();
                let mut start = 0.0;
                let mut segs = Vec::new();
                for (len, c) in raw {
                    segs.push(Segment { start, coeffs: c });
                    start += len / total * t;
                }
                PeriodicWeight::new(t, segs).unwrap().with_scale(lam).unwrap().with_negative_scale(mu).unwrap()
            })
    }

    fn sign_alternating() -> impl Strategy<Value = PeriodicWeight> {
        (0.5f64..3.0, 0.2f64..0.8, 0.1f64..3.0, 0.1f64..3.0, -1.0f64..1.0).prop_map(|(t, frac, p, n, slope)| {
            PeriodicWeight::new(
                t,
                vec![
                    Segment { start: 0.0, coeffs: [p, slope * 0.1, 0.0, 0.0] },
                    Segment { start: frac * t, coeffs: [-n, 0.0, 0.0, 0.0] },
                ],
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn periodic_exactly(w in arb_weight(), k in -4096i32..4096, t in -10.0f64..10.0) {
            // Dyadic times make t + T exact, so the values must agree bit for bit.
            let w = PeriodicWeight::new(2.0, w.segments().iter().map(|s| Segment { start: s.start / w.period() * 2.0, coeffs: s.coeffs }).collect()).unwrap();
            let td = k as f64 / 1024.0;
            prop_assert_eq!(w.evaluate(td), w.evaluate(td + 2.0));
            // Arbitrary times differ only by the rounding of t + T.
            let x = w.evaluate(t + 2.0);
            prop_assert!((w.evaluate(t) - x).abs() <= 1e-9 * (1.0 + x.abs()));
        }

        #[test]
        fn decomposition_partitions_period(w in arb_weight()) {
            if let Ok(d) = w.positivity_decomposition() {
                let (pos_total, _) = w.integrate_parts(0.0, w.period());
                let inside: f64 = d.intervals.iter().map(|i| i.mass).sum();
                prop_assert!((pos_total - inside).abs() <= 1e-10 * (1.0 + pos_total));
                prop_assert!(d.total_len() <= w.period() + 1e-12);
                for i in &d.intervals {
                    let (_, neg) = w.integrate_parts(i.sigma, i.tau);
                    prop_assert!(neg <= 1e-10);
                }
            }
        }

        #[test]
        fn constants_identity(w in sign_alternating(), s in 0.0f64..5.0) {
            let c = w.apriori_constants(None).unwrap();
            prop_assert!(c.m1 > 0.0 && c.m1 < 1.0);
            prop_assert!((c.m2 * c.m1 * c.epsilon * c.eta - 2.0).abs() < 1e-12);
            let ws = w.shifted(s).unwrap();
            let cs = ws.apriori_constants(Some(c.epsilon)).unwrap();
            prop_assert!((cs.m2 - c.m2).abs() <= 1e-9 * c.m2);
        }

        #[test]
        fn homogeneous_in_scale(w in arb_weight(), lam in 0.0f64..5.0) {
            let base = w.clone().with_scale(1.0).unwrap();
            let scaled = w.with_scale(lam).unwrap();
            prop_assert!((scaled.mean_value() - lam * base.mean_value()).abs() <= 1e-10 * (1.0 + base.l1_norm() * lam));
            prop_assert!((scaled.l1_norm() - lam * base.l1_norm()).abs() <= 1e-10 * (1.0 + base.l1_norm() * lam));
        }
    }
}
