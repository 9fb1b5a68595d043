//! Second-order scalar flows `u'' = F(t, u)` with piecewise-smooth time
//! dependence: trajectories, Poincaré maps, zero counting and winding.

pub mod dopri;
pub mod fields;
pub mod winding;
pub mod zeros;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use dopri::{DenseStep, OdeSystem, Stats, Tolerances};
pub use fields::{ClampedLinear, FnField, LinearField};
pub use winding::{quadrant_arcs, winding, winding_trace, WindingResult, WindingTrace};
pub use zeros::{zero_count, ZeroCount};

/// Acceleration field of `u'' + h(t, u) = 0`, i.e. `accel = -h`.
pub trait Field: Send + Sync {
    fn period(&self) -> f64;

    /// `u''` at `(t, u)`, evaluated on the smooth piece containing `piece`.
    fn accel(&self, t: f64, piece: f64, u: f64) -> f64;

    /// `∂u''/∂u`.
    fn accel_du(&self, t: f64, piece: f64, u: f64) -> f64;

    /// Times in `[t0, t1]` where the field may jump in `t`.
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64>;

    fn in_domain(&self, _u: f64) -> bool {
        true
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn period(&self) -> f64 {
        (**self).period()
    }
    fn accel(&self, t: f64, piece: f64, u: f64) -> f64 {
        (**self).accel(t, piece, u)
    }
    fn accel_du(&self, t: f64, piece: f64, u: f64) -> f64 {
        (**self).accel_du(t, piece, u)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        (**self).breakpoints(t0, t1)
    }
    fn in_domain(&self, u: f64) -> bool {
        (**self).in_domain(u)
    }
}

impl<F: Field + ?Sized> Field for std::sync::Arc<F> {
    fn period(&self) -> f64 {
        (**self).period()
    }
    fn accel(&self, t: f64, piece: f64, u: f64) -> f64 {
        (**self).accel(t, piece, u)
    }
    fn accel_du(&self, t: f64, piece: f64, u: f64) -> f64 {
        (**self).accel_du(t, piece, u)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        (**self).breakpoints(t0, t1)
    }
    fn in_domain(&self, u: f64) -> bool {
        (**self).in_domain(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub t: f64,
    pub u: f64,
    pub du: f64,
}

impl PlanarState {
    pub fn new(t: f64, u: f64, du: f64) -> Self {
        PlanarState { t, u, du }
    }

    pub fn point(&self) -> [f64; 2] {
        [self.u, self.du]
    }
}

pub(crate) struct Planar<'a, F: ?Sized>(pub &'a F);

impl<F: Field + ?Sized> OdeSystem<2> for Planar<'_, F> {
    #[inline]
    fn rhs(&self, t: f64, piece: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], self.0.accel(t, piece, y[0])]
    }
    fn in_domain(&self, y: &[f64; 2]) -> bool {
        self.0.in_domain(y[0])
    }
}

/// State plus the fundamental matrix, stored column by column.
struct Variational<'a, F: ?Sized>(&'a F);

impl<F: Field + ?Sized> OdeSystem<6> for Variational<'_, F> {
    #[inline]
    fn rhs(&self, t: f64, piece: f64, y: &[f64; 6]) -> [f64; 6] {
        let j = self.0.accel_du(t, piece, y[0]);
        [y[1], self.0.accel(t, piece, y[0]), y[3], j * y[2], y[5], j * y[4]]
    }
    fn in_domain(&self, y: &[f64; 6]) -> bool {
        self.0.in_domain(y[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// The trajectory passed a breakpoint of the field.
    Breakpoint,
    /// Sign change of `u`.
    Zero,
    /// Sign change of `u - ref`.
    RefCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub u: f64,
    pub du: f64,
}

/// Dense solution of a planar flow on `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    steps: Vec<DenseStep<2>>,
    events: Vec<Event>,
    stats: Stats,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.t0)
    }

    pub fn t1(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t1)
    }

    pub fn steps(&self) -> &[DenseStep<2>] {
        &self.steps
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn start(&self) -> PlanarState {
        let y = self.steps[0].y0();
        PlanarState::new(self.t0(), y[0], y[1])
    }

    pub fn end(&self) -> PlanarState {
        let y = self.steps.last().unwrap().y1();
        PlanarState::new(self.t1(), y[0], y[1])
    }

    fn step_index(&self, t: f64) -> usize {
        let i = self.steps.partition_point(|s| s.t1 < t);
        i.min(self.steps.len() - 1)
    }

    /// Interpolated state; `t` is clamped to the covered interval.
    pub fn eval(&self, t: f64) -> PlanarState {
        let t = t.clamp(self.t0(), self.t1());
        let y = self.steps[self.step_index(t)].eval(t);
        PlanarState::new(t, y[0], y[1])
    }

    /// Node times: every step boundary plus `per_step - 1` interior points.
    pub fn fine_times(&self, per_step: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps.len() * per_step + 1);
        for s in &self.steps {
            for j in 0..per_step {
                out.push(s.t0 + (s.t1 - s.t0) * j as f64 / per_step as f64);
            }
        }
        out.push(self.t1());
        out
    }

    /// `(min u, max u)` over step boundaries and interior samples.
    pub fn u_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.steps {
            for j in 0..8 {
                let t = s.t0 + (s.t1 - s.t0) * j as f64 / 8.0;
                let u = s.eval(t)[0];
                lo = lo.min(u);
                hi = hi.max(u);
            }
        }
        let e = self.end().u;
        (lo.min(e), hi.max(e))
    }

    /// Writes `t,u,du` rows every `dt`, followed by event rows prefixed with `#`.
    pub fn write_csv<W: Write>(&self, out: W, dt: f64) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["t", "u", "du"]).map_err(csv_err)?;
        let (a, b) = (self.t0(), self.t1());
        let n = ((b - a) / dt).ceil().max(1.0) as usize;
        for i in 0..=n {
            let t = if i == n { b } else { a + i as f64 * dt };
            let s = self.eval(t);
            w.write_record([fmt(s.t), fmt(s.u), fmt(s.du)]).map_err(csv_err)?;
        }
        for e in &self.events {
            let kind = serde_json::to_value(e.kind)?.as_str().unwrap_or("").to_string();
            w.write_record(["# event".to_string(), kind, fmt(e.t), fmt(e.u), fmt(e.du)]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Integrates a planar flow from `s0` to `t1`, recording breakpoint passages
/// and sign changes of `u`.
pub fn integrate<F: Field + ?Sized>(field: &F, s0: PlanarState, t1: f64, tol: Tolerances) -> Result<Trajectory> {
    integrate_with_stops(field, s0, t1, &[], tol)
}

/// As [`integrate`] with additional mandatory stops.
pub fn integrate_with_stops<F: Field + ?Sized>(
    field: &F,
    s0: PlanarState,
    t1: f64,
    extra_stops: &[f64],
    tol: Tolerances,
) -> Result<Trajectory> {
    if !(t1 > s0.t) {
        return Err(Error::Precondition(format!("t1 = {t1} must exceed t0 = {}", s0.t)));
    }
    let bps = field.breakpoints(s0.t, t1);
    let mut stops = bps.clone();
    stops.extend_from_slice(extra_stops);
    let mut steps = Vec::new();
    let (_, stats) = dopri::integrate(&Planar(field), s0.t, s0.point(), t1, &stops, tol, |s| {
        steps.push(*s);
        Ok(())
    })?;
    let mut traj = Trajectory { steps, events: Vec::new(), stats };
    let mut events: Vec<Event> = bps
        .iter()
        .filter(|&&b| b > s0.t && b < t1)
        .map(|&b| {
            let s = traj.eval(b);
            Event { t: b, kind: EventKind::Breakpoint, u: s.u, du: s.du }
        })
        .collect();
    let times = traj.fine_times(8);
    let zs = zeros::sign_changes(&times, |t| traj.eval(t).u, 0.0, false)?;
    events.extend(zs.zeros.iter().map(|&t| {
        let s = traj.eval(t);
        Event { t, kind: EventKind::Zero, u: s.u, du: s.du }
    }));
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    traj.events = events;
    Ok(traj)
}

impl Trajectory {
    /// Adds sign changes of `u - reference` to the event list.
    pub fn record_crossings(&mut self, reference: &dyn Fn(f64) -> f64) -> Result<()> {
        let times = self.fine_times(8);
        let zs = zeros::sign_changes(&times, |t| self.eval(t).u - reference(t), 0.0, false)?;
        for t in zs.zeros {
            let s = self.eval(t);
            self.events.push(Event { t, kind: EventKind::RefCrossing, u: s.u, du: s.du });
        }
        self.events.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(())
    }
}

/// State after `k` periods starting from `x` at time 0.
pub fn poincare_map<F: Field + ?Sized>(field: &F, x: [f64; 2], k: usize, tol: Tolerances) -> Result<[f64; 2]> {
    let t1 = k as f64 * field.period();
    let stops = field.breakpoints(0.0, t1);
    let (y, _) = dopri::integrate(&Planar(field), 0.0, x, t1, &stops, tol, |_| Ok(()))?;
    Ok(y)
}

/// Image under the `k`-th iterate and its Jacobian `[[∂u/∂u0, ∂u/∂du0], [∂du/∂u0, ∂du/∂du0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapWithJacobian {
    pub image: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub stats: Stats,
}

impl MapWithJacobian {
    pub fn det(&self) -> f64 {
        let j = &self.jacobian;
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }
}

pub fn poincare_with_jacobian<F: Field + ?Sized>(
    field: &F,
    x: [f64; 2],
    k: usize,
    tol: Tolerances,
) -> Result<MapWithJacobian> {
    flow_with_jacobian(field, x, 0.0, k as f64 * field.period(), tol)
}

/// Flow map from `t0` to `t1` with its Jacobian.
pub fn flow_with_jacobian<F: Field + ?Sized>(
    field: &F,
    x: [f64; 2],
    t0: f64,
    t1: f64,
    tol: Tolerances,
) -> Result<MapWithJacobian> {
    let stops = field.breakpoints(t0, t1);
    let y0 = [x[0], x[1], 1.0, 0.0, 0.0, 1.0];
    let (y, stats) = dopri::integrate(&Variational(field), t0, y0, t1, &stops, tol, |_| Ok(()))?;
    Ok(MapWithJacobian { image: [y[0], y[1]], jacobian: [[y[2], y[4]], [y[3], y[5]]], stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hill::HillCoefficient;
    use std::f64::consts::PI;

    fn osc(c: f64, period: f64) -> LinearField {
        LinearField::new(HillCoefficient::constant(period, c))
    }

    #[test]
    fn harmonic_oscillator_returns() {
        let tr = integrate(&osc(1.0, 2.0 * PI), PlanarState::new(0.0, 1.0, 0.0), 2.0 * PI, Tolerances::default()).unwrap();
        let e = tr.end();
        assert!((e.u - 1.0).abs() < 1e-8 && e.du.abs() < 1e-8);
        let zeros: Vec<_> = tr.events().iter().filter(|e| e.kind == EventKind::Zero).collect();
        assert_eq!(zeros.len(), 2);
        assert!((zeros[0].t - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn free_motion() {
        let tr = integrate(&osc(0.0, 1.0), PlanarState::new(0.0, 1.0, 1.0), 2.0, Tolerances::default()).unwrap();
        let e = tr.end();
        assert!((e.u - 3.0).abs() < 1e-12 && (e.du - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oscillator_map_is_identity() {
        let f = osc(1.0, 2.0 * PI);
        for x in [[1.0, 0.0], [-0.3, 2.0], [5.0, -5.0]] {
            let y = poincare_map(&f, x, 1, Tolerances::default()).unwrap();
            assert!((y[0] - x[0]).abs() < 1e-8 && (y[1] - x[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn jacobian_matches_differences_and_liouville() {
        let q = HillCoefficient::from_fn(1.0, vec![], |t, _| 3.0 + (2.0 * PI * t).sin());
        let f = LinearField::new(q);
        let m = poincare_with_jacobian(&f, [0.3, -0.2], 2, Tolerances::default()).unwrap();
        assert!((m.det() - 1.0).abs() < 1e-9);
        let h = 1e-6;
        let p = poincare_map(&f, [0.3 + h, -0.2], 2, Tolerances::default()).unwrap();
        assert!(((p[0] - m.image[0]) / h - m.jacobian[0][0]).abs() < 1e-4);
    }

    #[test]
    fn csv_has_header_and_events() {
        let tr = integrate(&osc(1.0, 2.0 * PI), PlanarState::new(0.0, 1.0, 0.0), PI, Tolerances::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, 0.5).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,u,du\n"));
        assert!(s.contains("# event,zero,"));
    }
}
