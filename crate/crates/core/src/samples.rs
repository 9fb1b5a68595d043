//! Sampled periodic solutions and their continuous interpolants.
//!
//! A [`SampleGrid`] places uniform panels between consecutive breakpoints of
//! the weight, each with an even number of intervals, and repeats the layout
//! over `k` periods. Composite Simpson is then exact up to `O(h⁴)` on every
//! smooth piece, and a shift by `lT` is an index offset.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, dopri, zeros, Field, Tolerances, ZeroCount};

/// Default number of intervals per unit of time.
pub const DEFAULT_DENSITY: f64 = 512.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    period: f64,
    periods: usize,
    /// Node times in `[0, T)`.
    base: Vec<f64>,
    /// Panel start indices into `base`, followed by `base.len()`.
    panels: Vec<usize>,
}

impl SampleGrid {
    /// One-period grid with panels between `breaks` (0 is always included)
    /// and roughly `density` intervals per unit time.
    pub fn new(period: f64, breaks: &[f64], density: f64) -> Self {
        let mut bs: Vec<f64> = std::iter::once(0.0)
            .chain(breaks.iter().map(|b| b.rem_euclid(period)))
            .filter(|&b| b < period)
            .collect();
        bs.sort_by(|a, b| a.total_cmp(b));
        bs.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * period);
        let mut base = Vec::new();
        let mut panels = Vec::new();
        for (i, &b0) in bs.iter().enumerate() {
            let b1 = bs.get(i + 1).copied().unwrap_or(period);
            let len = b1 - b0;
            let mut m = ((len * density).ceil() as usize).max(2);
            if m % 2 == 1 {
                m += 1;
            }
            panels.push(base.len());
            for j in 0..m {
                base.push(b0 + len * j as f64 / m as f64);
            }
        }
        panels.push(base.len());
        SampleGrid { period, periods: 1, base, panels }
    }

    pub fn with_periods(&self, k: usize) -> Self {
        SampleGrid { periods: k.max(1), ..self.clone() }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn per_period(&self) -> usize {
        self.base.len()
    }

    /// Number of nodes, including the closing node at `kT`.
    pub fn len(&self) -> usize {
        self.periods * self.base.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        let n = self.base.len();
        let (l, j) = (i / n, i % n);
        l as f64 * self.period + self.base[j]
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Node index ranges `(first, last)` of every smooth panel over the window.
    pub fn panel_ranges(&self) -> Vec<(usize, usize)> {
        let n = self.base.len();
        (0..self.periods)
            .flat_map(|l| self.panels.windows(2).map(move |p| (l * n + p[0], l * n + p[1])))
            .collect()
    }

    /// Composite Simpson over all panels of all periods.
    ///
    /// `f(i, t, piece)` receives the node index, its time and the panel
    /// midpoint, so integrands with jumps are evaluated on the correct side.
    pub fn integrate(&self, f: impl Fn(usize, f64, f64) -> f64) -> f64 {
        let n = self.base.len();
        let mut total = 0.0;
        for l in 0..self.periods {
            let off = l * n;
            let shift = l as f64 * self.period;
            for p in self.panels.windows(2) {
                let (s, e) = (p[0], p[1]);
                let m = e - s;
                let t_start = shift + self.base[s];
                let t_end = if e == n { shift + self.period } else { shift + self.base[e] };
                let mid = 0.5 * (t_start + t_end);
                let h = (t_end - t_start) / m as f64;
                let mut acc = 0.0;
                for j in 0..=m {
                    let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                    let idx = off + s + j;
                    let t = if j == m { t_end } else { self.time(idx) };
                    acc += w * f(idx, t, mid);
                }
                total += acc * h / 3.0;
            }
        }
        total
    }
}

/// Values of `u` and `u'` on a grid over `[0, kT]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSolution {
    grid: Arc<SampleGrid>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

impl SampledSolution {
    pub fn new(grid: Arc<SampleGrid>, u: Vec<f64>, du: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() || du.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "sample length {} does not match grid length {}",
                u.len(),
                grid.len()
            )));
        }
        Ok(SampledSolution { grid, u, du })
    }

    pub fn from_fn(grid: Arc<SampleGrid>, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let (u, du) = grid.times().into_iter().map(f).unzip();
        SampledSolution { grid, u, du }
    }

    /// Samples a trajectory covering the grid window.
    pub fn from_trajectory(grid: Arc<SampleGrid>, traj: &flow::Trajectory) -> Self {
        Self::from_fn(grid, |t| {
            let s = traj.eval(t);
            (s.u, s.du)
        })
    }

    pub fn grid(&self) -> &Arc<SampleGrid> {
        &self.grid
    }

    pub fn periods(&self) -> usize {
        self.grid.periods()
    }

    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn cyclic_len(&self) -> usize {
        self.grid.len() - 1
    }

    /// `t ↦ u(t + lT)` on the same grid (indices wrap modulo `kT`).
    pub fn shifted(&self, l: usize) -> Self {
        let n = self.cyclic_len();
        let off = (l * self.grid.per_period()) % n;
        let pick = |v: &Vec<f64>| {
            let mut out: Vec<f64> = (0..n).map(|i| v[(i + off) % n]).collect();
            out.push(out[0]);
            out
        };
        SampledSolution { grid: self.grid.clone(), u: pick(&self.u), du: pick(&self.du) }
    }

    /// `max_t |u(t) - other(t + lT)|` over the cyclic window.
    pub fn sup_distance(&self, other: &SampledSolution, l: usize) -> f64 {
        let n = self.cyclic_len();
        let off = (l * self.grid.per_period()) % n;
        (0..n).fold(0.0, |m, i| m.max((self.u[i] - other.u[(i + off) % n]).abs()))
    }

    /// Repeats a one-period solution over `k` periods.
    pub fn tiled(&self, k: usize) -> Self {
        let grid = Arc::new(self.grid.with_periods(k * self.periods()));
        let n = self.cyclic_len();
        let idx = |i: usize| if i == grid.len() - 1 { n } else { i % n };
        let u = (0..grid.len()).map(|i| self.u[idx(i)]).collect();
        let du = (0..grid.len()).map(|i| self.du[idx(i)]).collect();
        SampledSolution { grid, u, du }
    }

    /// Cubic Hermite interpolant between nodes.
    pub fn eval(&self, t: f64) -> f64 {
        let g = &self.grid;
        let (mut lo, mut hi) = (0usize, g.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if g.time(mid) <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hermite3(g.time(lo), g.time(hi), self.u[lo], self.u[hi], self.du[lo], self.du[hi], t)
    }

    /// Sign changes of `u - reference` over the cyclic window.
    pub fn zero_count(&self, reference: &SampledSolution) -> Result<ZeroCount> {
        if reference.grid.len() != self.grid.len() {
            return Err(Error::Precondition("reference grid mismatch".into()));
        }
        let times = self.grid.times();
        let d: Vec<f64> = self.u.iter().zip(&reference.u).map(|(a, b)| a - b).collect();
        let dd: Vec<f64> = self.du.iter().zip(&reference.du).map(|(a, b)| a - b).collect();
        let interp = |t: f64| {
            let i = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1) - 1;
            hermite3(times[i], times[i + 1], d[i], d[i + 1], dd[i], dd[i + 1], t)
        };
        zeros::sign_changes(&times, interp, zeros::ZERO_ATOL, true)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "u", "du"]).map_err(flow::csv_err)?;
        for (i, t) in self.grid.times().into_iter().enumerate() {
            w.write_record([flow::fmt(t), flow::fmt(self.u[i]), flow::fmt(self.du[i])]).map_err(flow::csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn hermite3(t0: f64, t1: f64, y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * m1
}

/// A T-periodic solution stored as a C² quintic Hermite spline.
///
/// Nodes carry `u`, `u'` and one-sided `u''` taken from the field, so the
/// spline follows jumps of `u''` at weight breakpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    period: f64,
    t: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    /// `u''` at the left end of interval `i`, from the right.
    dd_right: Vec<f64>,
    /// `u''` at the right end of interval `i`, from the left.
    dd_left: Vec<f64>,
}

impl PeriodicOrbit {
    /// Integrates `field` from `x0` over one period, stopping at every grid node.
    pub fn from_field<F: Field + ?Sized>(field: &F, x0: [f64; 2], grid: &SampleGrid, tol: Tolerances) -> Result<Self> {
        let period = field.period();
        let g1 = grid.with_periods(1);
        let t = g1.times();
        let mut u = vec![x0[0]];
        let mut du = vec![x0[1]];
        let mut next = 1;
        let stops = {
            let mut s = field.breakpoints(0.0, period);
            s.extend_from_slice(&t);
            s
        };
        dopri::integrate(&flow::Planar(field), 0.0, x0, period, &stops, tol, |s| {
            while next < t.len() && s.t1 >= t[next] {
                let y = s.eval(t[next]);
                u.push(y[0]);
                du.push(y[1]);
                next += 1;
            }
            Ok(())
        })?;
        let n = t.len() - 1;
        let mut dd_right = Vec::with_capacity(n);
        let mut dd_left = Vec::with_capacity(n);
        for i in 0..n {
            let mid = 0.5 * (t[i] + t[i + 1]);
            dd_right.push(field.accel(t[i], mid, u[i]));
            dd_left.push(field.accel(t[i + 1], mid, u[i + 1]));
        }
        Ok(PeriodicOrbit { period, t, u, du, dd_right, dd_left })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn initial_state(&self) -> [f64; 2] {
        [self.u[0], self.du[0]]
    }

    /// Closing defect `|x(T) - x(0)|∞` of the stored nodes.
    pub fn closure_defect(&self) -> f64 {
        let n = self.u.len() - 1;
        (self.u[n] - self.u[0]).abs().max((self.du[n] - self.du[0]).abs())
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(u(t), u'(t))` for any real `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let tm = t.rem_euclid(self.period);
        let i = self.t.partition_point(|&x| x <= tm).clamp(1, self.t.len() - 1) - 1;
        let (a, b) = (self.t[i], self.t[i + 1]);
        let h = b - a;
        let s = (tm - a) / h;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let hv = [
            1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
            s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5,
            0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5),
            10.0 * s3 - 15.0 * s4 + 6.0 * s5,
            -4.0 * s3 + 7.0 * s4 - 3.0 * s5,
            0.5 * (s3 - 2.0 * s4 + s5),
        ];
        let hd = [
            -30.0 * s2 + 60.0 * s3 - 30.0 * s4,
            1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
            0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4),
            30.0 * s2 - 60.0 * s3 + 30.0 * s4,
            -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
            0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4),
        ];
        let c = [self.u[i], h * self.du[i], h * h * self.dd_right[i], self.u[i + 1], h * self.du[i + 1], h * h * self.dd_left[i]];
        let mut u = 0.0;
        let mut du = 0.0;
        for j in 0..6 {
            u += hv[j] * c[j];
            du += hd[j] * c[j];
        }
        (u, du / h)
    }

    /// Samples on a grid (of any number of periods).
    pub fn sample(&self, grid: Arc<SampleGrid>) -> SampledSolution {
        SampledSolution::from_fn(grid, |t| self.eval(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::LinearField;
    use crate::hill::HillCoefficient;
    use std::f64::consts::PI;

    #[test]
    fn grid_panels_are_even_and_hit_breaks() {
        let g = SampleGrid::new(2.0, &[1.0], 10.0);
        assert_eq!(g.per_period(), 20);
        assert!(g.times().contains(&1.0));
        let g3 = g.with_periods(3);
        assert_eq!(g3.len(), 61);
        assert_eq!(g3.time(60), 6.0);
        let pr = g3.panel_ranges();
        assert_eq!(pr.len(), 6);
        assert_eq!(pr[1], (10, 20));
        assert_eq!(pr[5], (50, 60));
    }

    #[test]
    fn simpson_is_exact_for_cubics_and_jumps() {
        let g = SampleGrid::new(2.0, &[0.7], 8.0).with_periods(2);
        let v = g.integrate(|_, t, _| t * t * t);
        assert!((v - 64.0).abs() < 1e-11);
        let j = g.integrate(|_, _, p| if p.rem_euclid(2.0) < 0.7 { 1.0 } else { -1.0 });
        assert!((j - 2.0 * (0.7 - 1.3)).abs() < 1e-12);
    }

    #[test]
    fn shift_and_distance() {
        let g = Arc::new(SampleGrid::new(1.0, &[], 64.0).with_periods(2));
        let s = SampledSolution::from_fn(g, |t| ((PI * t).sin(), PI * (PI * t).cos()));
        let d = s.sup_distance(&s, 1);
        assert!((d - 2.0).abs() < 1e-3);
        let sh = s.shifted(2);
        assert!(sh.sup_distance(&s, 0) < 1e-15);
    }

    #[test]
    fn quintic_spline_reproduces_oscillator() {
        let f = LinearField::new(HillCoefficient::constant(2.0 * PI, 1.0));
        let g = SampleGrid::new(2.0 * PI, &[], 8.0);
        let o = PeriodicOrbit::from_field(&f, [1.0, 0.0], &g, Tolerances::default()).unwrap();
        for k in 0..100 {
            let t = 0.137 * k as f64;
            let (u, du) = o.eval(t);
            assert!((u - t.cos()).abs() < 1e-9 && (du + t.sin()).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn quintic_basis_exact_on_quintics() {
        // A single interval with data from p(t) = t^5 - 2t^3 + t reproduces p.
        let p = |t: f64| t.powi(5) - 2.0 * t.powi(3) + t;
        let dp = |t: f64| 5.0 * t.powi(4) - 6.0 * t * t + 1.0;
        let ddp = |t: f64| 20.0 * t.powi(3) - 12.0 * t;
        let o = PeriodicOrbit {
            period: 10.0,
            t: vec![0.0, 1.5],
            u: vec![p(0.0), p(1.5)],
            du: vec![dp(0.0), dp(1.5)],
            dd_right: vec![ddp(0.0)],
            dd_left: vec![ddp(1.5)],
        };
        for t in [0.1, 0.7, 1.2, 1.49] {
            let (u, du) = o.eval(t);
            assert!((u - p(t)).abs() < 1e-12 && (du - dp(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn sampled_zero_count() {
        let g = Arc::new(SampleGrid::new(2.0 * PI, &[], 16.0));
        let s = SampledSolution::from_fn(g.clone(), |t| ((3.0 * t).sin(), 3.0 * (3.0 * t).cos()));
        let z = SampledSolution::from_fn(g, |_| (0.0, 0.0));
        assert_eq!(s.zero_count(&z).unwrap().count, 6);
    }
}
