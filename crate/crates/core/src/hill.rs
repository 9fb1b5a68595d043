//! Floquet analysis of `v'' + (λ + q(t)) v = 0`.
//!
//! Periodic eigenvalues are counted with an oscillation argument: for the
//! solution started at `(1, 0)`, let `D` be the clockwise angle it sweeps over
//! one period and `Δ` the trace of the monodromy. The number of periodic
//! eigenvalues strictly below `λ` is `2·round(D/2π)` when `Δ > 2` and
//! `2·floor(D/2π) + 1` when `Δ < 2`. This handles double eigenvalues without
//! any root fitting. The principal eigenvalue is the first place the count
//! becomes positive, refined on `Δ - 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::dopri::{self, OdeSystem, Tolerances};
use crate::flow::fields::periodic_points;
use crate::flow::winding::modified_angle;
use crate::quad::integrate_piecewise;
use crate::samples::{SampleGrid, SampledSolution};
use crate::weights::PeriodicWeight;

type CoeffFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A T-periodic, piecewise-continuous coefficient `q(t)`.
#[derive(Clone)]
pub struct HillCoefficient {
    period: f64,
    breaks: Vec<f64>,
    func: Arc<CoeffFn>,
    offset: f64,
    sup: f64,
}

impl std::fmt::Debug for HillCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HillCoefficient")
            .field("period", &self.period)
            .field("breaks", &self.breaks)
            .field("offset", &self.offset)
            .field("sup", &self.sup)
            .finish()
    }
}

impl HillCoefficient {
    pub fn constant(period: f64, c: f64) -> Self {
        HillCoefficient { period, breaks: Vec::new(), func: Arc::new(|_, _| 0.0), offset: c, sup: c.abs() }
    }

    /// `q(t, piece)` with jumps only at `breaks ⊂ [0, T)`.
    pub fn from_fn(period: f64, breaks: Vec<f64>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        let mut q = HillCoefficient { period, breaks, func: Arc::new(f), offset: 0.0, sup: 0.0 };
        q.sup = q.estimate_sup();
        q
    }

    pub fn from_weight(w: &PeriodicWeight) -> Self {
        let w2 = w.clone();
        let breaks = w.breakpoints(0.0, w.period()).into_iter().filter(|&b| b < w.period()).collect();
        let mut q = HillCoefficient {
            period: w.period(),
            breaks,
            func: Arc::new(move |t, p| w2.evaluate_within(t, p)),
            offset: 0.0,
            sup: 0.0,
        };
        q.sup = w.sup_norm();
        q
    }

    /// `q(t) = a(t) · m(t)` for a continuous multiplier `m`.
    pub fn weighted(w: &PeriodicWeight, m: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let w2 = w.clone();
        let breaks = w.breakpoints(0.0, w.period()).into_iter().filter(|&b| b < w.period()).collect();
        Self::from_fn(w.period(), breaks, move |t, p| w2.evaluate_within(t, p) * m(t))
    }

    /// `q + c`.
    pub fn with_offset(&self, c: f64) -> Self {
        let mut q = self.clone();
        q.offset += c;
        q.sup = q.estimate_sup();
        q
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_within(t, t)
    }

    #[inline]
    pub fn eval_within(&self, t: f64, piece: f64) -> f64 {
        (self.func)(t, piece) + self.offset
    }

    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        periodic_points(&self.breaks, self.period, t0, t1)
    }

    /// Sampled estimate of `sup |q|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    fn estimate_sup(&self) -> f64 {
        let n = 4096;
        let mut m: f64 = 0.0;
        for i in 0..n {
            let t = self.period * (i as f64 + 0.5) / n as f64;
            m = m.max(self.eval(t).abs());
        }
        let eps = 1e-9 * self.period;
        for &b in &self.breaks {
            m = m.max(self.eval_within(b, b - eps).abs()).max(self.eval_within(b, b + eps).abs());
        }
        m
    }

    /// `∫₀ᵀ q`.
    pub fn integral(&self) -> f64 {
        integrate_piecewise(&self.breaks, 0.0, self.period, 16, |t, p| self.eval_within(t, p))
    }
}

/// Two fundamental solutions of the Hill equation.
struct HillSystem<'a> {
    q: &'a HillCoefficient,
    lambda: f64,
}

impl OdeSystem<4> for HillSystem<'_> {
    #[inline]
    fn rhs(&self, t: f64, piece: f64, y: &[f64; 4]) -> [f64; 4] {
        let c = -(self.lambda + self.q.eval_within(t, piece));
        [y[1], c * y[0], y[3], c * y[2]]
    }
}

/// Integration tolerances used for spectral quantities.
pub const HILL_TOL: Tolerances = Tolerances { rtol: 1e-12, atol: 1e-14 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monodromy {
    /// `[[v1(T), v2(T)], [v1'(T), v2'(T)]]` for `v1(0) = (1,0)`, `v2(0) = (0,1)`.
    pub matrix: [[f64; 2]; 2],
    /// Clockwise angle swept by the first solution over one period.
    pub angle: f64,
}

impl Monodromy {
    pub fn trace(&self) -> f64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    pub fn det(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

fn monodromy_over(q: &HillCoefficient, lambda: f64, periods: usize) -> Result<Monodromy> {
    let t1 = periods as f64 * q.period;
    let stops = q.breakpoints(0.0, t1);
    let mut prev = 0.0;
    let mut angle = 0.0;
    let (y, _) = dopri::integrate(&HillSystem { q, lambda }, 0.0, [1.0, 0.0, 0.0, 1.0], t1, &stops, HILL_TOL, |s| {
        for j in 1..=8 {
            let t = s.t0 + (s.t1 - s.t0) * j as f64 / 8.0;
            let y = if j == 8 { s.y1() } else { s.eval(t) };
            let a = modified_angle(y[0], y[1], 1.0);
            let mut d = a - prev;
            if d > PI {
                d -= 2.0 * PI;
            } else if d <= -PI {
                d += 2.0 * PI;
            }
            angle += d;
            prev = a;
        }
        Ok(())
    })?;
    Ok(Monodromy { matrix: [[y[0], y[2]], [y[1], y[3]]], angle })
}

/// Monodromy matrix of `v'' + (λ + q) v = 0`.
pub fn monodromy(q: &HillCoefficient, lambda: f64) -> Result<Monodromy> {
    monodromy_over(q, lambda, 1)
}

pub fn discriminant(q: &HillCoefficient, lambda: f64) -> Result<f64> {
    Ok(monodromy(q, lambda)?.trace())
}

fn edge_band(q: &HillCoefficient) -> f64 {
    1e-9 * (1.0 + q.sup_norm() * q.period * q.period)
}

/// Number of periodic eigenvalues strictly below `lambda`, with multiplicity.
pub fn eigenvalue_count(q: &HillCoefficient, lambda: f64) -> Result<usize> {
    let band = edge_band(q);
    let mut shift = 0.0;
    let mut last = None;
    for _ in 0..8 {
        let m = monodromy(q, lambda - shift)?;
        let d = m.trace() - 2.0;
        let turns = m.angle / (2.0 * PI);
        if d > band {
            return Ok(2 * turns.round().max(0.0) as usize);
        }
        if d < -band {
            return Ok(2 * turns.floor().max(0.0) as usize + 1);
        }
        last = Some(turns);
        shift = if shift == 0.0 { 1e-7 * (1.0 + lambda.abs()) } else { shift * 10.0 };
    }
    // A closed gap: the trace touches 2 from below on both sides.
    Ok(2 * last.unwrap().floor().max(0.0) as usize + 1)
}

/// Smallest periodic eigenvalue `λ₀(q)`.
pub fn principal_eigenvalue(q: &HillCoefficient) -> Result<f64> {
    let r = q.sup_norm() + 10.0;
    let (mut lo, mut hi) = (-r, r);
    if eigenvalue_count(q, lo)? != 0 || eigenvalue_count(q, hi)? == 0 {
        return Err(Error::BracketFailure { lo, hi });
    }
    // Shrink until `hi` sits between λ₀ and the next band edge with Δ < 2.
    let mut d_hi = discriminant(q, hi)? - 2.0;
    for _ in 0..200 {
        if d_hi < 0.0 && eigenvalue_count(q, hi)? == 1 && hi - lo < 1.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eigenvalue_count(q, mid)? == 0 {
            lo = mid;
        } else {
            hi = mid;
            d_hi = discriminant(q, hi)? - 2.0;
        }
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            return Ok(0.5 * (lo + hi));
        }
    }
    // Illinois iteration on Δ(λ) - 2, which is decreasing on [lo, hi].
    let mut d_lo = discriminant(q, lo)? - 2.0;
    if d_lo <= 0.0 {
        return Ok(lo);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let x = (lo * d_hi - hi * d_lo) / (d_hi - d_lo);
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let dx = discriminant(q, x)? - 2.0;
        if dx == 0.0 {
            return Ok(x);
        }
        if dx > 0.0 {
            lo = x;
            d_lo = dx;
            if side == 1 {
                d_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            d_hi = dx;
            if side == -1 {
                d_lo *= 0.5;
            }
            side = -1;
        }
        if hi - lo < 1e-13 * (1.0 + hi.abs()) || dx.abs() < 1e-15 {
            break;
        }
    }
    Ok(if d_lo.abs() < d_hi.abs() { lo } else { hi })
}

/// Number of strictly negative periodic eigenvalues.
pub fn morse_index(q: &HillCoefficient) -> Result<usize> {
    eigenvalue_count(q, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationNumber {
    /// Turns per period.
    pub rotation: f64,
    /// Distance to the finite-horizon winding estimate.
    pub error: f64,
    /// The Richardson-extrapolated finite-horizon estimate itself.
    pub horizon_estimate: f64,
}

/// Rotation number of `v'' + q v = 0` in turns per period.
///
/// The value follows from the Floquet multipliers and the eigenvalue count;
/// a 64/128-period winding average with a Richardson step is reported next to
/// it as an independent error estimate.
pub fn rotation_number(q: &HillCoefficient) -> Result<RotationNumber> {
    let m = monodromy(q, 0.0)?;
    let delta = m.trace();
    let band = edge_band(q);
    let n = eigenvalue_count(q, 0.0)?;
    let rotation = if (delta - 2.0).abs() <= band {
        // At a periodic eigenvalue λ_j the rotation is ⌊(j+1)/2⌋.
        n.div_ceil(2) as f64
    } else if delta > 2.0 {
        (n / 2) as f64
    } else if delta < -2.0 + band {
        // Antiperiodic edge or inside a gap around it: half-integer rotation.
        (n / 2) as f64 + 0.5
    } else {
        let alpha = (0.5 * delta).clamp(-1.0, 1.0).acos() / (2.0 * PI);
        let h = 1e-6 * (1.0 + q.sup_norm());
        let slope = discriminant(q, h)? - discriminant(q, -h)?;
        let base = (n / 2) as f64;
        if slope < 0.0 {
            base + alpha
        } else {
            base + 1.0 - alpha
        }
    };
    let r64 = monodromy_over(q, 0.0, 64)?.angle / (2.0 * PI * 64.0);
    let r128 = monodromy_over(q, 0.0, 128)?.angle / (2.0 * PI * 128.0);
    let est = 2.0 * r128 - r64;
    Ok(RotationNumber { rotation, error: (est - rotation).abs(), horizon_estimate: est })
}

/// Positive periodic eigenfunction at `lambda0`, sampled on `grid` and
/// normalized to `max = 1`.
pub fn principal_eigenfunction(q: &HillCoefficient, lambda0: f64, grid: Arc<SampleGrid>) -> Result<SampledSolution> {
    let m = monodromy(q, lambda0)?;
    let defect = (m.trace() - 2.0).abs();
    if defect > 1e-6 {
        return Err(Error::DegenerateEigenvector { defect });
    }
    let mm = &m.matrix;
    let c1 = [mm[0][1], 1.0 - mm[0][0]];
    let c2 = [1.0 - mm[1][1], mm[1][0]];
    let x0 = if c1[0].hypot(c1[1]) >= c2[0].hypot(c2[1]) { c1 } else { c2 };
    let x0 = if x0 == [0.0, 0.0] { [1.0, 0.0] } else { x0 };
    let t1 = grid.periods() as f64 * q.period;
    let times = grid.times();
    let mut stops = q.breakpoints(0.0, t1);
    stops.extend_from_slice(&times);
    let mut u = vec![x0[0]];
    let mut du = vec![x0[1]];
    let mut next = 1;
    dopri::integrate(
        &HillSystem { q, lambda: lambda0 },
        0.0,
        [x0[0], x0[1], 0.0, 0.0],
        t1,
        &stops,
        HILL_TOL,
        |s| {
            while next < times.len() && s.t1 >= times[next] {
                let y = s.eval(times[next]);
                u.push(y[0]);
                du.push(y[1]);
                next += 1;
            }
            Ok(())
        },
    )?;
    let sign = if u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let peak = u.iter().map(|v| v * sign).fold(f64::NEG_INFINITY, f64::max);
    let u: Vec<f64> = u.iter().map(|v| v * sign / peak).collect();
    let du: Vec<f64> = du.iter().map(|v| v * sign / peak).collect();
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::DegenerateEigenvector { defect });
    }
    SampledSolution::new(grid, u, du)
}

/// Smallest eigenvalue of the periodic finite-difference operator
/// `-D² - diag(q)` on `n` cells, by shifted inverse iteration.
pub fn fd_oracle(q: &HillCoefficient, n: usize) -> Result<f64> {
    if n < 64 {
        return Err(Error::Precondition(format!("oracle grid size {n} < 64")));
    }
    let h = q.period / n as f64;
    // Cell averages keep the operator consistent for discontinuous q.
    let qs: Vec<f64> = (0..n)
        .map(|i| {
            let c = i as f64 * h;
            let (a, b) = (c - 0.5 * h, c + 0.5 * h);
            let br = q.breakpoints(a, b);
            integrate_piecewise(&br, a, b, 1, |t, p| q.eval_within(t, p)) / h
        })
        .collect();
    let qmax = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sigma = -qmax - 1.0;
    let inv_h2 = 1.0 / (h * h);
    let diag: Vec<f64> = qs.iter().map(|qi| 2.0 * inv_h2 - qi - sigma).collect();
    let solver = CyclicTridiagonal::new(&diag, -inv_h2);
    let rayleigh = |x: &[f64]| {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let l = x[(i + n - 1) % n];
            let r = x[(i + 1) % n];
            num += x[i] * ((2.0 * x[i] - l - r) * inv_h2 - qs[i] * x[i]);
            den += x[i] * x[i];
        }
        num / den
    };
    let mut x = vec![1.0; n];
    let mut lam = rayleigh(&x);
    for _ in 0..20000 {
        let mut y = solver.solve(&x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        let new = rayleigh(&y);
        x = y;
        if (new - lam).abs() <= 1e-15 * (1.0 + new.abs()) {
            lam = new;
            break;
        }
        lam = new;
    }
    Ok(lam)
}

/// Symmetric cyclic tridiagonal system with constant off-diagonal, solved by
/// the Thomas algorithm plus a Sherman–Morrison correction for the corners.
struct CyclicTridiagonal {
    off: f64,
    // Modified main diagonal and Thomas factors.
    cprime: Vec<f64>,
    denom: Vec<f64>,
    gamma: f64,
    z: Vec<f64>,
    vz: f64,
}

impl CyclicTridiagonal {
    fn new(diag: &[f64], off: f64) -> Self {
        let n = diag.len();
        let gamma = -diag[0];
        let mut b = diag.to_vec();
        b[0] -= gamma;
        b[n - 1] -= off * off / gamma;
        let mut cprime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = b[0];
        cprime[0] = off / denom[0];
        for i in 1..n {
            denom[i] = b[i] - off * cprime[i - 1];
            cprime[i] = off / denom[i];
        }
        let mut s = CyclicTridiagonal { off, cprime, denom, gamma, z: Vec::new(), vz: 0.0 };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        s.z = s.thomas(&u);
        s.vz = s.z[0] + off / gamma * s.z[n - 1];
        s
    }

    fn thomas(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = vec![0.0; n];
        y[0] = r[0] / self.denom[0];
        for i in 1..n {
            y[i] = (r[i] - self.off * y[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= self.cprime[i] * y[i + 1];
        }
        y
    }

    fn solve(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let y = self.thomas(r);
        let vy = y[0] + self.off / self.gamma * y[n - 1];
        let f = vy / (1.0 + self.vz);
        y.iter().zip(&self.z).map(|(a, b)| a - f * b).collect()
    }
}

/// Spectral data of a Hill coefficient, as recorded in run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub lambda0: f64,
    pub morse: usize,
    pub rotation: f64,
    pub rotation_err: f64,
    pub discriminant_at_zero: f64,
    pub oracle_lambda0: Option<f64>,
    pub oracle_n: Option<usize>,
}

/// Full summary; `oracle_n` adds a finite-difference cross-check.
pub fn spectral_summary(q: &HillCoefficient, oracle_n: Option<usize>) -> Result<SpectralSummary> {
    let lambda0 = principal_eigenvalue(q)?;
    let morse = morse_index(q)?;
    let rot = rotation_number(q)?;
    let oracle = match oracle_n {
        Some(n) => Some(fd_oracle(q, n)?),
        None => None,
    };
    Ok(SpectralSummary {
        lambda0,
        morse,
        rotation: rot.rotation,
        rotation_err: rot.error,
        discriminant_at_zero: discriminant(q, 0.0)?,
        oracle_lambda0: oracle,
        oracle_n: oracle_n.filter(|_| oracle.is_some()),
    })
}
