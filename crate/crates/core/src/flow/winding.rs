//! Clockwise winding in standard and μ-modified polar coordinates.
//!
//! A point `(v, v')` has modified angle `θ_μ = atan2(-v', μ v)` and radius
//! `r_μ = sqrt(μ² v² + v'²)`. The angle is unwrapped along dense output, which
//! agrees with integrating `μ(v'² - v v'')/(μ² v² + v'²)` but is exact at
//! breakpoints.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{dopri, Field, Planar, Tolerances};
use crate::error::{Error, Result};

/// Radius of the excluded ball about the origin.
pub const ORIGIN_RADIUS: f64 = 1e-12;

const SAMPLES_PER_STEP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    /// Total clockwise angle.
    pub delta_theta: f64,
    /// Zero means standard coordinates.
    pub mu: f64,
    pub min_r_mu: f64,
}

/// Angles recorded at a sequence of mark times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingTrace {
    pub mu: f64,
    pub marks: Vec<f64>,
    /// Standard angle swept from the start to each mark.
    pub theta: Vec<f64>,
    /// Modified angle swept from the start to each mark.
    pub theta_mu: Vec<f64>,
    /// Running minimum of `r_μ` up to each mark.
    pub min_r_mu: Vec<f64>,
}

#[inline]
fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

#[inline]
pub fn modified_angle(v: f64, dv: f64, mu: f64) -> f64 {
    (-dv).atan2(mu * v)
}

/// Integrates from `(t0, x0)` through the sorted `marks` and reports
/// cumulative angles at each one.
pub fn winding_trace<F: Field + ?Sized>(
    field: &F,
    x0: [f64; 2],
    t0: f64,
    marks: &[f64],
    mu: f64,
    tol: Tolerances,
) -> Result<WindingTrace> {
    if x0[0] == 0.0 && x0[1] == 0.0 {
        return Err(Error::OriginHit { t: t0 });
    }
    if marks.is_empty() || marks.windows(2).any(|w| w[1] <= w[0]) || marks[0] <= t0 {
        return Err(Error::Precondition("marks must be increasing and after t0".into()));
    }
    let m = if mu > 0.0 { mu } else { 1.0 };
    let t1 = *marks.last().unwrap();
    let mut stops = field.breakpoints(t0, t1);
    stops.extend_from_slice(marks);

    let mut th = 0.0;
    let mut th_mu = 0.0;
    let mut prev = modified_angle(x0[0], x0[1], 1.0);
    let mut prev_mu = modified_angle(x0[0], x0[1], m);
    let mut min_r = (m * m * x0[0] * x0[0] + x0[1] * x0[1]).sqrt();
    let mut trace = WindingTrace {
        mu,
        marks: marks.to_vec(),
        theta: Vec::with_capacity(marks.len()),
        theta_mu: Vec::with_capacity(marks.len()),
        min_r_mu: Vec::with_capacity(marks.len()),
    };
    let mut next_mark = 0;
    dopri::integrate(&Planar(field), t0, x0, t1, &stops, tol, |s| {
        for j in 1..=SAMPLES_PER_STEP {
            let t = if j == SAMPLES_PER_STEP {
                s.t1
            } else {
                s.t0 + (s.t1 - s.t0) * j as f64 / SAMPLES_PER_STEP as f64
            };
            let y = s.eval(t);
            if y[0].hypot(y[1]) < ORIGIN_RADIUS {
                return Err(Error::OriginHit { t });
            }
            let a = modified_angle(y[0], y[1], 1.0);
            let am = modified_angle(y[0], y[1], m);
            th += wrap(a - prev);
            th_mu += wrap(am - prev_mu);
            prev = a;
            prev_mu = am;
            min_r = min_r.min((m * m * y[0] * y[0] + y[1] * y[1]).sqrt());
        }
        while next_mark < marks.len() && s.t1 >= marks[next_mark] {
            trace.theta.push(th);
            trace.theta_mu.push(th_mu);
            trace.min_r_mu.push(min_r);
            next_mark += 1;
        }
        Ok(())
    })?;
    Ok(trace)
}

/// Winding over `[0, kT]`.
pub fn winding<F: Field + ?Sized>(field: &F, x0: [f64; 2], k: usize, mu: f64, tol: Tolerances) -> Result<WindingResult> {
    let t1 = k as f64 * field.period();
    let tr = winding_trace(field, x0, 0.0, &[t1], mu, tol)?;
    Ok(WindingResult {
        delta_theta: if mu > 0.0 { tr.theta_mu[0] } else { tr.theta[0] },
        mu,
        min_r_mu: tr.min_r_mu[0],
    })
}

/// Modified-angle widths of the arcs between consecutive axis crossings
/// (zeros of `v` or `v'`) on `[t0, t1]`.
pub fn quadrant_arcs<F: Field + ?Sized>(field: &F, x0: [f64; 2], t0: f64, t1: f64, mu: f64, tol: Tolerances) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::Precondition(format!("mu must be positive, got {mu}")));
    }
    let traj = super::integrate(field, super::PlanarState::new(t0, x0[0], x0[1]), t1, tol)?;
    let mut th = 0.0;
    let mut prev_y = x0;
    let mut prev_a = modified_angle(x0[0], x0[1], mu);
    let mut crossings = Vec::new();
    for s in traj.steps() {
        for j in 1..=SAMPLES_PER_STEP {
            let t = s.t0 + (s.t1 - s.t0) * j as f64 / SAMPLES_PER_STEP as f64;
            let y = s.eval(t);
            let tl = s.t0 + (s.t1 - s.t0) * (j - 1) as f64 / SAMPLES_PER_STEP as f64;
            for c in 0..2 {
                if prev_y[c] * y[c] < 0.0 {
                    let (mut lo, mut hi) = (tl, t);
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if s.eval(mid)[c] * prev_y[c] > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let ye = s.eval(0.5 * (lo + hi));
                    crossings.push(th + wrap(modified_angle(ye[0], ye[1], mu) - prev_a));
                }
            }
            let a = modified_angle(y[0], y[1], mu);
            th += wrap(a - prev_a);
            prev_a = a;
            prev_y = y;
        }
    }
    Ok(crossings.windows(2).map(|w| w[1] - w[0]).collect())
}
