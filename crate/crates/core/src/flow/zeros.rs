//! Transversal zero counting on a sampled window.

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};

/// Default band below which a sample counts as touching zero.
pub const ZERO_ATOL: f64 = 1e-10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub count: usize,
    /// Located sign changes, sorted, inside the half-open window.
    pub zeros: Vec<f64>,
    /// Samples within the tolerance band with no sign change across them.
    pub touches: Vec<f64>,
    /// The window was treated as a circle.
    pub periodic: bool,
    /// A zero sits on the window seam (only meaningful when not periodic).
    pub seam_zero: bool,
}

fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= 1e-13 * m.abs().max(1.0) || m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Counts sign changes of `f` over `[times[0], times[last])`.
///
/// Samples with `|f| <= atol` are neutral; a crossing is a sign flip between
/// consecutive non-neutral samples, located by bisection. With `periodic` the
/// last time is identified with the first, so a crossing through the seam is
/// counted once.
pub fn sign_changes(times: &[f64], f: impl Fn(f64) -> f64, atol: f64, periodic: bool) -> Result<ZeroCount> {
    let mut out = ZeroCount { periodic, ..Default::default() };
    if times.len() < 2 {
        return Ok(out);
    }
    let (t0, tn) = (times[0], *times.last().unwrap());
    let span = tn - t0;
    let nodes = if periodic { &times[..times.len() - 1] } else { times };
    let vals: Vec<f64> = nodes.iter().map(|&t| f(t)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite value in zero count".into()));
    }
    let sign = |v: f64| if v.abs() <= atol { 0 } else if v > 0.0 { 1 } else { -1 };
    let nz: Vec<usize> = (0..vals.len()).filter(|&i| sign(vals[i]) != 0).collect();
    if nz.is_empty() {
        out.touches.push(t0);
        out.seam_zero = !periodic;
        return Ok(out);
    }
    let fref: &dyn Fn(f64) -> f64 = &f;
    for w in nz.windows(2) {
        let (a, b) = (w[0], w[1]);
        if sign(vals[a]) != sign(vals[b]) {
            out.zeros.push(bisect(fref, nodes[a], nodes[b]));
        } else if b > a + 1 {
            out.touches.push(nodes[a + 1]);
        }
    }
    let (first, last) = (nz[0], *nz.last().unwrap());
    if periodic {
        let wrapped = |t: f64| if t >= tn { f(t - span) } else { f(t) };
        if sign(vals[first]) != sign(vals[last]) {
            let mut z = bisect(&wrapped, nodes[last], nodes[first] + span);
            if z >= tn {
                z -= span;
            }
            out.zeros.push(z);
        } else if first > 0 || last + 1 < nodes.len() {
            out.touches.push(if last + 1 < nodes.len() { nodes[last + 1] } else { t0 });
        }
    } else {
        if first > 0 || last + 1 < nodes.len() {
            out.seam_zero = true;
        }
        let eps = 1e-10 * span.max(1.0);
        if out.zeros.iter().any(|&z| z - t0 < eps || tn - z < eps) {
            out.seam_zero = true;
        }
        // The window is half-open: a crossing at tn itself is excluded.
        out.zeros.retain(|&z| z < tn);
    }
    out.zeros.sort_by(|a, b| a.total_cmp(b));
    out.touches.sort_by(|a, b| a.total_cmp(b));
    out.count = out.zeros.len();
    Ok(out)
}

/// Sign changes of `u - reference` along a trajectory window.
///
/// The window is treated as a circle when the difference closes up at the
/// ends, which is the case for periodic data.
pub fn zero_count(traj: &Trajectory, reference: Option<&dyn Fn(f64) -> f64>) -> Result<ZeroCount> {
    let d = |t: f64| traj.eval(t).u - reference.map_or(0.0, |r| r(t));
    let times = traj.fine_times(16);
    let scale = times.iter().map(|&t| d(t).abs()).fold(0.0, f64::max);
    let gap = (d(traj.t1()) - d(traj.t0())).abs();
    let periodic = gap <= 1e-6 * (1.0 + scale);
    let zc = sign_changes(&times, d, ZERO_ATOL, periodic)?;
    if !periodic && zc.seam_zero {
        return Err(Error::AmbiguousZero { t: traj.t0() });
    }
    Ok(zc)
}
