//! Damped Newton iteration for fixed points of `P^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{poincare_map, poincare_with_jacobian, Field, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSettings {
    pub max_iter: usize,
    /// Smallest step fraction tried before giving up.
    pub min_damping: f64,
    /// Convergence threshold on `‖P^k(x) - x‖∞ / (1 + ‖x‖∞)`.
    pub tol: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { max_iter: 50, min_damping: 1.0 / 1024.0, tol: 1e-11 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: [f64; 2],
    /// `‖P^k(x) - x‖∞`.
    pub residual: f64,
    pub iterations: usize,
}

#[inline]
fn inf_norm(x: [f64; 2]) -> f64 {
    x[0].abs().max(x[1].abs())
}

/// Newton on `F(x) = P^k(x) - x` with step halving. Integration failures
/// during a trial step count as a rejected step.
pub fn fixed_point<F: Field + ?Sized>(field: &F, x0: [f64; 2], k: usize, cfg: &NewtonSettings, tol: Tolerances) -> Result<FixedPoint> {
    let mut x = x0;
    let mut m = poincare_with_jacobian(field, x, k, tol)?;
    let mut f = [m.image[0] - x[0], m.image[1] - x[1]];
    let mut nf = inf_norm(f);
    for it in 0..=cfg.max_iter {
        let scale = 1.0 + inf_norm(x);
        if nf <= cfg.tol * scale {
            return Ok(FixedPoint { x, residual: nf, iterations: it });
        }
        if it == cfg.max_iter {
            break;
        }
        let j = [[m.jacobian[0][0] - 1.0, m.jacobian[0][1]], [m.jacobian[1][0], m.jacobian[1][1] - 1.0]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(Error::NotFound(format!("singular Newton matrix at {x:?}")));
        }
        let dx = [-(j[1][1] * f[0] - j[0][1] * f[1]) / det, -(-j[1][0] * f[0] + j[0][0] * f[1]) / det];
        let mut damping = 1.0;
        loop {
            let xn = [x[0] + damping * dx[0], x[1] + damping * dx[1]];
            if let Ok(mn) = poincare_with_jacobian(field, xn, k, tol) {
                let fnew = [mn.image[0] - xn[0], mn.image[1] - xn[1]];
                let n = inf_norm(fnew);
                if n < nf {
                    x = xn;
                    m = mn;
                    f = fnew;
                    nf = n;
                    break;
                }
            }
            damping *= 0.5;
            if damping < cfg.min_damping {
                // Stalled at the integration noise floor counts as converged.
                if nf <= 100.0 * cfg.tol * scale {
                    return Ok(FixedPoint { x, residual: nf, iterations: it });
                }
                return Err(Error::NotFound(format!("Newton stalled at {x:?} with residual {nf:e}")));
            }
        }
    }
    Err(Error::NotFound(format!("Newton did not converge in {} iterations (residual {nf:e})", cfg.max_iter)))
}

/// `‖P^k(x) - x‖∞` recomputed by a plain integration.
pub fn residual<F: Field + ?Sized>(field: &F, x: [f64; 2], k: usize, tol: Tolerances) -> Result<f64> {
    let y = poincare_map(field, x, k, tol)?;
    Ok(inf_norm([y[0] - x[0], y[1] - x[1]]))
}
