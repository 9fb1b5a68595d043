//! Twist verification around a positive harmonic solution and the search for
//! subharmonic solutions of order `k` with `j` turns.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{integrate_with_stops, winding, winding_trace, zero_count, Field, PlanarState, Tolerances};
use crate::hill::rotation_number;
use crate::newton::{self, FixedPoint, NewtonSettings};
use crate::nonlinearity::{CenteredField, Nonlinearity, ShiftedField};
use crate::samples::{SampleGrid, SampledSolution, DEFAULT_DENSITY};
use crate::weights::PeriodicWeight;

/// Two solutions are in the same periodicity class below this distance.
pub const CLASS_TOL: f64 = 1e-4;
/// Minimal-period certificates need every shift distance above this.
pub const MINIMAL_TOL: f64 = 1e-4;
/// Largest accepted `P^k` residual.
pub const RESIDUAL_MAX: f64 = 1e-8;
/// Largest order tried by [`estimate_k_star`].
pub const K_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubharmonicSettings {
    /// Inner radius as a fraction of the center's sup norm.
    pub inner_factor: f64,
    /// Sampled orbits per circle in the twist checks.
    pub circle_points: usize,
    /// Outer radius cap.
    pub outer_cap: f64,
    pub rays: usize,
    pub bisection_iters: usize,
    pub newton: NewtonSettings,
    pub tol: Tolerances,
    pub density: f64,
}

impl Default for SubharmonicSettings {
    fn default() -> Self {
        SubharmonicSettings {
            inner_factor: 1e-6,
            circle_points: 16,
            outer_cap: 1e6,
            rays: 128,
            bisection_iters: 40,
            newton: NewtonSettings::default(),
            tol: Tolerances::default(),
            density: DEFAULT_DENSITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistReport {
    pub k: usize,
    pub r_star: f64,
    /// Smallest winding over `[0, kT]` among the inner orbits.
    pub delta_theta_in: f64,
    pub delta_theta_in_mean: f64,
    /// `2πk·rot` of the linearization.
    pub delta_theta_linear: f64,
    pub mu: f64,
    /// `‖b‖₁`.
    pub b_l1: f64,
    /// `8k‖b‖₁/π`.
    pub r_mu_threshold: f64,
    pub r_big: f64,
    /// Smallest `r_μ` along the outer orbits started at `r_big`.
    pub min_r_mu: f64,
    /// Largest standard winding among the outer orbits.
    pub delta_theta_out: f64,
    /// Largest modified winding among the outer orbits.
    pub delta_theta_out_mu: f64,
    pub m_k: usize,
}

impl TwistReport {
    pub fn certified(&self) -> bool {
        self.delta_theta_in > 2.0 * PI && self.delta_theta_out < 2.0 * PI && self.m_k >= 1
    }
}

/// `μ = π/(8kT)`, so that a `μ`-rotation over `kT` stays below a sixteenth turn.
pub fn twist_mu(k: usize, period: f64) -> f64 {
    PI / (8.0 * k as f64 * period)
}

fn circle_point(i: usize, n: usize) -> (f64, f64) {
    let phi = 2.0 * PI * (i as f64 + 0.5) / n as f64;
    (phi.cos(), -phi.sin())
}

/// Standard windings of the inner orbits at every multiple of `T` up to `kmax·T`.
fn inner_windings<F: CenteredField + ?Sized>(field: &F, r_star: f64, kmax: usize, cfg: &SubharmonicSettings) -> Result<Vec<Vec<f64>>> {
    let t = field.period();
    let marks: Vec<f64> = (1..=kmax).map(|k| k as f64 * t).collect();
    (0..cfg.circle_points)
        .into_par_iter()
        .map(|i| {
            let (c, s) = circle_point(i, cfg.circle_points);
            winding_trace(field, [r_star * c, r_star * s], 0.0, &marks, 0.0, cfg.tol.for_scale(r_star)).map(|tr| tr.theta)
        })
        .collect()
}

struct Outer {
    r_big: f64,
    min_r_mu: f64,
    theta: f64,
    theta_mu: f64,
}

fn outer_check<F: CenteredField + ?Sized>(field: &F, k: usize, rho: f64, threshold: f64, cfg: &SubharmonicSettings) -> Result<Outer> {
    let mu = twist_mu(k, field.period());
    let mut r = rho;
    while r <= cfg.outer_cap {
        let runs: Vec<Result<(f64, f64, f64)>> = (0..cfg.circle_points)
            .into_par_iter()
            .map(|i| {
                let (c, s) = circle_point(i, cfg.circle_points);
                let tr = winding_trace(field, [r * c / mu, r * s], 0.0, &[k as f64 * field.period()], mu, cfg.tol)?;
                Ok((tr.min_r_mu[0], tr.theta[0], tr.theta_mu[0]))
            })
            .collect();
        let mut min_r = f64::INFINITY;
        let (mut th, mut th_mu) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut ok = true;
        for run in runs {
            match run {
                Ok((m, a, b)) => {
                    min_r = min_r.min(m);
                    th = th.max(a);
                    th_mu = th_mu.max(b);
                }
                Err(e) => {
                    log::debug!("outer orbit at R = {r} failed: {e}");
                    ok = false;
                }
            }
        }
        if ok && min_r >= threshold {
            return Ok(Outer { r_big: r, min_r_mu: min_r, theta: th, theta_mu: th_mu });
        }
        r *= 2.0;
    }
    Err(Error::TwistNotCertified { k, reason: format!("outer orbits stay below r_mu = {threshold:.6e} up to R = {:e}", cfg.outer_cap) })
}

fn assemble<F: CenteredField + ?Sized>(
    field: &F,
    k: usize,
    rho: f64,
    r_star: f64,
    inner: &[f64],
    rot: f64,
    cfg: &SubharmonicSettings,
) -> Result<TwistReport> {
    let din = inner.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    if !(din > 2.0 * PI) {
        return Err(Error::TwistNotCertified { k, reason: format!("inner winding {din:.6} does not exceed 2π") });
    }
    let b_l1 = field.bound_l1();
    let threshold = 8.0 * k as f64 * b_l1 / PI;
    let out = outer_check(field, k, rho, threshold, cfg)?;
    let report = TwistReport {
        k,
        r_star,
        delta_theta_in: din,
        delta_theta_in_mean: mean,
        delta_theta_linear: 2.0 * PI * k as f64 * rot,
        mu: twist_mu(k, field.period()),
        b_l1,
        r_mu_threshold: threshold,
        r_big: out.r_big,
        min_r_mu: out.min_r_mu,
        delta_theta_out: out.theta,
        delta_theta_out_mu: out.theta_mu,
        m_k: ((din / (2.0 * PI)).ceil() as usize).saturating_sub(1),
    };
    if !(report.delta_theta_out < 2.0 * PI) {
        return Err(Error::TwistNotCertified { k, reason: format!("outer winding {:.6} is not below 2π", report.delta_theta_out) });
    }
    Ok(report)
}

/// Checks the inner and outer twist conditions over `[0, kT]`.
pub fn twist_analysis<F: CenteredField + ?Sized>(field: &F, k: usize, rho: f64, cfg: &SubharmonicSettings) -> Result<TwistReport> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    if k > K_CAP {
        return Err(Error::KStarTooLarge { cap: K_CAP });
    }
    let r_star = cfg.inner_factor * field.center_scale();
    let inner = inner_windings(field, r_star, k, cfg)?;
    let at_k: Vec<f64> = inner.iter().map(|th| th[k - 1]).collect();
    let rot = rotation_number(&field.linearization())?.rotation;
    assemble(field, k, rho, r_star, &at_k, rot, cfg)
}

/// Smallest `k ≤ 64` with a certified twist, and its report.
pub fn estimate_k_star<F: CenteredField + ?Sized>(field: &F, rho: f64, cfg: &SubharmonicSettings) -> Result<TwistReport> {
    let r_star = cfg.inner_factor * field.center_scale();
    let inner = inner_windings(field, r_star, K_CAP, cfg)?;
    let rot = rotation_number(&field.linearization())?.rotation;
    for k in 1..=K_CAP {
        let at_k: Vec<f64> = inner.iter().map(|th| th[k - 1]).collect();
        if at_k.iter().any(|&x| !(x > 2.0 * PI)) {
            continue;
        }
        match assemble(field, k, rho, r_star, &at_k, rot, cfg) {
            Ok(r) => return Ok(r),
            Err(Error::TwistNotCertified { reason, .. }) => log::info!("k = {k}: {reason}"),
            Err(e) => return Err(e),
        }
    }
    Err(Error::KStarTooLarge { cap: K_CAP })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalPeriod {
    /// `‖u(·) - u(· + lT)‖∞` for `l = 1..k-1`.
    pub distances: BTreeMap<usize, f64>,
    pub minimal: bool,
}

/// Whether `kT` is the smallest multiple of `T` that is a period of `u`.
pub fn minimal_period_check(u: &SampledSolution) -> MinimalPeriod {
    let k = u.periods();
    let distances: BTreeMap<usize, f64> = (1..k).map(|l| (l, u.sup_distance(u, l))).collect();
    let minimal = distances.values().all(|&d| d > MINIMAL_TOL);
    MinimalPeriod { distances, minimal }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubharmonicSolution {
    pub k: usize,
    pub j: usize,
    /// Periodicity class index, starting at 1.
    pub class: usize,
    /// Initial state of `v = u - u*`.
    pub initial_state: [f64; 2],
    /// `‖P^k(x) - x‖∞`.
    pub residual: f64,
    /// Standard winding of `v` over `[0, kT]`.
    pub delta_theta: f64,
    pub zero_count: usize,
    /// Zeros of `u - u*` in `[0, kT)`.
    pub zeros: Vec<f64>,
    pub min_u: f64,
    pub max_u: f64,
    /// `ρ - max u`.
    pub cap_margin: f64,
    pub minimal_period: MinimalPeriod,
    #[serde(skip)]
    pub samples: SampledSolution,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubharmonicSearch {
    pub k: usize,
    pub j: usize,
    pub twist: TwistReport,
    pub rays: usize,
    /// Rays on which the winding did not bracket `2πj`.
    pub rays_unbracketed: usize,
    /// Rays whose Newton iteration failed.
    pub newton_failures: usize,
    /// Fixed points with a different number of turns.
    pub off_target: usize,
    pub distinct_fixed_points: usize,
    pub rejected_nonpositive: usize,
    pub rejected_cap: usize,
    pub rejected_residual: usize,
    pub rejected_not_minimal: usize,
    /// Members found per class.
    pub class_sizes: Vec<usize>,
    /// One representative per class.
    pub solutions: Vec<SubharmonicSolution>,
}

enum Ray {
    Unbracketed,
    NewtonFailed,
    OffTarget,
    Hit(FixedPoint),
}

fn search_ray(field: &ShiftedField, i: usize, k: usize, j: usize, twist: &TwistReport, cfg: &SubharmonicSettings) -> Ray {
    let (c, s) = circle_point(i, cfg.rays);
    let target = 2.0 * PI * j as f64;
    let w = |r: f64| winding(field, [r * c, r * s], k, 0.0, cfg.tol).map(|w| w.delta_theta).ok();
    let mut lo = twist.r_star;
    let mut hi = twist.r_big / (twist.mu * twist.mu * c * c + s * s).sqrt();
    match (w(lo), w(hi)) {
        (Some(a), Some(b)) if a > target && b < target => {}
        _ => return Ray::Unbracketed,
    }
    for _ in 0..cfg.bisection_iters {
        let mid = (lo * hi).sqrt();
        match w(mid) {
            Some(v) if v > target => lo = mid,
            Some(_) => hi = mid,
            None => return Ray::Unbracketed,
        }
    }
    let r = (lo * hi).sqrt();
    let p = match newton::fixed_point(field, [r * c, r * s], k, &cfg.newton, cfg.tol) {
        Ok(p) => p,
        Err(_) => return Ray::NewtonFailed,
    };
    match winding(field, p.x, k, 0.0, cfg.tol) {
        Ok(wr) if (wr.delta_theta / (2.0 * PI)).round() as i64 == j as i64 => Ray::Hit(p),
        Ok(_) => Ray::OffTarget,
        Err(_) => Ray::NewtonFailed,
    }
}

enum Certified {
    Ok(SubharmonicSolution),
    NonPositive,
    Cap,
    Residual,
    NotMinimal,
}

fn certify(field: &ShiftedField, x: [f64; 2], k: usize, j: usize, grid: &Arc<SampleGrid>, center: &SampledSolution, cfg: &SubharmonicSettings) -> Result<Certified> {
    let residual = newton::residual(field, x, k, cfg.tol)?;
    if residual > RESIDUAL_MAX {
        return Ok(Certified::Residual);
    }
    let kt = k as f64 * field.period();
    let traj = integrate_with_stops(field, PlanarState::new(0.0, x[0], x[1]), kt, &grid.times(), cfg.tol)?;
    let v = SampledSolution::from_trajectory(grid.clone(), &traj);
    let u = SampledSolution::new(
        grid.clone(),
        v.u.iter().zip(&center.u).map(|(a, b)| a + b).collect(),
        v.du.iter().zip(&center.du).map(|(a, b)| a + b).collect(),
    )?;
    let zc = zero_count(&traj, None)?;
    if zc.count != 2 * j {
        return Err(Error::WindingMismatch { k, j, zeros: zc.count, expected: 2 * j });
    }
    let rho = field.base().rho();
    let (min_u, max_u) = (u.min(), u.max());
    if !(min_u > 0.0) {
        return Ok(Certified::NonPositive);
    }
    if !(max_u < rho) {
        return Ok(Certified::Cap);
    }
    let minimal_period = minimal_period_check(&u);
    if !minimal_period.minimal {
        return Ok(Certified::NotMinimal);
    }
    let delta_theta = winding(field, x, k, 0.0, cfg.tol)?.delta_theta;
    Ok(Certified::Ok(SubharmonicSolution {
        k,
        j,
        class: 0,
        initial_state: x,
        residual,
        delta_theta,
        zero_count: zc.count,
        zeros: zc.zeros,
        min_u,
        max_u,
        cap_margin: rho - max_u,
        minimal_period,
        samples: u,
    }))
}

/// Groups solutions into periodicity classes. Returns, per class, the index of
/// its first member and the class size.
pub fn periodicity_class_dedup(solutions: &[SampledSolution]) -> Vec<(usize, usize)> {
    let mut reps: Vec<(usize, usize)> = Vec::new();
    for (i, s) in solutions.iter().enumerate() {
        let k = s.periods();
        let found = reps.iter_mut().find(|(r, _)| (0..k).any(|l| solutions[*r].sup_distance(s, l) <= CLASS_TOL));
        match found {
            Some(rep) => rep.1 += 1,
            None => reps.push((i, 1)),
        }
    }
    reps
}

fn check_pair(k: usize, j: usize, twist: &TwistReport) -> Result<()> {
    if k == 0 || j == 0 {
        return Err(Error::Precondition("k and j must be positive".into()));
    }
    if j.gcd(&k) != 1 {
        return Err(Error::Precondition(format!("j = {j} and k = {k} are not coprime")));
    }
    if twist.k != k {
        return Err(Error::Precondition(format!("twist report is for k = {}, not {k}", twist.k)));
    }
    if j > twist.m_k {
        return Err(Error::Precondition(format!("j = {j} exceeds the certified m_k = {}", twist.m_k)));
    }
    Ok(())
}

/// Ray search plus certification; reports whatever was found.
pub fn search_subharmonics(field: &ShiftedField, k: usize, j: usize, twist: &TwistReport, cfg: &SubharmonicSettings) -> Result<SubharmonicSearch> {
    check_pair(k, j, twist)?;
    let rays: Vec<Ray> = (0..cfg.rays).into_par_iter().map(|i| search_ray(field, i, k, j, twist, cfg)).collect();

    let mut out = SubharmonicSearch {
        k,
        j,
        twist: twist.clone(),
        rays: cfg.rays,
        rays_unbracketed: 0,
        newton_failures: 0,
        off_target: 0,
        distinct_fixed_points: 0,
        rejected_nonpositive: 0,
        rejected_cap: 0,
        rejected_residual: 0,
        rejected_not_minimal: 0,
        class_sizes: Vec::new(),
        solutions: Vec::new(),
    };
    let mut points: Vec<[f64; 2]> = Vec::new();
    for r in rays {
        match r {
            Ray::Unbracketed => out.rays_unbracketed += 1,
            Ray::NewtonFailed => out.newton_failures += 1,
            Ray::OffTarget => out.off_target += 1,
            Ray::Hit(p) => {
                let scale = 1.0 + p.x[0].abs().max(p.x[1].abs());
                if !points.iter().any(|q| (q[0] - p.x[0]).abs().max((q[1] - p.x[1]).abs()) <= 1e-7 * scale) {
                    points.push(p.x);
                }
            }
        }
    }
    out.distinct_fixed_points = points.len();

    let period = field.period();
    let base = SampleGrid::new(period, &field.breakpoints(0.0, period), cfg.density);
    let grid = Arc::new(base.with_periods(k));
    let center = field.center().sample(Arc::new(base)).tiled(k);
    let mut certified = Vec::new();
    for x in points {
        match certify(field, x, k, j, &grid, &center, cfg)? {
            Certified::Ok(s) => certified.push(s),
            Certified::NonPositive => out.rejected_nonpositive += 1,
            Certified::Cap => out.rejected_cap += 1,
            Certified::Residual => out.rejected_residual += 1,
            Certified::NotMinimal => out.rejected_not_minimal += 1,
        }
    }
    let samples: Vec<SampledSolution> = certified.iter().map(|s| s.samples.clone()).collect();
    for (class, (idx, size)) in periodicity_class_dedup(&samples).into_iter().enumerate() {
        let mut rep = certified[idx].clone();
        rep.class = class + 1;
        out.solutions.push(rep);
        out.class_sizes.push(size);
    }
    Ok(out)
}

/// At least two periodicity classes of order-`k` subharmonics with `j` turns.
pub fn find_subharmonics(field: &ShiftedField, k: usize, j: usize, twist: &TwistReport, cfg: &SubharmonicSettings) -> Result<SubharmonicSearch> {
    let s = search_subharmonics(field, k, j, twist, cfg)?;
    if s.solutions.len() < 2 {
        log::info!(
            "k = {k}, j = {j}: {} unbracketed rays, {} Newton failures, {} off target, {} distinct fixed points",
            s.rays_unbracketed,
            s.newton_failures,
            s.off_target,
            s.distinct_fixed_points
        );
        return Err(Error::PairNotFound { k, j, found: s.solutions.len() });
    }
    Ok(s)
}

/// The time-`T` translate of a certified solution, re-polished and
/// re-certified. It lies in the same periodicity class.
pub fn shift_by_period(field: &ShiftedField, sol: &SubharmonicSolution, cfg: &SubharmonicSettings) -> Result<SubharmonicSolution> {
    let x1 = crate::flow::poincare_map(field, sol.initial_state, 1, cfg.tol)?;
    let p = newton::fixed_point(field, x1, sol.k, &cfg.newton, cfg.tol)?;
    let grid = sol.samples.grid().clone();
    let period = field.period();
    let base = SampleGrid::new(period, &field.breakpoints(0.0, period), cfg.density);
    let center = field.center().sample(Arc::new(base)).tiled(sol.k);
    match certify(field, p.x, sol.k, sol.j, &grid, &center, cfg)? {
        Certified::Ok(mut s) => {
            s.class = sol.class;
            Ok(s)
        }
        _ => Err(Error::NotFound("shifted solution failed certification".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    /// Largest `|-u''/g(u) - a|` over nodes with `g(u) > 1e-6`.
    pub max_error: f64,
    pub nodes_used: usize,
}

/// Recovers `a = -u''/g(u)` from samples, with `u''` from panel-local finite
/// differences of `u'`.
pub fn reconstruct_weight(u: &SampledSolution, a: &PeriodicWeight, f: &Nonlinearity) -> Result<Reconstruction> {
    let g = u.grid();
    let mut max_error = 0.0f64;
    let mut nodes_used = 0;
    for (s, e) in g.panel_ranges() {
        if e - s < 2 {
            continue;
        }
        let piece = 0.5 * (g.time(s) + g.time(e));
        for i in s..=e {
            let ddu = if i == s {
                (-3.0 * u.du[s] + 4.0 * u.du[s + 1] - u.du[s + 2]) / (g.time(s + 2) - g.time(s))
            } else if i == e {
                (3.0 * u.du[e] - 4.0 * u.du[e - 1] + u.du[e - 2]) / (g.time(e) - g.time(e - 2))
            } else {
                (u.du[i + 1] - u.du[i - 1]) / (g.time(i + 1) - g.time(i - 1))
            };
            let gu = f.eval(u.u[i], 0)?;
            if gu > 1e-6 {
                let t = g.time(i);
                max_error = max_error.max((-ddu / gu - a.evaluate_within(t, piece)).abs());
                nodes_used += 1;
            }
        }
    }
    Ok(Reconstruction { max_error, nodes_used })
}
