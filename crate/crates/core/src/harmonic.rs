//! Positive T-periodic solutions: a seeded Newton census over an annulus of
//! initial states, Morse-index certificates and integral identities.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Tolerances;
use crate::hill::{principal_eigenfunction, spectral_summary, HillCoefficient, SpectralSummary};
use crate::newton::{self, NewtonSettings};
use crate::nonlinearity::{Family, LinearExtension, Nonlinearity, ShiftedField, TruncatedField};
use crate::samples::{PeriodicOrbit, SampleGrid, SampledSolution, DEFAULT_DENSITY};
use crate::weights::{AprioriConstants, PeriodicWeight};

/// Seeds closer than this (relative) are treated as the same Newton limit.
const STATE_MERGE: f64 = 1e-7;
/// Solutions closer than this in sup norm are identified.
pub const DEDUP_TOL: f64 = 1e-5;
/// Largest accepted fixed-point residual.
pub const RESIDUAL_MAX: f64 = 1e-8;
/// Margin for the Morse certificate `λ₀ < -margin`.
pub const LAMBDA0_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnulusSearch {
    /// Inner radius `r`; defaults to `1e-3·ρ`.
    pub inner_radius: Option<f64>,
    /// Seeds per axis.
    pub grid: usize,
    pub newton: NewtonSettings,
    /// Enables a reproducible random perturbation of the seed grid.
    pub jitter_seed: Option<u64>,
    pub tol: Tolerances,
    /// Sample intervals per unit time.
    pub density: f64,
    /// Cells for the finite-difference cross-check of `λ₀`; `None` skips it.
    pub oracle_n: Option<usize>,
}

impl Default for AnnulusSearch {
    fn default() -> Self {
        AnnulusSearch {
            inner_radius: None,
            grid: 64,
            newton: NewtonSettings::default(),
            jitter_seed: None,
            tol: Tolerances::default(),
            density: DEFAULT_DENSITY,
            oracle_n: Some(2048),
        }
    }
}

impl AnnulusSearch {
    pub fn inner(&self, rho: f64) -> Result<f64> {
        let r = self.inner_radius.unwrap_or(1e-3 * rho);
        if !(r > 0.0 && r < rho) {
            return Err(Error::Precondition(format!("annulus needs 0 < r < rho, got r = {r}, rho = {rho}")));
        }
        Ok(r)
    }

    /// Initial states: `u₀` geometric on `[r, ρ]`, `u₀'` signed-geometric on
    /// `±[r/ε, ρ/ε]`.
    pub fn seeds(&self, r: f64, rho: f64, epsilon: f64) -> Vec<[f64; 2]> {
        let n = self.grid.max(2);
        let geo = |lo: f64, hi: f64, m: usize, i: usize| {
            if m == 1 {
                (lo * hi).sqrt()
            } else {
                lo * (hi / lo).powf(i as f64 / (m - 1) as f64)
            }
        };
        let us: Vec<f64> = (0..n).map(|i| geo(r, rho, n, i)).collect();
        let half = n / 2;
        let mut dus: Vec<f64> = (0..half).map(|i| -geo(r / epsilon, rho / epsilon, half, half - 1 - i)).collect();
        dus.extend((0..n - half).map(|i| geo(r / epsilon, rho / epsilon, n - half, i)));
        let mut seeds: Vec<[f64; 2]> = us.iter().flat_map(|&u| dus.iter().map(move |&d| [u, d])).collect();
        if let Some(s) = self.jitter_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let lu = (rho / r).ln() / n as f64;
            let ld = (rho / r).ln() / half.max(1) as f64;
            for x in seeds.iter_mut() {
                x[0] *= (lu * rng.gen_range(-0.5..0.5)).exp();
                x[1] *= (ld * rng.gen_range(-0.5..0.5)).exp();
                x[0] = x[0].clamp(r, rho);
            }
        }
        seeds
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicSolution {
    pub initial_state: [f64; 2],
    pub sup_norm: f64,
    pub min: f64,
    /// `‖P(x) - x‖∞`.
    pub residual: f64,
    pub newton_iterations: usize,
    /// Spectrum of `q = a·f'(u*)`.
    pub spectrum: SpectralSummary,
    #[serde(skip)]
    pub samples: SampledSolution,
    #[serde(skip)]
    pub orbit: Arc<PeriodicOrbit>,
}

impl HarmonicSolution {
    /// `h*` around this solution.
    pub fn shifted_field(&self, field: &TruncatedField) -> Result<ShiftedField> {
        field.truncate_field(self.orbit.clone())
    }

    pub fn is_certified(&self) -> bool {
        self.spectrum.lambda0 < -LAMBDA0_MARGIN
    }
}

/// All distinct positive fixed points found by the census plus diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct HarmonicCensus {
    pub rho: f64,
    pub inner_radius: f64,
    pub constants: AprioriConstants,
    /// Whether the cap satisfies the a-priori growth condition.
    pub f4_holds: bool,
    /// Lower bound for the homotopy parameter that rules out solutions.
    pub nu0_bound: f64,
    pub mean_value: f64,
    pub seeds: usize,
    pub converged: usize,
    pub rejected_nonpositive: usize,
    pub rejected_cap: usize,
    /// Fixed points with sup norm at most `r`, i.e. in the trivial basin.
    pub rejected_inner: usize,
    pub rejected_residual: usize,
    pub solutions: Vec<HarmonicSolution>,
}

impl HarmonicCensus {
    pub(crate) fn diagnostic(&self) -> String {
        let mut m = format!(
            "no positive periodic solution among {} seeds ({} converged, {} non-positive, {} inside the inner radius, {} at or above the cap, {} with large residual)",
            self.seeds, self.converged, self.rejected_nonpositive, self.rejected_inner, self.rejected_cap, self.rejected_residual
        );
        if self.mean_value >= 0.0 {
            m.push_str(&format!(
                "; the weight has mean {:.6e} >= 0, but any positive periodic solution forces a negative mean",
                self.mean_value
            ));
        }
        m
    }
}

/// `q(t) = a(t)·f̂'(u(t))`.
pub fn linearization(a: &PeriodicWeight, ext: &LinearExtension, orbit: &Arc<PeriodicOrbit>) -> HillCoefficient {
    let ext = ext.clone();
    let o = orbit.clone();
    HillCoefficient::weighted(a, move |t| ext.deriv(o.eval(t).0))
}

fn nu0_bound(a: &PeriodicWeight, f: &Nonlinearity, rho: f64, constants_len: f64) -> f64 {
    let fmax = (0..=1000)
        .map(|i| f.eval(rho * i as f64 / 1000.0, 0).unwrap_or(f64::NAN))
        .fold(0.0f64, |m, v| if v.is_nan() { m } else { m.max(v) });
    a.l1_norm() * fmax / constants_len
}

/// Every distinct positive T-periodic solution reached from the seed grid.
pub fn scan_harmonics(a: &PeriodicWeight, f: &Nonlinearity, rho: f64, cfg: &AnnulusSearch) -> Result<HarmonicCensus> {
    let decomposition = a
        .positivity_decomposition()
        .map_err(|e| Error::HypothesisViolation(format!("weight has no positive part: {e}")))?;
    let constants = a.apriori_constants(None)?;
    let r = cfg.inner(rho)?;
    let f4_holds = f.check_f4(rho, &constants)?;
    if !f4_holds {
        log::warn!("cap rho = {rho} does not satisfy f(M1 rho)/(M1 rho) > M2 = {}", constants.m2);
    }
    let field = TruncatedField::new(a.clone(), f, rho)?;
    let period = a.period();
    let seeds = cfg.seeds(r, rho, constants.epsilon);

    let limits: Vec<Option<newton::FixedPoint>> =
        seeds.par_iter().map(|&x| newton::fixed_point(&field, x, 1, &cfg.newton, cfg.tol).ok()).collect();
    let converged: Vec<newton::FixedPoint> = limits.into_iter().flatten().collect();

    // Merge identical Newton limits before the more expensive checks.
    let mut distinct: Vec<newton::FixedPoint> = Vec::new();
    for p in &converged {
        let scale = 1.0 + p.x[0].abs().max(p.x[1].abs());
        if !distinct.iter().any(|q| (q.x[0] - p.x[0]).abs().max((q.x[1] - p.x[1]).abs()) <= STATE_MERGE * scale) {
            distinct.push(*p);
        }
    }

    let grid = Arc::new(SampleGrid::new(period, &a.breakpoints(0.0, period), cfg.density));
    let mut census = HarmonicCensus {
        rho,
        inner_radius: r,
        constants,
        f4_holds,
        nu0_bound: nu0_bound(a, f, rho, decomposition.total_len()),
        mean_value: a.mean_value(),
        seeds: seeds.len(),
        converged: converged.len(),
        rejected_nonpositive: 0,
        rejected_cap: 0,
        rejected_inner: 0,
        rejected_residual: 0,
        solutions: Vec::new(),
    };

    let mut candidates = Vec::new();
    for p in distinct {
        if p.x[0] <= 0.0 {
            census.rejected_nonpositive += 1;
            continue;
        }
        let orbit = PeriodicOrbit::from_field(&field, p.x, &grid, cfg.tol)?;
        let samples = orbit.sample(grid.clone());
        if !(samples.min() > 0.0 && orbit.min() > 0.0) {
            census.rejected_nonpositive += 1;
            continue;
        }
        if !(samples.max() < rho) {
            census.rejected_cap += 1;
            continue;
        }
        if samples.max() <= r {
            census.rejected_inner += 1;
            continue;
        }
        let res = newton::residual(&field, p.x, 1, cfg.tol)?;
        if res > RESIDUAL_MAX {
            census.rejected_residual += 1;
            continue;
        }
        candidates.push((p, res, Arc::new(orbit), samples));
    }
    candidates.sort_by(|x, y| x.3.max().total_cmp(&y.3.max()).then(x.0.x[0].total_cmp(&y.0.x[0])));

    let mut kept: Vec<(newton::FixedPoint, f64, Arc<PeriodicOrbit>, SampledSolution)> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| k.3.sup_distance(&c.3, 0) > DEDUP_TOL) {
            kept.push(c);
        }
    }

    for (p, res, orbit, samples) in kept {
        let q = linearization(a, &field.ext, &orbit);
        let spectrum = spectral_summary(&q, cfg.oracle_n)?;
        census.solutions.push(HarmonicSolution {
            initial_state: p.x,
            sup_norm: samples.max(),
            min: samples.min(),
            residual: res,
            newton_iterations: p.iterations,
            spectrum,
            samples,
            orbit,
        });
    }
    Ok(census)
}

/// The census plus its smallest certified solution.
pub fn find_harmonic_with_census(
    a: &PeriodicWeight,
    f: &Nonlinearity,
    rho: f64,
    cfg: &AnnulusSearch,
) -> Result<(HarmonicSolution, HarmonicCensus)> {
    let census = scan_harmonics(a, f, rho, cfg)?;
    let Some(best) = census.solutions.first() else {
        return Err(Error::NotFound(census.diagnostic()));
    };
    if !best.is_certified() {
        return Err(Error::CertificateFailed { lambda0: best.spectrum.lambda0 });
    }
    Ok((best.clone(), census))
}

/// The positive T-periodic solution of smallest sup norm, with its Morse
/// certificate.
pub fn find_harmonic(a: &PeriodicWeight, f: &Nonlinearity, rho: f64, cfg: &AnnulusSearch) -> Result<HarmonicSolution> {
    find_harmonic_with_census(a, f, rho, cfg).map(|(s, _)| s)
}

/// Recomputes the spectral summary of `a·f'(u)` and checks `λ₀ < 0`.
pub fn morse_certificate(u: &HarmonicSolution, a: &PeriodicWeight, f: &Nonlinearity, oracle_n: Option<usize>) -> Result<SpectralSummary> {
    let ext = f.extend_linear(u.sup_norm)?;
    let s = spectral_summary(&linearization(a, &ext, &u.orbit), oracle_n)?;
    if s.lambda0 >= -LAMBDA0_MARGIN {
        return Err(Error::CertificateFailed { lambda0: s.lambda0 });
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`.
    pub relative_mismatch: f64,
}

impl IdentityReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        let den = lhs.abs().max(rhs.abs());
        let relative_mismatch = if den == 0.0 { 0.0 } else { (lhs - rhs).abs() / den };
        IdentityReport { lhs, rhs, relative_mismatch }
    }
}

fn power_exponent(f: &Nonlinearity) -> Result<f64> {
    match f.family() {
        Family::Power { p } => Ok(*p),
        other => Err(Error::Precondition(format!("identity needs a power nonlinearity, got {other:?}"))),
    }
}

/// Mean-value identity for `g = λ s^p`: `λ ∫a = -p ∫ u'² / u^{p+1}` over the
/// sampled window. The left side is negative for any genuine solution.
pub fn verify_necessary_condition(u: &SampledSolution, a: &PeriodicWeight, f: &Nonlinearity) -> Result<IdentityReport> {
    let p = power_exponent(f)?;
    let min = u.min();
    if !(min > 0.0) {
        return Err(Error::NotPositive { min });
    }
    let k = u.periods() as f64;
    let lhs = f.scale() * k * a.integral(0.0, a.period());
    let rhs = -p * u.grid().integrate(|i, _, _| u.du[i] * u.du[i] / u.u[i].powf(p + 1.0));
    Ok(IdentityReport::new(lhs, rhs))
}

/// `∫ a u^{p-1}` computed directly and from `-(1/λ) ∫ (u'/u)²`.
pub fn weighted_mean_check(u: &SampledSolution, a: &PeriodicWeight, f: &Nonlinearity) -> Result<IdentityReport> {
    let p = power_exponent(f)?;
    let min = u.min();
    if !(min > 0.0) {
        return Err(Error::NotPositive { min });
    }
    let g = u.grid();
    let direct = g.integrate(|i, t, piece| a.evaluate_within(t, piece) * u.u[i].powf(p - 1.0));
    let via = -g.integrate(|i, _, _| (u.du[i] / u.u[i]).powi(2)) / f.scale();
    Ok(IdentityReport::new(direct, via))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownHessReport {
    pub lambda0: f64,
    /// `∫ v f(u)`.
    pub int_v_f: f64,
    /// `∫ v f''(u) u'²`.
    pub int_v_f2_du2: f64,
    /// `|λ₀ ∫ v f(u) + ∫ v f''(u) u'²|` relative to the larger term.
    pub residual: f64,
    /// `-∫ v f'' u'² / ∫ v f(u)`.
    pub lambda0_from_ratio: f64,
}

/// Checks `λ₀ ∫ v f(u) = -∫ v f''(u) u'²` with `v` the principal eigenfunction
/// of `a·f'(u)`.
pub fn brown_hess_identity(u: &HarmonicSolution, a: &PeriodicWeight, f: &Nonlinearity) -> Result<BrownHessReport> {
    let ext = f.extend_linear(u.sup_norm)?;
    let q = linearization(a, &ext, &u.orbit);
    let lambda0 = u.spectrum.lambda0;
    let v = principal_eigenfunction(&q, lambda0, u.samples.grid().clone())?;
    let g = u.samples.grid();
    let s = &u.samples;
    let int_v_f = g.integrate(|i, _, _| v.u[i] * ext.value(s.u[i]));
    let int_v_f2_du2 = g.integrate(|i, _, _| v.u[i] * ext.deriv2(s.u[i]) * s.du[i] * s.du[i]);
    let a1 = lambda0 * int_v_f;
    let den = a1.abs().max(int_v_f2_du2.abs());
    Ok(BrownHessReport {
        lambda0,
        int_v_f,
        int_v_f2_du2,
        residual: if den == 0.0 { 0.0 } else { (a1 + int_v_f2_du2).abs() / den },
        lambda0_from_ratio: -int_v_f2_du2 / int_v_f,
    })
}
