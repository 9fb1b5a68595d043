//! Built-in invariant suite run by `subharm verify`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{cmd_harmonic, HarmonicSection, RunConfig, Status};
use crate::error::Result;
use crate::flow::{self, poincare_map, poincare_with_jacobian, quadrant_arcs, winding, ClampedLinear, FnField, LinearField, PlanarState, Tolerances};
use crate::hill::{fd_oracle, principal_eigenvalue, rotation_number, HillCoefficient};
use crate::nonlinearity::{Nonlinearity, TruncatedField};
use crate::subharmonic::{estimate_k_star, minimal_period_check, reconstruct_weight, search_subharmonics, twist_mu, SubharmonicSettings};
use crate::weights::PeriodicWeight;

pub const MODULES: [&str; 6] = ["weights", "nonlinearity", "flow", "hill", "harmonic", "subharmonic"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Multiplies every numeric tolerance; values below 1 tighten the suite.
    pub tolerance_scale: f64,
    /// Modules to run; empty runs all of them.
    pub modules: Vec<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { tolerance_scale: 1.0, modules: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub module: String,
    pub name: String,
    pub passed: bool,
    /// Measured defect, or 0/1 for yes/no checks.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

struct Suite {
    module: &'static str,
    scale: f64,
    out: Vec<Check>,
}

impl Suite {
    /// Passes when `value <= base_tol · scale`.
    fn within(&mut self, name: &str, r: Result<f64>, base_tol: f64) {
        let tol = base_tol * self.scale;
        let (value, passed, detail) = match r {
            Ok(v) => (v, v.is_finite() && v <= tol, format!("value {v:.3e}, tolerance {tol:.1e}")),
            Err(e) => (f64::NAN, false, e.to_string()),
        };
        self.push(name, passed, value, tol, detail);
    }

    fn flag(&mut self, name: &str, r: Result<bool>, detail: impl FnOnce() -> String) {
        let (passed, detail) = match r {
            Ok(b) => (b, detail()),
            Err(e) => (false, e.to_string()),
        };
        self.push(name, passed, if passed { 0.0 } else { 1.0 }, 0.0, detail);
    }

    fn push(&mut self, name: &str, passed: bool, value: f64, tolerance: f64, detail: String) {
        self.out.push(Check { module: self.module.into(), name: name.into(), passed, value, tolerance, detail });
    }
}

fn step(hi: f64, lo: f64) -> PeriodicWeight {
    PeriodicWeight::step(2.0, &[(0.0, hi), (1.0, lo)]).expect("valid step weight")
}

fn trig_weight() -> PeriodicWeight {
    PeriodicWeight::interpolate(1.0, 64, |t| (2.0 * PI * t).sin() + 0.3 * (4.0 * PI * t).cos() - 0.2).expect("valid weight")
}

fn oscillator(period: f64, c: f64) -> FnField {
    FnField::new(period, move |_, v| -c * v, move |_, _| -c)
}

fn weights(s: &mut Suite) {
    let a = step(1.0, -2.0);
    s.within(
        "step_constants",
        a.apriori_constants(Some(0.25)).map(|c| (c.m1 - 0.25).abs().max((c.m2 - 64.0).abs() / 64.0)),
        1e-12,
    );
    s.within("step_integral", Ok((a.mean_value() + 1.0).abs()), 1e-14);
    let w = trig_weight();
    s.within(
        "decomposition_mass",
        w.positivity_decomposition().map(|d| {
            let mass: f64 = d.intervals.iter().map(|i| w.integral(i.sigma, i.tau)).sum();
            (mass - w.integrate_parts(0.0, 1.0).0).abs()
        }),
        1e-10,
    );
    s.within(
        "shift_invariance",
        w.shifted(0.37).and_then(|v| {
            let (c0, c1) = (w.apriori_constants(None)?, v.apriori_constants(None)?);
            Ok(((w.mean_value() - v.mean_value()).abs()).max((c0.m2 - c1.m2).abs() / c0.m2))
        }),
        1e-9,
    );
}

fn nonlinearity(s: &mut Suite) {
    let p = Nonlinearity::power(2.5).expect("valid power");
    let rep = p.check_hypotheses();
    s.flag("power_hypotheses", Ok(rep.all_pass()), || format!("{rep:?}"));
    let b = Nonlinearity::bounded_rational(2.0, 2.0).expect("valid rational");
    s.flag("bounded_rational_convexity_fails", Ok(!b.check_hypotheses().g3), || "g3 fails as expected".into());
    let fd = (|| -> Result<f64> {
        let mut worst = 0.0f64;
        for x in [0.5, 1.0, 2.0, 5.0] {
            let h = 1e-5 * x;
            let d = (p.eval(x + h, 0)? - p.eval(x - h, 0)?) / (2.0 * h);
            worst = worst.max((d - p.eval(x, 1)?).abs() / p.eval(x, 1)?.abs());
        }
        Ok(worst)
    })();
    s.within("derivative_consistency", fd, 1e-8);
    s.within(
        "extension_c1",
        p.extend_linear(10.0).map(|e| {
            let h = 1e-9;
            ((e.value(10.0 + h) - e.value(10.0 - h)).abs()).max((e.deriv(10.0 + h) - e.deriv(10.0 - h)).abs() / e.deriv(10.0))
        }),
        1e-6,
    );
}

fn flow_checks(s: &mut Suite) {
    let tol = Tolerances::default();
    let osc = oscillator(2.0 * PI, 1.0);
    s.within(
        "oscillator_closure",
        poincare_map(&osc, [0.3, -0.7], 1, tol).map(|y| (y[0] - 0.3).abs().max((y[1] + 0.7).abs())),
        1e-8,
    );
    let lin = LinearField::new(HillCoefficient::from_weight(&step(1.0, -2.0)));
    s.within("liouville", poincare_with_jacobian(&lin, [1.0, 0.5], 1, tol).map(|m| (m.det() - 1.0).abs()), 1e-9);
    let a = TruncatedField::new(step(1.0, -2.0), &Nonlinearity::power(2.0).expect("valid power"), 300.0).expect("valid field");
    s.within(
        "semigroup",
        (|| -> Result<f64> {
            let x = [1.4, 1.5];
            let y2 = poincare_map(&a, x, 2, tol)?;
            let y11 = poincare_map(&a, poincare_map(&a, x, 1, tol)?, 1, tol)?;
            Ok((y2[0] - y11[0]).abs().max((y2[1] - y11[1]).abs()))
        })(),
        2e-8,
    );
    s.flag(
        "zero_count",
        flow::integrate(&osc, PlanarState::new(0.0, 1.0, 0.0), 2.0 * PI, tol).and_then(|t| flow::zero_count(&t, None)).map(|z| z.count == 2),
        || "cos t has two zeros per period".into(),
    );
    let mu = 10.0;
    s.within(
        "quadrant_arcs",
        quadrant_arcs(&oscillator(1.0, mu * mu), [1.0, 0.0], 0.0, 1.0, mu, tol)
            .map(|arcs| arcs.iter().map(|w| (w - PI / 2.0).abs()).fold(0.0, f64::max)),
        1e-6,
    );
    s.within(
        "winding_closed_form",
        winding(&oscillator(PI, 4.0), [0.2, 0.1], 1, 2.0, tol).map(|w| (w.delta_theta - 2.0 * PI).abs()),
        1e-8,
    );
}

fn hill(s: &mut Suite) {
    s.within("constant_lambda0", principal_eigenvalue(&HillCoefficient::constant(1.0, 0.7)).map(|l| (l + 0.7).abs()), 1e-8);
    let q = HillCoefficient::from_weight(&trig_weight());
    s.within(
        "oracle_agreement",
        principal_eigenvalue(&q).and_then(|l| Ok((l - fd_oracle(&q, 1024)?).abs())),
        1e-4,
    );
    s.within(
        "shift_identity",
        principal_eigenvalue(&q).and_then(|l| Ok((principal_eigenvalue(&q.with_offset(0.4))? - (l - 0.4)).abs())),
        1e-8,
    );
    let pos = HillCoefficient::from_weight(&step(1.0, -0.5));
    s.flag("positive_mean_negative_lambda0", principal_eigenvalue(&pos).map(|l| l < 0.0), || "integral 0.5 > 0".into());
    let c = (2.0 * PI * 0.3).powi(2);
    s.within("rotation_closed_form", rotation_number(&HillCoefficient::constant(1.0, c)).map(|r| (r.rotation - 0.3).abs()), 1e-8);
}

fn fixture() -> &'static (RunConfig, Result<HarmonicSection>) {
    static F: OnceLock<(RunConfig, Result<HarmonicSection>)> = OnceLock::new();
    F.get_or_init(|| {
        let mut cfg = RunConfig::step_fixture();
        cfg.harmonic.grid = 16;
        let h = cmd_harmonic(&cfg, None);
        (cfg, h)
    })
}

fn harmonic(s: &mut Suite) {
    let (_, h) = fixture();
    let h = match h {
        Ok(h) => h,
        Err(e) => {
            s.flag("fixture_found", Err(crate::Error::NotFound(e.to_string())), String::new);
            return;
        }
    };
    s.flag("fixture_found", Ok(h.status == Status::Found), || format!("{:?}", h.status));
    let (Some(u), Some(c)) = (h.census.solutions.first(), h.checks.first()) else { return };
    s.within("fixture_residual", Ok(u.residual), 1e-8);
    s.flag("fixture_positive", Ok(u.min > 0.0 && u.sup_norm < h.census.rho), || format!("min {:.6}, max {:.6}", u.min, u.sup_norm));
    s.within("recurrence_3t", Ok(c.recurrence_3t), 1e-7);
    s.within(
        "lambda0_oracle",
        Ok(u.spectrum.oracle_lambda0.map_or(f64::INFINITY, |o| (o - u.spectrum.lambda0).abs())),
        1e-4,
    );
    s.within("necessary_condition", Ok(c.necessary_condition.map_or(f64::INFINITY, |r| r.relative_mismatch)), 1e-6);
    s.within("brown_hess", Ok(c.brown_hess.map_or(f64::INFINITY, |r| r.residual.abs())), 1e-6);
    let mut cfg = RunConfig::step_fixture();
    cfg.weight = Some(step(1.0, -0.5));
    cfg.harmonic.grid = 8;
    s.flag("positive_mean_obstruction", cmd_harmonic(&cfg, None).map(|h| h.census.solutions.is_empty()), || "no solutions".into());
}

fn subharmonic(s: &mut Suite) {
    s.within("mu_choice", Ok((twist_mu(3, 2.0) - PI / 48.0).abs()), 1e-15);
    let cfg = SubharmonicSettings::default();
    s.flag(
        "surrogate_k_star",
        estimate_k_star(&ClampedLinear::with_rotation_rate(1.0, 0.6, 1.0), 1e3, &cfg).map(|r| r.k == 2),
        || "rotation 0.6 needs k = 2".into(),
    );
    let (run, h) = fixture();
    let Some(u) = h.as_ref().ok().and_then(|h| h.census.solutions.first()) else {
        s.flag("fixture_pair", Ok(false), || "no harmonic fixture".into());
        return;
    };
    let result = (|| -> Result<_> {
        let a = run.weight()?;
        let f = run.nonlinearity()?;
        let field = u.shifted_field(&TruncatedField::new(a.clone(), f, run.rho()?)?)?;
        let settings = SubharmonicSettings { rays: 32, ..run.subharmonic.settings };
        let twist = estimate_k_star(&field, run.rho()?, &settings)?;
        let search = search_subharmonics(&field, twist.k, 1, &twist, &settings)?;
        let recon = search.solutions.iter().map(|x| reconstruct_weight(&x.samples, a, f)).collect::<Result<Vec<_>>>()?;
        Ok((twist, search, recon))
    })();
    let (twist, search, recon) = match result {
        Ok(r) => r,
        Err(e) => {
            s.flag("fixture_pair", Err(e), String::new);
            return;
        }
    };
    s.flag("outer_radius", Ok(twist.min_r_mu >= twist.r_mu_threshold), || format!("{:.3} >= {:.3}", twist.min_r_mu, twist.r_mu_threshold));
    s.flag("fixture_pair", Ok(search.solutions.len() >= 2), || format!("k = {}, classes {:?}", twist.k, search.class_sizes));
    s.flag("zero_count", Ok(search.solutions.iter().all(|x| x.zero_count == 2)), || "2j zeros per solution".into());
    s.flag(
        "minimal_period",
        Ok(search.solutions.iter().all(|x| minimal_period_check(&x.samples).minimal)),
        || "no shorter period".into(),
    );
    s.within("residual", Ok(search.solutions.iter().map(|x| x.residual).fold(0.0, f64::max)), 1e-8);
    s.within("weight_reconstruction", Ok(recon.iter().map(|r| r.max_error).fold(0.0, f64::max)), 1e-3);
}

/// Runs the selected modules in a fixed order.
pub fn run_checks(cfg: &VerifyConfig) -> Vec<Check> {
    let mut out = Vec::new();
    for m in MODULES {
        if !cfg.modules.is_empty() && !cfg.modules.iter().any(|x| x == m) {
            continue;
        }
        let mut s = Suite { module: m, scale: cfg.tolerance_scale, out: Vec::new() };
        match m {
            "weights" => weights(&mut s),
            "nonlinearity" => nonlinearity(&mut s),
            "flow" => flow_checks(&mut s),
            "hill" => hill(&mut s),
            "harmonic" => harmonic(&mut s),
            _ => subharmonic(&mut s),
        }
        out.extend(s.out);
    }
    out
}
