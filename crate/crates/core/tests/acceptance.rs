//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines always show.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subharm::cli::{execute, Command, RunConfig};
use subharm::flow::{
    integrate, poincare_map, poincare_with_jacobian, quadrant_arcs, zero_count, FnField, LinearField, PlanarState, Tolerances,
};
use subharm::harmonic::{
    brown_hess_identity, find_harmonic, scan_harmonics, verify_necessary_condition, weighted_mean_check, AnnulusSearch,
    HarmonicSolution,
};
use subharm::hill::{fd_oracle, principal_eigenvalue, rotation_number, HillCoefficient};
use subharm::nonlinearity::{Nonlinearity, TruncatedField};
use subharm::subharmonic::{estimate_k_star, find_subharmonics, twist_mu, SubharmonicSearch, SubharmonicSettings, TwistReport};
use subharm::weights::PeriodicWeight;

const RHO: f64 = 300.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Shared fixture: step weight 1/-2 on T = 2, g(s) = s², ρ = 300.
struct Fixture {
    a: PeriodicWeight,
    f: Nonlinearity,
    u: Option<HarmonicSolution>,
    harmonic_time: Duration,
    twist: Option<TwistReport>,
    search: Option<SubharmonicSearch>,
    subharmonic_time: Duration,
    error: Option<String>,
    /// `(max u, f4 holds)` for every periodic solution found anywhere.
    maxima: Vec<(f64, bool)>,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            a: PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)]).unwrap(),
            f: Nonlinearity::power(2.0).unwrap(),
            u: None,
            harmonic_time: Duration::ZERO,
            twist: None,
            search: None,
            subharmonic_time: Duration::ZERO,
            error: None,
            maxima: Vec::new(),
        }
    }

    fn f4(&self, a: &PeriodicWeight) -> bool {
        self.f.check_f4(RHO, &a.apriori_constants(None).unwrap()).unwrap()
    }
}

fn random_trig(rng: &mut ChaCha8Rng, modes: usize) -> Vec<(f64, f64, f64)> {
    (1..=modes).map(|m| (m as f64, rng.gen_range(-2.0..2.0), rng.gen_range(0.0..2.0 * PI))).collect()
}

fn trig_eval(terms: &[(f64, f64, f64)], t: f64) -> f64 {
    terms.iter().map(|&(m, c, p)| c * (2.0 * PI * m * t + p).cos()).sum()
}

fn random_step(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> PeriodicWeight {
    let n = rng.gen_range(2..5);
    let mut starts: Vec<f64> = (1..n).map(|_| rng.gen_range(0.05..0.95)).collect();
    starts.sort_by(f64::total_cmp);
    starts.insert(0, 0.0);
    let steps: Vec<(f64, f64)> = starts.iter().map(|&s| (s, rng.gen_range(lo..hi))).collect();
    PeriodicWeight::step(1.0, &steps).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut qs: Vec<HillCoefficient> = [-2.0, -0.3, 0.0, 0.8, 5.0, 30.0].iter().map(|&c| HillCoefficient::constant(1.0, c)).collect();
    for _ in 0..7 {
        let terms = random_trig(&mut rng, 3);
        let c = rng.gen_range(-1.0..1.0);
        qs.push(HillCoefficient::from_fn(1.0, Vec::new(), move |t, _| c + trig_eval(&terms, t)));
    }
    for _ in 0..7 {
        qs.push(HillCoefficient::from_weight(&random_step(&mut rng, -4.0, 6.0)));
    }
    let mut worst_fd = 0.0f64;
    let mut worst_shift = 0.0f64;
    for q in &qs {
        let (Ok(l), Ok(fd)) = (principal_eigenvalue(q), fd_oracle(q, 4096)) else {
            return outcome(false, "eigenvalue computation failed".into());
        };
        worst_fd = worst_fd.max((l - fd).abs());
        for c in [-1.5, 0.25, 2.0] {
            let ls = principal_eigenvalue(&q.with_offset(c)).unwrap();
            worst_shift = worst_shift.max((ls - (l - c)).abs());
        }
    }
    let t = start.elapsed();
    outcome(
        qs.len() == 20 && worst_fd <= 1e-4 && worst_shift <= 1e-8 && t.as_secs_f64() <= 60.0,
        format!("{} coefficients, max |λ0 - oracle| = {worst_fd:.2e}, max shift defect = {worst_shift:.2e}, {:.1} s", qs.len(), t.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pos_ok = 0;
    let mut nonpos_ok = 0;
    let mut rot_checked = 0;
    let mut rot_bad = Vec::new();
    let band = 1e-6;
    let mut check_rot = |q: &HillCoefficient, l0: f64, rot_bad: &mut Vec<f64>| {
        if l0.abs() > band {
            rot_checked += 1;
            let r = rotation_number(q).unwrap().rotation;
            if (r > 0.0) != (l0 < 0.0) {
                rot_bad.push(l0);
            }
        }
    };
    for i in 0..50 {
        // Positive mean: a random trig or step shape plus a positive offset.
        let q = if i % 2 == 0 {
            let terms = random_trig(&mut rng, 3);
            let m = rng.gen_range(0.01..2.0);
            HillCoefficient::from_fn(1.0, Vec::new(), move |t, _| m + trig_eval(&terms, t))
        } else {
            let w = random_step(&mut rng, -5.0, 5.0);
            let shift = rng.gen_range(0.01..1.0) - w.mean_value();
            HillCoefficient::from_weight(&w).with_offset(shift)
        };
        assert!(q.integral() > 0.0);
        let l0 = principal_eigenvalue(&q).unwrap();
        pos_ok += (l0 < 0.0) as usize;
        check_rot(&q, l0, &mut rot_bad);
    }
    for i in 0..50 {
        let q = if i % 2 == 0 {
            let terms = random_trig(&mut rng, 2);
            let c = rng.gen_range(0.0..1.0);
            HillCoefficient::from_fn(1.0, Vec::new(), move |t, _| -c - trig_eval(&terms, t).powi(2))
        } else {
            HillCoefficient::from_weight(&random_step(&mut rng, -5.0, 0.0))
        };
        let l0 = principal_eigenvalue(&q).unwrap();
        nonpos_ok += (l0 >= -1e-10) as usize;
        check_rot(&q, l0, &mut rot_bad);
    }
    // Mixed-sign coefficients exercise both sides of the rotation criterion.
    for _ in 0..50 {
        let q = HillCoefficient::from_weight(&random_step(&mut rng, -6.0, 4.0));
        let l0 = principal_eigenvalue(&q).unwrap();
        check_rot(&q, l0, &mut rot_bad);
    }
    let t = start.elapsed();
    outcome(
        pos_ok == 50 && nonpos_ok == 50 && rot_bad.is_empty() && t.as_secs_f64() <= 120.0,
        format!(
            "positive mean → λ0 < 0: {pos_ok}/50, q ≤ 0 → λ0 ≥ -1e-10: {nonpos_ok}/50, rotation sign mismatches {}/{rot_checked}, {:.1} s",
            rot_bad.len(),
            t.as_secs_f64()
        ),
    )
}

fn criterion_3(fx: &mut Fixture) -> Outcome {
    let start = Instant::now();
    let f4 = fx.f4(&fx.a);
    match find_harmonic(&fx.a, &fx.f, RHO, &AnnulusSearch::default()) {
        Ok(u) => {
            fx.harmonic_time = start.elapsed();
            fx.maxima.push((u.sup_norm, f4));
            let pass = f4
                && u.residual <= 1e-8
                && u.min > 0.0
                && u.sup_norm < RHO
                && u.spectrum.lambda0 < -1e-8
                && fx.harmonic_time.as_secs_f64() <= 120.0;
            let d = format!(
                "cap condition {f4}, residual {:.1e}, min {:.6}, max {:.6}, λ0 = {:.7}, {:.1} s",
                u.residual,
                u.min,
                u.sup_norm,
                u.spectrum.lambda0,
                fx.harmonic_time.as_secs_f64()
            );
            fx.u = Some(u);
            outcome(pass, d)
        }
        Err(e) => {
            fx.error = Some(e.to_string());
            outcome(false, e.to_string())
        }
    }
}

fn criterion_4(fx: &Fixture) -> Outcome {
    let Some(u) = &fx.u else { return outcome(false, "no harmonic fixture".into()) };
    let (Ok(bh), Ok(wm)) = (brown_hess_identity(u, &fx.a, &fx.f), weighted_mean_check(&u.samples, &fx.a, &fx.f)) else {
        return outcome(false, "identity evaluation failed".into());
    };
    let lhs = bh.lambda0 * bh.int_v_f;
    let rel = (lhs + bh.int_v_f2_du2).abs() / lhs.abs().max(bh.int_v_f2_du2.abs());
    outcome(
        rel <= 1e-4 && wm.lhs < 0.0 && bh.lambda0 < 0.0,
        format!("relative defect {rel:.2e}, ∫ a·u^(p-1) = {:.6} < 0 while λ0 = {:.6} < 0", wm.lhs, bh.lambda0),
    )
}

fn criterion_5(fx: &mut Fixture) -> Outcome {
    let Some(u) = &fx.u else { return outcome(false, "no harmonic fixture".into()) };
    let Ok(nc) = verify_necessary_condition(&u.samples, &fx.a, &fx.f) else {
        return outcome(false, "identity evaluation failed".into());
    };
    let positive = PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -0.5)]).unwrap();
    let census = scan_harmonics(&positive, &fx.f, RHO, &AnnulusSearch::default()).unwrap();
    let f4 = fx.f4(&positive);
    fx.maxima.extend(census.solutions.iter().map(|s| (s.sup_norm, f4)));
    outcome(
        nc.relative_mismatch <= 1e-5 && census.solutions.is_empty(),
        format!(
            "sides {:.10} / {:.10} (mismatch {:.1e}); positive-mean census: {} solutions from {} seeds",
            nc.lhs,
            nc.rhs,
            nc.relative_mismatch,
            census.solutions.len(),
            census.seeds
        ),
    )
}

fn criterion_6(fx: &Fixture) -> Outcome {
    let c = fx.a.apriori_constants(Some(0.25)).unwrap();
    let capped: Vec<f64> = fx.maxima.iter().filter(|m| m.1).map(|m| m.0).collect();
    let worst = capped.iter().copied().fold(0.0, f64::max);
    outcome(
        c.m1 == 0.25 && c.m2 == 64.0 && !capped.is_empty() && worst < RHO,
        format!("M1 = {}, M2 = {}; {} solutions under the cap condition, largest max u = {worst:.6} < {RHO}", c.m1, c.m2, capped.len()),
    )
}

fn criterion_7(fx: &mut Fixture) -> Outcome {
    let Some(u) = &fx.u else { return outcome(false, "no harmonic fixture".into()) };
    let start = Instant::now();
    let field = u.shifted_field(&TruncatedField::new(fx.a.clone(), &fx.f, RHO).unwrap()).unwrap();
    let cfg = SubharmonicSettings::default();
    let run = estimate_k_star(&field, RHO, &cfg).and_then(|t| Ok((find_subharmonics(&field, t.k, 1, &t, &cfg)?, t)));
    fx.subharmonic_time = start.elapsed();
    let (search, twist) = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let f4 = fx.f4(&fx.a);
    fx.maxima.extend(search.solutions.iter().map(|s| (s.max_u, f4)));
    let each_ok = search.solutions.iter().all(|s| {
        s.zero_count == 2
            && s.zeros.len() == 2
            && s.residual <= 1e-8
            && s.minimal_period.distances.values().all(|&d| d > 1e-4)
            && s.min_u > 0.0
            && s.cap_margin > 0.0
    });
    let min_dist = search.solutions.iter().flat_map(|s| s.minimal_period.distances.values().copied()).fold(f64::INFINITY, f64::min);
    let max_res = search.solutions.iter().map(|s| s.residual).fold(0.0, f64::max);
    let d = format!(
        "k* = {}, {} classes, zeros {:?}, max residual {max_res:.1e}, min shift distance {min_dist:.4}, {:.1} s",
        twist.k,
        search.solutions.len(),
        search.solutions.iter().map(|s| s.zero_count).collect::<Vec<_>>(),
        fx.subharmonic_time.as_secs_f64()
    );
    let pass = twist.k <= 8 && search.solutions.len() >= 2 && each_ok && fx.subharmonic_time.as_secs_f64() <= 600.0;
    fx.twist = Some(twist);
    fx.search = Some(search);
    outcome(pass, d)
}

fn criterion_8(fx: &Fixture) -> Outcome {
    let Some(t) = &fx.twist else { return outcome(false, "no twist report".into()) };
    let period = fx.a.period();
    let exact = (1..=8).all(|k| twist_mu(k, period) * k as f64 * period / (2.0 * PI) <= 1.0 / 16.0)
        && t.mu == twist_mu(t.k, period);
    let radius_ok = t.min_r_mu >= 8.0 * t.k as f64 * t.b_l1 / PI;
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut arcs = 0;
    for (c, mu) in [(1.0, 1.0), (4.0, 0.1), (0.25, 10.0), (9.0, 3.0)] {
        let f = FnField::new(2.0 * PI, move |_, v| -c * v, move |_, _| -c);
        let w = quadrant_arcs(&f, [0.7, -0.2], 0.0, 4.0 * PI, mu, tol).unwrap();
        arcs += w.len();
        worst = w.iter().map(|x| (x - PI / 2.0).abs()).fold(worst, f64::max);
    }
    let step = LinearField::new(HillCoefficient::from_weight(&PeriodicWeight::step(1.0, &[(0.0, 30.0), (0.4, 5.0)]).unwrap()));
    let w = quadrant_arcs(&step, [1.0, 0.0], 0.0, 3.0, 2.0, tol).unwrap();
    arcs += w.len();
    worst = w.iter().map(|x| (x - PI / 2.0).abs()).fold(worst, f64::max);
    outcome(
        exact && radius_ok && worst <= 1e-6 && arcs > 0,
        format!(
            "μ = {:.6}, μkT/2π = {}, min r_μ = {:.2} ≥ {:.2}, {arcs} quadrant arcs within {worst:.1e} of π/2",
            t.mu,
            t.mu * t.k as f64 * period / (2.0 * PI),
            t.min_r_mu,
            t.r_mu_threshold
        ),
    )
}

fn criterion_9(fx: &Fixture) -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let osc = FnField::new(2.0 * PI, |_, u| -u, |_, _| -1.0);
    let y = poincare_map(&osc, [0.6, 0.8], 1, tol).unwrap();
    let closure = (y[0] - 0.6).abs().max((y[1] - 0.8).abs());
    let field = TruncatedField::new(fx.a.clone(), &fx.f, RHO).unwrap();
    let lin = LinearField::new(HillCoefficient::from_weight(&fx.a));
    let mut liouville = 0.0f64;
    let mut semigroup = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let x = [rng.gen_range(0.9..2.2), rng.gen_range(-1.5..1.5)];
        liouville = liouville.max((poincare_with_jacobian(&lin, x, 1, tol).unwrap().det() - 1.0).abs());
        liouville = liouville.max((poincare_with_jacobian(&field, x, 1, tol).unwrap().det() - 1.0).abs());
        let two = poincare_map(&field, x, 2, tol).unwrap();
        let twice = poincare_map(&field, poincare_map(&field, x, 1, tol).unwrap(), 1, tol).unwrap();
        semigroup = semigroup.max((two[0] - twice[0]).abs().max((two[1] - twice[1]).abs()));
    }
    let mut zeros_exact = true;
    for n in 1..=5usize {
        let w2 = (n * n) as f64;
        let f = FnField::new(2.0 * PI, move |_, u| -w2 * u, move |_, _| -w2);
        let tr = integrate(&f, PlanarState::new(0.0, 1.0, 0.0), 2.0 * PI, tol).unwrap();
        let z = zero_count(&tr, None).unwrap();
        let expected: Vec<f64> = (0..2 * n).map(|i| (i as f64 + 0.5) * PI / n as f64).collect();
        zeros_exact &= z.count == 2 * n && z.zeros.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-8);
    }
    let t = start.elapsed();
    outcome(
        closure <= 1e-8 && liouville <= 1e-9 && semigroup <= 2e-8 && zeros_exact && t.as_secs_f64() <= 30.0,
        format!(
            "period closure {closure:.1e}, |det - 1| ≤ {liouville:.1e}, semigroup {semigroup:.1e}, zero counts exact: {zeros_exact}, {:.2} s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut cfg = RunConfig::step_fixture();
    cfg.harmonic.grid = 16;
    cfg.seed = Some(2024);
    cfg.apply_flags(None, None).unwrap();
    let run = |c: Command| execute(c, &cfg, None).and_then(|m| m.certified_json());
    let mut same = true;
    let mut details = Vec::new();
    for c in [Command::Harmonic, Command::Subharmonic] {
        match (run(c), run(c)) {
            (Ok(a), Ok(b)) => {
                same &= a == b;
                details.push(format!("{c:?}: {}", if a == b { "identical" } else { "differs" }));
            }
            (Err(e), _) | (_, Err(e)) => {
                same = false;
                details.push(format!("{c:?}: {e}"));
            }
        }
    }
    outcome(same, details.join(", "))
}

fn main() {
    let mut fx = Fixture::new();
    // Criterion 6 inspects every solution found, so it runs after 7.
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "spectral oracle equivalence", criterion_1()),
        (2, "sign criteria for λ0 and rotation", criterion_2()),
        (3, "harmonic stage on the fixture", criterion_3(&mut fx)),
        (4, "eigenfunction identity and weighted mean", criterion_4(&fx)),
        (5, "necessary condition and positive-mean census", criterion_5(&mut fx)),
        (7, "subharmonic pair at k*", criterion_7(&mut fx)),
        (6, "a-priori constants and cap", criterion_6(&fx)),
        (8, "twist constants", criterion_8(&fx)),
        (9, "flow correctness", criterion_9(&fx)),
        (10, "determinism", criterion_10()),
    ];
    results.sort_by_key(|r| r.0);
    if let Some(e) = &fx.error {
        println!("fixture error: {e}");
    }

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n:2} {:4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.pass) as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
