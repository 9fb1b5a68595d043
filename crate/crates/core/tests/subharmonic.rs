//! Twist certification and subharmonic pairs around the step-weight fixture.

use std::f64::consts::PI;
use std::sync::OnceLock;

use subharm::flow::{winding, ClampedLinear, Tolerances};
use subharm::harmonic::{find_harmonic, AnnulusSearch};
use subharm::nonlinearity::{Nonlinearity, ShiftedField, TruncatedField};
use subharm::subharmonic::{
    estimate_k_star, find_subharmonics, minimal_period_check, periodicity_class_dedup, reconstruct_weight, search_subharmonics,
    shift_by_period, twist_analysis, twist_mu, SubharmonicSearch, SubharmonicSettings, TwistReport, CLASS_TOL,
};
use subharm::weights::PeriodicWeight;
use subharm::Error;

struct Fixture {
    a: PeriodicWeight,
    f: Nonlinearity,
    field: ShiftedField,
    twist: TwistReport,
    search: SubharmonicSearch,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let a = PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)]).unwrap();
        let f = Nonlinearity::power(2.0).unwrap();
        let u = find_harmonic(&a, &f, 300.0, &AnnulusSearch { grid: 16, ..Default::default() }).unwrap();
        let field = u.shifted_field(&TruncatedField::new(a.clone(), &f, 300.0).unwrap()).unwrap();
        let cfg = SubharmonicSettings::default();
        let twist = estimate_k_star(&field, 300.0, &cfg).unwrap();
        let search = find_subharmonics(&field, twist.k, 1, &twist, &cfg).unwrap();
        Fixture { a, f, field, twist, search }
    })
}

#[test]
fn k_star_and_twist_constants() {
    let t = &fixture().twist;
    assert!(t.k <= 8, "k* = {}", t.k);
    assert!(t.certified());
    assert_eq!(t.mu, PI / (8.0 * t.k as f64 * 2.0));
    assert!(t.mu * t.k as f64 * 2.0 / (2.0 * PI) <= 1.0 / 16.0);
    assert!((t.r_mu_threshold - 8.0 * t.k as f64 * t.b_l1 / PI).abs() < 1e-12 * t.r_mu_threshold);
    assert!(t.min_r_mu >= t.r_mu_threshold);
    assert!(t.delta_theta_in > 2.0 * PI && t.delta_theta_out < 2.0 * PI);
}

#[test]
fn orders_below_k_star_are_not_certified() {
    let fx = fixture();
    for k in 1..fx.twist.k {
        assert!(twist_analysis(&fx.field, k, 300.0, &SubharmonicSettings::default()).is_err(), "k = {k}");
    }
}

#[test]
fn pair_certificates() {
    let fx = fixture();
    let s = &fx.search;
    assert!(s.solutions.len() >= 2, "{:?}", s.class_sizes);
    for sol in &s.solutions {
        assert_eq!(sol.zero_count, 2 * sol.j);
        assert_eq!(sol.zeros.len(), 2);
        // Zero count agrees with the winding of the orbit.
        assert_eq!((sol.delta_theta / PI).round() as usize, sol.zero_count);
        assert!((sol.delta_theta - 2.0 * PI * sol.j as f64).abs() < 1e-3);
        assert!(sol.residual <= 1e-8);
        assert!(sol.min_u > 0.0 && sol.max_u < 300.0 && sol.cap_margin > 0.0);
        assert!(sol.minimal_period.distances.values().all(|&d| d > 1e-4));
        assert_eq!(minimal_period_check(&sol.samples), sol.minimal_period);
    }
}

#[test]
fn classes_are_distinct_under_shifts() {
    let s = &fixture().search;
    let samples: Vec<_> = s.solutions.iter().map(|x| x.samples.clone()).collect();
    assert_eq!(periodicity_class_dedup(&samples).len(), samples.len());
    let k = s.k;
    for l in 0..k {
        assert!(samples[0].sup_distance(&samples[1], l) > CLASS_TOL);
    }
}

#[test]
fn shift_closure() {
    let fx = fixture();
    let cfg = SubharmonicSettings::default();
    for sol in &fx.search.solutions {
        let moved = shift_by_period(&fx.field, sol, &cfg).unwrap();
        assert!(moved.residual <= 2.0 * sol.residual, "{} vs {}", moved.residual, sol.residual);
        assert_eq!(moved.zero_count, sol.zero_count);
        assert!(moved.min_u > 0.0 && moved.max_u < 300.0);
        // Same class: some shift matches the original exactly.
        let best = (0..sol.k).map(|l| moved.samples.sup_distance(&sol.samples, l)).fold(f64::INFINITY, f64::min);
        assert!(best <= CLASS_TOL, "{best}");
    }
}

#[test]
fn solutions_recover_the_weight() {
    let fx = fixture();
    for sol in &fx.search.solutions {
        let r = reconstruct_weight(&sol.samples, &fx.a, &fx.f).unwrap();
        assert!(r.max_error < 1e-3 && r.nodes_used > 100, "{r:?}");
    }
}

#[test]
fn preconditions() {
    let fx = fixture();
    let cfg = SubharmonicSettings::default();
    let k = fx.twist.k;
    // j = k shares a factor with k.
    assert!(matches!(search_subharmonics(&fx.field, k, k, &fx.twist, &cfg), Err(Error::Precondition(_))));
    // j beyond m_k.
    assert!(matches!(search_subharmonics(&fx.field, k, fx.twist.m_k + 1, &fx.twist, &cfg), Err(Error::Precondition(_))));
    assert!(matches!(twist_analysis(&fx.field, 65, 300.0, &cfg), Err(Error::KStarTooLarge { cap: 64 })));
}

#[test]
fn surrogate_twist_grows_with_k() {
    let f = ClampedLinear::with_rotation_rate(1.0, 0.45, 1.0);
    let cfg = SubharmonicSettings::default();
    let r = estimate_k_star(&f, 1e3, &cfg).unwrap();
    assert_eq!(r.k, 3);
    let mu = f.c.sqrt();
    let base = winding(&f, [1e-6, 0.0], 1, mu, Tolerances::default()).unwrap().delta_theta;
    for k in 2..6 {
        let wk = winding(&f, [1e-6, 0.0], k, mu, Tolerances::default()).unwrap().delta_theta;
        assert!((wk - k as f64 * base).abs() < 1e-3, "k = {k}");
    }
}

#[test]
fn mu_is_one_sixteenth_turn() {
    for k in 1..10 {
        for t in [0.5, 1.0, 2.0, 7.0] {
            let mu = twist_mu(k, t);
            assert!(mu * k as f64 * t / (2.0 * PI) <= 1.0 / 16.0);
        }
    }
}
