//! Finds the positive T-periodic solution of u'' + a(t) u² = 0 for a step
//! weight and certifies it.
//!
//! Run with: cargo run --release --example harmonic_solution

use subharm::harmonic::{brown_hess_identity, scan_harmonics, verify_necessary_condition, weighted_mean_check, AnnulusSearch};
use subharm::nonlinearity::Nonlinearity;
use subharm::weights::PeriodicWeight;
use subharm::Result;

fn main() -> Result<()> {
    let a = PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)])?;
    let f = Nonlinearity::power(2.0)?;
    let cfg = AnnulusSearch { grid: 16, ..Default::default() };
    let census = scan_harmonics(&a, &f, 300.0, &cfg)?;
    println!(
        "{} seeds, {} converged, {} distinct solution(s), cap condition {}",
        census.seeds,
        census.converged,
        census.solutions.len(),
        census.f4_holds
    );

    let u = census.solutions.first().expect("the fixture has a solution");
    println!("u(0) = {:.10}, u'(0) = {:.10}", u.initial_state[0], u.initial_state[1]);
    println!("min {:.6}, max {:.6}, residual {:.2e}", u.min, u.sup_norm, u.residual);
    println!(
        "λ0 = {:.8} (oracle {:?}), Morse index {}, certified: {}",
        u.spectrum.lambda0,
        u.spectrum.oracle_lambda0,
        u.spectrum.morse,
        u.is_certified()
    );

    let nc = verify_necessary_condition(&u.samples, &a, &f)?;
    println!("necessary condition: {:.10} vs {:.10}", nc.lhs, nc.rhs);
    let wm = weighted_mean_check(&u.samples, &a, &f)?;
    println!("∫ a u^(p-1) = {:.8} (negative), mismatch {:.1e}", wm.lhs, wm.relative_mismatch);
    let bh = brown_hess_identity(u, &a, &f)?;
    println!("eigenfunction identity residual {:.2e}", bh.residual);

    let mut csv = Vec::new();
    u.samples.write_csv(&mut csv)?;
    println!("{} CSV bytes (t,u,du)", csv.len());
    Ok(())
}
