//! Twist certification around the harmonic solution and a search for a pair
//! of subharmonics of order k.
//!
//! Run with: cargo run --release --example subharmonic_search

use subharm::harmonic::{find_harmonic, AnnulusSearch};
use subharm::nonlinearity::{Nonlinearity, TruncatedField};
use subharm::subharmonic::{estimate_k_star, find_subharmonics, shift_by_period, SubharmonicSettings};
use subharm::weights::PeriodicWeight;
use subharm::Result;

fn main() -> Result<()> {
    let a = PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)])?;
    let f = Nonlinearity::power(2.0)?;
    let rho = 300.0;
    let center = find_harmonic(&a, &f, rho, &AnnulusSearch { grid: 16, ..Default::default() })?;
    let field = center.shifted_field(&TruncatedField::new(a, &f, rho)?)?;

    let settings = SubharmonicSettings::default();
    let twist = estimate_k_star(&field, rho, &settings)?;
    println!(
        "k* = {}: inner winding {:.4} > 2π, outer winding {:.4} < 2π, m_k = {}",
        twist.k,
        twist.delta_theta_in,
        twist.delta_theta_out,
        twist.m_k
    );
    println!("outer radius {} gives min r_mu {:.2} >= {:.2}", twist.r_big, twist.min_r_mu, twist.r_mu_threshold);

    let search = find_subharmonics(&field, twist.k, 1, &twist, &settings)?;
    println!("{} rays, {} distinct fixed points, classes {:?}", search.rays, search.distinct_fixed_points, search.class_sizes);
    for s in &search.solutions {
        println!(
            "class {}: x = {:?}, zeros of u - u* at {:?}, min {:.4}, max {:.4}, shift distances {:?}",
            s.class,
            s.initial_state,
            s.zeros,
            s.min_u,
            s.max_u,
            s.minimal_period.distances
        );
        let moved = shift_by_period(&field, s, &settings)?;
        println!("  shifted by T: residual {:.1e}, zeros {:?}", moved.residual, moved.zeros);
    }
    Ok(())
}
