//! Positivity decomposition and a-priori constants of a periodic weight.
//!
//! Run with: cargo run --example weight_analysis

use subharm::weights::PeriodicWeight;
use subharm::Result;

fn main() -> Result<()> {
    // a = 1 on [0, 1), -2 on [1, 2), extended with period 2.
    let a = PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)])?;
    println!("integral over a period: {}", a.mean_value());
    println!("L1 norm {}, sup norm {}", a.l1_norm(), a.sup_norm());

    let dec = a.positivity_decomposition()?;
    for (i, iv) in dec.intervals.iter().enumerate() {
        println!("positive hump {i}: [{}, {}] with mass {}", iv.sigma, iv.tau, iv.mass);
    }

    let fixed = a.apriori_constants(Some(0.25))?;
    println!("epsilon = 0.25: M1 = {}, M2 = {}", fixed.m1, fixed.m2);
    let best = a.apriori_constants(None)?;
    println!("optimized epsilon = {:.4}: M1 = {:.4}, M2 = {:.4}", best.epsilon, best.m1, best.m2);

    // A smooth weight: sampled, then stored as local cubic pieces.
    let w = PeriodicWeight::interpolate(1.0, 48, |t| (2.0 * std::f64::consts::PI * t).sin() - 0.1)?;
    let d = w.positivity_decomposition()?;
    println!("trig weight: {} hump(s), integral {:.6}", d.count(), w.mean_value());

    // Shifting in time leaves every constant unchanged.
    let s = w.shifted(0.3)?;
    println!("shifted integral {:.6}, M2 {:.6} vs {:.6}", s.mean_value(), s.apriori_constants(None)?.m2, w.apriori_constants(None)?.m2);
    Ok(())
}
