//! Principal periodic eigenvalue, Morse index and rotation number of Hill
//! equations, with the finite-difference cross-check.
//!
//! Run with: cargo run --example hill_spectrum

use std::f64::consts::PI;

use subharm::hill::{fd_oracle, morse_index, principal_eigenvalue, rotation_number, spectral_summary, HillCoefficient};
use subharm::weights::PeriodicWeight;
use subharm::Result;

fn main() -> Result<()> {
    let cases = [
        ("constant 0.5", HillCoefficient::constant(1.0, 0.5)),
        ("constant (2π·1.3)²", HillCoefficient::constant(1.0, (2.0 * PI * 1.3).powi(2))),
        ("cos(2πt) + 0.2", HillCoefficient::from_fn(1.0, Vec::new(), |t, _| (2.0 * PI * t).cos() + 0.2)),
        ("step 1/-2", HillCoefficient::from_weight(&PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)])?)),
    ];
    for (name, q) in &cases {
        let l0 = principal_eigenvalue(q)?;
        let fd = fd_oracle(q, 4096)?;
        let rot = rotation_number(q)?;
        println!(
            "{name:20} λ0 = {l0:+.9}  oracle {fd:+.9}  Morse {}  rotation {:.6} (±{:.1e})",
            morse_index(q)?,
            rot.rotation,
            rot.error
        );
    }

    // Adding a constant shifts the whole spectrum.
    let q = &cases[2].1;
    println!("λ0(q + 1) - λ0(q) = {:.12}", principal_eigenvalue(&q.with_offset(1.0))? - principal_eigenvalue(q)?);
    println!("{:?}", spectral_summary(q, Some(1024))?);
    Ok(())
}
