//! Harmonic census across a parameter grid through the library front end.
//!
//! Run with: cargo run --release --example parameter_sweep

use subharm::cli::{cmd_sweep, RunConfig, SweepConfig, SweepParameter};
use subharm::nonlinearity::Nonlinearity;
use subharm::Result;

fn main() -> Result<()> {
    // λ f(u) with a bounded f: no solution for small λ, then a branch.
    let mut cfg = RunConfig::step_fixture();
    cfg.nonlinearity = Some(Nonlinearity::bounded_rational(2.0, 2.0)?);
    cfg.rho = Some(5.0);
    cfg.harmonic.grid = 16;
    cfg.harmonic.inner_radius = Some(1e-5);
    cfg.sweep = Some(SweepConfig { parameter: SweepParameter::Lambda, values: vec![1.0, 3.0, 10.0, 100.0, 1000.0] });
    let s = cmd_sweep(&cfg)?;
    for r in &s.rows {
        println!("lambda {:7}: {:?}, {} solution(s), sup {:?}, λ0 {:?}", r.value, r.status, r.solutions, r.sup_norm, r.lambda0);
    }
    println!("first grid point with a certified solution: {:?}", s.threshold);

    // a = q⁺ - μ q⁻: a non-negative mean rules solutions out.
    let mut cfg = RunConfig::step_fixture();
    cfg.weight = Some(subharm::weights::PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -1.0)])?);
    cfg.harmonic.grid = 32;
    cfg.sweep = Some(SweepConfig { parameter: SweepParameter::Mu, values: vec![0.5, 1.0, 2.0, 5.0] });
    for r in &cmd_sweep(&cfg)?.rows {
        println!("mu {:4}: {:?}, sup {:?}", r.value, r.status, r.sup_norm);
    }
    Ok(())
}
