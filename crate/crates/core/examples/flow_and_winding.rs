//! Trajectories, Poincaré maps with Jacobians, zero counting and windings.
//!
//! Run with: cargo run --example flow_and_winding

use std::f64::consts::PI;

use subharm::flow::{integrate, poincare_with_jacobian, quadrant_arcs, winding, zero_count, FnField, PlanarState, Tolerances};
use subharm::nonlinearity::{Nonlinearity, TruncatedField};
use subharm::weights::PeriodicWeight;
use subharm::Result;

fn main() -> Result<()> {
    let tol = Tolerances::default();

    // u'' + 4u = 0 over one period T = π: the orbit makes one full turn.
    let osc = FnField::new(PI, |_, u| -4.0 * u, |_, _| -4.0);
    let traj = integrate(&osc, PlanarState::new(0.0, 1.0, 0.0), PI, tol)?;
    println!("end state {:?}, steps {}", traj.end().point(), traj.steps().len());
    println!("zeros {:?}", zero_count(&traj, None)?.zeros);
    let w = winding(&osc, [1.0, 0.0], 1, 2.0, tol)?;
    println!("winding with mu = 2: {:.12} ({:.6} turns)", w.delta_theta, w.delta_theta / (2.0 * PI));
    println!("quadrant arcs {:?}", quadrant_arcs(&osc, [1.0, 0.0], 0.0, PI, 2.0, tol)?);

    // The indefinite-weight field: area-preserving Poincaré map.
    let a = PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)])?;
    let field = TruncatedField::new(a, &Nonlinearity::power(2.0)?, 300.0)?;
    let m = poincare_with_jacobian(&field, [1.5, 1.5], 1, tol)?;
    println!("P(1.5, 1.5) = {:?}, det DP = {:.12}", m.image, m.det());

    let traj = integrate(&field, PlanarState::new(0.0, 1.5, 1.5), 2.0, tol)?;
    let mut out = Vec::new();
    traj.write_csv(&mut out, 0.25)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
