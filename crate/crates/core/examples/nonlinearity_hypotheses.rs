//! Checks the structural hypotheses on several nonlinearity families and
//! the cap condition that fixes an admissible `ρ`.
//!
//! Run with: cargo run --example nonlinearity_hypotheses

use subharm::nonlinearity::Nonlinearity;
use subharm::weights::PeriodicWeight;
use subharm::Result;

fn main() -> Result<()> {
    let families = [
        ("power p = 2", Nonlinearity::power(2.0)?),
        ("power p = 3.5", Nonlinearity::power(3.5)?),
        ("bounded rational", Nonlinearity::bounded_rational(2.0, 2.0)?),
        ("singular rational", Nonlinearity::singular_rational(3.0, 1.0, 0.1)?),
    ];
    for (name, f) in &families {
        let r = f.check_hypotheses();
        println!("{name:18} domain {:?}  all pass: {}  {r:?}", f.domain(), r.all_pass());
    }

    let a = PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)])?;
    let c = a.apriori_constants(Some(0.25))?;
    let f = Nonlinearity::power(2.0)?;
    for rho in [100.0, 256.0, 257.0, 300.0] {
        println!("rho = {rho}: f(M1 rho)/(M1 rho) = {:.3} vs M2 = {} -> {}", f.f4_ratio(rho, &c)?, c.m2, f.check_f4(rho, &c)?);
    }

    // Above the cap the extension continues linearly with matching slope.
    let ext = f.extend_linear(10.0)?;
    for s in [9.0, 10.0, 11.0, 20.0] {
        println!("s = {s:4}: value {:8.3} slope {:6.3} curvature {}", ext.value(s), ext.deriv(s), ext.deriv2(s));
    }
    Ok(())
}
