//! Runs the built-in invariant suite, once as shipped and once with
//! tolerances shrunk a millionfold.
//!
//! Run with: cargo run --release --example verify_suite

use subharm::cli::{cmd_verify, VerifyConfig};

fn main() {
    let clean = cmd_verify(&VerifyConfig::default());
    println!("{} passed, {} failed", clean.passed, clean.failed);

    let strict = cmd_verify(&VerifyConfig { tolerance_scale: 1e-6, modules: vec!["flow".into(), "hill".into()] });
    for c in strict.checks.iter().filter(|c| !c.passed) {
        println!("FAIL {}::{} ({})", c.module, c.name, c.detail);
    }
}
