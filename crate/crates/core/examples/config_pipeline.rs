//! Parses a JSON run configuration, executes a command and writes the
//! manifest and CSV files into a temporary directory.
//!
//! Run with: cargo run --release --example config_pipeline

use subharm::cli::{execute, Command, RunConfig};
use subharm::Result;

const CONFIG: &str = r#"{
  "weight": {"period": 2.0, "segments": [{"start": 0.0, "coeffs": [1.0]}, {"start": 1.0, "coeffs": [-2.0]}]},
  "nonlinearity": {"family": "power", "p": 2.0},
  "rho": 300.0,
  "epsilon": 0.25,
  "harmonic": {"grid": 16},
  "subharmonic": {"j": [1]},
  "seed": 11
}"#;

fn main() -> Result<()> {
    let cfg = RunConfig::from_json(CONFIG)?;
    let dir = std::env::temp_dir().join("subharm_config_pipeline");
    std::fs::create_dir_all(&dir)?;

    let m = execute(Command::Subharmonic, &cfg, Some(&dir))?;
    println!("exit code {}", m.exit_code);
    if let Some(w) = &m.results.weight {
        println!("weight: integral {}, M1 {}, M2 {}, cap condition {:?}", w.mean_value, w.constants.m1, w.constants.m2, w.f4.map(|v| v.holds));
    }
    if let Some(s) = &m.results.subharmonic {
        for o in &s.orders {
            for p in &o.pairs {
                println!("k = {}, j = {}: {:?}, files {:?}", o.k, p.j, p.status, p.csv);
            }
        }
    }
    println!("timings {:?}", m.timings);

    // Unknown keys are rejected before any computation.
    println!("{}", RunConfig::from_json(r#"{"rho": 1.0, "colour": 3}"#).unwrap_err());
    Ok(())
}
