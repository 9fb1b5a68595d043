//! Command-line pipeline: JSON configs in, a JSON manifest plus CSV sample
//! dumps out.

mod verify;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{poincare_map, Tolerances};
use crate::harmonic::{
    brown_hess_identity, scan_harmonics, verify_necessary_condition, weighted_mean_check, AnnulusSearch, BrownHessReport,
    HarmonicCensus, IdentityReport,
};
use crate::nonlinearity::{HypothesisReport, Nonlinearity, TruncatedField};
use crate::subharmonic::{estimate_k_star, search_subharmonics, twist_analysis, SubharmonicSearch, SubharmonicSettings, TwistReport};
use crate::weights::{AprioriConstants, PeriodicWeight, PositiveInterval};

pub use verify::{run_checks, Check, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_FOUND: i32 = 3;
pub const EXIT_PAIR_NOT_FOUND: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "subharm", version, about = "Harmonic and subharmonic solutions of u'' + a(t) g(u) = 0")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for the manifest and CSV files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for the initial-state jitter.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Relative integration tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Weight analysis and a-priori constants.
    Weight,
    /// Positive T-periodic solutions with Morse certificates.
    Harmonic,
    /// Twist checks and subharmonic pairs.
    Subharmonic,
    /// Harmonic census across a parameter grid.
    Sweep,
    /// Built-in invariant suite.
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubharmonicConfig {
    /// Orders to examine; empty means the smallest certified order.
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default = "default_j")]
    pub j: Vec<usize>,
    #[serde(default)]
    pub settings: SubharmonicSettings,
}

fn default_j() -> Vec<usize> {
    vec![1]
}

impl Default for SubharmonicConfig {
    fn default() -> Self {
        SubharmonicConfig { k: Vec::new(), j: default_j(), settings: SubharmonicSettings::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Multiplier of the nonlinearity.
    Lambda,
    /// Multiplier of the negative part of the weight.
    Mu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub weight: Option<PeriodicWeight>,
    #[serde(default)]
    pub nonlinearity: Option<Nonlinearity>,
    #[serde(default)]
    pub rho: Option<f64>,
    /// Fixed ε for the a-priori constants; chosen automatically when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Overrides the integration tolerances of every stage.
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub harmonic: AnnulusSearch,
    #[serde(default)]
    pub subharmonic: SubharmonicConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let mut c: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.normalize();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    /// Step weight `1` on `[0, 1)`, `-2` on `[1, 2)`, `g(s) = s²`, `ρ = 300`.
    pub fn step_fixture() -> Self {
        let mut c = RunConfig {
            weight: Some(PeriodicWeight::step(2.0, &[(0.0, 1.0), (1.0, -2.0)]).expect("valid fixture")),
            nonlinearity: Some(Nonlinearity::power(2.0).expect("valid fixture")),
            rho: Some(300.0),
            epsilon: None,
            tolerances: None,
            harmonic: AnnulusSearch::default(),
            subharmonic: SubharmonicConfig::default(),
            sweep: None,
            verify: VerifyConfig::default(),
            seed: None,
        };
        c.normalize();
        c
    }

    /// Applies command-line overrides.
    pub fn apply_flags(&mut self, seed: Option<u64>, tol: Option<f64>) -> Result<()> {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        if let Some(t) = tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("--tol must lie in (0, 1), got {t}")));
            }
            self.tolerances = Some(Tolerances::new(t));
        }
        self.normalize();
        Ok(())
    }

    fn normalize(&mut self) {
        if let Some(t) = self.tolerances {
            self.harmonic.tol = t;
            self.subharmonic.settings.tol = t;
        }
        if self.seed.is_some() {
            self.harmonic.jitter_seed = self.seed;
        }
    }

    fn weight(&self) -> Result<&PeriodicWeight> {
        self.weight.as_ref().ok_or_else(|| Error::Config("missing key: weight".into()))
    }

    fn nonlinearity(&self) -> Result<&Nonlinearity> {
        self.nonlinearity.as_ref().ok_or_else(|| Error::Config("missing key: nonlinearity".into()))
    }

    fn rho(&self) -> Result<f64> {
        match self.rho {
            Some(r) if r > 0.0 && r.is_finite() => Ok(r),
            Some(r) => Err(Error::Config(format!("rho must be positive, got {r}"))),
            None => Err(Error::Config("missing key: rho".into())),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonic: Option<HarmonicSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subharmonic: Option<SubharmonicSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact: Artifact,
    pub command: Command,
    pub config: RunConfig,
    pub exit_code: i32,
    pub results: Results,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: Command, config: RunConfig) -> Self {
        RunManifest {
            artifact: Artifact { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") },
            command,
            config,
            exit_code: EXIT_OK,
            results: Results::default(),
            timings: BTreeMap::new(),
        }
    }

    /// The manifest without its timing fields, for comparisons between runs.
    pub fn certified_json(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("timings");
        }
        Ok(v)
    }
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.insert(stage.to_string(), start.elapsed().as_secs_f64());
    out
}

// ---------------------------------------------------------------- weight

#[derive(Debug, Clone, Serialize)]
pub struct WeightSection {
    pub period: f64,
    /// `∫₀ᵀ a`.
    pub mean_value: f64,
    pub l1_norm: f64,
    pub sup_norm: f64,
    /// The weight has at least one positive hump.
    pub a1_holds: bool,
    /// `∫₀ᵀ a < 0`.
    pub a2_holds: bool,
    pub positive_intervals: Vec<PositiveInterval>,
    pub m: usize,
    pub constants: AprioriConstants,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f4: Option<F4Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisReport>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct F4Verdict {
    pub rho: f64,
    /// `f(M1 ρ)/(M1 ρ)`.
    pub ratio: f64,
    pub m2: f64,
    pub holds: bool,
}

pub fn cmd_weight(cfg: &RunConfig) -> Result<WeightSection> {
    let a = cfg.weight()?;
    let dec = a.positivity_decomposition()?;
    let constants = a.apriori_constants(cfg.epsilon)?;
    let f4 = match (&cfg.nonlinearity, cfg.rho) {
        (Some(f), Some(rho)) => {
            let ratio = f.f4_ratio(rho, &constants)?;
            Some(F4Verdict { rho, ratio, m2: constants.m2, holds: ratio > constants.m2 })
        }
        _ => None,
    };
    Ok(WeightSection {
        period: a.period(),
        mean_value: a.mean_value(),
        l1_norm: a.l1_norm(),
        sup_norm: a.sup_norm(),
        a1_holds: dec.count() > 0,
        a2_holds: a.mean_value() < 0.0,
        m: dec.count(),
        positive_intervals: dec.intervals,
        constants,
        f4,
        hypotheses: cfg.nonlinearity.as_ref().map(|f| f.check_hypotheses()),
    })
}

// ---------------------------------------------------------------- harmonic

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Found,
    NotFound,
    CertificateFailed,
    PairNotFound,
    Skipped,
    TwistNotCertified,
    KStarTooLarge,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionChecks {
    pub index: usize,
    pub morse_certified: bool,
    /// Largest `|P^l(x) - x|` for `l = 1, 2, 3`.
    pub recurrence_3t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub necessary_condition: Option<IdentityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_mean: Option<IdentityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brown_hess: Option<BrownHessReport>,
    pub csv: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicSection {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub census: HarmonicCensus,
    pub checks: Vec<SolutionChecks>,
}

fn harmonic_stage(cfg: &RunConfig, out: Option<&Path>) -> Result<HarmonicSection> {
    let a = cfg.weight()?;
    let f = cfg.nonlinearity()?;
    let rho = cfg.rho()?;
    let census = scan_harmonics(a, f, rho, &cfg.harmonic)?;
    let field = TruncatedField::new(a.clone(), f, rho)?;
    let mut checks = Vec::new();
    for (i, s) in census.solutions.iter().enumerate() {
        let mut rec = 0.0f64;
        for l in 1..=3 {
            let y = poincare_map(&field, s.initial_state, l, cfg.harmonic.tol)?;
            rec = rec.max((y[0] - s.initial_state[0]).abs().max((y[1] - s.initial_state[1]).abs()));
        }
        let csv = format!("harmonic_{}.csv", i + 1);
        if let Some(dir) = out {
            s.samples.write_csv(fs::File::create(dir.join(&csv))?)?;
        }
        checks.push(SolutionChecks {
            index: i + 1,
            morse_certified: s.is_certified(),
            recurrence_3t: rec,
            necessary_condition: verify_necessary_condition(&s.samples, a, f).ok(),
            weighted_mean: weighted_mean_check(&s.samples, a, f).ok(),
            brown_hess: brown_hess_identity(s, a, f).ok(),
            csv,
        });
    }
    let (status, diagnostic) = match census.solutions.first() {
        None => (Status::NotFound, Some(census.diagnostic())),
        Some(s) if !s.is_certified() => (Status::CertificateFailed, Some(format!("lambda0 = {:e} is not negative", s.spectrum.lambda0))),
        Some(_) => (Status::Found, None),
    };
    Ok(HarmonicSection { status, diagnostic, census, checks })
}

pub fn cmd_harmonic(cfg: &RunConfig, out: Option<&Path>) -> Result<HarmonicSection> {
    harmonic_stage(cfg, out)
}

// ---------------------------------------------------------------- subharmonic

#[derive(Debug, Clone, Serialize)]
pub struct PairRun {
    pub j: usize,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SubharmonicSearch>,
    pub csv: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderRun {
    pub k: usize,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twist: Option<TwistReport>,
    pub pairs: Vec<PairRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubharmonicSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_star_error: Option<String>,
    pub orders: Vec<OrderRun>,
    /// Every requested, non-skipped pair produced two periodicity classes.
    pub complete: bool,
}

pub fn cmd_subharmonic(cfg: &RunConfig, harmonic: &HarmonicSection, out: Option<&Path>) -> Result<SubharmonicSection> {
    let a = cfg.weight()?;
    let f = cfg.nonlinearity()?;
    let rho = cfg.rho()?;
    let Some(center) = harmonic.census.solutions.first().filter(|s| s.is_certified()) else {
        return Err(Error::NotFound("subharmonic stage needs a certified harmonic solution".into()));
    };
    let field = center.shifted_field(&TruncatedField::new(a.clone(), f, rho)?)?;
    let settings = &cfg.subharmonic.settings;

    let mut section = SubharmonicSection { k_star: None, k_star_error: None, orders: Vec::new(), complete: true };
    let mut twists: Vec<(usize, Result<TwistReport>)> = Vec::new();
    if cfg.subharmonic.k.is_empty() {
        match estimate_k_star(&field, rho, settings) {
            Ok(r) => {
                section.k_star = Some(r.k);
                twists.push((r.k, Ok(r)));
            }
            Err(e @ Error::KStarTooLarge { .. }) => {
                section.k_star_error = Some(e.to_string());
                section.complete = false;
            }
            Err(e) => return Err(e),
        }
    } else {
        for &k in &cfg.subharmonic.k {
            twists.push((k, twist_analysis(&field, k, rho, settings)));
        }
    }

    for (k, twist) in twists {
        let twist = match twist {
            Ok(t) => t,
            Err(e @ (Error::TwistNotCertified { .. } | Error::KStarTooLarge { .. })) => {
                let status = if matches!(e, Error::KStarTooLarge { .. }) { Status::KStarTooLarge } else { Status::TwistNotCertified };
                section.complete = false;
                section.orders.push(OrderRun { k, status, reason: Some(e.to_string()), twist: None, pairs: Vec::new() });
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut pairs = Vec::new();
        for &j in &cfg.subharmonic.j {
            if num_integer::gcd(j, k) != 1 || j == 0 || j > twist.m_k {
                let reason = if j == 0 || num_integer::gcd(j, k) != 1 {
                    format!("j = {j} is not coprime with k = {k}")
                } else {
                    format!("j = {j} exceeds m_k = {}", twist.m_k)
                };
                pairs.push(PairRun { j, status: Status::Skipped, reason: Some(reason), search: None, csv: Vec::new() });
                continue;
            }
            let search = search_subharmonics(&field, k, j, &twist, settings)?;
            let mut csv = Vec::new();
            for s in &search.solutions {
                let name = format!("subharmonic_k{k}_j{j}_class{}.csv", s.class);
                if let Some(dir) = out {
                    s.samples.write_csv(fs::File::create(dir.join(&name))?)?;
                }
                csv.push(name);
            }
            let found = search.solutions.len() >= 2;
            if !found {
                section.complete = false;
            }
            pairs.push(PairRun {
                j,
                status: if found { Status::Found } else { Status::PairNotFound },
                reason: (!found).then(|| Error::PairNotFound { k, j, found: search.solutions.len() }.to_string()),
                search: Some(search),
                csv,
            });
        }
        section.orders.push(OrderRun { k, status: Status::Found, reason: None, twist: Some(twist), pairs });
    }
    Ok(section)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub status: Status,
    pub solutions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    /// First grid value with a certified solution.
    pub threshold: Option<f64>,
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepSection> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("missing key: sweep".into()))?;
    let a = cfg.weight()?;
    let f = cfg.nonlinearity()?;
    let rho = cfg.rho()?;
    if sweep.values.is_empty() || sweep.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config("sweep values must be finite and non-negative".into()));
    }
    let rows: Vec<SweepRow> = sweep
        .values
        .par_iter()
        .map(|&value| {
            let run = || -> Result<HarmonicCensus> {
                let (a, f) = match sweep.parameter {
                    SweepParameter::Lambda => (a.clone(), f.clone().with_scale(value)?),
                    SweepParameter::Mu => (a.clone().with_negative_scale(value)?, f.clone()),
                };
                scan_harmonics(&a, &f, rho, &cfg.harmonic)
            };
            match run() {
                Ok(c) => {
                    let best = c.solutions.first();
                    let status = match best {
                        None => Status::NotFound,
                        Some(s) if !s.is_certified() => Status::CertificateFailed,
                        Some(_) => Status::Found,
                    };
                    SweepRow {
                        value,
                        status,
                        solutions: c.solutions.len(),
                        sup_norm: best.map(|s| s.sup_norm),
                        lambda0: best.map(|s| s.spectrum.lambda0),
                        error: None,
                    }
                }
                Err(e) => SweepRow { value, status: Status::NotFound, solutions: 0, sup_norm: None, lambda0: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let threshold = rows.iter().find(|r| r.status == Status::Found).map(|r| r.value);
    Ok(SweepSection { parameter: sweep.parameter, rows, threshold })
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Serialize)]
pub struct VerifySection {
    pub tolerance_scale: f64,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

pub fn cmd_verify(cfg: &VerifyConfig) -> VerifySection {
    let checks = run_checks(cfg);
    let failed = checks.iter().filter(|c| !c.passed).count();
    VerifySection { tolerance_scale: cfg.tolerance_scale, passed: checks.len() - failed, failed, checks }
}

// ---------------------------------------------------------------- driver

/// Exit code for an error that aborts a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidWeight(_) | Error::InvalidNonlinearity(_) | Error::InvalidEpsilon { .. } => EXIT_CONFIG,
        Error::NotFound(_) => EXIT_NOT_FOUND,
        Error::PairNotFound { .. } | Error::KStarTooLarge { .. } | Error::TwistNotCertified { .. } => EXIT_PAIR_NOT_FOUND,
        _ => EXIT_FAILURE,
    }
}

/// Runs one command and returns its manifest. Errors abort without output.
pub fn execute(command: Command, cfg: &RunConfig, out: Option<&Path>) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, cfg.clone());
    let mut timings = BTreeMap::new();
    match command {
        Command::Weight => {
            m.results.weight = Some(timed(&mut timings, "weight", || cmd_weight(cfg))?);
        }
        Command::Harmonic | Command::Subharmonic => {
            m.results.weight = Some(timed(&mut timings, "weight", || cmd_weight(cfg))?);
            let h = timed(&mut timings, "harmonic", || cmd_harmonic(cfg, out))?;
            let found = h.status == Status::Found;
            if !found {
                m.exit_code = EXIT_NOT_FOUND;
            }
            if command == Command::Subharmonic && found {
                let s = timed(&mut timings, "subharmonic", || cmd_subharmonic(cfg, &h, out))?;
                if !s.complete {
                    m.exit_code = EXIT_PAIR_NOT_FOUND;
                }
                m.results.subharmonic = Some(s);
            }
            m.results.harmonic = Some(h);
        }
        Command::Sweep => {
            m.results.sweep = Some(timed(&mut timings, "sweep", || cmd_sweep(cfg))?);
        }
        Command::Verify => {
            if let Some(m) = cfg.verify.modules.iter().find(|m| !verify::MODULES.contains(&m.as_str())) {
                return Err(Error::Config(format!("unknown verify module {m:?}")));
            }
            let v = timed(&mut timings, "verify", || cmd_verify(&cfg.verify));
            if v.failed > 0 {
                m.exit_code = EXIT_FAILURE;
            }
            m.results.verify = Some(v);
        }
    }
    m.timings = timings;
    Ok(m)
}

fn write_manifest(m: &RunManifest, dir: &Path) -> Result<()> {
    let tmp = dir.join(".manifest.json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(m)?)?;
    fs::rename(&tmp, dir.join("manifest.json"))?;
    Ok(())
}

fn load_config(args: &Args) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None if args.command == Command::Verify => RunConfig::from_json("{}")?,
        None => return Err(Error::Config("--config is required for this command".into())),
    };
    cfg.apply_flags(args.seed, args.tol)?;
    Ok(cfg)
}

/// Full command-line entry point; returns the process exit code.
pub fn run(args: Args) -> i32 {
    if let Some(n) = args.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return EXIT_CONFIG;
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = match load_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return EXIT_FAILURE;
    }
    let manifest = match execute(args.command, &cfg, Some(&args.out)) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Err(e) = write_manifest(&manifest, &args.out) {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    if let Some(v) = &manifest.results.verify {
        for c in &v.checks {
            println!("{} {}::{} {}", if c.passed { "PASS" } else { "FAIL" }, c.module, c.name, c.detail);
        }
    }
    println!("{}", args.out.join("manifest.json").display());
    manifest.exit_code
}
