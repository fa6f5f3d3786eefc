use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gz_core::classical::{random_rational_matrix, rational_identity, FamilyKind, Side};
use gz_core::{GzError, Result};
use num_complex::Complex64;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Report schema identifier.
pub const SCHEMA: &str = "gz-tower/1";
/// Default directory for reports and trajectories when no path is given.
pub const OUTPUT_DIR_ENV: &str = "GZ_TOWER_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "gz-tower",
    version,
    about = "Gelfand-Zetlin integrable structure on T*GL(N): verification and computation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact commutativity, rank and trivial-family checks for a classical family.
    VerifyClassical(ClassicalArgs),
    /// Quantum determinant centrality, quantum family commutativity and the
    /// differential-operator realization.
    VerifyQuantum(QuantumArgs),
    /// Chart, tower and canonicity checks on a coadjoint orbit.
    Orbit(OrbitArgs),
    /// Hamiltonian flow of one action variable, with a trajectory file.
    Flow(FlowArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Ambient size N.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance override, `name=value`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
    /// Report path; defaults to `$GZ_TOWER_OUTPUT_DIR/<command>.json`, else stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Permit sizes beyond the default guardrail.
    #[arg(long)]
    pub allow_large: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    Gz,
    Corner,
    Mf,
    Trivial,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SideArg {
    Left,
    Right,
    Both,
}

#[derive(Debug, Args)]
pub struct ClassicalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "gz")]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value = "both")]
    pub side: SideArg,
    /// `random-rational`, `identity`, or rows like `1,0;0,2/3`.
    #[arg(long)]
    pub shift_matrix: Option<String>,
    /// Random points for the rank and trivial-family checks.
    #[arg(long, default_value_t = 5)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct QuantumArgs {
    #[command(flatten)]
    pub common: Common,
    /// Random polynomials for the differential-operator check.
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitCheck {
    Canonical,
    ResidueForm,
    Pairing,
    All,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated eigenvalues, e.g. `1,2,3` or `1+2i,-0.5i,3`.
    #[arg(long)]
    pub spectrum: Option<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "canonical")]
    pub check: Vec<OrbitCheck>,
    /// Tangent pairs for the residue-form check.
    #[arg(long, default_value_t = 20)]
    pub pairs: usize,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Action variable `n,k` generating the flow.
    #[arg(long, default_value = "1,1")]
    pub hamiltonian: String,
    #[arg(long = "t", default_value_t = 0.1, allow_hyphen_values = true)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// JSON-lines trajectory path; defaults to `flow-trajectory.jsonl` in the output directory.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

/// Fully resolved configuration, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub n: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<SideArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_matrix: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<Complex64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<OrbitCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    pub allow_large: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: &'static str, common: &Common, n: usize, defaults: &[(&str, f64)]) -> Result<Self> {
        let mut tolerances: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for entry in &common.tol {
            let (name, value) = entry
                .split_once('=')
                .ok_or_else(|| GzError::InvalidSpec(format!("tolerance `{entry}` is not NAME=VALUE")))?;
            if !tolerances.contains_key(name) {
                let known: Vec<&str> = tolerances.keys().map(String::as_str).collect();
                return Err(GzError::InvalidSpec(format!("unknown tolerance `{name}`; known: {}", known.join(", "))));
            }
            let v: f64 =
                value.parse().map_err(|_| GzError::InvalidSpec(format!("tolerance `{entry}` is not a number")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(GzError::InvalidSpec(format!("tolerance `{name}` must be positive")));
            }
            tolerances.insert(name.to_string(), v);
        }
        Ok(Self {
            command,
            n,
            seed: common.seed,
            tolerances,
            family: None,
            side: None,
            shift_matrix: None,
            spectrum: None,
            hamiltonian: None,
            t_final: None,
            steps: None,
            checks: Vec::new(),
            points: None,
            trials: None,
            pairs: None,
            allow_large: common.allow_large,
            output: resolve_output(common.output.as_ref(), command),
            trajectory: None,
        })
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}

pub fn output_dir() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn resolve_output(explicit: Option<&PathBuf>, command: &str) -> Option<PathBuf> {
    explicit.cloned().or_else(|| output_dir().map(|d| d.join(format!("{command}.json"))))
}

pub fn require_size(n: Option<usize>, fallback: Option<usize>) -> Result<usize> {
    let n = n.or(fallback).ok_or_else(|| GzError::InvalidSpec("--n is required".into()))?;
    if n == 0 {
        return Err(GzError::InvalidSize(0));
    }
    Ok(n)
}

pub fn guard_size(n: usize, limit: usize, allow_large: bool, what: &str) -> Result<()> {
    if n > limit && !allow_large {
        return Err(GzError::InvalidSpec(format!(
            "N = {n} exceeds {limit} for {what}; cost grows steeply with N, pass --allow-large to proceed"
        )));
    }
    Ok(())
}

pub fn family_kind(f: FamilyArg) -> FamilyKind {
    match f {
        FamilyArg::Gz => FamilyKind::GzPrincipal,
        FamilyArg::Corner => FamilyKind::GzCorner,
        FamilyArg::Mf => FamilyKind::MfShift,
        FamilyArg::Trivial => FamilyKind::Trivial,
    }
}

pub fn side(s: SideArg) -> Side {
    match s {
        SideArg::Left => Side::Left,
        SideArg::Right => Side::Right,
        SideArg::Both => Side::Both,
    }
}

/// Parses `a+bi`, `a-bi`, `bi`, `i`, or a real number.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || GzError::InvalidSpec(format!("cannot parse `{s}` as a complex number"));
    if t.is_empty() {
        return Err(bad());
    }
    let z = if let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) {
        // split at the last sign that is not the leading one and not an exponent sign
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            other => other,
        };
        Complex64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?)
    } else {
        Complex64::new(t.parse().map_err(|_| bad())?, 0.0)
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(bad());
    }
    Ok(z)
}

pub fn parse_spectrum(s: &str) -> Result<Vec<Complex64>> {
    s.split(',').map(parse_complex).collect()
}

pub fn parse_hamiltonian(s: &str) -> Result<(usize, usize)> {
    let bad = || GzError::InvalidSpec(format!("hamiltonian `{s}` is not `n,k`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Resolves `--shift-matrix` into an exact `n×n` matrix.
pub fn parse_shift(s: &str, n: usize, seed: u64) -> Result<Vec<Vec<BigRational>>> {
    match s {
        "random-rational" => Ok(random_rational_matrix(n, &mut ChaCha8Rng::seed_from_u64(seed))),
        "identity" => Ok(rational_identity(n)),
        rows => {
            let m: Vec<Vec<BigRational>> = rows
                .split(';')
                .map(|r| {
                    r.split(',')
                        .map(|x| {
                            BigRational::from_str(x.trim())
                                .map_err(|_| GzError::InvalidSpec(format!("shift entry `{x}` is not a rational")))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(GzError::InvalidSpec(format!("shift matrix must be {n}x{n}")));
            }
            Ok(m)
        }
    }
}
