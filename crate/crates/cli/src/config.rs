use crate::{usage, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "orthogreen", version, about = "Kernels, Green functions and CM data for orthogonal Shimura varieties")]
pub struct Cli {
    /// TOML run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent or `-`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for every randomized sample (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance override, `name=value`; repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
    /// Radius schedule `r1,r2,...`.
    #[arg(long, global = true, value_name = "R1,R2,...")]
    pub radius: Option<String>,
    /// Algebra preset name or `a,b`.
    #[arg(long, global = true)]
    pub algebra: Option<String>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run a verification suite and report every check against its tolerance.
    Verify(VerifyArgs),
    /// Evaluate a kernel on a grid.
    Kernel(KernelArgs),
    /// Enumerate lattice vectors or pairs.
    Enumerate(EnumerateArgs),
    /// Truncated Green function with convergence diagnostics.
    Green(GreenArgs),
    /// CM point classes for a discriminant.
    Cm(CmArgs),
    /// Weighted special-cycle counts and the iota pair swap.
    Orbits(OrbitsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Kernel(_) => "kernel",
            Command::Enumerate(_) => "enumerate",
            Command::Green(_) => "green",
            Command::Cm(_) => "cm",
            Command::Orbits(_) => "orbits",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Kernels,
    Lattice,
    Quat,
    Cm,
    All,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// Secondary spherical function against the ratio `Q(v)/Q(v_perp)`.
    Phi2,
    /// `M_T(y)` against `y`.
    #[value(name = "m-t")]
    MT,
    /// `W_a(y)` against `y`.
    W,
    /// `M̃_T(τ)` against `Im τ`.
    #[value(name = "m-t-tilde")]
    MTTilde,
    /// `C(T, s)` against `Re s` (complex `s` allowed).
    CConst,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelKind>,
    /// Real part of `s` (ignored by `c-const`, whose grid runs over it).
    #[arg(long)]
    pub s: Option<f64>,
    /// Imaginary part of `s`; only `c-const` accepts a nonzero value.
    #[arg(long)]
    pub s_im: Option<f64>,
    /// Even `n` in signature `(n, 2)`.
    #[arg(long)]
    pub n: Option<u32>,
    /// Grid `start:stop:count` or an explicit list `x1,x2,...`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Moment matrix `a,b,c` for `[[a,b],[b,c]]`.
    #[arg(long)]
    pub moment: Option<String>,
    /// The index `a` of `W_a`.
    #[arg(long)]
    pub a: Option<f64>,
    /// `Re τ` for `m-t-tilde`.
    #[arg(long)]
    pub tau_re: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerateArgs {
    /// Positive definite Gram `r11,r12;r21,r22`; selects a short-vector search.
    #[arg(long)]
    pub gram: Option<String>,
    /// Bound on `q(x) = xᵀGx` for the short-vector search.
    #[arg(long)]
    pub bound: Option<String>,
    /// Enumerate order elements of this reduced norm.
    #[arg(long)]
    pub norm: Option<String>,
    /// Enumerate pairs of order elements with this moment matrix `a,b,c`.
    #[arg(long)]
    pub moment: Option<String>,
    /// Chart point `x1,y1,x2,y2` centering the majorant ball (base point when absent).
    #[arg(long)]
    pub point: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreenMode {
    Lattice,
    Orbit,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenArgs {
    #[arg(long)]
    pub s: Option<f64>,
    /// Seed vector in maximal-order coordinates `c1,c2,c3,c4` (default: the element 1).
    #[arg(long)]
    pub vector: Option<String>,
    /// Chart point `x1,y1,x2,y2` (default `0.45,0.7,0.7,1.9`).
    #[arg(long)]
    pub point: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<GreenMode>,
    /// Majorant radius of the units generating the orbit in `orbit` mode.
    #[arg(long)]
    pub unit_radius: Option<f64>,
    /// Largest hypergeometric ratio tolerated before aborting.
    #[arg(long)]
    pub guard: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmArgs {
    /// Negative fundamental discriminant.
    #[arg(long, allow_hyphen_values = true)]
    pub disc: Option<i64>,
    #[arg(long)]
    pub max_doublings: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitsArgs {
    /// Moment matrix `a,b,c`.
    #[arg(long)]
    pub moment: Option<String>,
    /// Report the pair swap between `T` and `T^ι` instead of the weighted count.
    #[arg(long)]
    pub iota: bool,
}

/// The TOML file layout. Command-specific settings live in a table named
/// after the command.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    algebra: Option<String>,
    seed: Option<u64>,
    format: Option<Format>,
    output: Option<PathBuf>,
    radius: Option<Vec<f64>>,
    tolerances: BTreeMap<String, f64>,
    verify: Option<VerifyArgs>,
    kernel: Option<KernelArgs>,
    enumerate: Option<EnumerateArgs>,
    green: Option<GreenArgs>,
    cm: Option<CmArgs>,
    orbits: Option<OrbitsArgs>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub algebra: String,
    pub tolerances: BTreeMap<String, f64>,
    pub radius: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| usage(format!("invalid config: {e}")))?
            }
            None => FileConfig::default(),
        };
        let command = match cli.command {
            Some(c) => c,
            None => file_command(&file)?,
        };
        let mut tolerances = file.tolerances.clone();
        for entry in &cli.tol {
            let (name, value) = entry.split_once('=').ok_or_else(|| usage(format!("--tol expects name=value, got {entry}")))?;
            let value: f64 = value.trim().parse().map_err(|_| usage(format!("tolerance {name} is not a number")))?;
            tolerances.insert(name.trim().to_string(), value);
        }
        if let Some((name, v)) = tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return Err(usage(format!("tolerance {name} must be positive, got {v}")));
        }
        let radius = match cli.radius {
            Some(s) => Some(parse_f64_list(&s)?),
            None => file.radius,
        };
        if let Some(r) = &radius {
            if r.is_empty() || r[0] <= 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
                return Err(usage("radius schedule must be positive and strictly increasing"));
            }
        }
        Ok(RunConfig {
            command,
            algebra: cli.algebra.or(file.algebra).unwrap_or_else(|| "preset6".to_string()),
            tolerances,
            radius,
            output: cli.out.or(file.output),
            format: cli.format.or(file.format),
            seed: cli.seed.or(file.seed).unwrap_or(0),
        })
    }

    /// The tolerance `name`, or `default` when not overridden.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

fn file_command(file: &FileConfig) -> Result<Command> {
    let name = file.command.as_deref().ok_or_else(|| usage("no command given on the command line or in the config"))?;
    Ok(match name {
        "verify" => Command::Verify(file.verify.clone().unwrap_or_default()),
        "kernel" => Command::Kernel(file.kernel.clone().unwrap_or_default()),
        "enumerate" => Command::Enumerate(file.enumerate.clone().unwrap_or_default()),
        "green" => Command::Green(file.green.clone().unwrap_or_default()),
        "cm" => Command::Cm(file.cm.clone().unwrap_or_default()),
        "orbits" => Command::Orbits(file.orbits.clone().unwrap_or_default()),
        other => return Err(usage(format!("unknown command {other:?} in config"))),
    })
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("not a number: {t:?}"))))
        .collect()
}
