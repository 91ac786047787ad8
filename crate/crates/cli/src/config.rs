use std::path::PathBuf;
use std::str::FromStr;

use apollonian::descartes::{Quadruple, V0};
use apollonian::orbit::validate_root;
use clap::{Args, ValueEnum};
use serde::Serialize;

/// Failure classes mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// An invariant or regression check failed (exit 1).
    Check(String),
    /// Bad flags, malformed files or an invalid root (exit 2).
    Input(String),
    /// A closure, enumeration or iteration cap was hit (exit 3).
    Resource(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Check(m) | CliError::Input(m) | CliError::Resource(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Input(_) => 2,
            CliError::Resource(_) => 3,
        }
    }
}

impl From<apollonian::Error> for CliError {
    fn from(e: apollonian::Error) -> Self {
        use apollonian::Error as E;
        match e {
            E::NotOnCone(_) | E::InvalidInput(_) | E::Unsupported(_) => CliError::Input(e.to_string()),
            E::ResourceCap { .. } | E::Overflow(_) => CliError::Resource(e.to_string()),
            E::NonConvergence { .. } | E::Tolerance(_) => CliError::Check(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn input_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Input(msg.into()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

/// Comma-separated integer list, as accepted by `--root` and `--q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntList(pub Vec<i64>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<i64>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(IntList)
    }
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct GlobalArgs {
    /// Root quadruple `a,b,c,d`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub root: Option<IntList>,
    /// Curvature bound N, or the command's main size parameter.
    #[arg(long, global = true)]
    pub limit: Option<u64>,
    /// Moduli `Q[,Q…]`.
    #[arg(long, global = true)]
    pub q: Option<IntList>,
    #[arg(long, global = true)]
    pub t1: Option<f64>,
    #[arg(long, global = true)]
    pub t2: Option<f64>,
    #[arg(long, global = true)]
    pub x: Option<f64>,
    /// Sieve level for the restricted representation count.
    #[arg(long, global = true)]
    pub u: Option<u64>,
    /// Largest major-arc denominator.
    #[arg(long, global = true)]
    pub q0cap: Option<u64>,
    #[arg(long, global = true)]
    pub k0: Option<f64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report (or the SVG, for `render`) here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Overwrite the frozen-constant registry with fresh measurements.
    #[arg(long, global = true)]
    pub freeze: bool,
    /// Never write the registry; a missing registry falls back to the shipped baseline.
    #[arg(long, global = true, conflicts_with = "freeze")]
    pub ci: bool,
}

/// Validated configuration echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub root: [i64; 4],
    pub limit: Option<u64>,
    pub q: Vec<u32>,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub x: Option<f64>,
    pub u: Option<u64>,
    pub q0cap: Option<u64>,
    pub k0: Option<f64>,
    pub threads: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> CliResult<Self> {
        let root = match &g.root {
            None => V0,
            Some(IntList(v)) => match v.as_slice() {
                &[a, b, c, d] => [a, b, c, d],
                _ => return input_err(format!("--root needs four integers, got {}", v.len())),
            },
        };
        validate_root(&Quadruple::from_i64(root))?;
        let q = match &g.q {
            None => Vec::new(),
            Some(IntList(v)) => v
                .iter()
                .map(|&x| u32::try_from(x).ok().filter(|&x| x >= 1).ok_or_else(|| CliError::Input(format!("bad modulus {x}"))))
                .collect::<CliResult<_>>()?,
        };
        for (name, v) in [("t1", g.t1), ("t2", g.t2), ("x", g.x), ("k0", g.k0)] {
            if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                return input_err(format!("--{name} must be positive"));
            }
        }
        for (name, v) in [("limit", g.limit), ("u", g.u), ("q0cap", g.q0cap)] {
            if v == Some(0) {
                return input_err(format!("--{name} must be positive"));
            }
        }
        if g.threads == Some(0) {
            return input_err("--threads must be positive");
        }
        Ok(RunConfig {
            root,
            limit: g.limit,
            q,
            t1: g.t1,
            t2: g.t2,
            x: g.x,
            u: g.u,
            q0cap: g.q0cap,
            k0: g.k0,
            threads: g.threads.unwrap_or_else(rayon::current_num_threads),
            seed: g.seed,
        })
    }

    pub fn quadruple(&self) -> Quadruple<i64> {
        Quadruple::from_i64(self.root)
    }

    pub fn moduli_or(&self, default: &[u32]) -> Vec<u32> {
        if self.q.is_empty() {
            default.to_vec()
        } else {
            self.q.clone()
        }
    }
}
