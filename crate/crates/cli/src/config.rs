//! Run settings: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use billiard_core::{BilliardError, Placement, Result, TableSpec};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Polygon,
    Circle,
    Sinai,
}

/// Keys accepted in a `--config` file. They mirror the long flag names.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub table: Option<TableKind>,
    pub m: Option<u32>,
    pub r: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    pub particles: Option<usize>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub delta: Option<f64>,
    pub placement: Option<String>,
    pub window: Option<String>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub ms: Option<Vec<u32>>,
    pub tau_e: Option<f64>,
    pub no_oracle: Option<bool>,
    pub nc: Option<f64>,
    pub points: Option<usize>,
    pub phi_max: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            BilliardError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| {
            BilliardError::Validation(format!("invalid config {}: {e}", path.display()))
        })
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TableArgs {
    #[arg(long, value_enum)]
    pub table: Option<TableKind>,
    /// Number of polygon sides.
    #[arg(long)]
    pub m: Option<u32>,
    /// Circumradius of the polygon or radius of the circle (default 1).
    #[arg(long)]
    pub r: Option<f64>,
    /// Side of the Sinai square (default 1).
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Radius of the Sinai disk.
    #[arg(long = "R")]
    pub radius: Option<f64>,
}

impl TableArgs {
    pub fn resolve(&self, file: &FileConfig) -> Result<TableSpec> {
        let kind = self
            .table
            .or(file.table)
            .ok_or_else(|| BilliardError::Validation("--table is required".into()))?;
        let r = self.r.or(file.r).unwrap_or(1.0);
        let spec = match kind {
            TableKind::Polygon => TableSpec::Polygon {
                m: self.m.or(file.m).ok_or_else(|| {
                    BilliardError::Validation("--m is required for a polygon".into())
                })?,
                r,
            },
            TableKind::Circle => TableSpec::Circle { r },
            TableKind::Sinai => TableSpec::Sinai {
                l: self.l.or(file.l).unwrap_or(1.0),
                radius: self.radius.or(file.radius).ok_or_else(|| {
                    BilliardError::Validation("--R is required for the Sinai table".into())
                })?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Ensemble and output flags shared by the simulation commands.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Time budget per trajectory.
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sample times.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Fit window as `lo:hi`.
    #[arg(long)]
    pub window: Option<String>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Settings common to every simulation command after merging.
#[derive(Debug, Clone, Serialize)]
pub struct Common {
    pub table: TableSpec,
    pub particles: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
}

pub const DEFAULT_SEED: u64 = 1;

impl RunArgs {
    pub fn common(&self, file: &FileConfig, default_particles: usize) -> Result<Common> {
        let workers = self.workers.or(file.workers);
        if workers == Some(0) {
            return Err(BilliardError::Validation(
                "--workers must be at least 1".into(),
            ));
        }
        Ok(Common {
            table: self.table.resolve(file)?,
            particles: self
                .particles
                .or(file.particles)
                .unwrap_or(default_particles),
            seed: self.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            workers,
            out: self
                .out
                .clone()
                .or_else(|| file.out.clone())
                .unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    pub fn window(&self, file: &FileConfig) -> Result<Option<(f64, f64)>> {
        self.window
            .as_deref()
            .or(file.window.as_deref())
            .map(parse_window)
            .transpose()
    }
}

pub fn parse_window(s: &str) -> Result<(f64, f64)> {
    let bad = || BilliardError::Validation(format!("window must be `lo:hi`, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(BilliardError::Validation(format!(
            "window needs 0 < lo < hi, got {lo}:{hi}"
        )));
    }
    Ok((lo, hi))
}

pub fn parse_placement(s: Option<&str>, spec: &TableSpec) -> Result<Placement> {
    match s {
        Some(s) => s.parse(),
        None => Ok(Placement::default_for(spec)),
    }
}
