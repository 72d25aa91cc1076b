use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use billiard_core::analysis::{
    decay_exponent, decay_exponent_from, diffusion_exponent, diffusion_exponent_from,
    fit_power_law, histogram_vs_oracle, OracleComparison,
};
use billiard_core::dynamics::AdvanceOptions;
use billiard_core::ensemble::{
    collision_histogram, collision_moments, flagged_warning, geometric_grid, EnsembleConfig,
};
use billiard_core::escape::{
    check_opening, crossover_m_alpha, default_decay_window, mean_escape_time, run_open,
    survival_curve, width_for_escape_time, EscapeRecord, SurvivalCurve, SURVIVAL_GRID_POINTS,
};
use billiard_core::oracles::{
    cb_collision_pdf, circle_mean_count, polygon_collision_pdf, polygon_mean_collision_time,
    regular_orbit_collision_time, sliding_relaxation_time, vortex_relaxation_time, Density, Oracle,
    RegularOrbitParams,
};
use billiard_core::{BilliardError, Opening, Result, Table, TableSpec};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::config::{parse_placement, parse_window, Common, FileConfig, RunArgs};
use crate::output::{ensure_dir, write_csv, write_fit, write_run_record};

pub const CLOSED_PARTICLES: usize = 10_000;
pub const OPEN_PARTICLES: usize = 100_000;
pub const MOMENT_SAMPLES: usize = 64;

fn warn(message: Option<String>) {
    if let Some(m) = message {
        eprintln!("{m}");
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| BilliardError::Internal(format!("cannot start workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn load(args: &RunArgs) -> Result<FileConfig> {
    FileConfig::load(args.config.as_deref())
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SimulateConfig {
    #[serde(flatten)]
    common: Common,
    t_max: f64,
    samples: usize,
    window: (f64, f64),
}

pub fn simulate(args: &RunArgs) -> Result<()> {
    let file = load(args)?;
    let common = args.common(&file, CLOSED_PARTICLES)?;
    let table = Table::new(common.table)?;
    let tau = table.mean_collision_time();
    let t_max = args.t_max.or(file.t_max).unwrap_or(1000.0 * tau);
    if !(t_max > tau) {
        return Err(BilliardError::Validation(format!(
            "t-max {t_max} must exceed the mean collision time {tau}"
        )));
    }
    let samples = args.samples.or(file.samples).unwrap_or(MOMENT_SAMPLES);
    if samples < 3 {
        return Err(BilliardError::Validation(
            "--samples must be at least 3".into(),
        ));
    }
    let window = args.window(&file)?.unwrap_or((20.0 * tau, t_max));
    let config = EnsembleConfig {
        particles: common.particles,
        seed: common.seed,
        sample_times: geometric_grid(tau, t_max, samples),
        t_max,
        options: AdvanceOptions::default(),
    };
    let resolved = SimulateConfig {
        common,
        t_max,
        samples,
        window,
    };
    let out = &resolved.common.out;
    ensure_dir(out)?;
    write_run_record(out, "simulate", &resolved)?;

    let moments = with_workers(resolved.common.workers, || {
        collision_moments(&table, &config)
    })??;
    warn(moments.warning());
    write_csv(
        out,
        "moments.csv",
        "t,mean_n,var_n,usable,flagged",
        moments.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.t, r.mean, r.variance, r.usable, r.flagged
            )
        }),
    )?;
    let fit = diffusion_exponent(&moments, window)?;
    write_fit(out, "fit.csv", &fit.fit)?;
    println!(
        "z = {} ± {} over [{}, {}] ({} points)",
        fit.z, fit.z_stderr, window.0, window.1, fit.fit.points
    );
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct HistogramArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Skip the analytic comparison (required for the Sinai table).
    #[arg(long)]
    pub no_oracle: bool,
}

#[derive(Serialize)]
struct HistogramConfig {
    #[serde(flatten)]
    common: Common,
    t: f64,
    oracle: bool,
}

fn oracle_for(spec: &TableSpec) -> Result<Oracle> {
    match *spec {
        TableSpec::Circle { r } => Ok(Oracle::Circle { r }),
        TableSpec::Polygon { m, r } => Ok(Oracle::Polygon {
            params: RegularOrbitParams::new(m)?,
            r,
        }),
        TableSpec::Sinai { .. } => Err(BilliardError::Validation(
            "no analytic collision distribution exists for the Sinai table; pass --no-oracle"
                .into(),
        )),
    }
}

pub fn histogram(args: &HistogramArgs) -> Result<()> {
    let file = load(&args.run)?;
    let common = args.run.common(&file, CLOSED_PARTICLES)?;
    let use_oracle = !(args.no_oracle || file.no_oracle.unwrap_or(false));
    let oracle = use_oracle.then(|| oracle_for(&common.table)).transpose()?;
    let table = Table::new(common.table)?;
    let t = args
        .run
        .t_max
        .or(file.t_max)
        .unwrap_or(100.0 * table.mean_collision_time());
    let config = EnsembleConfig {
        particles: common.particles,
        seed: common.seed,
        sample_times: Vec::new(),
        t_max: t,
        options: AdvanceOptions::default(),
    };
    config.validate()?;
    let resolved = HistogramConfig {
        common,
        t,
        oracle: use_oracle,
    };
    let out = &resolved.common.out;
    ensure_dir(out)?;
    write_run_record(out, "histogram", &resolved)?;

    let hist = with_workers(resolved.common.workers, || {
        collision_histogram(&table, &config, t)
    })??;
    if hist.total() == 0 {
        return Err(BilliardError::Numerical(
            "every trajectory was flagged; the histogram is empty".into(),
        ));
    }
    let total = (hist.total() + hist.flagged) as f64;
    warn(flagged_warning(hist.flagged as f64 / total));

    let Some(oracle) = oracle else {
        write_csv(
            out,
            "histogram.csv",
            "n,count,pmf",
            hist.masses().map(|(n, c, p)| format!("{n},{c},{p}")),
        )?;
        println!(
            "{} usable trajectories, {} flagged",
            hist.total(),
            hist.flagged
        );
        return Ok(());
    };
    let cmp = histogram_vs_oracle(&hist, &oracle)?;
    write_csv(
        out,
        "histogram.csv",
        OracleComparison::CSV_HEADER,
        cmp.bins
            .iter()
            .map(|b| format!("{},{},{},{}", b.n, b.count, b.empirical, b.oracle)),
    )?;
    let (lo, hi) = oracle.support(t);
    write_csv(
        out,
        "tv.csv",
        "t,total_variation,empirical_outside_support,oracle_tail,support_lo,support_hi",
        [format!(
            "{t},{},{},{},{lo},{hi}",
            cmp.total_variation, cmp.empirical_outside_support, cmp.oracle_tail
        )],
    )?;
    println!(
        "TV = {}; empirical mass outside the oracle support = {}",
        cmp.total_variation, cmp.empirical_outside_support
    );
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct EscapeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Opening width.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Opening centre: `side:k`, `vertex:k` or `s:<arclength>`.
    #[arg(long)]
    pub placement: Option<String>,
}

#[derive(Serialize)]
struct OpeningConfig {
    width: f64,
    placement: String,
    center: f64,
}

#[derive(Serialize)]
struct EscapeConfig {
    #[serde(flatten)]
    common: Common,
    opening: OpeningConfig,
    tau_e: f64,
    t_max: f64,
    samples: usize,
    window: (f64, f64),
}

/// Runs one open-table ensemble and writes its survival curve.
#[allow(clippy::too_many_arguments)]
fn run_escape(
    table: &Table,
    opening: &Opening,
    config: &EnsembleConfig,
    samples: usize,
    tau_e: f64,
    workers: Option<usize>,
    out: &Path,
    survival_name: &str,
) -> Result<(SurvivalCurve, Vec<EscapeRecord>)> {
    warn(check_opening(table, opening)?);
    let records = with_workers(workers, || run_open(table, opening, config))??;
    let grid = geometric_grid(tau_e / 10.0, config.t_max, samples);
    let curve = survival_curve(&records, &grid)?;
    warn(curve.warning());
    write_csv(
        out,
        survival_name,
        "t,N,S",
        curve
            .rows
            .iter()
            .map(|r| format!("{},{},{}", r.t, r.alive, r.fraction)),
    )?;
    Ok((curve, records))
}

fn survival_samples(args: &RunArgs, file: &FileConfig) -> Result<usize> {
    let samples = args
        .samples
        .or(file.samples)
        .unwrap_or(SURVIVAL_GRID_POINTS);
    if samples < 3 {
        return Err(BilliardError::Validation(
            "--samples must be at least 3".into(),
        ));
    }
    Ok(samples)
}

fn resolve_t_max(args: &RunArgs, file: &FileConfig, tau_e: f64) -> Result<f64> {
    let t_max = args.t_max.or(file.t_max).unwrap_or(100.0 * tau_e);
    if !(t_max > tau_e / 10.0) {
        return Err(BilliardError::Validation(format!(
            "t-max {t_max} must exceed τ_e/10 = {}",
            tau_e / 10.0
        )));
    }
    Ok(t_max)
}

pub fn escape(args: &EscapeArgs) -> Result<()> {
    let file = load(&args.run)?;
    let common = args.run.common(&file, OPEN_PARTICLES)?;
    let table = Table::new(common.table)?;
    let width = args
        .delta
        .or(file.delta)
        .ok_or_else(|| BilliardError::Validation("--delta is required".into()))?;
    let placement = parse_placement(
        args.placement.as_deref().or(file.placement.as_deref()),
        &common.table,
    )?;
    let opening = Opening::from_placement(&table, placement, width)?;
    let tau_e = mean_escape_time(&table, width)?;
    let t_max = resolve_t_max(&args.run, &file, tau_e)?;
    let samples = survival_samples(&args.run, &file)?;
    let window = args
        .run
        .window(&file)?
        .unwrap_or_else(|| default_decay_window(tau_e, t_max));
    let config = EnsembleConfig {
        particles: common.particles,
        seed: common.seed,
        sample_times: Vec::new(),
        t_max,
        options: AdvanceOptions::default(),
    };
    let resolved = EscapeConfig {
        opening: OpeningConfig {
            width,
            placement: placement.to_string(),
            center: opening.center(),
        },
        common,
        tau_e,
        t_max,
        samples,
        window,
    };
    let out = &resolved.common.out;
    ensure_dir(out)?;
    write_run_record(out, "escape", &resolved)?;

    let (curve, records) = run_escape(
        &table,
        &opening,
        &config,
        samples,
        tau_e,
        resolved.common.workers,
        out,
        "survival.csv",
    )?;
    // Censored and flagged particles get an empty escape time.
    write_csv(
        out,
        "escapes.csv",
        "particle,escape_time",
        records.iter().map(|r| match r.escape_time() {
            Some(t) => format!("{},{t}", r.particle),
            None => format!("{},", r.particle),
        }),
    )?;
    let fit = decay_exponent(&curve, window)?;
    write_fit(out, "fit.csv", &fit.fit)?;
    println!(
        "δ = {} ± {} over [{}, {}]; τ_e = {tau_e}; {} of {} escaped",
        fit.delta,
        fit.fit.stderr,
        window.0,
        window.1,
        records.iter().filter(|r| r.escape_time().is_some()).count(),
        curve.initial
    );
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Polygon side counts, ascending, e.g. `8,16,32,64`.
    #[arg(long, value_delimiter = ',')]
    pub ms: Vec<u32>,
    /// Fixed opening width for every polygon.
    #[arg(long, conflicts_with = "tau_e")]
    pub delta: Option<f64>,
    /// Fixed mean escape time; the width is recomputed per polygon.
    #[arg(long = "tau-e")]
    pub tau_e: Option<f64>,
    #[arg(long)]
    pub placement: Option<String>,
}

#[derive(Serialize)]
enum ScanMode {
    FixedWidth(f64),
    FixedEscapeTime(f64),
}

#[derive(Serialize)]
struct ScanConfig {
    r: f64,
    ms: Vec<u32>,
    mode: ScanMode,
    placement: Option<String>,
    particles: usize,
    seed: u64,
    t_max: Option<f64>,
    samples: usize,
    window: Option<(f64, f64)>,
    workers: Option<usize>,
    out: PathBuf,
}

pub fn scan_m(args: &ScanArgs) -> Result<()> {
    let file = load(&args.run)?;
    let ms = if args.ms.is_empty() {
        file.ms.clone().unwrap_or_default()
    } else {
        args.ms.clone()
    };
    if ms.is_empty() {
        return Err(BilliardError::Validation(
            "--ms needs at least one polygon".into(),
        ));
    }
    if ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BilliardError::Validation(
            "--ms must be strictly ascending".into(),
        ));
    }
    if let Some(kind) = args.run.table.table.or(file.table) {
        if kind != crate::config::TableKind::Polygon {
            return Err(BilliardError::Validation(
                "scan-m runs polygons only".into(),
            ));
        }
    }
    let r = args.run.table.r.or(file.r).unwrap_or(1.0);
    let mode = match (args.delta.or(file.delta), args.tau_e.or(file.tau_e)) {
        (Some(w), None) => ScanMode::FixedWidth(w),
        (None, Some(t)) => ScanMode::FixedEscapeTime(t),
        (Some(_), Some(_)) => {
            return Err(BilliardError::Validation(
                "give either --delta or --tau-e, not both".into(),
            ))
        }
        (None, None) => {
            return Err(BilliardError::Validation(
                "--delta or --tau-e is required".into(),
            ))
        }
    };
    let workers = args.run.workers.or(file.workers);
    if workers == Some(0) {
        return Err(BilliardError::Validation(
            "--workers must be at least 1".into(),
        ));
    }
    let resolved = ScanConfig {
        r,
        ms,
        mode,
        placement: args.placement.clone().or_else(|| file.placement.clone()),
        particles: args
            .run
            .particles
            .or(file.particles)
            .unwrap_or(OPEN_PARTICLES),
        seed: args
            .run
            .seed
            .or(file.seed)
            .unwrap_or(crate::config::DEFAULT_SEED),
        t_max: args.run.t_max.or(file.t_max),
        samples: survival_samples(&args.run, &file)?,
        window: args.run.window(&file)?,
        workers,
        out: args
            .run
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let out = &resolved.out;
    ensure_dir(out)?;
    write_run_record(out, "scan-m", &resolved)?;

    let mut rows = Vec::new();
    for &m in &resolved.ms {
        let spec = TableSpec::Polygon { m, r };
        let table = Table::new(spec)?;
        let width = match resolved.mode {
            ScanMode::FixedWidth(w) => w,
            ScanMode::FixedEscapeTime(t) => width_for_escape_time(&table, t)?,
        };
        let placement = parse_placement(resolved.placement.as_deref(), &spec)?;
        let opening = Opening::from_placement(&table, placement, width)?;
        let tau_e = mean_escape_time(&table, width)?;
        let t_max = match resolved.t_max {
            Some(t) => t,
            None => 100.0 * tau_e,
        };
        if !(t_max > tau_e / 10.0) {
            return Err(BilliardError::Validation(format!(
                "t-max {t_max} must exceed τ_e/10 = {} for m = {m}",
                tau_e / 10.0
            )));
        }
        let window = resolved
            .window
            .unwrap_or_else(|| default_decay_window(tau_e, t_max));
        let config = EnsembleConfig {
            particles: resolved.particles,
            seed: resolved.seed,
            sample_times: Vec::new(),
            t_max,
            options: AdvanceOptions::default(),
        };
        let (curve, _) = run_escape(
            &table,
            &opening,
            &config,
            resolved.samples,
            tau_e,
            workers,
            out,
            &format!("survival_m{m}.csv"),
        )?;
        let fit = decay_exponent(&curve, window)?;
        let alpha = crossover_m_alpha(r, width)?;
        println!(
            "m = {m}: δ = {} ± {} (Δ = {width}, τ_e = {tau_e})",
            fit.delta, fit.fit.stderr
        );
        rows.push(format!(
            "{m},{width},{tau_e},{},{},{}",
            fit.delta, fit.fit.stderr, alpha.value
        ));
    }
    write_csv(
        out,
        "summary.csv",
        "m,opening_width,tau_e,delta,stderr,m_alpha",
        rows,
    )?;
    if let ScanMode::FixedWidth(w) = resolved.mode {
        let alpha = crossover_m_alpha(r, w)?;
        println!(
            "predicted m_α = 2πr/Δ = {} (nearest {}){}",
            alpha.value,
            alpha.rounded,
            if alpha.degenerate { ", degenerate" } else { "" }
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curve {
    /// Circle collision-count density.
    CbPdf,
    /// Regular-orbit polygon collision-count density.
    PolygonPdf,
    /// Regular-orbit collision time against collision angle.
    TReg,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub curve: Curve,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Mean collision count that fixes the time.
    #[arg(long)]
    pub nc: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Largest collision angle for `t-reg`.
    #[arg(long = "phi-max")]
    pub phi_max: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct OracleConfig {
    curve: Curve,
    m: Option<u32>,
    r: f64,
    nc: Option<f64>,
    points: usize,
    phi_max: Option<f64>,
    out: PathBuf,
}

fn density_cell(d: Density) -> String {
    match d {
        Density::Finite(v) => v.to_string(),
        Density::Singular => "inf".into(),
    }
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
fn linspace(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(move |k| {
        if k + 1 == points {
            hi
        } else {
            lo + step * k as f64
        }
    })
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let m = args.m.or(file.m);
    let r = args.r.or(file.r).unwrap_or(1.0);
    let points = args.points.or(file.points).unwrap_or(201);
    if points < 2 {
        return Err(BilliardError::Validation(
            "--points must be at least 2".into(),
        ));
    }
    let need_m = || m.ok_or_else(|| BilliardError::Validation("--m is required".into()));
    let resolved = OracleConfig {
        curve: args.curve,
        m: if args.curve == Curve::CbPdf {
            None
        } else {
            Some(need_m()?)
        },
        r,
        nc: (args.curve != Curve::TReg).then(|| args.nc.or(file.nc).unwrap_or(1.0)),
        points,
        phi_max: None,
        out: args
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
    };

    match args.curve {
        Curve::CbPdf => {
            let nc = resolved.nc.expect("set for densities");
            let t = nc * std::f64::consts::PI * r / 2.0;
            debug_assert!((circle_mean_count(t, r) - nc).abs() <= 1e-12 * nc);
            // The tail falls off as n⁻⁴; four mean counts show all but ~1% of it.
            let lo = std::f64::consts::PI * nc / 4.0;
            let rows = linspace(lo, 4.0 * nc, points)
                .map(|n| Ok(format!("{n},{}", density_cell(cb_collision_pdf(n, t, r)?))))
                .collect::<Result<Vec<_>>>()?;
            ensure_dir(&resolved.out)?;
            write_run_record(&resolved.out, "oracle", &resolved)?;
            write_csv(&resolved.out, "cb_pdf.csv", "n,density", rows)
        }
        Curve::PolygonPdf => {
            let m = resolved.m.expect("checked");
            let nc = resolved.nc.expect("set for densities");
            let params = RegularOrbitParams::new(m)?;
            let t = nc * polygon_mean_collision_time(m, r);
            let (lo, hi) = params.support_ratio();
            let rows = linspace(lo * nc, hi * nc, points)
                .map(|n| {
                    let d = polygon_collision_pdf(n, t, &params, r)?;
                    Ok(format!("{n},{}", density_cell(d)))
                })
                .collect::<Result<Vec<_>>>()?;
            ensure_dir(&resolved.out)?;
            write_run_record(&resolved.out, "oracle", &resolved)?;
            write_csv(&resolved.out, "polygon_pdf.csv", "n,density", rows)
        }
        Curve::TReg => {
            let m = resolved.m.expect("checked");
            let params = RegularOrbitParams::new(m)?;
            // The grazing divergence sits at φ = ψ + π/2, outside [0, π/2).
            let phi_max = args
                .phi_max
                .or(file.phi_max)
                .unwrap_or(FRAC_PI_2 * (1.0 - 1.0 / points as f64));
            if !(0.0..FRAC_PI_2).contains(&phi_max) {
                return Err(BilliardError::Validation(format!(
                    "--phi-max must lie in [0, π/2), got {phi_max}"
                )));
            }
            let rows = linspace(0.0, phi_max, points)
                .map(|phi| {
                    Ok(format!(
                        "{phi},{}",
                        regular_orbit_collision_time(&params, r, phi)?
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let resolved = OracleConfig {
                phi_max: Some(phi_max),
                ..resolved
            };
            ensure_dir(&resolved.out)?;
            write_run_record(&resolved.out, "oracle", &resolved)?;
            write_csv(&resolved.out, "t_reg.csv", "phi,t", rows)?;
            println!(
                "sliding relaxation time {}; vortex relaxation time {}",
                sliding_relaxation_time(&params, r)?,
                vortex_relaxation_time(&params, r)?
            );
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    /// `var_n ∝ t^(2/z)`.
    Diffusion,
    /// `S ∝ t^(-δ)`.
    Decay,
    /// Plain power law.
    Raw,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with a header row, e.g. moments.csv or survival.csv.
    pub input: PathBuf,
    /// Fit window as `lo:hi` (default: every row).
    #[arg(long)]
    pub window: Option<String>,
    /// Inferred from the columns when omitted.
    #[arg(long, value_enum)]
    pub kind: Option<FitKind>,
    /// Column holding the time (default `t`).
    #[arg(long, default_value = "t")]
    pub x: String,
    /// Column to fit (default `var_n` or `S` by kind).
    #[arg(long)]
    pub y: Option<String>,
    /// Directory for fit.csv; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_series(args: &FitArgs) -> Result<(FitKind, Vec<(f64, f64)>)> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| {
        BilliardError::Validation(format!("cannot read {}: {e}", args.input.display()))
    })?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| BilliardError::Validation("input CSV is empty".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let has = |c: &str| header.contains(&c);
    let kind = args.kind.unwrap_or(if has("var_n") {
        FitKind::Diffusion
    } else if has("S") {
        FitKind::Decay
    } else {
        FitKind::Raw
    });
    let y_name = match (&args.y, kind) {
        (Some(y), _) => y.as_str(),
        (None, FitKind::Diffusion) => "var_n",
        (None, FitKind::Decay) => "S",
        (None, FitKind::Raw) => {
            return Err(BilliardError::Validation(
                "--y is required for a raw fit".into(),
            ))
        }
    };
    let column = |name: &str| {
        header
            .iter()
            .position(|&h| h == name)
            .ok_or_else(|| BilliardError::Validation(format!("no column `{name}` in the input")))
    };
    let (xi, yi) = (column(&args.x)?, column(y_name)?);
    let mut series = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let cell = |i: usize| -> Result<f64> {
            cells
                .get(i)
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| BilliardError::Validation(format!("row {} is malformed", k + 2)))
        };
        series.push((cell(xi)?, cell(yi)?));
    }
    Ok((kind, series))
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let (kind, series) = read_series(args)?;
    let window = match &args.window {
        Some(w) => parse_window(w)?,
        None => {
            let (lo, hi) = series
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(t, _)| {
                    (lo.min(t), hi.max(t))
                });
            (lo, hi)
        }
    };
    let (fit, summary) = match kind {
        FitKind::Diffusion => {
            let f = diffusion_exponent_from(&series, window)?;
            (f.fit, format!("z = {} ± {}", f.z, f.z_stderr))
        }
        FitKind::Decay => {
            let f = decay_exponent_from(&series, window)?;
            (f.fit, format!("δ = {} ± {}", f.delta, f.fit.stderr))
        }
        FitKind::Raw => {
            let f = fit_power_law(&series, window)?;
            (f, format!("exponent = {} ± {}", f.exponent, f.stderr))
        }
    };
    if fit.skipped > 0 {
        eprintln!("warning: {} non-positive points skipped", fit.skipped);
    }
    match &args.out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_fit(dir, "fit.csv", &fit)?;
        }
        None => println!(
            "{}\n{}",
            billiard_core::analysis::PowerLawFit::CSV_HEADER,
            fit.csv_row()
        ),
    }
    eprintln!("{summary}");
    Ok(())
}
