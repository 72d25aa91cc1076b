//! Closed-table ensembles: uniform phase-space initial conditions and the
//! statistics of the wall-collision count `n(t)`.
//!
//! Per-particle results are aggregated as exact integer sums (`Σn`, `Σn²`,
//! histogram counts), so the output does not depend on how particles were
//! scheduled across threads.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{advance, AdvanceOptions, ParticleState};
use crate::error::{BilliardError, Result};
use crate::geometry::Table;
use crate::par::map_chunks;
use crate::vec2::Vec2;

/// Flagged fraction above which reports carry a warning.
pub const FLAGGED_WARNING_FRACTION: f64 = 1e-3;

/// Number of points in the default sample grid.
pub const DEFAULT_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub particles: usize,
    pub seed: u64,
    /// Ascending times in `(0, t_max]`.
    pub sample_times: Vec<f64>,
    pub t_max: f64,
    #[serde(default)]
    pub options: AdvanceOptions,
}

impl EnsembleConfig {
    /// Config with the default grid: [`DEFAULT_GRID_POINTS`] points spaced
    /// geometrically over `[τ_c, t_max]`.
    pub fn with_default_grid(table: &Table, particles: usize, seed: u64, t_max: f64) -> Self {
        let tau = table.mean_collision_time();
        let sample_times = if t_max > tau {
            geometric_grid(tau, t_max, DEFAULT_GRID_POINTS)
        } else {
            vec![t_max]
        };
        Self {
            particles,
            seed,
            sample_times,
            t_max,
            options: AdvanceOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(BilliardError::validation(
                "ensemble needs at least one particle",
            ));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(BilliardError::validation(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        validate_grid(&self.sample_times, self.t_max)
    }
}

pub(crate) fn validate_grid(grid: &[f64], t_max: f64) -> Result<()> {
    if grid.iter().any(|&t| !(t > 0.0 && t <= t_max)) {
        return Err(BilliardError::validation(format!(
            "sample times must lie in (0, {t_max}]"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BilliardError::validation(
            "sample times must be strictly ascending",
        ));
    }
    Ok(())
}

/// `points` values spaced geometrically from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let ratio = (hi / lo).ln() / (points - 1) as f64;
            let mut grid: Vec<f64> = (0..points).map(|k| lo * (ratio * k as f64).exp()).collect();
            grid[0] = lo;
            grid[points - 1] = hi;
            grid
        }
    }
}

/// Random stream of particle `index`: ChaCha8 keyed by the master seed, one
/// stream per particle.
pub fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Initial state of particle `index`: position uniform on the accessible
/// area, launch angle uniform on `[0, 2π)`.
pub fn initial_state(table: &Table, seed: u64, index: usize) -> ParticleState {
    let mut rng = particle_rng(seed, index);
    let (lo, hi) = table.bounding_box();
    let span = hi - lo;
    let position = loop {
        let p = Vec2::new(
            lo.x + span.x * rng.random::<f64>(),
            lo.y + span.y * rng.random::<f64>(),
        );
        if table.contains(p) {
            break p;
        }
    };
    ParticleState::new(position, TAU * rng.random::<f64>())
}

/// All `config.particles` initial states in index order.
pub fn sample_initial(table: &Table, config: &EnsembleConfig) -> Vec<ParticleState> {
    (0..config.particles)
        .map(|i| initial_state(table, config.seed, i))
        .collect()
}

/// Exact mean and unbiased variance from integer sums.
pub fn moments_from_sums(count: u64, sum: u128, sum_sq: u128) -> (f64, f64) {
    if count == 0 {
        return (0.0, 0.0);
    }
    let mean = sum as f64 / count as f64;
    if count < 2 {
        return (mean, 0.0);
    }
    let c = count as u128;
    // c·Σn² − (Σn)² >= 0 by Cauchy–Schwarz, computed without rounding.
    let spread = c * sum_sq - sum * sum;
    (mean, spread as f64 / (c * (c - 1)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub usable: u64,
    pub flagged: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub rows: Vec<MomentRow>,
}

impl MomentSeries {
    pub fn flagged_fraction(&self) -> f64 {
        self.rows
            .first()
            .map(|r| r.flagged as f64 / (r.usable + r.flagged) as f64)
            .unwrap_or(0.0)
    }

    /// Warning text when too many trajectories were excluded.
    pub fn warning(&self) -> Option<String> {
        flagged_warning(self.flagged_fraction())
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.variance).collect()
    }
}

pub fn flagged_warning(fraction: f64) -> Option<String> {
    (fraction > FLAGGED_WARNING_FRACTION).then(|| {
        format!(
            "warning: {:.3e} of trajectories were flagged (vertex or event-cap hits) and excluded",
            fraction
        )
    })
}

/// Empirical distribution of the collision count at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionHistogram {
    pub t: f64,
    pub counts: BTreeMap<u64, u64>,
    pub flagged: u64,
}

impl CollisionHistogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn pmf(&self, n: u64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.counts.get(&n).copied().unwrap_or(0) as f64 / total as f64
    }

    /// `(n, count, probability mass)` in ascending `n`.
    pub fn masses(&self) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        let total = self.total() as f64;
        self.counts
            .iter()
            .map(move |(&n, &c)| (n, c, c as f64 / total))
    }

    pub fn mean_and_variance(&self) -> (f64, f64) {
        let (sum, sum_sq) = self.counts.iter().fold((0u128, 0u128), |(s, q), (&n, &c)| {
            let (n, c) = (n as u128, c as u128);
            (s + n * c, q + n * n * c)
        });
        moments_from_sums(self.total(), sum, sum_sq)
    }
}

#[derive(Debug, Clone, Default)]
struct Partial {
    usable: u64,
    flagged: u64,
    sums: Vec<u128>,
    sums_sq: Vec<u128>,
    histograms: Vec<BTreeMap<u64, u64>>,
}

impl Partial {
    fn new(samples: usize, histograms: usize) -> Self {
        Self {
            sums: vec![0; samples],
            sums_sq: vec![0; samples],
            histograms: vec![BTreeMap::new(); histograms],
            ..Self::default()
        }
    }

    fn merge(&mut self, other: Partial) {
        self.usable += other.usable;
        self.flagged += other.flagged;
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            *a += b;
        }
        for (a, b) in self.sums_sq.iter_mut().zip(other.sums_sq) {
            *a += b;
        }
        for (a, b) in self.histograms.iter_mut().zip(other.histograms) {
            for (n, c) in b {
                *a.entry(n).or_insert(0) += c;
            }
        }
    }
}

/// Moments and histograms from one pass over the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub moments: MomentSeries,
    pub histograms: Vec<CollisionHistogram>,
}

/// Runs every particle to `t_max` once, collecting moments at the config's
/// sample times and histograms at `histogram_times` (each of which must be a
/// positive time no later than `t_max`).
pub fn run_ensemble(
    table: &Table,
    config: &EnsembleConfig,
    histogram_times: &[f64],
) -> Result<EnsembleStats> {
    config.validate()?;
    if histogram_times
        .iter()
        .any(|&t| !(t > 0.0 && t <= config.t_max))
    {
        return Err(BilliardError::validation(format!(
            "histogram times must lie in (0, {}]",
            config.t_max
        )));
    }

    // One merged grid; each requested time maps to an index in it.
    let mut grid: Vec<f64> = config
        .sample_times
        .iter()
        .chain(histogram_times)
        .copied()
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let index_of = |t: f64| grid.partition_point(|&g| g < t);
    let moment_idx: Vec<usize> = config.sample_times.iter().map(|&t| index_of(t)).collect();
    let hist_idx: Vec<usize> = histogram_times.iter().map(|&t| index_of(t)).collect();

    let partials = map_chunks(config.particles, |range| -> Result<Partial> {
        let mut acc = Partial::new(moment_idx.len(), hist_idx.len());
        for i in range {
            let state = initial_state(table, config.seed, i);
            let out = advance(table, state, config.t_max, &grid, None, &config.options)?;
            if out.termination.is_flagged() {
                acc.flagged += 1;
                continue;
            }
            acc.usable += 1;
            for (k, &g) in moment_idx.iter().enumerate() {
                let n = out.counts[g] as u128;
                acc.sums[k] += n;
                acc.sums_sq[k] += n * n;
            }
            for (k, &g) in hist_idx.iter().enumerate() {
                *acc.histograms[k].entry(out.counts[g]).or_insert(0) += 1;
            }
        }
        Ok(acc)
    });

    let mut total = Partial::new(moment_idx.len(), hist_idx.len());
    for p in partials {
        total.merge(p?);
    }

    let rows = config
        .sample_times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (mean, variance) = moments_from_sums(total.usable, total.sums[k], total.sums_sq[k]);
            MomentRow {
                t,
                mean,
                variance,
                usable: total.usable,
                flagged: total.flagged,
            }
        })
        .collect();
    let histograms = histogram_times
        .iter()
        .zip(total.histograms)
        .map(|(&t, counts)| CollisionHistogram {
            t,
            counts,
            flagged: total.flagged,
        })
        .collect();

    Ok(EnsembleStats {
        moments: MomentSeries { rows },
        histograms,
    })
}

/// Mean and unbiased variance of the collision count at each sample time.
pub fn collision_moments(table: &Table, config: &EnsembleConfig) -> Result<MomentSeries> {
    Ok(run_ensemble(table, config, &[])?.moments)
}

/// Empirical distribution of the collision count at time `t`.
pub fn collision_histogram(
    table: &Table,
    config: &EnsembleConfig,
    t: f64,
) -> Result<CollisionHistogram> {
    let config = EnsembleConfig {
        sample_times: Vec::new(),
        ..config.clone()
    };
    let mut stats = run_ensemble(table, &config, &[t])?;
    Ok(stats.histograms.remove(0))
}
