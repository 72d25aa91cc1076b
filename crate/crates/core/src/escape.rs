//! Open tables: particles leave through a boundary opening, and the survival
//! fraction `S(t) = N(t)/N(0)` is tracked.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::{advance, Termination};
use crate::ensemble::{flagged_warning, geometric_grid, initial_state, EnsembleConfig};
use crate::error::{BilliardError, Result};
use crate::geometry::{Opening, Table};
use crate::par::map_chunks;

/// Openings wider than this fraction of the perimeter are rejected.
pub const MAX_OPENING_FRACTION: f64 = 0.1;
/// Openings wider than this fraction of the perimeter produce a warning.
pub const WARN_OPENING_FRACTION: f64 = 0.01;
/// Points in the default survival grid.
pub const SURVIVAL_GRID_POINTS: usize = 96;

/// Default survival grid: geometric from `τ_e/10` to `t_max`.
pub fn default_survival_grid(tau_e: f64, t_max: f64) -> Vec<f64> {
    let lo = tau_e / 10.0;
    if t_max > lo {
        geometric_grid(lo, t_max, SURVIVAL_GRID_POINTS)
    } else {
        vec![t_max]
    }
}

/// Default decay-fit window `[3τ_e, t_max/3]`.
pub fn default_decay_window(tau_e: f64, t_max: f64) -> (f64, f64) {
    (3.0 * tau_e, t_max / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EscapeOutcome {
    Escaped(f64),
    /// Still inside at the time budget (the value).
    Survived(f64),
    Flagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeRecord {
    pub particle: usize,
    pub outcome: EscapeOutcome,
}

impl EscapeRecord {
    pub fn escape_time(&self) -> Option<f64> {
        match self.outcome {
            EscapeOutcome::Escaped(t) => Some(t),
            _ => None,
        }
    }
}

/// Checks `Δ < P/10`; returns a warning when `Δ > P/100`.
pub fn check_opening(table: &Table, opening: &Opening) -> Result<Option<String>> {
    let p = table.perimeter();
    if opening.width() >= MAX_OPENING_FRACTION * p {
        return Err(BilliardError::validation(format!(
            "opening width {} is not small: it must stay below P/10 = {}",
            opening.width(),
            MAX_OPENING_FRACTION * p
        )));
    }
    Ok((opening.width() > WARN_OPENING_FRACTION * p).then(|| {
        format!(
            "warning: opening width {} exceeds P/100 = {}; escape-time scaling assumes a small hole",
            opening.width(),
            WARN_OPENING_FRACTION * p
        )
    }))
}

/// Advances every particle of the ensemble until it escapes or reaches
/// `config.t_max`. Sample times in `config` are ignored.
pub fn run_open(
    table: &Table,
    opening: &Opening,
    config: &EnsembleConfig,
) -> Result<Vec<EscapeRecord>> {
    check_opening(table, opening)?;
    config.validate()?;
    let chunks = map_chunks(config.particles, |range| -> Result<Vec<EscapeRecord>> {
        range
            .map(|i| {
                let state = initial_state(table, config.seed, i);
                let out = advance(
                    table,
                    state,
                    config.t_max,
                    &[],
                    Some(opening),
                    &config.options,
                )?;
                let outcome = match out.termination {
                    Termination::Escaped { time } => EscapeOutcome::Escaped(time),
                    Termination::TimeBudget => EscapeOutcome::Survived(config.t_max),
                    Termination::VertexHit { .. } | Termination::EventCap => EscapeOutcome::Flagged,
                };
                Ok(EscapeRecord {
                    particle: i,
                    outcome,
                })
            })
            .collect()
    });
    let mut records = Vec::with_capacity(config.particles);
    for chunk in chunks {
        records.extend(chunk?);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub t: f64,
    pub alive: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// Usable (non-flagged) particle count, `N(0)`.
    pub initial: u64,
    pub flagged: u64,
    pub rows: Vec<SurvivalRow>,
}

impl SurvivalCurve {
    /// `(t, S(t))` pairs.
    pub fn series(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, r.fraction)).collect()
    }

    pub fn warning(&self) -> Option<String> {
        flagged_warning(self.flagged as f64 / (self.initial + self.flagged) as f64)
    }
}

/// `N(t)` counts usable particles that have not escaped by `t` (escape at
/// exactly `t` counts as gone), survivors included through the budget.
pub fn survival_curve(records: &[EscapeRecord], grid: &[f64]) -> Result<SurvivalCurve> {
    if records.is_empty() {
        return Err(BilliardError::validation("no escape records"));
    }
    if grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BilliardError::validation(
            "survival grid must be strictly ascending positive times",
        ));
    }
    let flagged = records
        .iter()
        .filter(|r| r.outcome == EscapeOutcome::Flagged)
        .count() as u64;
    let initial = records.len() as u64 - flagged;
    if initial == 0 {
        return Err(BilliardError::validation("every trajectory was flagged"));
    }
    let mut escapes: Vec<f64> = records
        .iter()
        .filter_map(EscapeRecord::escape_time)
        .collect();
    escapes.sort_by(f64::total_cmp);

    let rows = grid
        .iter()
        .map(|&t| {
            let gone = escapes.partition_point(|&e| e <= t) as u64;
            let alive = initial - gone;
            SurvivalRow {
                t,
                alive,
                fraction: alive as f64 / initial as f64,
            }
        })
        .collect();
    Ok(SurvivalCurve {
        initial,
        flagged,
        rows,
    })
}

/// Mean escape time `τ_c · P / Δ`.
pub fn mean_escape_time(table: &Table, width: f64) -> Result<f64> {
    if !(width > 0.0 && width < table.perimeter()) {
        return Err(BilliardError::validation(format!(
            "opening width must lie in (0, P = {}), got {width}",
            table.perimeter()
        )));
    }
    Ok(table.mean_collision_time() * table.perimeter() / width)
}

/// Opening width that gives mean escape time `tau_e`.
pub fn width_for_escape_time(table: &Table, tau_e: f64) -> Result<f64> {
    if !(tau_e > 0.0 && tau_e.is_finite()) {
        return Err(BilliardError::validation("escape time must be positive"));
    }
    let width = table.mean_collision_time() * table.perimeter() / tau_e;
    if width >= table.perimeter() {
        return Err(BilliardError::validation(format!(
            "escape time {tau_e} is shorter than the mean collision time"
        )));
    }
    Ok(width)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    /// `2πr/Δ`.
    pub value: f64,
    pub rounded: u64,
    /// Set when the opening spans the whole circumference.
    pub degenerate: bool,
}

/// Vertex count `2πr/Δ` above which the primary decay channel closes.
pub fn crossover_m_alpha(r: f64, width: f64) -> Result<Crossover> {
    if !(r > 0.0 && width > 0.0) {
        return Err(BilliardError::validation(
            "radius and opening width must be positive",
        ));
    }
    let value = TAU * r / width;
    if value < 1.0 {
        return Err(BilliardError::validation(format!(
            "opening width {width} exceeds the circumference 2πr = {}",
            TAU * r
        )));
    }
    Ok(Crossover {
        value,
        rounded: value.round() as u64,
        degenerate: value.round() <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TableSpec;
    use std::f64::consts::PI;

    fn rec(i: usize, outcome: EscapeOutcome) -> EscapeRecord {
        EscapeRecord {
            particle: i,
            outcome,
        }
    }

    #[test]
    fn survival_counts() {
        let records: Vec<_> = (1..=10)
            .map(|k| rec(k, EscapeOutcome::Escaped(k as f64)))
            .collect();
        let c = survival_curve(&records, &[5.5]).unwrap();
        assert_eq!(c.rows[0].alive, 5);
        assert_eq!(c.rows[0].fraction, 0.5);

        let c = survival_curve(&records, &[10.0, 20.0]).unwrap();
        assert!(c.rows.iter().all(|r| r.fraction == 0.0));

        let alive: Vec<_> = (0..4)
            .map(|k| rec(k, EscapeOutcome::Survived(9.0)))
            .collect();
        let c = survival_curve(&alive, &[1.0, 9.0]).unwrap();
        assert!(c.rows.iter().all(|r| r.fraction == 1.0));

        let mut mixed = alive.clone();
        mixed.push(rec(9, EscapeOutcome::Flagged));
        mixed.push(rec(10, EscapeOutcome::Escaped(2.0)));
        let c = survival_curve(&mixed, &[1.0, 3.0]).unwrap();
        assert_eq!(c.initial, 5);
        assert_eq!(c.flagged, 1);
        assert_eq!(c.rows[1].alive, 4);

        assert!(survival_curve(&[], &[1.0]).is_err());
        assert!(survival_curve(&records, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn escape_time_formula() {
        let c = Table::new(TableSpec::Circle { r: 1.0 }).unwrap();
        let tau = mean_escape_time(&c, 0.05).unwrap();
        assert!((tau - PI * PI / 0.05).abs() < 1e-10);
        assert!((tau - 197.392088).abs() < 1e-5);
        assert!((mean_escape_time(&c, 0.1).unwrap() * 2.0 - tau).abs() < 1e-10);
        assert!(mean_escape_time(&c, c.perimeter()).is_err());

        let p = Table::new(TableSpec::Polygon { m: 64, r: 1.0 }).unwrap();
        let expected = (PI / 2.0) * (PI / 64.0).cos() * 128.0 * (PI / 64.0).sin() / 0.05;
        assert!((mean_escape_time(&p, 0.05).unwrap() - expected).abs() < 1e-9);

        let w = width_for_escape_time(&p, 300.0).unwrap();
        assert!((mean_escape_time(&p, w).unwrap() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn crossover_values() {
        let a = crossover_m_alpha(1.0, 0.05).unwrap();
        assert!((a.value - 125.66).abs() < 0.01);
        assert_eq!(a.rounded, 126);
        let b = crossover_m_alpha(1.0, 0.20).unwrap();
        assert!((b.value - 31.42).abs() < 0.01);
        assert_eq!(b.rounded, 31);
        assert!(!b.degenerate);
        let d = crossover_m_alpha(1.0, TAU).unwrap();
        assert_eq!(d.rounded, 1);
        assert!(d.degenerate);
        assert!(crossover_m_alpha(1.0, 7.0).is_err());
    }

    #[test]
    fn wide_openings_rejected() {
        let c = Table::new(TableSpec::Circle { r: 1.0 }).unwrap();
        let cfg = EnsembleConfig::with_default_grid(&c, 10, 1, 10.0);
        let wide = Opening::new(&c, 0.0, 1.0).unwrap();
        assert!(matches!(
            run_open(&c, &wide, &cfg),
            Err(BilliardError::Validation(_))
        ));
        let mid = Opening::new(&c, 0.0, 0.1).unwrap();
        assert!(check_opening(&c, &mid).unwrap().is_some());
        let small = Opening::new(&c, 0.0, 0.05).unwrap();
        assert!(check_opening(&c, &small).unwrap().is_none());
    }

    #[test]
    fn escapes_happen_at_collision_times() {
        let t = Table::new(TableSpec::Polygon { m: 6, r: 1.0 }).unwrap();
        let o = Opening::new(&t, 0.3, 0.05).unwrap();
        let cfg = EnsembleConfig::with_default_grid(&t, 300, 4, 200.0);
        let records = run_open(&t, &o, &cfg).unwrap();
        assert_eq!(records.len(), 300);
        for r in records.iter().take(50) {
            let Some(te) = r.escape_time() else { continue };
            let mut hits = Vec::new();
            crate::dynamics::advance_observed(
                &t,
                initial_state(&t, 4, r.particle),
                te,
                &[],
                None,
                &cfg.options,
                |ev, _| hits.push(ev.time),
            )
            .unwrap();
            // The escape hit itself is at exactly te; the closed run reflects there.
            assert_eq!(*hits.last().unwrap(), te);
        }
    }
}
