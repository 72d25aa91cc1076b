//! Power-law fitting in log-log coordinates and histogram/oracle comparison.

use serde::{Deserialize, Serialize};

use crate::ensemble::{CollisionHistogram, MomentSeries};
use crate::error::{BilliardError, Result};
use crate::escape::SurvivalCurve;
use crate::oracles::Oracle;

/// Least-squares line through `(ln t, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr: f64,
    /// `ln` of the prefactor.
    pub intercept: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub r2: f64,
    pub points: usize,
    /// Points inside the window dropped because `y <= 0`.
    pub skipped: usize,
}

impl PowerLawFit {
    pub const CSV_HEADER: &'static str = "exponent,stderr,intercept,t_lo,t_hi,r2,points";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.exponent, self.stderr, self.intercept, self.t_lo, self.t_hi, self.r2, self.points
        )
    }
}

/// Fits `y ∝ t^exponent` by ordinary least squares of `ln y` on `ln t` over
/// the points with `t_lo <= t <= t_hi`.
pub fn fit_power_law(series: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit> {
    let (t_lo, t_hi) = window;
    if !(t_lo < t_hi) || t_lo <= 0.0 {
        return Err(BilliardError::validation(format!(
            "fit window needs 0 < t_lo < t_hi, got ({t_lo}, {t_hi})"
        )));
    }
    let in_window: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_lo && t <= t_hi)
        .collect();
    let logs: Vec<(f64, f64)> = in_window
        .iter()
        .filter(|&&(_, y)| y > 0.0)
        .map(|&(t, y)| (t.ln(), y.ln()))
        .collect();
    let skipped = in_window.len() - logs.len();
    let n = logs.len();
    if n < 3 {
        return Err(BilliardError::validation(format!(
            "power-law fit needs at least 3 positive points in [{t_lo}, {t_hi}], found {n}"
        )));
    }

    let nf = n as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (sxx, sxy, syy) = logs.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &(x, y)| {
        let (dx, dy) = (x - mx, y - my);
        (a + dx * dx, b + dx * dy, c + dy * dy)
    });
    if sxx == 0.0 {
        return Err(BilliardError::numerical(
            "all fit points share the same time",
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = logs
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>();
    let stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r2 = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(PowerLawFit {
        exponent: slope,
        stderr,
        intercept,
        t_lo,
        t_hi,
        r2,
        points: n,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFit {
    /// Diffusion exponent `z` from `Var n ∝ t^(2/z)`.
    pub z: f64,
    pub z_stderr: f64,
    pub fit: PowerLawFit,
}

/// Diffusion exponent from the growth of the collision-count variance.
pub fn diffusion_exponent(moments: &MomentSeries, window: (f64, f64)) -> Result<DiffusionFit> {
    let series: Vec<(f64, f64)> = moments.rows.iter().map(|r| (r.t, r.variance)).collect();
    diffusion_exponent_from(&series, window)
}

/// [`diffusion_exponent`] on raw `(t, variance)` pairs.
pub fn diffusion_exponent_from(series: &[(f64, f64)], window: (f64, f64)) -> Result<DiffusionFit> {
    let fit = fit_power_law(series, window)?;
    if fit.exponent <= 0.0 {
        return Err(BilliardError::numerical(format!(
            "variance does not grow over the window (slope {})",
            fit.exponent
        )));
    }
    Ok(DiffusionFit {
        z: 2.0 / fit.exponent,
        z_stderr: 2.0 / (fit.exponent * fit.exponent) * fit.stderr,
        fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Decay exponent `δ` from `S ∝ t^(-δ)`.
    pub delta: f64,
    pub fit: PowerLawFit,
}

/// Decay exponent of a survival curve.
pub fn decay_exponent(curve: &SurvivalCurve, window: (f64, f64)) -> Result<DecayFit> {
    decay_exponent_from(&curve.series(), window)
}

/// [`decay_exponent`] on raw `(t, S)` pairs.
pub fn decay_exponent_from(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let fit = fit_power_law(series, window)?;
    Ok(DecayFit {
        delta: -fit.exponent,
        fit,
    })
}

/// Local exponents: a power-law fit around every grid time `t` in
/// `[lo, hi]`, over `[t/√span, t·√span]`. Returns `(t, exponent)` pairs for
/// windows that hold at least three positive points.
pub fn local_exponents(series: &[(f64, f64)], range: (f64, f64), span: f64) -> Vec<(f64, f64)> {
    let half = span.sqrt();
    series
        .iter()
        .filter(|&&(t, _)| t / half >= range.0 && t * half <= range.1)
        .filter_map(|&(t, _)| {
            fit_power_law(series, (t / half, t * half))
                .ok()
                .map(|f| (t, f.exponent))
        })
        .collect()
}

/// Longest run of consecutive local exponents within `tol` of `target`, as
/// the ratio `t_last / t_first` of its window centres (1 for a single point,
/// 0 when none qualifies).
pub fn longest_stable_span(local: &[(f64, f64)], target: f64, tol: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut start: Option<f64> = None;
    for &(t, e) in local {
        if (e - target).abs() <= tol {
            let s = *start.get_or_insert(t);
            best = best.max(t / s);
        } else {
            start = None;
        }
    }
    best
}

/// Width ratio (√10) of the windows used for local decay exponents.
pub const LOCAL_WINDOW_SPAN: f64 = 3.162_277_660_168_379_5;
/// Allowed deviation of a local exponent from 1 inside a stable window.
pub const STABLE_TOLERANCE: f64 = 0.1;

/// Span `t_last / t_first` of the longest run of local decay exponents with
/// `|δ_local − 1| ≤ 0.1` inside `range`. A window is stable when this reaches
/// a decade.
pub fn unit_decay_span(series: &[(f64, f64)], range: (f64, f64)) -> f64 {
    let local = local_exponents(series, range, LOCAL_WINDOW_SPAN);
    longest_stable_span(&local, -1.0, STABLE_TOLERANCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinComparison {
    pub n: u64,
    pub count: u64,
    pub empirical: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    /// `½ Σ |empirical − oracle|` including oracle mass beyond the table.
    pub total_variation: f64,
    pub bins: Vec<BinComparison>,
    /// Empirical mass on bins where the oracle assigns none.
    pub empirical_outside_support: f64,
    /// Oracle mass outside the tabulated bins.
    pub oracle_tail: f64,
}

impl OracleComparison {
    pub const CSV_HEADER: &'static str = "n,count,pmf,oracle";
}

/// Compares an empirical collision-count distribution with the oracle's
/// mass per integer bin `[n − ½, n + ½]`.
pub fn histogram_vs_oracle(hist: &CollisionHistogram, oracle: &Oracle) -> Result<OracleComparison> {
    if hist.total() == 0 {
        return Err(BilliardError::validation("histogram is empty"));
    }
    let t = hist.t;
    let (sup_lo, sup_hi) = oracle.support(t);
    let emp_lo = *hist.counts.keys().next().expect("non-empty");
    let emp_hi = *hist.counts.keys().next_back().expect("non-empty");
    let lo = emp_lo.min((sup_lo - 0.5).floor().max(0.0) as u64);
    let hi = if sup_hi.is_finite() {
        emp_hi.max((sup_hi + 0.5).ceil() as u64)
    } else {
        emp_hi
    };

    let mut bins = Vec::with_capacity((hi - lo + 1) as usize);
    let mut tv = 0.0;
    let mut covered = 0.0;
    let mut outside = 0.0;
    for n in lo..=hi {
        let count = hist.counts.get(&n).copied().unwrap_or(0);
        let empirical = hist.pmf(n);
        let nf = n as f64;
        let mass = oracle.mass(nf - 0.5, nf + 0.5, t);
        covered += mass;
        tv += (empirical - mass).abs();
        if mass == 0.0 {
            outside += empirical;
        }
        bins.push(BinComparison {
            n,
            count,
            empirical,
            oracle: mass,
        });
    }
    let oracle_tail = (1.0 - covered).max(0.0);
    Ok(OracleComparison {
        total_variation: (0.5 * (tv + oracle_tail)).min(1.0),
        bins,
        empirical_outside_support: outside,
        oracle_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{geometric_grid, MomentRow};
    use crate::oracles::RegularOrbitParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn series(mut f: impl FnMut(f64) -> f64) -> Vec<(f64, f64)> {
        geometric_grid(1.0, 1000.0, 10)
            .into_iter()
            .map(|t| (t, f(t)))
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_power_law(&series(|t| t * t), (1.0, 1000.0)).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.points, 10);

        let fit = fit_power_law(&series(|t| 5.0 / t), (1.0, 1000.0)).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let data = series(|t| t.powf(1.5) * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)));
        let fit = fit_power_law(&data, (1.0, 1000.0)).unwrap();
        assert!((fit.exponent - 1.5).abs() < 0.05, "{}", fit.exponent);
    }

    #[test]
    fn fit_errors_and_skips() {
        let data = series(|t| t);
        assert!(fit_power_law(&data, (1.0, 2.0)).is_err());
        assert!(fit_power_law(&data, (10.0, 1.0)).is_err());
        let mut with_zero = data.clone();
        with_zero[4].1 = 0.0;
        with_zero[5].1 = -3.0;
        let fit = fit_power_law(&with_zero, (1.0, 1000.0)).unwrap();
        assert_eq!(fit.skipped, 2);
        assert_eq!(fit.points, 8);
    }

    #[test]
    fn diffusion_and_decay() {
        let rows = series(|t| t.powf(4.0 / 3.0))
            .into_iter()
            .map(|(t, v)| MomentRow {
                t,
                mean: t,
                variance: v,
                usable: 1,
                flagged: 0,
            })
            .collect();
        let d = diffusion_exponent(&MomentSeries { rows }, (1.0, 1000.0)).unwrap();
        assert!((d.z - 1.5).abs() < 1e-12);

        assert!(diffusion_exponent_from(&series(|t| 1.0 / t), (1.0, 1000.0)).is_err());

        let d = decay_exponent_from(&series(|t| 300.0 / t), (1.0, 1000.0)).unwrap();
        assert!((d.delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stable_span() {
        let local = vec![
            (1.0, 0.5),
            (2.0, 1.0),
            (4.0, 1.02),
            (8.0, 0.97),
            (16.0, 1.5),
            (32.0, 1.0),
        ];
        assert_eq!(longest_stable_span(&local, 1.0, 0.05), 4.0);
        assert_eq!(longest_stable_span(&local, 3.0, 0.05), 0.0);
        let exact = series(|t| t.powi(-1));
        let local = local_exponents(&exact, (1.0, 1000.0), 10.0);
        assert!(!local.is_empty());
        assert!(local.iter().all(|&(_, e)| (e + 1.0).abs() < 1e-12));
    }

    fn histogram(t: f64, masses: &[(u64, u64)]) -> CollisionHistogram {
        CollisionHistogram {
            t,
            counts: masses.iter().copied().collect::<BTreeMap<_, _>>(),
            flagged: 0,
        }
    }

    #[test]
    fn tv_extremes() {
        let oracle = Oracle::Polygon {
            params: RegularOrbitParams::new(5).unwrap(),
            r: 1.0,
        };
        let t = 1000.0;
        // Disjoint: all empirical mass far below the support.
        let far = histogram(t, &[(1, 10)]);
        let cmp = histogram_vs_oracle(&far, &oracle).unwrap();
        assert!((cmp.total_variation - 1.0).abs() < 1e-12);
        assert_eq!(cmp.empirical_outside_support, 1.0);

        // Empirical equal to the oracle masses (scaled to integers).
        let probe = histogram(t, &[(1, 1)]);
        let bins = histogram_vs_oracle(&probe, &oracle).unwrap().bins;
        let scale = 1e12;
        let exact: Vec<(u64, u64)> = bins
            .iter()
            .filter(|b| b.oracle > 0.0)
            .map(|b| (b.n, (b.oracle * scale).round() as u64))
            .collect();
        let cmp = histogram_vs_oracle(&histogram(t, &exact), &oracle).unwrap();
        assert!(cmp.total_variation < 1e-9, "{}", cmp.total_variation);
        let sum: f64 = cmp.bins.iter().map(|b| b.oracle).sum();
        assert!(sum <= 1.0 + 1e-12 && (sum - 1.0).abs() < 1e-6);
    }
}
