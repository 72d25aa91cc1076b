//! Closed-form collision statistics used as ground truth for the simulator.
//!
//! Two collision-count densities are provided: the exact one for the circle,
//! and the regular-orbit (equivalent-side) approximation for a regular
//! `m`-gon. Both have an integrable inverse-square-root edge. Their bin
//! masses are computed from antiderivatives in the variable where the
//! integrand reduces to `(1 - x²)^(-1/2)` times a polynomial.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{BilliardError, Result};

/// Value of a density that may hit its integrable edge singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Finite(f64),
    /// Evaluated exactly on the support edge where the density diverges.
    Singular,
}

impl Density {
    /// The density as a float, `+∞` on the singular edge.
    pub fn value(self) -> f64 {
        match self {
            Density::Finite(v) => v,
            Density::Singular => f64::INFINITY,
        }
    }

    pub fn is_singular(self) -> bool {
        matches!(self, Density::Singular)
    }
}

/// Angles describing the regular orbits of a regular `m`-gon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularOrbitParams {
    pub m: u32,
    /// Characteristic collision angle: `π/(2m)` for odd `m`, `π/m` for even.
    pub phi_c: f64,
    /// Angle offset: `phi_c` for even `m`, zero for odd.
    pub psi: f64,
    /// Interior vertex angle `π(m − 2)/m`.
    pub vertex_angle: f64,
}

impl RegularOrbitParams {
    pub fn new(m: u32) -> Result<Self> {
        if m < 3 {
            return Err(BilliardError::validation(format!(
                "regular polygon needs m >= 3, got {m}"
            )));
        }
        let mf = m as f64;
        let even = m.is_multiple_of(2);
        let phi_c = if even { PI / mf } else { PI / (2.0 * mf) };
        Ok(Self {
            m,
            phi_c,
            psi: if even { phi_c } else { 0.0 },
            vertex_angle: PI * (mf - 2.0) / mf,
        })
    }

    /// Support of the regular-orbit density in units of the mean count:
    /// `[φ cot φ, φ / sin φ]`.
    pub fn support_ratio(&self) -> (f64, f64) {
        let phi = self.phi_c;
        (phi / phi.tan(), phi / phi.sin())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(BilliardError::validation(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Mean collision count `2t/(πr)` in the circle.
pub fn circle_mean_count(t: f64, r: f64) -> f64 {
    2.0 * t / (PI * r)
}

/// Mean collision time `(πr/2)cos(π/m)` of the regular `m`-gon.
pub fn polygon_mean_collision_time(m: u32, r: f64) -> f64 {
    0.5 * PI * r * (PI / m as f64).cos()
}

/// Density of the collision count `n` after time `t` in the circle of radius
/// `r`, under uniform phase-space initial conditions.
pub fn cb_collision_pdf(n: f64, t: f64, r: f64) -> Result<Density> {
    check_positive("t", t)?;
    check_positive("r", r)?;
    let nc = circle_mean_count(t, r);
    let edge = PI * nc / 4.0;
    if n < edge {
        return Ok(Density::Finite(0.0));
    }
    let u = edge / n;
    let gap = 1.0 - u * u;
    if gap <= 0.0 {
        return Ok(Density::Singular);
    }
    Ok(Density::Finite(
        PI * PI * nc.powi(3) / (16.0 * n.powi(4)) / gap.sqrt(),
    ))
}

/// `P(n > x)` for the circle density.
fn cb_tail(x: f64, nc: f64) -> f64 {
    let edge = PI * nc / 4.0;
    if x <= edge {
        return 1.0;
    }
    let u = edge / x;
    // ∫₀ᵘ (4/π) w²(1 − w²)^(-1/2) dw
    (2.0 / PI) * (u.asin() - u * (1.0 - u * u).sqrt())
}

/// Regular-orbit density of the collision count in the regular `m`-gon of
/// circumradius `r`.
pub fn polygon_collision_pdf(
    n: f64,
    t: f64,
    params: &RegularOrbitParams,
    r: f64,
) -> Result<Density> {
    check_positive("t", t)?;
    check_positive("r", r)?;
    let ncm = t / polygon_mean_collision_time(params.m, r);
    let phi = params.phi_c;
    let (lo, hi) = params.support_ratio();
    let ratio = n / ncm;
    if ratio < lo || ratio > hi {
        return Ok(Density::Finite(0.0));
    }
    let v = ratio * phi.sin() / phi;
    let gap = 1.0 - v * v;
    if gap <= 0.0 {
        return Ok(Density::Singular);
    }
    Ok(Density::Finite(phi.sin() / (ncm * phi * phi) / gap.sqrt()))
}

/// `P(n <= x)` for the regular-orbit polygon density.
fn polygon_cdf(x: f64, ncm: f64, phi: f64) -> f64 {
    let v = (x / ncm * phi.sin() / phi).clamp(phi.cos(), 1.0);
    ((v.asin() - (FRAC_PI_2 - phi)) / phi).clamp(0.0, 1.0)
}

/// Analytic collision-count law for a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Oracle {
    Circle { r: f64 },
    Polygon { params: RegularOrbitParams, r: f64 },
}

impl Oracle {
    pub fn density(&self, n: f64, t: f64) -> Result<Density> {
        match self {
            Oracle::Circle { r } => cb_collision_pdf(n, t, *r),
            Oracle::Polygon { params, r } => polygon_collision_pdf(n, t, params, *r),
        }
    }

    /// Mean collision count at time `t`.
    pub fn mean_count(&self, t: f64) -> f64 {
        match self {
            Oracle::Circle { r } => circle_mean_count(t, *r),
            Oracle::Polygon { params, r } => t / polygon_mean_collision_time(params.m, *r),
        }
    }

    /// Support `[lo, hi]` of the density at time `t`; `hi` is infinite for
    /// the circle.
    pub fn support(&self, t: f64) -> (f64, f64) {
        let mean = self.mean_count(t);
        match self {
            Oracle::Circle { .. } => (PI * mean / 4.0, f64::INFINITY),
            Oracle::Polygon { params, .. } => {
                let (lo, hi) = params.support_ratio();
                (lo * mean, hi * mean)
            }
        }
    }

    /// Probability mass of `n ∈ [a, b]`.
    pub fn mass(&self, a: f64, b: f64, t: f64) -> f64 {
        let mean = self.mean_count(t);
        match self {
            Oracle::Circle { .. } => (cb_tail(a, mean) - cb_tail(b, mean)).max(0.0),
            Oracle::Polygon { params, .. } => {
                (polygon_cdf(b, mean, params.phi_c) - polygon_cdf(a, mean, params.phi_c)).max(0.0)
            }
        }
    }
}

/// Regular-orbit time between collisions for collision angle `phi`.
pub fn regular_orbit_collision_time(params: &RegularOrbitParams, r: f64, phi: f64) -> Result<f64> {
    check_positive("r", r)?;
    let offset = phi - params.psi;
    if !(offset.abs() < FRAC_PI_2) {
        return Err(BilliardError::validation(format!(
            "collision angle {phi} is at or beyond grazing for m = {}",
            params.m
        )));
    }
    let tau_inf = 0.5 * PI * r;
    let m = params.m as f64;
    Ok(tau_inf * params.phi_c.sin() * (PI / m).cos() / (params.phi_c * offset.cos()))
}

/// Relaxation time of the marginal sliding orbits, `τ_∞ / cos φ_c`.
pub fn sliding_relaxation_time(params: &RegularOrbitParams, r: f64) -> Result<f64> {
    check_positive("r", r)?;
    Ok(0.5 * PI * r / params.phi_c.cos())
}

/// Relaxation time attributed to vortex orbits, `τ_∞ / cos(Φ/2)`.
pub fn vortex_relaxation_time(params: &RegularOrbitParams, r: f64) -> Result<f64> {
    check_positive("r", r)?;
    Ok(0.5 * PI * r / (params.vertex_angle / 2.0).cos())
}
