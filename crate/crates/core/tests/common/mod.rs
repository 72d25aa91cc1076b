use std::f64::consts::PI;

use billiard_core::ensemble::CollisionHistogram;
use billiard_core::quad::integrate;
use billiard_core::Result;

/// Exact law of the integer count in the circle: a Liouville particle has
/// collision angle density `(4/π) cos²φ` and meets the wall every
/// `2r cos φ`, with a uniform phase for the first hit, so the count is `k`
/// with weight `max(0, 1 − |x − k|)` where `x = t / (2r cos φ)`.
pub fn exact_circle_pmf(t: f64, r: f64, k: u64) -> Result<f64> {
    let a = t / (2.0 * r);
    let kf = k as f64;
    // φ at which x = a / cos φ crosses a given value.
    let phi_at = |x: f64| if x <= a { 0.0 } else { (a / x).acos() };
    let lo = phi_at(kf - 1.0);
    let mid = phi_at(kf);
    let hi = phi_at(kf + 1.0);
    let f = |phi: f64| {
        let x = a / phi.cos();
        (4.0 / PI) * phi.cos().powi(2) * (1.0 - (x - kf).abs()).max(0.0)
    };
    let mut mass = 0.0;
    for (p, q) in [(lo, mid), (mid, hi)] {
        if q > p {
            mass += integrate(f, p, q, 1e-13)?;
        }
    }
    Ok(mass)
}

/// Total variation between a histogram and the exact law, counting the
/// exact mass beyond the tabulated range.
pub fn tv_to_exact_circle_law(hist: &CollisionHistogram, r: f64) -> Result<f64> {
    let hi = *hist.counts.keys().next_back().expect("non-empty") + 50;
    let mut tv = 0.0;
    let mut covered = 0.0;
    for k in 0..=hi {
        let p = exact_circle_pmf(hist.t, r, k)?;
        covered += p;
        tv += (hist.pmf(k) - p).abs();
    }
    Ok(0.5 * (tv + (1.0 - covered).max(0.0)))
}
