//! Brute-force worst-case violation probability over zero-mean distributions
//! with a given variance.
//!
//! With two moment constraints and one indicator objective the supremum is
//! approached by distributions on at most three atoms. The search grids one
//! atom beyond each side of the slab and places the third (safe) atom where it
//! minimizes its own weight, which is the midpoint of the violating pair clamped
//! to the safe interval. Two-point distributions with a single violating atom
//! are scanned as well.

/// Default grid resolution: atoms are spaced `σ / ORACLE_STEPS_PER_SIGMA` apart.
pub const ORACLE_STEPS_PER_SIGMA: usize = 200;

/// Atoms are searched up to this many standard deviations past the boundary.
const SEARCH_SIGMAS: f64 = 10.0;

/// `sup Pr[|m + w| > b]` over zero-mean `w` with variance `variance`.
///
/// Boundary atoms count as satisfied (the violation is strict), so the grid
/// starts one step past each boundary and the value is a lower bound that
/// increases as the grid is refined.
pub fn worst_case_violation(nominal: f64, variance: f64, bound: f64) -> f64 {
    worst_case_violation_with_resolution(nominal, variance, bound, ORACLE_STEPS_PER_SIGMA)
}

pub fn worst_case_violation_with_resolution(
    nominal: f64,
    variance: f64,
    bound: f64,
    steps_per_sigma: usize,
) -> f64 {
    let m = nominal;
    let b = bound;
    if m.abs() > b {
        return 1.0;
    }
    let v = variance.max(0.0);
    if v == 0.0 {
        return 0.0;
    }
    let sigma = v.sqrt();
    let h = sigma / steps_per_sigma as f64;
    let count = (SEARCH_SIGMAS * steps_per_sigma as f64).round() as usize;

    // violating atoms: right of hi, left of lo; safe interval is [lo, hi]
    let hi = b - m;
    let lo = -b - m;
    let right: Vec<f64> = (1..=count).map(|j| hi + j as f64 * h).collect();
    let left: Vec<f64> = (1..=count).map(|j| lo - j as f64 * h).collect();

    let mut best = 0.0f64;

    // two-point laws: one violating atom w, the other at −v/w with weight v/(v+w²)
    for &w in right.iter().chain(left.iter()) {
        let partner = -v / w;
        if partner >= lo && partner <= hi {
            best = best.max(v / (v + w * w));
        }
    }

    for &w1 in &right {
        for &w2 in &left {
            let num = v + w1 * w2;
            if num > 0.0 {
                // the safe atom would need negative weight
                continue;
            }
            let w3 = (0.5 * (w1 + w2)).clamp(lo, hi);
            let q3 = num / ((w3 - w1) * (w3 - w2));
            let q1 = (v + w2 * w3) / ((w1 - w2) * (w1 - w3));
            let q2 = (v + w1 * w3) / ((w2 - w1) * (w2 - w3));
            if q1 < 0.0 || q2 < 0.0 || q3 < 0.0 {
                continue;
            }
            best = best.max(1.0 - q3);
        }
    }
    best.clamp(0.0, 1.0)
}
