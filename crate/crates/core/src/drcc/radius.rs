use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// No nominal value satisfies the tightened constraint.
#[derive(Debug, Clone, Copy, Error, PartialEq)]
#[error("tightened constraint is empty (variance {variance}, bound {bound}, epsilon {epsilon})")]
pub struct Infeasible {
    pub variance: f64,
    pub bound: f64,
    pub epsilon: f64,
}

fn check_args(variance: f64, bound: f64, epsilon: f64) {
    debug_assert!(variance >= 0.0, "variance must be nonnegative");
    debug_assert!(bound > 0.0, "bound must be positive");
    debug_assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0, 1)");
}

/// Half-width of the exact DR slab.
///
/// Over the auxiliary pair `(y, λ)` with `y² + σ² ≤ ε(b − λ)²`, `0 ≤ λ ≤ b`,
/// `y ≥ 0`, the largest reachable `y + λ` is
///
/// ```text
/// r = b − σ·sqrt((1 − ε)/ε)      if σ ≤ b·sqrt(ε(1 − ε))
/// r = sqrt(ε b² − σ²)            if b·sqrt(ε(1 − ε)) < σ ≤ b·sqrt(ε)
/// ```
///
/// and the set is empty once `σ² > ε b²`.
pub fn slab_radius_dr(variance: f64, bound: f64, epsilon: f64) -> Result<f64, Infeasible> {
    check_args(variance, bound, epsilon);
    let variance = variance.max(0.0);
    let limit = epsilon * bound * bound;
    if variance > limit {
        return Err(Infeasible {
            variance,
            bound,
            epsilon,
        });
    }
    let sigma = variance.sqrt();
    let r = if sigma <= bound * (epsilon * (1.0 - epsilon)).sqrt() {
        bound - sigma * ((1.0 - epsilon) / epsilon).sqrt()
    } else {
        (limit - variance).max(0.0).sqrt()
    };
    Ok(r.clamp(0.0, bound))
}

/// Gaussian-quantile slab: `b − z σ` with `z = Φ⁻¹(1 − ε/2)`.
pub fn slab_radius_gaussian(variance: f64, bound: f64, epsilon: f64) -> Result<f64, Infeasible> {
    check_args(variance, bound, epsilon);
    let z = Normal::standard().inverse_cdf(1.0 - 0.5 * epsilon);
    let r = bound - z * variance.max(0.0).sqrt();
    if r < 0.0 {
        return Err(Infeasible {
            variance,
            bound,
            epsilon,
        });
    }
    Ok(r)
}

/// Cantelli bound on each side with budget `ε/2`: `b − σ·sqrt((2 − ε)/ε)`.
pub fn slab_radius_cantelli(variance: f64, bound: f64, epsilon: f64) -> Result<f64, Infeasible> {
    check_args(variance, bound, epsilon);
    let r = bound - variance.max(0.0).sqrt() * ((2.0 - epsilon) / epsilon).sqrt();
    if r < 0.0 {
        return Err(Infeasible {
            variance,
            bound,
            epsilon,
        });
    }
    Ok(r)
}

/// Membership of `(m, y, λ)` in the second-order-cone description of the
/// DR constraint.
pub fn soc_membership(
    nominal: f64,
    variance: f64,
    bound: f64,
    epsilon: f64,
    y: f64,
    lambda: f64,
) -> bool {
    y >= 0.0
        && (0.0..=bound).contains(&lambda)
        && y * y + variance <= epsilon * (bound - lambda).powi(2)
        && nominal.abs() <= y + lambda
}

/// One DR-tightened scalar constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocTightening {
    pub variance: f64,
    pub bound: f64,
    pub epsilon: f64,
    pub radius: f64,
}

impl SocTightening {
    pub fn new(variance: f64, bound: f64, epsilon: f64) -> Result<Self, Infeasible> {
        let radius = slab_radius_dr(variance, bound, epsilon)?;
        Ok(Self {
            variance,
            bound,
            epsilon,
            radius,
        })
    }

    /// The `λ` attaining the radius.
    pub fn optimal_lambda(&self) -> f64 {
        let sigma = self.variance.sqrt();
        let p = self.epsilon;
        let t = sigma / (p * (1.0 - p)).sqrt();
        (self.bound - t).max(0.0)
    }

    /// An auxiliary pair certifying that `nominal` is inside the slab, or
    /// `None` when `|nominal| > radius`.
    pub fn auxiliary(&self, nominal: f64) -> Option<(f64, f64)> {
        if nominal.abs() > self.radius {
            return None;
        }
        let lambda = self.optimal_lambda();
        let y = (self.epsilon * (self.bound - lambda).powi(2) - self.variance)
            .max(0.0)
            .sqrt();
        Some((y, lambda))
    }
}
