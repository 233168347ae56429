//! Two-sided distributionally robust chance constraints.
//!
//! A constraint `inf_P Pr[|dᵀz| ≤ b] ≥ 1 − ε`, with `z = z̄ + Δ`, `E[Δ] = 0` and
//! `Var(dᵀΔ) = σ²` known, holds for the whole moment ambiguity set exactly when
//! the nominal value `m = dᵀz̄` lies in a slab `|m| ≤ r(σ², b, ε)`. This module
//! computes that radius, the Gaussian-quantile and Cantelli/Boole baseline
//! radii, the per-stage radii for a whole horizon, and the terminal set built
//! from the steady covariance.

mod oracle;
mod radius;
mod stage;
mod terminal;

pub use oracle::{worst_case_violation, worst_case_violation_with_resolution, ORACLE_STEPS_PER_SIGMA};
pub use radius::{
    slab_radius_cantelli, slab_radius_dr, slab_radius_gaussian, soc_membership, Infeasible,
    SocTightening,
};
pub use stage::{stage_radii, StageRadii};
pub use terminal::{
    certify_terminal, Certificate, CertificateRow, TerminalCertificate, TerminalSet,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DrccError {
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("constraint {constraint} is infeasible at stage {stage}")]
    StageInfeasible { constraint: usize, stage: usize },
    #[error("terminal constraint {constraint} is infeasible under the steady covariance")]
    TerminalInfeasible { constraint: usize },
}

/// What the constraint direction acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `|aᵀx| ≤ b` on the state, tightened with `aᵀΣa`.
    State,
    /// `|cᵀu| ≤ d` on the applied input `ū + KΔx`, tightened with `cᵀKΣKᵀc`.
    Input,
    /// `|cᵀū| ≤ d` on the nominal input only; never tightened.
    NominalInput,
}

impl ConstraintKind {
    pub fn is_state(self) -> bool {
        matches!(self, ConstraintKind::State)
    }
}

/// Which rule converts `(σ², b, ε)` into a slab radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TighteningMethod {
    /// Exact moment-based (SOC) reformulation.
    #[serde(rename = "dr")]
    DistributionallyRobust,
    /// Normal quantile with a uniform `ε/2` split per side.
    #[serde(rename = "gauss")]
    Gaussian,
    /// One-sided Cantelli bound with a uniform `ε/2` split per side.
    #[serde(rename = "cantelli")]
    Cantelli,
}

impl TighteningMethod {
    pub const ALL: [TighteningMethod; 3] = [
        TighteningMethod::DistributionallyRobust,
        TighteningMethod::Gaussian,
        TighteningMethod::Cantelli,
    ];

    pub fn radius(self, variance: f64, bound: f64, epsilon: f64) -> Result<f64, Infeasible> {
        match self {
            TighteningMethod::DistributionallyRobust => slab_radius_dr(variance, bound, epsilon),
            TighteningMethod::Gaussian => slab_radius_gaussian(variance, bound, epsilon),
            TighteningMethod::Cantelli => slab_radius_cantelli(variance, bound, epsilon),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TighteningMethod::DistributionallyRobust => "dr",
            TighteningMethod::Gaussian => "gauss",
            TighteningMethod::Cantelli => "cantelli",
        }
    }
}

impl std::fmt::Display for TighteningMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TighteningMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dr" => Ok(TighteningMethod::DistributionallyRobust),
            "gauss" | "gaussian" => Ok(TighteningMethod::Gaussian),
            "cantelli" => Ok(TighteningMethod::Cantelli),
            other => Err(format!("unknown method `{other}` (expected dr, gauss or cantelli)")),
        }
    }
}

/// `inf_P Pr[|directionᵀz| ≤ bound] ≥ 1 − epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedConstraint {
    direction: DVector<f64>,
    bound: f64,
    epsilon: f64,
    kind: ConstraintKind,
}

impl TwoSidedConstraint {
    pub fn new(
        direction: DVector<f64>,
        bound: f64,
        epsilon: f64,
        kind: ConstraintKind,
    ) -> Result<Self, DrccError> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(DrccError::InvalidConstraint(format!(
                "bound must be positive, got {bound}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(DrccError::InvalidConstraint(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if direction.is_empty() || direction.amax() == 0.0 {
            return Err(DrccError::InvalidConstraint(
                "direction must be nonzero".into(),
            ));
        }
        Ok(Self {
            direction,
            bound,
            epsilon,
            kind,
        })
    }

    pub fn state(direction: DVector<f64>, bound: f64, epsilon: f64) -> Result<Self, DrccError> {
        Self::new(direction, bound, epsilon, ConstraintKind::State)
    }

    pub fn input(direction: DVector<f64>, bound: f64, epsilon: f64) -> Result<Self, DrccError> {
        Self::new(direction, bound, epsilon, ConstraintKind::Input)
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    /// Variance of the constrained functional's error part given the error
    /// covariance `sigma` and feedback gain `k`.
    pub fn variance(&self, sigma: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
        let d = &self.direction;
        let v = match self.kind {
            ConstraintKind::State => d.dot(&(sigma * d)),
            ConstraintKind::Input => {
                let kd = k.transpose() * d;
                kd.dot(&(sigma * &kd))
            }
            ConstraintKind::NominalInput => 0.0,
        };
        v.max(0.0)
    }

    /// Realized constraint value `|dᵀz|` is strictly beyond the bound.
    pub fn violated_by(&self, z: &DVector<f64>) -> bool {
        self.direction.dot(z).abs() > self.bound
    }

    pub fn expected_dim(&self, nx: usize, nu: usize) -> usize {
        if self.kind.is_state() {
            nx
        } else {
            nu
        }
    }
}
