use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ConstraintKind, DrccError, TighteningMethod, TwoSidedConstraint};
use crate::solver::max_over_slabs;

/// Slack allowed when comparing LP maxima against radii.
const CERTIFY_TOL: f64 = 1e-7;

/// Intersection of the state slabs `|aᵢᵀx̄| ≤ r_f,i` tightened with `Σ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSet {
    /// Index into the original constraint list, direction and radius.
    pub slabs: Vec<(usize, DVector<f64>, f64)>,
    pub sigma_bar: DMatrix<f64>,
}

impl TerminalSet {
    pub fn new(
        constraints: &[TwoSidedConstraint],
        k: &DMatrix<f64>,
        sigma_bar: &DMatrix<f64>,
        method: TighteningMethod,
    ) -> Result<Self, DrccError> {
        let mut slabs = Vec::new();
        for (i, c) in constraints.iter().enumerate() {
            if c.kind() != ConstraintKind::State {
                continue;
            }
            let r = method
                .radius(c.variance(sigma_bar, k), c.bound(), c.epsilon())
                .map_err(|_| DrccError::TerminalInfeasible { constraint: i })?;
            slabs.push((i, c.direction().clone(), r));
        }
        Ok(Self {
            slabs,
            sigma_bar: sigma_bar.clone(),
        })
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.slabs
            .iter()
            .all(|(_, d, r)| d.dot(x).abs() <= r + tol)
    }

    fn directions(&self) -> Vec<DVector<f64>> {
        self.slabs.iter().map(|(_, d, _)| d.clone()).collect()
    }

    fn radii(&self) -> Vec<f64> {
        self.slabs.iter().map(|(_, _, r)| *r).collect()
    }

    /// `max |gᵀx̄|` over the set, `None` if unbounded.
    pub fn support(&self, g: &DVector<f64>) -> Option<f64> {
        max_over_slabs(&self.directions(), &self.radii(), g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Holds,
    Fails,
    /// The terminal set is unbounded along the tested direction.
    Unbounded,
}

impl Certificate {
    fn combine(self, other: Certificate) -> Certificate {
        use Certificate::*;
        match (self, other) {
            (Fails, _) | (_, Fails) => Fails,
            (Unbounded, _) | (_, Unbounded) => Unbounded,
            _ => Holds,
        }
    }
}

/// One row of the certification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateRow {
    pub constraint: usize,
    /// LP maximum of the tested functional, `None` when unbounded.
    pub max_value: Option<f64>,
    /// Radius the maximum is compared against, `None` when that radius is empty.
    pub radius: Option<f64>,
    pub verdict: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalCertificate {
    /// `(A+BK)X̄_f ⊆ X̄_f`.
    pub invariant: Certificate,
    /// `{Kx̄ : x̄ ∈ X̄_f}` lies inside the terminal input slabs.
    pub input_admissible: Certificate,
    pub invariance_rows: Vec<CertificateRow>,
    pub input_rows: Vec<CertificateRow>,
}

impl TerminalCertificate {
    pub fn holds(&self) -> bool {
        self.invariant == Certificate::Holds && self.input_admissible == Certificate::Holds
    }
}

fn verdict(max_value: Option<f64>, radius: Option<f64>) -> Certificate {
    match (max_value, radius) {
        (None, _) => Certificate::Unbounded,
        (Some(_), None) => Certificate::Fails,
        (Some(v), Some(r)) if v.is_finite() && v <= r + CERTIFY_TOL => Certificate::Holds,
        _ => Certificate::Fails,
    }
}

/// Checks invariance of the terminal set under `acl = A + BK` and admissibility
/// of the terminal feedback `Kx̄` for every input-side constraint.
///
/// Input constraints are compared against their radius under `KΣ̄Kᵀ`;
/// nominal-input constraints against their raw bound.
pub fn certify_terminal(
    acl: &DMatrix<f64>,
    k: &DMatrix<f64>,
    constraints: &[TwoSidedConstraint],
    terminal: &TerminalSet,
    method: TighteningMethod,
) -> TerminalCertificate {
    let dirs = terminal.directions();
    let radii = terminal.radii();

    let invariance_rows: Vec<CertificateRow> = terminal
        .slabs
        .iter()
        .map(|(i, a, r)| {
            let g = acl.transpose() * a;
            let max_value = max_over_slabs(&dirs, &radii, &g);
            CertificateRow {
                constraint: *i,
                max_value,
                radius: Some(*r),
                verdict: verdict(max_value, Some(*r)),
            }
        })
        .collect();

    let input_rows: Vec<CertificateRow> = constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind() != ConstraintKind::State)
        .map(|(i, c)| {
            let g = k.transpose() * c.direction();
            let max_value = max_over_slabs(&dirs, &radii, &g);
            let radius = match c.kind() {
                ConstraintKind::NominalInput => Some(c.bound()),
                _ => method
                    .radius(c.variance(&terminal.sigma_bar, k), c.bound(), c.epsilon())
                    .ok(),
            };
            CertificateRow {
                constraint: i,
                max_value,
                radius,
                verdict: verdict(max_value, radius),
            }
        })
        .collect();

    let fold = |rows: &[CertificateRow]| {
        rows.iter()
            .fold(Certificate::Holds, |acc, r| acc.combine(r.verdict))
    };
    TerminalCertificate {
        invariant: fold(&invariance_rows),
        input_admissible: fold(&input_rows),
        invariance_rows,
        input_rows,
    }
}
