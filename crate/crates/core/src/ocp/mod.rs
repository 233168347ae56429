//! Finite-horizon optimal control problem.
//!
//! Two formulations of the same problem are provided. The conic program keeps
//! the nominal states and the per-constraint auxiliary pair `(y, λ)` as
//! decision variables and states the DR constraints as second-order cones. The
//! condensed program eliminates the states and replaces every tightened row by
//! its precomputed slab; it also serves the Gaussian and Cantelli baselines.

mod condensed;
mod conic;

pub use condensed::{build_condensed, CondensedProgram};
pub use conic::{build_program, ConicProgram, Layout};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::drcc::{stage_radii, DrccError, StageRadii, TighteningMethod, TwoSidedConstraint};
use crate::linalg::{
    propagate_covariance, quad_form, CostSpec, LinalgError, SynthesisArtifacts, SystemModel,
};
use crate::solver::{self, RawStatus};

/// Residual bound used when re-checking a solver point independently.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OcpError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Drcc(#[from] DrccError),
    #[error("constraint {index}: {msg}")]
    ConstraintShape { index: usize, msg: String },
}

/// Everything that stays fixed across online solves.
#[derive(Debug, Clone)]
pub struct OcpDesign {
    model: SystemModel,
    cost: CostSpec,
    constraints: Vec<TwoSidedConstraint>,
    artifacts: SynthesisArtifacts,
    acl: DMatrix<f64>,
    stage_weight: DMatrix<f64>,
}

impl OcpDesign {
    pub fn new(
        model: SystemModel,
        cost: CostSpec,
        constraints: Vec<TwoSidedConstraint>,
        artifacts: SynthesisArtifacts,
    ) -> Result<Self, OcpError> {
        for (index, c) in constraints.iter().enumerate() {
            let want = c.expected_dim(model.nx(), model.nu());
            if c.direction().len() != want {
                return Err(OcpError::ConstraintShape {
                    index,
                    msg: format!(
                        "{:?} direction has length {}, expected {want}",
                        c.kind(),
                        c.direction().len()
                    ),
                });
            }
        }
        let acl = model.closed_loop(artifacts.k());
        let stage_weight = artifacts.stage_weight(&cost);
        Ok(Self {
            model,
            cost,
            constraints,
            artifacts,
            acl,
            stage_weight,
        })
    }

    /// Synthesizes the artifacts (with an optional gain override) and builds
    /// the design.
    pub fn synthesize(
        model: SystemModel,
        cost: CostSpec,
        constraints: Vec<TwoSidedConstraint>,
        gain_override: Option<DMatrix<f64>>,
    ) -> Result<Self, OcpError> {
        let artifacts = SynthesisArtifacts::synthesize(&model, &cost, gain_override)?;
        Self::new(model, cost, constraints, artifacts)
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn cost(&self) -> &CostSpec {
        &self.cost
    }

    pub fn constraints(&self) -> &[TwoSidedConstraint] {
        &self.constraints
    }

    pub fn artifacts(&self) -> &SynthesisArtifacts {
        &self.artifacts
    }

    pub fn horizon(&self) -> usize {
        self.cost.horizon()
    }

    /// `A + BK`
    pub fn acl(&self) -> &DMatrix<f64> {
        &self.acl
    }

    /// `Q + KᵀRK`
    pub fn stage_weight(&self) -> &DMatrix<f64> {
        &self.stage_weight
    }

    /// `Σ_0 ..= Σ_N` started from `sigma0`.
    pub fn covariances(&self, sigma0: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        propagate_covariance(sigma0, &self.acl, self.model.w(), self.horizon())
    }

    /// `Σ_{l<N} tr((Q+KᵀRK)Σ_l) + tr(SΣ_N)`
    pub fn trace_constant(&self, sigmas: &[DMatrix<f64>]) -> f64 {
        let n = self.horizon();
        let stages: f64 = sigmas[..n]
            .iter()
            .map(|s| (&self.stage_weight * s).trace())
            .sum();
        stages + (self.artifacts.s() * &sigmas[n]).trace()
    }

    pub fn radii(
        &self,
        sigmas: &[DMatrix<f64>],
        method: TighteningMethod,
    ) -> Result<StageRadii, DrccError> {
        stage_radii(
            &self.constraints,
            self.artifacts.k(),
            sigmas,
            self.horizon(),
            self.artifacts.sigma_bar(),
            method,
        )
    }

    /// Solves from nominal initial state `xbar0` and initial error covariance
    /// `sigma0`: the conic program for the DR method, the condensed program
    /// for the baselines.
    pub fn solve(
        &self,
        xbar0: &DVector<f64>,
        sigma0: &DMatrix<f64>,
        method: TighteningMethod,
    ) -> OcpSolution {
        match method {
            TighteningMethod::DistributionallyRobust => match build_program(self, xbar0, sigma0) {
                Ok(p) => p.solve(),
                Err(reason) => OcpSolution::infeasible(reason),
            },
            _ => match build_condensed(self, xbar0, sigma0, method) {
                Ok(p) => p.solve(),
                Err(reason) => OcpSolution::infeasible(reason),
            },
        }
    }
}

/// Why a problem has no feasible point.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// A tightened constraint is empty before any solve.
    StageRadius { constraint: usize, stage: usize },
    /// A terminal slab is empty under the steady covariance.
    TerminalRadius { constraint: usize },
    /// The fixed initial nominal state violates a stage-0 slab.
    InitialState { constraint: usize },
    /// The solver returned a primal infeasibility certificate.
    Certificate(Vec<f64>),
}

impl From<DrccError> for Infeasibility {
    fn from(e: DrccError) -> Self {
        match e {
            DrccError::StageInfeasible { constraint, stage } => {
                Infeasibility::StageRadius { constraint, stage }
            }
            DrccError::TerminalInfeasible { constraint } => {
                Infeasibility::TerminalRadius { constraint }
            }
            DrccError::InvalidConstraint(_) => unreachable!("constraints are validated on build"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OcpStatus {
    Optimal,
    Infeasible(Infeasibility),
    SolverError(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSolution {
    pub status: OcpStatus,
    /// `ū_0 .. ū_{N−1}`
    pub nominal_inputs: Vec<DVector<f64>>,
    /// `x̄_0 ..= x̄_N`
    pub nominal_states: Vec<DVector<f64>>,
    /// `(y, λ)` per stage and constraint; empty for the condensed form.
    pub stage_auxiliaries: Vec<Vec<(f64, f64)>>,
    /// Terminal `(y, λ)` per state constraint; empty for the condensed form.
    pub terminal_auxiliaries: Vec<(f64, f64)>,
    /// Decision-dependent part of the objective.
    pub objective: f64,
    /// Covariance trace terms added outside the solver.
    pub trace_constant: f64,
    /// `objective + trace_constant`
    pub cost: f64,
    pub iterations: u32,
}

impl OcpSolution {
    /// Solution carrying only an infeasibility reason.
    pub fn infeasible(reason: Infeasibility) -> Self {
        Self::empty(OcpStatus::Infeasible(reason))
    }

    pub(crate) fn empty(status: OcpStatus) -> Self {
        Self {
            status,
            nominal_inputs: Vec::new(),
            nominal_states: Vec::new(),
            stage_auxiliaries: Vec::new(),
            terminal_auxiliaries: Vec::new(),
            objective: f64::NAN,
            trace_constant: f64::NAN,
            cost: f64::INFINITY,
            iterations: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == OcpStatus::Optimal
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self.status, OcpStatus::Infeasible(_))
    }

    /// First planned input `ū*_0`.
    pub fn first_input(&self) -> Option<&DVector<f64>> {
        self.nominal_inputs.first()
    }
}

pub(crate) fn map_raw_status(status: &RawStatus, z: &[f64]) -> OcpStatus {
    match status {
        RawStatus::Solved => OcpStatus::Optimal,
        RawStatus::Infeasible => OcpStatus::Infeasible(Infeasibility::Certificate(z.to_vec())),
        RawStatus::Unbounded => OcpStatus::SolverError("objective reported unbounded".into()),
        RawStatus::Failed(msg) => OcpStatus::SolverError(msg.clone()),
    }
}

/// Recomputes `Σ x̄ᵀQx̄ + ūᵀRū + x̄_NᵀSx̄_N` plus the trace constants for the
/// given covariance sequence.
pub fn evaluate_cost(
    design: &OcpDesign,
    nominal_states: &[DVector<f64>],
    nominal_inputs: &[DVector<f64>],
    sigmas: &[DMatrix<f64>],
) -> f64 {
    let n = design.horizon();
    let q = design.cost().q();
    let r = design.cost().r();
    let mut total = 0.0;
    for l in 0..n {
        total += quad_form(q, &nominal_states[l]) + quad_form(r, &nominal_inputs[l]);
    }
    total += quad_form(design.artifacts().s(), &nominal_states[n]);
    total + design.trace_constant(sigmas)
}

/// Max over `l` of `‖x̄_{l+1} − A x̄_l − B ū_l‖∞`.
pub fn dynamics_residual(
    model: &SystemModel,
    nominal_states: &[DVector<f64>],
    nominal_inputs: &[DVector<f64>],
) -> f64 {
    nominal_inputs
        .iter()
        .enumerate()
        .map(|(l, u)| {
            (&nominal_states[l + 1] - model.nominal_step(&nominal_states[l], u)).amax()
        })
        .fold(0.0, f64::max)
}

/// Largest excess of `|dᵀz̄|` over its slab radius along a nominal trajectory,
/// including the terminal slabs.
pub fn slab_excess(
    design: &OcpDesign,
    radii: &StageRadii,
    nominal_states: &[DVector<f64>],
    nominal_inputs: &[DVector<f64>],
) -> f64 {
    let n = design.horizon();
    let mut worst = 0.0f64;
    for (l, row) in radii.stages.iter().enumerate() {
        for (i, c) in design.constraints().iter().enumerate() {
            let z = if c.kind().is_state() {
                &nominal_states[l]
            } else {
                &nominal_inputs[l]
            };
            worst = worst.max(c.direction().dot(z).abs() - row[i]);
        }
    }
    for (i, c) in design.constraints().iter().enumerate() {
        if let Some(r) = radii.terminal[i] {
            worst = worst.max(c.direction().dot(&nominal_states[n]).abs() - r);
        }
    }
    worst
}

/// Packs a solved point, after checking it independently of the solver.
///
/// The point must satisfy the nominal dynamics, every slab along the
/// trajectory, and the program's own rows to [`VERIFY_TOL`]; otherwise the
/// solve is reported as a solver error.
pub(crate) fn finish_solution(
    design: &OcpDesign,
    raw: &solver::RawSolution,
    form_violation: f64,
    radii: &StageRadii,
    nominal_states: Vec<DVector<f64>>,
    nominal_inputs: Vec<DVector<f64>>,
    trace_constant: f64,
) -> OcpSolution {
    let dyn_res = dynamics_residual(design.model(), &nominal_states, &nominal_inputs);
    let excess = slab_excess(design, radii, &nominal_states, &nominal_inputs);
    if !(dyn_res <= VERIFY_TOL && excess <= VERIFY_TOL && form_violation <= VERIFY_TOL) {
        return OcpSolution::empty(OcpStatus::SolverError(format!(
            "returned point fails verification (dynamics {dyn_res:.3e}, slab {excess:.3e}, rows {form_violation:.3e})"
        )));
    }
    let mut sol = OcpSolution::empty(OcpStatus::Optimal);
    sol.iterations = raw.iterations;
    sol.nominal_states = nominal_states;
    sol.nominal_inputs = nominal_inputs;
    sol.objective = raw.objective;
    sol.trace_constant = trace_constant;
    sol.cost = raw.objective + trace_constant;
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn toy_design(constraints: Vec<TwoSidedConstraint>, w: f64, horizon: usize) -> OcpDesign {
        let model = SystemModel::new(
            dmatrix![1.0, 0.1; 0.0, 1.0],
            dmatrix![0.0; 0.1],
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * w,
        )
        .unwrap();
        let cost = CostSpec::new(DMatrix::identity(2, 2), dmatrix![1.0], horizon).unwrap();
        OcpDesign::synthesize(model, cost, constraints, None).unwrap()
    }

    #[test]
    fn trace_arithmetic() {
        // zero trajectory, Σ_l = I, S = I, Q = I, K = 0, N = 2 → 2·n_x + n_x
        let model = SystemModel::new(
            dmatrix![0.5, 0.0; 0.0, 0.5],
            dmatrix![1.0; 0.0],
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let cost = CostSpec::new(DMatrix::identity(2, 2), dmatrix![3.0], 2).unwrap();
        let design =
            OcpDesign::synthesize(model, cost, vec![], Some(dmatrix![0.0, 0.0])).unwrap();
        let sigmas = vec![DMatrix::identity(2, 2); 3];
        // S solves 0.25 S − S + I = 0 → S = 4/3 I
        let s_trace = 2.0 * 4.0 / 3.0;
        let zeros = vec![DVector::zeros(2); 3];
        let c = evaluate_cost(&design, &zeros, &[DVector::zeros(1), DVector::zeros(1)], &sigmas);
        assert!((c - (4.0 + s_trace)).abs() < 1e-12);
    }

    #[test]
    fn zero_everything_costs_nothing() {
        let design = toy_design(vec![], 0.0, 3);
        let sigmas = design.covariances(&DMatrix::zeros(2, 2));
        let zeros = vec![DVector::zeros(2); 4];
        let c = evaluate_cost(&design, &zeros, &vec![DVector::zeros(1); 3], &sigmas);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn rejects_misshaped_constraint() {
        let model = SystemModel::new(
            dmatrix![0.5],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.1],
        )
        .unwrap();
        let cost = CostSpec::new(dmatrix![1.0], dmatrix![1.0], 2).unwrap();
        let cons = vec![TwoSidedConstraint::state(dvector![1.0, 0.0], 1.0, 0.2).unwrap()];
        assert!(matches!(
            OcpDesign::synthesize(model, cost, cons, None),
            Err(OcpError::ConstraintShape { index: 0, .. })
        ));
    }

    #[test]
    fn both_forms_agree_on_toy_problem() {
        let cons = vec![
            TwoSidedConstraint::state(dvector![1.0, 0.0], 1.5, 0.2).unwrap(),
            TwoSidedConstraint::state(dvector![0.0, 1.0], 1.0, 0.2).unwrap(),
            TwoSidedConstraint::input(dvector![1.0], 2.0, 0.3).unwrap(),
        ];
        let design = toy_design(cons, 1e-3, 6);
        let x0 = dvector![1.0, -0.5];
        let s0 = DMatrix::zeros(2, 2);
        let conic = build_program(&design, &x0, &s0).unwrap().solve();
        let cond = build_condensed(&design, &x0, &s0, TighteningMethod::DistributionallyRobust)
            .unwrap()
            .solve();
        assert!(conic.is_optimal() && cond.is_optimal());
        assert!((conic.cost - cond.cost).abs() <= 1e-5 * conic.cost.abs());
    }

    #[test]
    fn far_initial_state_is_infeasible() {
        let cons = vec![TwoSidedConstraint::state(dvector![1.0, 0.0], 1.0, 0.2).unwrap()];
        let design = toy_design(cons, 1e-3, 4);
        let sol = design.solve(
            &dvector![10.0, 10.0],
            &DMatrix::zeros(2, 2),
            TighteningMethod::DistributionallyRobust,
        );
        assert!(sol.is_infeasible());
        let sol = design.solve(
            &dvector![10.0, 10.0],
            &DMatrix::zeros(2, 2),
            TighteningMethod::Cantelli,
        );
        assert!(sol.is_infeasible());
    }
}
