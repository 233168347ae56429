//! Receding-horizon controller with the binary initialization strategy.
//!
//! At every step two problems are solved. Strategy 1 resets the nominal state
//! to the measurement with zero initial error covariance. Strategy 2 continues
//! the previous plan: its nominal state is the one-step nominal prediction and
//! its initial covariance is the previous one pushed through the error
//! dynamics. The cheaper feasible one is applied through the tube feedback
//! `u = K(x − x̄) + ū*_0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::drcc::TighteningMethod;
use crate::linalg::symmetrize;
use crate::ocp::{OcpDesign, OcpSolution, OcpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// Nominal state reset to the measurement, `Σ_0 = 0`.
    S1,
    /// Nominal state and covariance propagated from the previous plan.
    S2,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::S1 => "S1",
            Strategy::S2 => "S2",
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ControllerError {
    #[error("the problem at the initial state is infeasible: {0:?}")]
    InitialInfeasible(OcpStatus),
    #[error("both strategies are infeasible at step {step}")]
    BothInfeasible {
        step: usize,
        s1: OcpStatus,
        s2: OcpStatus,
    },
}

impl ControllerError {
    /// True when at least one of the failed solves was a numerical failure
    /// rather than a proven infeasibility.
    pub fn is_solver_failure(&self) -> bool {
        let failed = |s: &OcpStatus| matches!(s, OcpStatus::SolverError(_));
        match self {
            ControllerError::InitialInfeasible(s) => failed(s),
            ControllerError::BothInfeasible { s1, s2, .. } => failed(s1) || failed(s2),
        }
    }
}

/// Tie-breaking selection between the two strategies. Ties go to Strategy 1.
pub fn select_strategy(
    feasible_s1: bool,
    feasible_s2: bool,
    cost_s1: f64,
    cost_s2: f64,
) -> Option<Strategy> {
    match (feasible_s1, feasible_s2) {
        (false, false) => None,
        (false, true) => Some(Strategy::S2),
        (true, false) => Some(Strategy::S1),
        (true, true) if cost_s1 > cost_s2 => Some(Strategy::S2),
        (true, true) => Some(Strategy::S1),
    }
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Index of the next step.
    pub k: usize,
    /// Nominal state chosen at the previous step (the measurement at `k = 0`).
    pub xbar: DVector<f64>,
    /// Initial error covariance of the previously chosen problem.
    pub sigma0: DMatrix<f64>,
    pub last_solution: Option<OcpSolution>,
    pub method: TighteningMethod,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub input: DVector<f64>,
    pub strategy: Strategy,
    /// Optimal cost of the chosen problem, trace constants included.
    pub cost: f64,
    pub feasible_s1: bool,
    pub feasible_s2: bool,
    pub cost_s1: Option<f64>,
    pub cost_s2: Option<f64>,
    /// Nominal state `x̄_k` of the chosen problem.
    pub nominal: DVector<f64>,
    /// Planned first input `ū*_0`.
    pub nominal_input: DVector<f64>,
    /// `Σ_{0|k}` of the chosen problem.
    pub sigma0: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Controller<'a> {
    design: &'a OcpDesign,
    method: TighteningMethod,
}

impl<'a> Controller<'a> {
    pub fn new(design: &'a OcpDesign, method: TighteningMethod) -> Self {
        Self { design, method }
    }

    pub fn design(&self) -> &'a OcpDesign {
        self.design
    }

    pub fn method(&self) -> TighteningMethod {
        self.method
    }

    /// Checks that the Strategy-1 problem at `x0` is feasible and returns the
    /// initial state.
    pub fn init(&self, x0: &DVector<f64>) -> Result<ControllerState, ControllerError> {
        let nx = self.design.model().nx();
        let zero = DMatrix::zeros(nx, nx);
        let sol = self.design.solve(x0, &zero, self.method);
        if !sol.is_optimal() {
            return Err(ControllerError::InitialInfeasible(sol.status));
        }
        Ok(ControllerState {
            k: 0,
            xbar: x0.clone(),
            sigma0: zero,
            last_solution: None,
            method: self.method,
        })
    }

    /// Strategy-2 nominal state and covariance carried from `state`.
    pub fn propagated(&self, state: &ControllerState) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let prev = state.last_solution.as_ref()?;
        let model = self.design.model();
        let xbar = model.nominal_step(&state.xbar, prev.first_input()?);
        let acl = self.design.acl();
        let sigma0 = symmetrize(&(acl * &state.sigma0 * acl.transpose() + model.w()));
        Some((xbar, sigma0))
    }

    /// One receding-horizon step at measurement `xk`.
    pub fn step(
        &self,
        state: &ControllerState,
        xk: &DVector<f64>,
    ) -> Result<(StepOutcome, ControllerState), ControllerError> {
        let nx = self.design.model().nx();
        let zero = DMatrix::zeros(nx, nx);
        let s2_inputs = self.propagated(state);
        let (sol1, sol2) = match &s2_inputs {
            Some((xbar2, sigma2)) => rayon::join(
                || self.design.solve(xk, &zero, self.method),
                || Some(self.design.solve(xbar2, sigma2, self.method)),
            ),
            None => (self.design.solve(xk, &zero, self.method), None),
        };
        let feasible_s1 = sol1.is_optimal();
        let feasible_s2 = sol2.as_ref().is_some_and(|s| s.is_optimal());
        let cost_s1 = feasible_s1.then_some(sol1.cost);
        let cost_s2 = sol2.as_ref().filter(|s| s.is_optimal()).map(|s| s.cost);

        let strategy = select_strategy(
            feasible_s1,
            feasible_s2,
            cost_s1.unwrap_or(f64::INFINITY),
            cost_s2.unwrap_or(f64::INFINITY),
        );
        let (strategy, solution, nominal, sigma0) = match strategy {
            Some(Strategy::S1) => (Strategy::S1, sol1, xk.clone(), zero),
            Some(Strategy::S2) => {
                let (xbar2, sigma2) = s2_inputs.expect("S2 solved only with a prior plan");
                (Strategy::S2, sol2.expect("S2 feasible"), xbar2, sigma2)
            }
            None => {
                return Err(if state.k == 0 {
                    ControllerError::InitialInfeasible(sol1.status)
                } else {
                    ControllerError::BothInfeasible {
                        step: state.k,
                        s1: sol1.status,
                        s2: sol2.map(|s| s.status).unwrap_or(OcpStatus::SolverError(
                            "no previous plan".into(),
                        )),
                    }
                });
            }
        };

        let nominal_input = solution
            .first_input()
            .expect("optimal solutions carry inputs")
            .clone();
        let k = self.design.artifacts().k();
        let input = k * (xk - &nominal) + &nominal_input;
        let outcome = StepOutcome {
            input,
            strategy,
            cost: solution.cost,
            feasible_s1,
            feasible_s2,
            cost_s1,
            cost_s2,
            nominal: nominal.clone(),
            nominal_input,
            sigma0: sigma0.clone(),
        };
        let next = ControllerState {
            k: state.k + 1,
            xbar: nominal,
            sigma0,
            last_solution: Some(solution),
            method: self.method,
        };
        Ok((outcome, next))
    }
}
