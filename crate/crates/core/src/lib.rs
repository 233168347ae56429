//! Distributionally robust stochastic model predictive control for linear
//! systems with additive noise of known covariance.

pub mod controller;
pub mod drcc;
pub mod linalg;
pub mod ocp;
pub mod solver;
pub mod sim;
