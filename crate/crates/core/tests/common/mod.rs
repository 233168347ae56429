#![allow(dead_code)]

use drsmpc::drcc::{ConstraintKind, TwoSidedConstraint};
use drsmpc::linalg::{spectral_radius, CostSpec, SystemModel};
use drsmpc::ocp::OcpDesign;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

/// Random model whose open-loop spectral radius lies in `[0.5, rho_max]`.
pub fn random_model(rng: &mut ChaCha8Rng, nx: usize, nu: usize, noise: f64) -> SystemModel {
    let mut a = normal_matrix(rng, nx, nx);
    let rho = spectral_radius(&a).max(1e-6);
    a *= rng.gen_range(0.5..1.15) / rho;
    let b = normal_matrix(rng, nx, nu);
    let g = normal_matrix(rng, nx, nx);
    let w = &g * g.transpose() * (noise / nx as f64);
    SystemModel::new(a, b, DMatrix::identity(nx, nx), w).expect("valid model")
}

/// Random design with a couple of state constraints and possibly an input
/// constraint; `None` when synthesis fails for the draw.
pub fn random_design(rng: &mut ChaCha8Rng) -> Option<OcpDesign> {
    let nx = rng.gen_range(2..=3);
    let nu = rng.gen_range(1..=2);
    let horizon = rng.gen_range(2..=6);
    let noise = rng.gen_range(0.001..0.05);
    let model = random_model(rng, nx, nu, noise);
    let q = DMatrix::identity(nx, nx) * rng.gen_range(0.5..2.0);
    let r = DMatrix::identity(nu, nu) * rng.gen_range(0.1..2.0);
    let cost = CostSpec::new(q, r, horizon).ok()?;
    let mut cons = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        cons.push(
            TwoSidedConstraint::state(unit_vector(rng, nx), rng.gen_range(0.8..3.0), rng.gen_range(0.1..0.4))
                .ok()?,
        );
    }
    if rng.gen_bool(0.5) {
        let kind = if rng.gen_bool(0.5) {
            ConstraintKind::Input
        } else {
            ConstraintKind::NominalInput
        };
        cons.push(
            TwoSidedConstraint::new(unit_vector(rng, nu), rng.gen_range(1.0..4.0), rng.gen_range(0.1..0.4), kind)
                .ok()?,
        );
    }
    OcpDesign::synthesize(model, cost, cons, None).ok()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
