//! Bundled scenarios.

use nalgebra::{dmatrix, dvector, DMatrix};

use super::noise::{NoiseFamily, NoiseSpec};
use super::Scenario;
use crate::drcc::{ConstraintKind, TwoSidedConstraint};
use crate::linalg::{CostSpec, SystemModel};

pub const BUILTIN_NAMES: [&str; 2] = ["buck_boost", "two_mass_spring"];

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "buck_boost" => Some(buck_boost()),
        "two_mass_spring" => Some(two_mass_spring()),
        _ => None,
    }
}

fn con(kind: ConstraintKind, d: nalgebra::DVector<f64>, b: f64, p: f64) -> TwoSidedConstraint {
    TwoSidedConstraint::new(d, b, p, kind).expect("valid builtin constraint")
}

/// Linearized DC-DC converter. The input bound applies to the planned input.
pub fn buck_boost() -> Scenario {
    let wd = DMatrix::identity(2, 2) * 0.03;
    let model = SystemModel::new(
        dmatrix![1.0, 0.0075; -0.143, 0.996],
        dmatrix![4.798; 0.115],
        DMatrix::identity(2, 2),
        wd.clone(),
    )
    .expect("valid model");
    Scenario {
        name: "buck_boost".into(),
        model,
        cost: CostSpec::new(dmatrix![1.0, 0.0; 0.0, 10.0], dmatrix![1.0], 8).expect("valid cost"),
        constraints: vec![
            con(ConstraintKind::State, dvector![1.0, 0.0], 2.0, 0.2),
            con(ConstraintKind::State, dvector![0.0, 1.0], 3.0, 0.2),
            con(ConstraintKind::NominalInput, dvector![1.0], 0.2, 0.01),
        ],
        noise: NoiseSpec::new(NoiseFamily::Gaussian, wd).expect("valid noise"),
        steps: 50,
        x0: dvector![1.0, 2.0],
        k_override: Some(dmatrix![-0.28, 0.49]),
        s_reference: Some(dmatrix![1.90, -5.05; -5.05, 39.54]),
    }
}

/// Two masses coupled by a spring, forward-Euler discretized at 0.1 s, with
/// Laplace force disturbances on both masses.
pub fn two_mass_spring() -> Scenario {
    let ac = dmatrix![
        0.0, 0.0, 1.0, 0.0;
        0.0, 0.0, 0.0, 1.0;
        -1.25, 1.25, 0.0, 0.0;
        1.25, -1.25, 0.0, 0.0
    ];
    let a = DMatrix::identity(4, 4) + ac * 0.1;
    let e = dmatrix![0.0, 0.0; 0.0, 0.0; 0.1, 0.0; 0.0, 0.1];
    let wd = DMatrix::identity(2, 2) * 0.07;
    let model = SystemModel::new(a, dmatrix![0.0; 0.0; 0.1; 0.0], e, wd.clone()).expect("valid model");
    Scenario {
        name: "two_mass_spring".into(),
        model,
        cost: CostSpec::new(
            DMatrix::from_diagonal(&dvector![1.0, 1.0, 4.0, 6.0]),
            dmatrix![1.0],
            7,
        )
        .expect("valid cost"),
        constraints: vec![
            con(ConstraintKind::State, dvector![0.0, 0.0, 1.0, 0.0], 0.12, 0.2),
            con(ConstraintKind::State, dvector![0.0, 0.0, 0.0, 1.0], 0.12, 0.2),
            con(ConstraintKind::NominalInput, dvector![1.0], 0.5, 0.01),
        ],
        noise: NoiseSpec::new(NoiseFamily::Laplace, wd).expect("valid noise"),
        steps: 50,
        x0: dvector![0.5, 0.5, 0.0, 0.0],
        k_override: None,
        s_reference: None,
    }
}
