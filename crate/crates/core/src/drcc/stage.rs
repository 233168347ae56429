use nalgebra::DMatrix;

use super::{ConstraintKind, DrccError, TighteningMethod, TwoSidedConstraint};

/// Slab half-widths for every constraint along the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRadii {
    /// `stages[l][i]`: radius of constraint `i` at stage `l`, `l = 0..N−1`.
    pub stages: Vec<Vec<f64>>,
    /// Terminal radius per constraint, computed from the steady covariance.
    /// `None` for constraints that do not act on the state.
    pub terminal: Vec<Option<f64>>,
    pub method: TighteningMethod,
}

impl StageRadii {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn radius(&self, stage: usize, constraint: usize) -> f64 {
        self.stages[stage][constraint]
    }
}

/// Radii for stages `0..horizon` from `sigmas[l]` and terminal radii from
/// `sigma_bar`.
///
/// Input constraints only have stage radii; their terminal counterpart is a
/// certification question and is handled by [`super::certify_terminal`].
pub fn stage_radii(
    constraints: &[TwoSidedConstraint],
    k: &DMatrix<f64>,
    sigmas: &[DMatrix<f64>],
    horizon: usize,
    sigma_bar: &DMatrix<f64>,
    method: TighteningMethod,
) -> Result<StageRadii, DrccError> {
    assert!(sigmas.len() >= horizon, "need a covariance per stage");
    let mut stages = Vec::with_capacity(horizon);
    for (l, sigma) in sigmas.iter().take(horizon).enumerate() {
        let row = constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                method
                    .radius(c.variance(sigma, k), c.bound(), c.epsilon())
                    .map_err(|_| DrccError::StageInfeasible {
                        constraint: i,
                        stage: l,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        stages.push(row);
    }
    let terminal = constraints
        .iter()
        .enumerate()
        .map(|(i, c)| match c.kind() {
            ConstraintKind::State => method
                .radius(c.variance(sigma_bar, k), c.bound(), c.epsilon())
                .map(Some)
                .map_err(|_| DrccError::TerminalInfeasible { constraint: i }),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StageRadii {
        stages,
        terminal,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn zero_initial_covariance_leaves_stage_zero_untightened() {
        let cons = vec![
            TwoSidedConstraint::state(dvector![1.0, 0.0], 2.0, 0.2).unwrap(),
            TwoSidedConstraint::input(dvector![1.0], 0.5, 0.3).unwrap(),
        ];
        let k = dmatrix![-0.3, 0.2];
        let sigmas = vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2) * 0.01];
        let bar = DMatrix::identity(2, 2) * 0.02;
        let r = stage_radii(
            &cons,
            &k,
            &sigmas,
            2,
            &bar,
            TighteningMethod::DistributionallyRobust,
        )
        .unwrap();
        assert_eq!(r.stages[0], vec![2.0, 0.5]);
        assert!(r.stages[1][0] < 2.0);
        assert!(r.terminal[0].unwrap() <= r.stages[1][0]);
        assert_eq!(r.terminal[1], None);
    }

    #[test]
    fn reports_offending_stage() {
        let cons = vec![TwoSidedConstraint::state(dvector![1.0], 0.1, 0.2).unwrap()];
        let sigmas = vec![dmatrix![0.0], dmatrix![0.001], dmatrix![0.003]];
        let err = stage_radii(
            &cons,
            &dmatrix![0.0],
            &sigmas,
            3,
            &dmatrix![0.003],
            TighteningMethod::DistributionallyRobust,
        )
        .unwrap_err();
        assert_eq!(
            err,
            DrccError::StageInfeasible {
                constraint: 0,
                stage: 2
            }
        );
    }
}
