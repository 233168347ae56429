use nalgebra::DMatrix;

use super::{solve_discrete_lyapunov, symmetrize, LinalgError};

/// Error covariance predictions `Σ_{l+1} = Acl Σ_l Aclᵀ + W`, returned as
/// `Σ_0 ..= Σ_n` with `Σ_0 = sigma0`.
pub fn propagate_covariance(
    sigma0: &DMatrix<f64>,
    acl: &DMatrix<f64>,
    w: &DMatrix<f64>,
    n: usize,
) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(symmetrize(sigma0));
    let acl_t = acl.transpose();
    for l in 0..n {
        let next = acl * &out[l] * &acl_t + w;
        out.push(symmetrize(&next));
    }
    out
}

/// Fixed point `Σ̄ = Acl Σ̄ Aclᵀ + W`.
pub fn steady_state_covariance(
    acl: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    solve_discrete_lyapunov(&acl.transpose(), w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn zero_noise_stays_zero() {
        let seq = propagate_covariance(
            &DMatrix::zeros(2, 2),
            &DMatrix::from_diagonal_element(2, 2, 0.9),
            &DMatrix::zeros(2, 2),
            4,
        );
        assert_eq!(seq.len(), 5);
        assert!(seq.iter().all(|s| s.amax() == 0.0));
    }

    #[test]
    fn zero_dynamics_hits_fixed_point_at_once() {
        let seq = propagate_covariance(
            &DMatrix::zeros(2, 2),
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            3,
        );
        assert_eq!(seq[0], DMatrix::zeros(2, 2));
        for s in &seq[1..] {
            assert_eq!(s, &DMatrix::identity(2, 2));
        }
    }

    #[test]
    fn scalar_hand_recursion() {
        let seq = propagate_covariance(&dmatrix![0.0], &dmatrix![0.5], &dmatrix![1.0], 2);
        let values: Vec<f64> = seq.iter().map(|s| s[(0, 0)]).collect();
        assert_eq!(values, vec![0.0, 1.0, 1.25]);
    }

    #[test]
    fn steady_state_scalar_and_zero_dynamics() {
        let s = steady_state_covariance(&dmatrix![0.5], &dmatrix![1.0]).unwrap();
        assert!((s[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        let w = dmatrix![2.0, 0.5; 0.5, 1.0];
        assert_eq!(steady_state_covariance(&DMatrix::zeros(2, 2), &w).unwrap(), w);
    }
}
