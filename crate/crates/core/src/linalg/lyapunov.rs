use nalgebra::DMatrix;

use super::{
    check_square, check_symmetric, spectral_radius, symmetrize, LinalgError, SCHUR_MARGIN,
};

/// Above this state dimension the Kronecker system (n² unknowns) is replaced
/// by the doubling iteration.
const KRONECKER_MAX_DIM: usize = 8;
const DOUBLING_TOL: f64 = 1e-12;
const DOUBLING_MAX_ITERATIONS: usize = 200;

/// Solves `MᵀSM − S = −C` for symmetric `S`.
///
/// Small systems go through the vectorized form
/// `(I − Mᵀ⊗Mᵀ) vec(S) = vec(C)`; larger ones sum the series
/// `Σ (Mᵀ)^k C M^k` by squaring.
pub fn solve_discrete_lyapunov(
    m: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let n = check_square(m, "M")?;
    if c.shape() != (n, n) {
        return Err(LinalgError::DimensionMismatch(format!(
            "C must be {n}x{n}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    check_symmetric(c)?;
    let radius = spectral_radius(m);
    if radius >= 1.0 - SCHUR_MARGIN {
        return Err(LinalgError::NotSchurStable { radius });
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let s = if n <= KRONECKER_MAX_DIM {
        kronecker_solve(m, c)?
    } else {
        doubling_solve(m, c)
    };
    Ok(symmetrize(&s))
}

fn kronecker_solve(m: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = m.nrows();
    let mt = m.transpose();
    let lhs = DMatrix::identity(n * n, n * n) - mt.kronecker(&mt);
    // nalgebra storage is column-major, so the slice is vec(C)
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let vec_s = lhs.lu().solve(&rhs).ok_or(LinalgError::NotSchurStable {
        radius: spectral_radius(m),
    })?;
    Ok(DMatrix::from_column_slice(n, n, vec_s.as_slice()))
}

fn doubling_solve(m: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = c.clone();
    let mut power = m.clone();
    for _ in 0..DOUBLING_MAX_ITERATIONS {
        let increment = power.transpose() * &s * &power;
        s += &increment;
        power = &power * &power;
        if increment.norm() <= DOUBLING_TOL * s.norm().max(1.0) {
            break;
        }
    }
    s
}
