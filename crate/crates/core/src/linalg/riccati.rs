use nalgebra::DMatrix;

use super::{spectral_radius, symmetrize, CostSpec, LinalgError, SystemModel, SCHUR_MARGIN};

pub const RICCATI_REL_TOL: f64 = 1e-12;
pub const RICCATI_MAX_ITERATIONS: usize = 10_000;

/// Infinite-horizon discrete LQR gain from fixed-point Riccati iteration.
///
/// The gain follows the `u = Kx` sign convention, so `A + BK` is the closed
/// loop.
pub fn synthesize_gain(model: &SystemModel, cost: &CostSpec) -> Result<DMatrix<f64>, LinalgError> {
    cost.check_model(model)?;
    let a = model.a();
    let b = model.b();
    let q = cost.q();
    let r = cost.r();
    let at = a.transpose();
    let bt = b.transpose();

    let gain = |p: &DMatrix<f64>| -> Result<DMatrix<f64>, LinalgError> {
        let g = symmetrize(&(r + &bt * p * b));
        let chol = g.cholesky().ok_or_else(|| {
            LinalgError::SynthesisFailed("R + BᵀPB lost positive definiteness".into())
        })?;
        Ok(-chol.solve(&(&bt * p * a)))
    };

    let mut p = q.clone();
    let mut converged = false;
    for _ in 0..RICCATI_MAX_ITERATIONS {
        let k = gain(&p)?;
        // Aᵀ P A − Aᵀ P B (R + BᵀPB)⁻¹ BᵀPA + Q, written with the gain
        let next = symmetrize(&(&at * &p * a + &at * &p * b * &k + q));
        if !next.iter().all(|v| v.is_finite()) {
            return Err(LinalgError::SynthesisFailed(
                "Riccati iterate diverged".into(),
            ));
        }
        let change = (&next - &p).norm();
        let scale = next.norm();
        p = next;
        if change <= RICCATI_REL_TOL * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::SynthesisFailed(format!(
            "Riccati iteration did not converge in {RICCATI_MAX_ITERATIONS} iterations"
        )));
    }
    let k = gain(&p)?;
    let radius = spectral_radius(&model.closed_loop(&k));
    if radius >= 1.0 - SCHUR_MARGIN {
        return Err(LinalgError::SynthesisFailed(format!(
            "closed loop not Schur stable (spectral radius {radius})"
        )));
    }
    Ok(k)
}
