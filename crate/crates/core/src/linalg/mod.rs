//! Dense linear algebra and control synthesis primitives.
//!
//! Everything here is a pure function of its inputs. Matrices that represent
//! covariances or quadratic weights are symmetrized on the way out so callers
//! can compare them bit-wise with their transposes.

mod covariance;
mod lyapunov;
mod riccati;

pub use covariance::{propagate_covariance, steady_state_covariance};
pub use lyapunov::solve_discrete_lyapunov;
pub use riccati::{synthesize_gain, RICCATI_MAX_ITERATIONS, RICCATI_REL_TOL};

use nalgebra::{Complex, DMatrix, DVector, Schur};
use thiserror::Error;

/// Stability margin: a matrix with spectral radius at or above `1 - SCHUR_MARGIN`
/// is rejected as not Schur stable.
pub const SCHUR_MARGIN: f64 = 1e-9;

/// Largest tolerated asymmetry `max |C - Cᵀ|` for inputs that must be symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Smallest eigenvalue tolerated for a matrix declared positive semidefinite.
pub const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Schur stable (spectral radius {radius})")]
    NotSchurStable { radius: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("{what} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd {
        what: &'static str,
        min_eigenvalue: f64,
    },
    #[error("gain synthesis failed: {0}")]
    SynthesisFailed(String),
    #[error("prediction horizon must be at least 1")]
    InvalidHorizon,
}

/// Returns `(X + Xᵀ) / 2`.
pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

pub fn max_asymmetry(x: &DMatrix<f64>) -> f64 {
    (x - x.transpose()).amax()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral_radius needs a square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    eigenvalues(m)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues through a real Schur form with a bounded iteration count.
///
/// The unshifted QR sweep can stall on matrices such as scaled rotations, so
/// on failure the decomposition is retried on `M + sI` and shifted back.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    for shift in [0.0, 0.37, -0.61, 1.13] {
        let shifted = m + DMatrix::identity(n, n) * (shift * scale);
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, 10_000) {
            return schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z - Complex::new(shift * scale, 0.0))
                .collect();
        }
    }
    panic!("real Schur decomposition did not converge for any shift")
}

pub fn min_symmetric_eigenvalue(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    symmetrize(x)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Loewner order test `P ⪯ Q`: true iff the smallest eigenvalue of `Q - P`
/// is at least `-tol`.
pub fn loewner_leq(p: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> bool {
    assert_eq!(p.shape(), q.shape(), "loewner_leq needs equal shapes");
    min_symmetric_eigenvalue(&(q - p)) >= -tol
}

/// Quadratic form `xᵀ M x`.
pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<usize, LinalgError> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(LinalgError::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    let asymmetry = max_asymmetry(m);
    if asymmetry > SYMMETRY_TOL {
        return Err(LinalgError::NonSymmetric { asymmetry });
    }
    Ok(())
}

fn check_positive_definite(m: &DMatrix<f64>, what: &'static str) -> Result<(), LinalgError> {
    check_symmetric(m)?;
    if m.clone().cholesky().is_none() {
        return Err(LinalgError::NotPositiveDefinite(what));
    }
    Ok(())
}

/// Linear plant `x⁺ = A x + B u + E w` with zero-mean disturbance `w` of
/// covariance `Wd`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    e: DMatrix<f64>,
    wd: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl SystemModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        e: DMatrix<f64>,
        wd: DMatrix<f64>,
    ) -> Result<Self, LinalgError> {
        let nx = check_square(&a, "A")?;
        let nw = check_square(&wd, "Wd")?;
        if b.nrows() != nx || b.ncols() == 0 {
            return Err(LinalgError::DimensionMismatch(format!(
                "B must be {nx}xn_u, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if e.nrows() != nx || e.ncols() != nw {
            return Err(LinalgError::DimensionMismatch(format!(
                "E must be {nx}x{nw}, got {}x{}",
                e.nrows(),
                e.ncols()
            )));
        }
        check_symmetric(&wd)?;
        let min_eigenvalue = min_symmetric_eigenvalue(&wd);
        if min_eigenvalue < PSD_TOL {
            return Err(LinalgError::NotPsd {
                what: "Wd",
                min_eigenvalue,
            });
        }
        let w = symmetrize(&(&e * &wd * e.transpose()));
        Ok(Self { a, b, e, wd, w })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Noise channel.
    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    /// Disturbance covariance before the noise channel.
    pub fn wd(&self) -> &DMatrix<f64> {
        &self.wd
    }

    /// State-space noise covariance `E Wd Eᵀ`.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn nw(&self) -> usize {
        self.wd.nrows()
    }

    /// `A x + B u`
    pub fn nominal_step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn closed_loop(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a + &self.b * k
    }
}

/// Quadratic stage weights and prediction horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    horizon: usize,
}

impl CostSpec {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, horizon: usize) -> Result<Self, LinalgError> {
        check_square(&q, "Q")?;
        check_square(&r, "R")?;
        check_positive_definite(&q, "Q")?;
        check_positive_definite(&r, "R")?;
        if horizon == 0 {
            return Err(LinalgError::InvalidHorizon);
        }
        Ok(Self { q, r, horizon })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn check_model(&self, model: &SystemModel) -> Result<(), LinalgError> {
        if self.q.nrows() != model.nx() || self.r.nrows() != model.nu() {
            return Err(LinalgError::DimensionMismatch(format!(
                "cost weights are {}x{} / {}x{} but the model has n_x = {}, n_u = {}",
                self.q.nrows(),
                self.q.ncols(),
                self.r.nrows(),
                self.r.ncols(),
                model.nx(),
                model.nu()
            )));
        }
        Ok(())
    }
}

/// Offline design quantities shared by every online solve: feedback gain,
/// terminal weight and the error-covariance predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisArtifacts {
    k: DMatrix<f64>,
    s: DMatrix<f64>,
    sigma: Vec<DMatrix<f64>>,
    sigma_bar: DMatrix<f64>,
    spectral_radius: f64,
}

impl SynthesisArtifacts {
    /// Synthesizes `K` by LQR unless `gain_override` is given, then solves for
    /// the terminal weight `S`, the covariance sequence from `Σ₀ = 0`, and the
    /// steady covariance `Σ̄`.
    pub fn synthesize(
        model: &SystemModel,
        cost: &CostSpec,
        gain_override: Option<DMatrix<f64>>,
    ) -> Result<Self, LinalgError> {
        cost.check_model(model)?;
        let k = match gain_override {
            Some(k) => {
                if k.shape() != (model.nu(), model.nx()) {
                    return Err(LinalgError::DimensionMismatch(format!(
                        "gain override must be {}x{}, got {}x{}",
                        model.nu(),
                        model.nx(),
                        k.nrows(),
                        k.ncols()
                    )));
                }
                k
            }
            None => synthesize_gain(model, cost)?,
        };
        let acl = model.closed_loop(&k);
        let spectral_radius = spectral_radius(&acl);
        if spectral_radius >= 1.0 - SCHUR_MARGIN {
            return Err(LinalgError::NotSchurStable {
                radius: spectral_radius,
            });
        }
        let stage_weight = symmetrize(&(cost.q() + k.transpose() * cost.r() * &k));
        let s = solve_discrete_lyapunov(&acl, &stage_weight)?;
        let sigma = propagate_covariance(
            &DMatrix::zeros(model.nx(), model.nx()),
            &acl,
            model.w(),
            cost.horizon(),
        );
        let sigma_bar = steady_state_covariance(&acl, model.w())?;
        Ok(Self {
            k,
            s,
            sigma,
            sigma_bar,
            spectral_radius,
        })
    }

    /// Feedback gain `K` (n_u × n_x).
    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// Terminal weight `S`.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// `Σ_0 .. Σ_N` starting from `Σ_0 = 0`.
    pub fn sigma(&self) -> &[DMatrix<f64>] {
        &self.sigma
    }

    pub fn sigma_bar(&self) -> &DMatrix<f64> {
        &self.sigma_bar
    }

    /// `ρ(A + BK)`
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// `Q + KᵀRK`
    pub fn stage_weight(&self, cost: &CostSpec) -> DMatrix<f64> {
        symmetrize(&(cost.q() + self.k.transpose() * cost.r() * &self.k))
    }

    /// Frobenius residual of `(A+BK)ᵀS(A+BK) − S + Q + KᵀRK`.
    pub fn lyapunov_residual(&self, model: &SystemModel, cost: &CostSpec) -> f64 {
        let acl = model.closed_loop(&self.k);
        (acl.transpose() * &self.s * &acl - &self.s + self.stage_weight(cost)).norm()
    }
}
