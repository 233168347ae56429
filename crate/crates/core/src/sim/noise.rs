use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{max_asymmetry, min_symmetric_eigenvalue, PSD_TOL, SYMMETRY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Independent Laplace components; requires a diagonal covariance.
    Laplace,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise covariance must be square")]
    NotSquare,
    #[error("noise covariance is not symmetric positive semidefinite")]
    NotPsd,
    #[error("Laplace noise needs a diagonal covariance (off-diagonal magnitude {0})")]
    NonDiagonalLaplace(f64),
}

/// Disturbance law: zero mean, given covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    family: NoiseFamily,
    covariance: DMatrix<f64>,
    /// Gaussian: `L` with `LLᵀ = covariance`. Laplace: diagonal of scales `β`.
    factor: DMatrix<f64>,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, covariance: DMatrix<f64>) -> Result<Self, NoiseError> {
        if !covariance.is_square() {
            return Err(NoiseError::NotSquare);
        }
        if max_asymmetry(&covariance) > SYMMETRY_TOL || min_symmetric_eigenvalue(&covariance) < PSD_TOL {
            return Err(NoiseError::NotPsd);
        }
        let n = covariance.nrows();
        let factor = match family {
            NoiseFamily::Gaussian => {
                // eigen-factor tolerates semidefinite covariances
                let eig = covariance.clone().symmetric_eigen();
                let mut l = eig.eigenvectors.clone();
                for (j, &lam) in eig.eigenvalues.iter().enumerate() {
                    let s = lam.max(0.0).sqrt();
                    l.column_mut(j).scale_mut(s);
                }
                l
            }
            NoiseFamily::Laplace => {
                let off = (0..n)
                    .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                    .map(|(i, j)| covariance[(i, j)].abs())
                    .fold(0.0, f64::max);
                if off > 0.0 {
                    return Err(NoiseError::NonDiagonalLaplace(off));
                }
                DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| {
                    (covariance[(i, i)].max(0.0) / 2.0).sqrt()
                }))
            }
        };
        Ok(Self {
            family,
            covariance,
            factor,
        })
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    /// Laplace scales `β_i = sqrt(var_i / 2)`; empty for Gaussian noise.
    pub fn laplace_scales(&self) -> Vec<f64> {
        match self.family {
            NoiseFamily::Laplace => self.factor.diagonal().iter().copied().collect(),
            NoiseFamily::Gaussian => Vec::new(),
        }
    }

    /// One disturbance draw (before the noise channel).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.dim();
        match self.family {
            NoiseFamily::Gaussian => {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                &self.factor * z
            }
            NoiseFamily::Laplace => DVector::from_fn(n, |i, _| {
                // inverse CDF on u ∈ [−½, ½)
                let u: f64 = rng.gen::<f64>() - 0.5;
                let beta = self.factor[(i, i)];
                -beta * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
            }),
        }
    }
}

/// Free-function form of [`NoiseSpec::sample`].
pub fn sample_noise<R: Rng + ?Sized>(spec: &NoiseSpec, rng: &mut R) -> DVector<f64> {
    spec.sample(rng)
}
