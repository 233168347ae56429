use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::drcc::TighteningMethod;
use crate::ocp::OcpDesign;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("bad grid axis `{0}`: expected min:max:step with min < max and step > 0")]
pub struct GridError(pub String);

/// Closed range sampled at `min, min + step, ...` up to `max` (inclusive up to
/// rounding).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self, GridError> {
        if !(min < max && step > 0.0 && min.is_finite() && max.is_finite()) {
            return Err(GridError(format!("{min}:{max}:{step}")));
        }
        Ok(Self { min, max, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

impl FromStr for GridAxis {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| GridError(s.into()))?;
        match parts[..] {
            [min, max, step] => Self::new(min, max, step).map_err(|_| GridError(s.into())),
            _ => Err(GridError(s.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleScan {
    pub method: TighteningMethod,
    pub x_axis: GridAxis,
    pub y_axis: GridAxis,
    /// `(x, y, feasible)` in row-major order over `y` then `x`.
    pub points: Vec<(f64, f64, bool)>,
}

impl FeasibleScan {
    pub fn feasible_count(&self) -> usize {
        self.points.iter().filter(|p| p.2).count()
    }

    /// Feasible point count times cell area.
    pub fn area(&self) -> f64 {
        self.feasible_count() as f64 * self.x_axis.step * self.y_axis.step
    }
}

/// Marks grid points of the plane spanned by state coordinates `dims`
/// (remaining coordinates at `base`) where the problem with `Σ_0 = 0` is
/// feasible.
pub fn feasible_set_scan(
    design: &OcpDesign,
    method: TighteningMethod,
    dims: (usize, usize),
    base: &DVector<f64>,
    x_axis: GridAxis,
    y_axis: GridAxis,
) -> FeasibleScan {
    let nx = design.model().nx();
    assert!(dims.0 < nx && dims.1 < nx && dims.0 != dims.1, "bad scan dimensions");
    let zero = DMatrix::zeros(nx, nx);
    let xs = x_axis.points();
    let grid: Vec<(f64, f64)> = y_axis
        .points()
        .into_iter()
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect();
    let points = grid
        .into_par_iter()
        .map(|(x, y)| {
            let mut x0 = base.clone();
            x0[dims.0] = x;
            x0[dims.1] = y;
            (x, y, design.solve(&x0, &zero, method).is_optimal())
        })
        .collect();
    FeasibleScan {
        method,
        x_axis,
        y_axis,
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let a: GridAxis = "-1:1:0.5".parse().unwrap();
        assert_eq!(a.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!("1:0:0.1".parse::<GridAxis>().is_err());
        assert!("0:1".parse::<GridAxis>().is_err());
        assert!("0:1:0".parse::<GridAxis>().is_err());
        assert_eq!("0:0.3:0.1".parse::<GridAxis>().unwrap().points().len(), 4);
    }
}
