use nalgebra::{DMatrix, DVector};

use super::{finish_solution, map_raw_status, Infeasibility, OcpDesign, OcpSolution, OcpStatus};
use crate::drcc::{StageRadii, TighteningMethod};
use crate::solver::{self, ConicForm, Row};

/// Input-only quadratic program with every chance constraint replaced by its
/// precomputed slab.
#[derive(Debug, Clone)]
pub struct CondensedProgram<'a> {
    design: &'a OcpDesign,
    pub form: ConicForm,
    pub radii: StageRadii,
    pub sigmas: Vec<DMatrix<f64>>,
    pub trace_constant: f64,
    xbar0: DVector<f64>,
}

/// Predicted nominal states as affine maps of the stacked inputs:
/// `x̄_l = φ_l + Γ_l U`.
fn prediction(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    xbar0: &DVector<f64>,
    n: usize,
) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
    let (nx, nu) = (a.nrows(), b.ncols());
    let mut phi = vec![xbar0.clone()];
    let mut gamma = vec![DMatrix::zeros(nx, n * nu)];
    for l in 0..n {
        phi.push(a * &phi[l]);
        let mut g = a * &gamma[l];
        g.view_mut((0, l * nu), (nx, nu)).copy_from(b);
        gamma.push(g);
    }
    (phi, gamma)
}

/// Builds the condensed program with slab radii from `method`.
pub fn build_condensed<'a>(
    design: &'a OcpDesign,
    xbar0: &DVector<f64>,
    sigma0: &DMatrix<f64>,
    method: TighteningMethod,
) -> Result<CondensedProgram<'a>, Infeasibility> {
    let model = design.model();
    let (nu, n) = (model.nu(), design.horizon());
    assert_eq!(xbar0.len(), model.nx(), "initial state has the wrong length");
    let sigmas = design.covariances(sigma0);
    let radii = design.radii(&sigmas, method)?;
    let trace_constant = design.trace_constant(&sigmas);
    let (phi, gamma) = prediction(model.a(), model.b(), xbar0, n);
    let nv = n * nu;
    let mut form = ConicForm::new(nv);

    let q = design.cost().q();
    let s = design.artifacts().s();
    let mut h = DMatrix::zeros(nv, nv);
    let mut lin = DVector::zeros(nv);
    let mut constant = 0.0;
    for l in 0..=n {
        let w = if l < n { q } else { s };
        let wg = w * &gamma[l];
        h += gamma[l].transpose() * &wg;
        lin += 2.0 * wg.transpose() * &phi[l];
        constant += phi[l].dot(&(w * &phi[l]));
    }
    let r = design.cost().r();
    for l in 0..n {
        let mut block = h.view_mut((l * nu, l * nu), (nu, nu));
        block += r;
    }
    let h = 0.5 * (&h + h.transpose());
    for i in 0..nv {
        for j in 0..nv {
            if h[(i, j)] != 0.0 {
                form.quadratic.push((i, j, h[(i, j)]));
            }
        }
    }
    form.linear = lin.iter().copied().collect();
    form.constant = constant;

    let mut add_slab = |coeffs: DVector<f64>, offset: f64, radius: f64| -> bool {
        let nz: Vec<(usize, f64)> = coeffs
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, v)| v != 0.0)
            .collect();
        if nz.is_empty() {
            return offset.abs() <= radius;
        }
        let neg = nz.iter().map(|&(j, v)| (j, -v)).collect();
        form.inequalities.push(Row::new(nz, radius - offset));
        form.inequalities.push(Row::new(neg, radius + offset));
        true
    };
    let constraints = design.constraints();
    for l in 0..n {
        for (i, c) in constraints.iter().enumerate() {
            let rad = radii.stages[l][i];
            let ok = if c.kind().is_state() {
                let d = c.direction();
                add_slab(gamma[l].transpose() * d, d.dot(&phi[l]), rad)
            } else {
                let mut coeffs = DVector::zeros(nv);
                coeffs.rows_mut(l * nu, nu).copy_from(c.direction());
                add_slab(coeffs, 0.0, rad)
            };
            if !ok {
                return Err(Infeasibility::InitialState { constraint: i });
            }
        }
    }
    for (i, c) in constraints.iter().enumerate() {
        if let Some(rad) = radii.terminal[i] {
            let d = c.direction();
            if !add_slab(gamma[n].transpose() * d, d.dot(&phi[n]), rad) {
                return Err(Infeasibility::InitialState { constraint: i });
            }
        }
    }

    Ok(CondensedProgram {
        design,
        form,
        radii,
        sigmas,
        trace_constant,
        xbar0: xbar0.clone(),
    })
}

impl CondensedProgram<'_> {
    pub fn solve(&self) -> OcpSolution {
        let raw = solver::solve(&self.form);
        let status = map_raw_status(&raw.status, &raw.z);
        if status != OcpStatus::Optimal {
            let mut sol = OcpSolution::empty(status);
            sol.iterations = raw.iterations;
            return sol;
        }
        let model = self.design.model();
        let nu = model.nu();
        let inputs: Vec<DVector<f64>> = (0..self.design.horizon())
            .map(|l| DVector::from_column_slice(&raw.x[l * nu..(l + 1) * nu]))
            .collect();
        let mut states = vec![self.xbar0.clone()];
        for u in &inputs {
            let next = model.nominal_step(states.last().expect("nonempty"), u);
            states.push(next);
        }
        finish_solution(
            self.design,
            &raw,
            self.form.max_violation(&raw.x),
            &self.radii,
            states,
            inputs,
            self.trace_constant,
        )
    }
}
