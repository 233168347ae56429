//! Minimal conic-program container and the Clarabel back end.
//!
//! Programs are written as
//!
//! ```text
//! minimize    xᵀHx + cᵀx + c₀
//! subject to  Eq x = e,  In x ≤ h,  (t_k − T_k x) ∈ SOC  for every cone block k
//! ```
//!
//! where each cone row stores the affine map `rhs − coeffs·x`, the first row of a
//! block being the cone's scalar bound.

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

/// Gap and feasibility tolerance requested from the solver.
pub const REQUESTED_TOL: f64 = 1e-8;
/// Reduced-accuracy tolerance still accepted as a solution.
pub const ACCEPTED_TOL: f64 = 1e-7;

/// Sparse affine row `coeffs · x` paired with a right-hand side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, v)| v * x[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicForm {
    pub num_vars: usize,
    /// Entries `(i, j, v)` contributing `v·xᵢ·xⱼ` to the objective.
    pub quadratic: Vec<(usize, usize, f64)>,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub equalities: Vec<Row>,
    pub inequalities: Vec<Row>,
    pub cones: Vec<Vec<Row>>,
}

impl ConicForm {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            linear: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    /// Dense symmetric `H` such that the quadratic part is `xᵀHx`.
    pub fn hessian(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.num_vars, self.num_vars);
        for &(i, j, v) in &self.quadratic {
            h[(i, j)] += 0.5 * v;
            h[(j, i)] += 0.5 * v;
        }
        h
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let quad: f64 = self.quadratic.iter().map(|&(i, j, v)| v * x[i] * x[j]).sum();
        let lin: f64 = self.linear.iter().zip(x).map(|(c, xi)| c * xi).sum();
        quad + lin + self.constant
    }

    /// Largest violation of any constraint at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self
            .equalities
            .iter()
            .map(|r| (r.eval(x) - r.rhs).abs())
            .fold(0.0, f64::max);
        let ineq = self
            .inequalities
            .iter()
            .map(|r| (r.eval(x) - r.rhs).max(0.0))
            .fold(0.0, f64::max);
        let soc = self
            .cones
            .iter()
            .map(|block| {
                let s: Vec<f64> = block.iter().map(|r| r.rhs - r.eval(x)).collect();
                let tail = s[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                (tail - s[0]).max(0.0)
            })
            .fold(0.0, f64::max);
        eq.max(ineq).max(soc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawStatus {
    Solved,
    Infeasible,
    Unbounded,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: RawStatus,
    pub x: Vec<f64>,
    /// Dual variables; a primal infeasibility certificate when `Infeasible`.
    pub z: Vec<f64>,
    /// Objective including `constant`, as reported by the solver.
    pub objective: f64,
    pub iterations: u32,
}

fn settings() -> DefaultSettings<f64> {
    DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(400)
        .tol_gap_abs(REQUESTED_TOL)
        .tol_gap_rel(REQUESTED_TOL)
        .tol_feas(REQUESTED_TOL)
        .reduced_tol_gap_abs(ACCEPTED_TOL)
        .reduced_tol_gap_rel(ACCEPTED_TOL)
        .reduced_tol_feas(ACCEPTED_TOL)
        .build()
        .expect("static solver settings are valid")
}

fn csc_from_entries(nrows: usize, ncols: usize, entries: &BTreeMap<(usize, usize), f64>) -> CscMatrix<f64> {
    // keys are (col, row) so iteration order is column-major
    let mut colptr = vec![0usize; ncols + 1];
    let mut rowval = Vec::with_capacity(entries.len());
    let mut nzval = Vec::with_capacity(entries.len());
    for (&(col, row), &v) in entries {
        if v == 0.0 {
            continue;
        }
        colptr[col + 1] += 1;
        rowval.push(row);
        nzval.push(v);
    }
    for c in 0..ncols {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(nrows, ncols, colptr, rowval, nzval)
}

pub fn solve(form: &ConicForm) -> RawSolution {
    let n = form.num_vars;

    let mut p_entries = BTreeMap::new();
    for &(i, j, v) in &form.quadratic {
        // ½ xᵀPx = xᵀHx with P = 2H; Clarabel wants the upper triangle
        let (row, col) = if i <= j { (i, j) } else { (j, i) };
        let scale = if i == j { 2.0 } else { 1.0 };
        *p_entries.entry((col, row)).or_insert(0.0) += scale * v;
    }
    let p = csc_from_entries(n, n, &p_entries);

    let mut a_entries = BTreeMap::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut push_row = |row: &Row, sign: f64, b: &mut Vec<f64>| {
        let r = b.len();
        for &(j, v) in &row.coeffs {
            *a_entries.entry((j, r)).or_insert(0.0) += sign * v;
        }
        b.push(sign * row.rhs);
    };
    for row in &form.equalities {
        push_row(row, 1.0, &mut b);
    }
    if !form.equalities.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(form.equalities.len()));
    }
    for row in &form.inequalities {
        push_row(row, 1.0, &mut b);
    }
    if !form.inequalities.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(form.inequalities.len()));
    }
    for block in &form.cones {
        for row in block {
            push_row(row, 1.0, &mut b);
        }
        cones.push(SupportedConeT::SecondOrderConeT(block.len()));
    }
    let m = b.len();
    let a = csc_from_entries(m, n, &a_entries);

    let failed = |msg: String| RawSolution {
        status: RawStatus::Failed(msg),
        x: vec![f64::NAN; n],
        z: Vec::new(),
        objective: f64::NAN,
        iterations: 0,
    };
    let mut solver = match DefaultSolver::new(&p, &form.linear, &a, &b, &cones, settings()) {
        Ok(s) => s,
        Err(e) => return failed(format!("solver setup: {e}")),
    };
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => RawStatus::Solved,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            RawStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => RawStatus::Unbounded,
        other => RawStatus::Failed(format!("{other:?}")),
    };
    RawSolution {
        status,
        x: sol.x.clone(),
        z: sol.z.clone(),
        objective: sol.obj_val + form.constant,
        iterations: sol.iterations,
    }
}

/// Maximizes `gᵀx` over the symmetric slab intersection `{x : |dᵢᵀx| ≤ rᵢ}`.
///
/// Returns `None` when the objective is unbounded, which happens exactly when
/// `g` leaves the row space of the slab directions.
pub fn max_over_slabs(directions: &[DVector<f64>], radii: &[f64], g: &DVector<f64>) -> Option<f64> {
    let n = g.len();
    if g.amax() == 0.0 {
        return Some(0.0);
    }
    if directions.is_empty() {
        return None;
    }
    let d = DMatrix::from_fn(directions.len(), n, |i, j| directions[i][j]);
    // residual of projecting g onto the row space of d
    let svd = d.clone().svd(true, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let smax = svd.singular_values.max();
    let mut proj = DVector::zeros(n);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-12 * smax {
            let vk = v_t.row(k).transpose();
            proj += &vk * vk.dot(g);
        }
    }
    if (g - proj).norm() > 1e-9 * g.norm() {
        return None;
    }

    let mut form = ConicForm::new(n);
    for j in 0..n {
        form.linear[j] = -g[j];
    }
    for (dir, &r) in directions.iter().zip(radii) {
        let coeffs: Vec<(usize, f64)> = dir.iter().copied().enumerate().collect();
        form.inequalities.push(Row::new(coeffs.clone(), r));
        form.inequalities
            .push(Row::new(coeffs.into_iter().map(|(j, v)| (j, -v)).collect(), r));
    }
    let sol = solve(&form);
    match sol.status {
        RawStatus::Solved => Some(-sol.objective),
        RawStatus::Unbounded => None,
        // an empty slab intersection cannot happen for nonnegative radii
        _ => Some(f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn small_qp_with_soc() {
        // minimize x0² + x1² subject to x0 + x1 = 2 and ‖x‖ ≤ 5
        let mut f = ConicForm::new(2);
        f.quadratic = vec![(0, 0, 1.0), (1, 1, 1.0)];
        f.equalities.push(Row::new(vec![(0, 1.0), (1, 1.0)], 2.0));
        f.cones.push(vec![
            Row::new(vec![], 5.0),
            Row::new(vec![(0, -1.0)], 0.0),
            Row::new(vec![(1, -1.0)], 0.0),
        ]);
        let sol = solve(&f);
        assert_eq!(sol.status, RawStatus::Solved);
        assert!((sol.x[0] - 1.0).abs() < 1e-7 && (sol.x[1] - 1.0).abs() < 1e-7);
        assert!((sol.objective - 2.0).abs() < 1e-7);
        assert!(f.max_violation(&sol.x) < 1e-7);
    }

    #[test]
    fn detects_primal_infeasibility() {
        let mut f = ConicForm::new(1);
        f.inequalities.push(Row::new(vec![(0, 1.0)], -1.0));
        f.inequalities.push(Row::new(vec![(0, -1.0)], -1.0));
        assert_eq!(solve(&f).status, RawStatus::Infeasible);
    }

    #[test]
    fn slab_lp_bounded_and_unbounded() {
        let dirs = vec![dvector![1.0, 0.0], dvector![0.0, 1.0]];
        let v = max_over_slabs(&dirs, &[1.0, 2.0], &dvector![1.0, -1.0]).unwrap();
        assert!((v - 3.0).abs() < 1e-7);
        assert!(max_over_slabs(&dirs[..1], &[1.0], &dvector![0.0, 1.0]).is_none());
        assert_eq!(max_over_slabs(&dirs[..1], &[1.0], &dvector![0.0, 0.0]), Some(0.0));
    }
}
