use nalgebra::{DMatrix, DVector};

use super::{finish_solution, map_raw_status, Infeasibility, OcpDesign, OcpSolution, OcpStatus};
use crate::drcc::{StageRadii, TighteningMethod, TwoSidedConstraint};
use crate::solver::{self, ConicForm, Row};

/// Variable layout of the conic program.
///
/// Order: `ū_0..ū_{N−1}`, `x̄_0..x̄_N`, then `(y, λ)` pairs for every state
/// constraint at every stage `0..N−1`, for every input constraint at every
/// stage, and finally one terminal pair per state constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
    /// Indices of state constraints in the design's constraint list.
    pub state_constraints: Vec<usize>,
    /// Indices of input and nominal-input constraints.
    pub input_constraints: Vec<usize>,
}

impl Layout {
    pub fn new(horizon: usize, nx: usize, nu: usize, constraints: &[TwoSidedConstraint]) -> Self {
        let (state, input): (Vec<usize>, Vec<usize>) =
            (0..constraints.len()).partition(|&i| constraints[i].kind().is_state());
        Self {
            horizon,
            nx,
            nu,
            state_constraints: state,
            input_constraints: input,
        }
    }

    pub fn u(&self, l: usize, j: usize) -> usize {
        l * self.nu + j
    }

    pub fn x(&self, l: usize, j: usize) -> usize {
        self.horizon * self.nu + l * self.nx + j
    }

    fn aux_base(&self) -> usize {
        self.horizon * self.nu + (self.horizon + 1) * self.nx
    }

    /// `(y, λ)` indices for the `s`-th state constraint at stage `l`.
    pub fn state_aux(&self, l: usize, s: usize) -> (usize, usize) {
        let at = self.aux_base() + 2 * (l * self.state_constraints.len() + s);
        (at, at + 1)
    }

    /// `(y, λ)` indices for the `t`-th input constraint at stage `l`.
    pub fn input_aux(&self, l: usize, t: usize) -> (usize, usize) {
        let at = self.aux_base()
            + 2 * self.horizon * self.state_constraints.len()
            + 2 * (l * self.input_constraints.len() + t);
        (at, at + 1)
    }

    /// Terminal `(y, λ)` indices for the `s`-th state constraint.
    pub fn terminal_aux(&self, s: usize) -> (usize, usize) {
        let at = self.aux_base()
            + 2 * self.horizon * (self.state_constraints.len() + self.input_constraints.len())
            + 2 * s;
        (at, at + 1)
    }

    pub fn num_vars(&self) -> usize {
        let n = self.horizon;
        let ns = self.state_constraints.len();
        let ni = self.input_constraints.len();
        n * self.nu + (n + 1) * self.nx + 2 * ns * n + 2 * ni * n + 2 * ns
    }
}

#[derive(Debug, Clone)]
pub struct ConicProgram<'a> {
    design: &'a OcpDesign,
    pub form: ConicForm,
    pub layout: Layout,
    pub sigmas: Vec<DMatrix<f64>>,
    /// Equivalent DR slab radii, used to verify returned points.
    pub radii: StageRadii,
    pub trace_constant: f64,
}

fn add_block(form: &mut ConicForm, m: &DMatrix<f64>, at: impl Fn(usize) -> usize) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                form.quadratic.push((at(i), at(j), m[(i, j)]));
            }
        }
    }
}

/// Adds `|dᵀz| ≤ y + λ`, `0 ≤ λ ≤ b`, `y ≥ 0` and `‖(y, σ)‖ ≤ √p (b − λ)`.
fn add_soc_constraint(
    form: &mut ConicForm,
    value: &[(usize, f64)],
    (y, lambda): (usize, usize),
    variance: f64,
    bound: f64,
    epsilon: f64,
) {
    let mut plus: Vec<(usize, f64)> = value.to_vec();
    plus.push((y, -1.0));
    plus.push((lambda, -1.0));
    let mut minus: Vec<(usize, f64)> = value.iter().map(|&(j, v)| (j, -v)).collect();
    minus.push((y, -1.0));
    minus.push((lambda, -1.0));
    form.inequalities.push(Row::new(plus, 0.0));
    form.inequalities.push(Row::new(minus, 0.0));
    form.inequalities.push(Row::new(vec![(lambda, -1.0)], 0.0));
    form.inequalities.push(Row::new(vec![(lambda, 1.0)], bound));
    form.inequalities.push(Row::new(vec![(y, -1.0)], 0.0));
    let sp = epsilon.sqrt();
    form.cones.push(vec![
        Row::new(vec![(lambda, sp)], sp * bound),
        Row::new(vec![(y, -1.0)], 0.0),
        Row::new(vec![], variance.max(0.0).sqrt()),
    ]);
}

/// Builds the conic program for nominal initial state `xbar0` and initial
/// error covariance `sigma0`.
///
/// Returns the reason early when some tightened constraint is empty, before
/// any solver call.
pub fn build_program<'a>(
    design: &'a OcpDesign,
    xbar0: &DVector<f64>,
    sigma0: &DMatrix<f64>,
) -> Result<ConicProgram<'a>, Infeasibility> {
    let model = design.model();
    let (nx, nu, n) = (model.nx(), model.nu(), design.horizon());
    assert_eq!(xbar0.len(), nx, "initial state has the wrong length");
    let sigmas = design.covariances(sigma0);
    let radii = design.radii(&sigmas, TighteningMethod::DistributionallyRobust)?;
    let trace_constant = design.trace_constant(&sigmas);
    let k = design.artifacts().k();
    let constraints = design.constraints();
    // stage-0 state rows only see the pinned x̄_0
    for (i, c) in constraints.iter().enumerate() {
        if c.kind().is_state() && c.direction().dot(xbar0).abs() > radii.stages[0][i] {
            return Err(Infeasibility::InitialState { constraint: i });
        }
    }
    let layout = Layout::new(n, nx, nu, constraints);
    let mut form = ConicForm::new(layout.num_vars());

    let q = design.cost().q();
    let r = design.cost().r();
    for l in 0..n {
        add_block(&mut form, q, |i| layout.x(l, i));
        add_block(&mut form, r, |i| layout.u(l, i));
    }
    add_block(&mut form, design.artifacts().s(), |i| layout.x(n, i));

    for i in 0..nx {
        form.equalities.push(Row::new(vec![(layout.x(0, i), 1.0)], xbar0[i]));
    }
    let (a, b) = (model.a(), model.b());
    for l in 0..n {
        for i in 0..nx {
            let mut coeffs = vec![(layout.x(l + 1, i), 1.0)];
            coeffs.extend((0..nx).filter(|&j| a[(i, j)] != 0.0).map(|j| (layout.x(l, j), -a[(i, j)])));
            coeffs.extend((0..nu).filter(|&j| b[(i, j)] != 0.0).map(|j| (layout.u(l, j), -b[(i, j)])));
            form.equalities.push(Row::new(coeffs, 0.0));
        }
    }

    for (l, sigma) in sigmas.iter().enumerate().take(n) {
        for (s, &ci) in layout.state_constraints.iter().enumerate() {
            let c = &constraints[ci];
            let value: Vec<(usize, f64)> =
                (0..nx).map(|j| (layout.x(l, j), c.direction()[j])).collect();
            let variance = c.variance(sigma, k);
            add_soc_constraint(&mut form, &value, layout.state_aux(l, s), variance, c.bound(), c.epsilon());
        }
        for (t, &ci) in layout.input_constraints.iter().enumerate() {
            let c = &constraints[ci];
            let value: Vec<(usize, f64)> =
                (0..nu).map(|j| (layout.u(l, j), c.direction()[j])).collect();
            let variance = c.variance(sigma, k);
            add_soc_constraint(&mut form, &value, layout.input_aux(l, t), variance, c.bound(), c.epsilon());
        }
    }
    let sigma_bar = design.artifacts().sigma_bar();
    for (s, &ci) in layout.state_constraints.iter().enumerate() {
        let c = &constraints[ci];
        let value: Vec<(usize, f64)> = (0..nx).map(|j| (layout.x(n, j), c.direction()[j])).collect();
        let variance = c.variance(sigma_bar, k);
        add_soc_constraint(&mut form, &value, layout.terminal_aux(s), variance, c.bound(), c.epsilon());
    }

    Ok(ConicProgram {
        design,
        form,
        layout,
        sigmas,
        radii,
        trace_constant,
    })
}

impl ConicProgram<'_> {
    pub fn solve(&self) -> OcpSolution {
        let raw = solver::solve(&self.form);
        let status = map_raw_status(&raw.status, &raw.z);
        if status != OcpStatus::Optimal {
            let mut sol = OcpSolution::empty(status);
            sol.iterations = raw.iterations;
            return sol;
        }
        let lay = &self.layout;
        let x = &raw.x;
        let states = (0..=lay.horizon)
            .map(|l| DVector::from_fn(lay.nx, |i, _| x[lay.x(l, i)]))
            .collect();
        let inputs = (0..lay.horizon)
            .map(|l| DVector::from_fn(lay.nu, |i, _| x[lay.u(l, i)]))
            .collect();
        let mut sol = finish_solution(
            self.design,
            &raw,
            self.form.max_violation(x),
            &self.radii,
            states,
            inputs,
            self.trace_constant,
        );
        if sol.is_optimal() {
            let ncons = self.design.constraints().len();
            sol.stage_auxiliaries = (0..lay.horizon)
                .map(|l| {
                    let mut row = vec![(0.0, 0.0); ncons];
                    for (s, &ci) in lay.state_constraints.iter().enumerate() {
                        let (y, lam) = lay.state_aux(l, s);
                        row[ci] = (x[y], x[lam]);
                    }
                    for (t, &ci) in lay.input_constraints.iter().enumerate() {
                        let (y, lam) = lay.input_aux(l, t);
                        row[ci] = (x[y], x[lam]);
                    }
                    row
                })
                .collect();
            sol.terminal_auxiliaries = (0..lay.state_constraints.len())
                .map(|s| {
                    let (y, lam) = lay.terminal_aux(s);
                    (x[y], x[lam])
                })
                .collect();
        }
        sol
    }
}
