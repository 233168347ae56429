use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Scenario;
use crate::controller::{Controller, ControllerError, Strategy};
use crate::drcc::{ConstraintKind, TighteningMethod};
use crate::linalg::quad_form;
use crate::ocp::OcpDesign;

/// Per-step slack on the cost-decrease inequality.
pub const COST_DECREASE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// Measured state `x_k`.
    pub state: DVector<f64>,
    /// Applied input `u_k`.
    pub input: DVector<f64>,
    /// Nominal state `x̄_k` of the chosen problem.
    pub nominal: DVector<f64>,
    pub nominal_input: DVector<f64>,
    pub strategy: Strategy,
    /// Optimal cost of the chosen problem.
    pub cost: f64,
    pub cost_s1: Option<f64>,
    pub cost_s2: Option<f64>,
    /// `x̄ᵀQx̄ + ūᵀRū + tr((Q+KᵀRK)Σ_{0|k})` for the chosen problem.
    pub nominal_stage_cost: f64,
    /// `x_kᵀQx_k + u_kᵀRu_k`
    pub stage_cost: f64,
    /// One flag per constraint: state rows test `x_k`, input rows `u_k`,
    /// nominal-input rows `ū_k`. Violation is strict.
    pub violated: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "termination", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    InitialInfeasible,
    BothInfeasible { step: usize },
    SolverFailure { step: usize },
}

impl Termination {
    pub fn label(&self) -> String {
        match self {
            Termination::Completed => "completed".into(),
            Termination::InitialInfeasible => "initial_infeasible".into(),
            Termination::BothInfeasible { step } => format!("both_infeasible@{step}"),
            Termination::SolverFailure { step } => format!("solver_failure@{step}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub method: TighteningMethod,
    pub steps: Vec<StepRecord>,
    /// State after the last applied input.
    pub final_state: DVector<f64>,
    pub termination: Termination,
}

impl RunRecord {
    pub fn any_state_violation(&self, design: &OcpDesign, k: usize) -> bool {
        design
            .constraints()
            .iter()
            .zip(&self.steps[k].violated)
            .any(|(c, &v)| v && c.kind() == ConstraintKind::State)
    }

    /// Steps `k` (with `k + 1` recorded) where Strategy 2 was chosen at `k + 1`
    /// and the cost-decrease inequality fails, with the excess.
    pub fn cost_decrease_violations(&self, trace_sw: f64) -> Vec<(usize, f64)> {
        self.steps
            .windows(2)
            .filter(|w| w[1].strategy == Strategy::S2)
            .filter_map(|w| {
                let lhs = w[1].cost - w[0].cost;
                let rhs = -w[0].nominal_stage_cost + trace_sw + COST_DECREASE_SLACK;
                (lhs > rhs).then_some((w[0].k, lhs - rhs))
            })
            .collect()
    }

    pub fn strategy2_chained_steps(&self) -> usize {
        self.steps
            .windows(2)
            .filter(|w| w[1].strategy == Strategy::S2)
            .count()
    }
}

/// `tr(S W)`
pub fn trace_sw(design: &OcpDesign) -> f64 {
    (design.artifacts().s() * design.model().w()).trace()
}

/// One closed-loop trajectory. The plant sees sampled noise; the controller
/// only uses its covariance.
pub fn simulate_run(
    scenario: &Scenario,
    design: &OcpDesign,
    method: TighteningMethod,
    seed: u64,
    steps: usize,
) -> RunRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctl = Controller::new(design, method);
    let model = design.model();
    let q = design.cost().q();
    let r = design.cost().r();
    let weight = design.stage_weight();
    let mut x = scenario.x0.clone();
    let mut record = RunRecord {
        seed,
        method,
        steps: Vec::with_capacity(steps),
        final_state: x.clone(),
        termination: Termination::Completed,
    };
    let mut state = match ctl.init(&x) {
        Ok(s) => s,
        Err(_) => {
            record.termination = Termination::InitialInfeasible;
            return record;
        }
    };
    for k in 0..steps {
        let (out, next) = match ctl.step(&state, &x) {
            Ok(v) => v,
            Err(e) => {
                record.termination = match e {
                    _ if e.is_solver_failure() => Termination::SolverFailure { step: k },
                    ControllerError::InitialInfeasible(_) => Termination::InitialInfeasible,
                    ControllerError::BothInfeasible { step, .. } => {
                        Termination::BothInfeasible { step }
                    }
                };
                break;
            }
        };
        let violated = design
            .constraints()
            .iter()
            .map(|c| match c.kind() {
                ConstraintKind::State => c.violated_by(&x),
                ConstraintKind::Input => c.violated_by(&out.input),
                ConstraintKind::NominalInput => c.violated_by(&out.nominal_input),
            })
            .collect();
        let nominal_stage_cost = quad_form(q, &out.nominal)
            + quad_form(r, &out.nominal_input)
            + (weight * &out.sigma0).trace();
        let w = scenario.noise.sample(&mut rng);
        let x_next = model.nominal_step(&x, &out.input) + model.e() * w;
        record.steps.push(StepRecord {
            k,
            stage_cost: quad_form(q, &x) + quad_form(r, &out.input),
            state: x,
            input: out.input,
            nominal: out.nominal,
            nominal_input: out.nominal_input,
            strategy: out.strategy,
            cost: out.cost,
            cost_s1: out.cost_s1,
            cost_s2: out.cost_s2,
            nominal_stage_cost,
            violated,
        });
        x = x_next;
        state = next;
    }
    record.final_state = x;
    record
}

/// Per-step violation counts across runs. Runs that stop early contribute
/// nothing to later steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationStats {
    pub runs: usize,
    pub steps: usize,
    /// `per_constraint[i][k]`: runs violating constraint `i` at step `k`.
    pub per_constraint: Vec<Vec<usize>>,
    /// Runs violating any state constraint at step `k`.
    pub any_state: Vec<usize>,
    /// Runs still active at step `k`.
    pub active: Vec<usize>,
    pub max_count: usize,
    pub empirical_rate: f64,
}

impl ViolationStats {
    pub fn from_records(design: &OcpDesign, records: &[RunRecord], steps: usize) -> Self {
        let nc = design.constraints().len();
        let mut per_constraint = vec![vec![0usize; steps]; nc];
        let mut any_state = vec![0usize; steps];
        let mut active = vec![0usize; steps];
        for rec in records {
            for (k, st) in rec.steps.iter().enumerate().take(steps) {
                active[k] += 1;
                for (i, &v) in st.violated.iter().enumerate() {
                    per_constraint[i][k] += v as usize;
                }
                any_state[k] += rec.any_state_violation(design, k) as usize;
            }
        }
        let max_count = any_state.iter().copied().max().unwrap_or(0);
        let runs = records.len();
        Self {
            runs,
            steps,
            per_constraint,
            any_state,
            active,
            max_count,
            empirical_rate: if runs == 0 { 0.0 } else { max_count as f64 / runs as f64 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub records: Vec<RunRecord>,
    pub stats: ViolationStats,
    /// Mean stage cost `x_kᵀQx_k + u_kᵀRu_k` over runs active at step `k`.
    pub mean_stage_cost: Vec<f64>,
    pub trace_sw: f64,
}

impl MonteCarloResult {
    pub fn count(&self, t: impl Fn(&Termination) -> bool) -> usize {
        self.records.iter().filter(|r| t(&r.termination)).count()
    }

    /// Average over completed runs of each run's mean stage cost over its
    /// final `window` steps. `None` when no run completed.
    pub fn tail_average_cost(&self, window: usize) -> Option<f64> {
        let tails: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.termination == Termination::Completed && r.steps.len() >= window)
            .map(|r| {
                let tail = &r.steps[r.steps.len() - window..];
                tail.iter().map(|s| s.stage_cost).sum::<f64>() / window as f64
            })
            .collect();
        (!tails.is_empty()).then(|| tails.iter().sum::<f64>() / tails.len() as f64)
    }

    /// Mean terminal stage cost over completed runs.
    pub fn mean_terminal_cost(&self) -> Option<f64> {
        self.tail_average_cost(1)
    }
}

/// Runs `runs` trajectories with seeds `base_seed + i` on `jobs` threads
/// (0 means rayon's default). Results are identical for any `jobs`.
pub fn monte_carlo(
    scenario: &Scenario,
    design: &OcpDesign,
    method: TighteningMethod,
    runs: usize,
    base_seed: u64,
    steps: usize,
    jobs: usize,
) -> MonteCarloResult {
    let work = || {
        (0..runs)
            .into_par_iter()
            .map(|i| simulate_run(scenario, design, method, base_seed.wrapping_add(i as u64), steps))
            .collect::<Vec<_>>()
    };
    let records = if jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool")
            .install(work)
    };
    let stats = ViolationStats::from_records(design, &records, steps);
    let mean_stage_cost = (0..steps)
        .map(|k| {
            let (sum, n) = records
                .iter()
                .filter_map(|r| r.steps.get(k))
                .fold((0.0, 0usize), |(s, n), st| (s + st.stage_cost, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect();
    MonteCarloResult {
        records,
        stats,
        mean_stage_cost,
        trace_sw: trace_sw(design),
    }
}

/// Recomputes `Σ_{0|k}` along a sequence of chosen strategies.
pub fn replay_sigma0(design: &OcpDesign, strategies: &[Strategy]) -> Vec<DMatrix<f64>> {
    let nx = design.model().nx();
    let acl = design.acl();
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(strategies.len());
    for (k, s) in strategies.iter().enumerate() {
        let sigma = match s {
            Strategy::S1 => DMatrix::zeros(nx, nx),
            Strategy::S2 => {
                let prev = &out[k - 1];
                crate::linalg::symmetrize(&(acl * prev * acl.transpose() + design.model().w()))
            }
        };
        out.push(sigma);
    }
    out
}
