use std::path::Path;

use drsmpc::controller::Strategy;
use drsmpc::drcc::{certify_terminal, TerminalSet, TighteningMethod};
use drsmpc::linalg::{loewner_leq, min_symmetric_eigenvalue};
use drsmpc::ocp::{Infeasibility, OcpStatus};
use drsmpc::sim::run::replay_sigma0;
use drsmpc::sim::{
    builtin, feasible_set_scan, monte_carlo, simulate_run, GridAxis, NoiseFamily, NoiseSpec,
    Scenario, Termination,
};
use nalgebra::{dvector, DMatrix};

const DR: TighteningMethod = TighteningMethod::DistributionallyRobust;

fn scenario_file(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    Scenario::load(&path).unwrap()
}

/// `Σ_j Acl^j W (Aclᵀ)^j`
fn covariance_series(acl: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut term = w.clone();
    let mut sum = w.clone();
    for _ in 0..5000 {
        term = acl * &term * acl.transpose();
        sum += &term;
    }
    sum
}

// Stable diagonal plant with K = 0: terminal box invariant, feedback admissible.
fn contractive(family: NoiseFamily) -> Scenario {
    let text = format!(
        r#"
schema = 1
name = "contractive"
[model]
a = [[0.5, 0.0], [0.0, 0.6]]
b = [[1.0], [0.3]]
[noise]
family = "{}"
covariance = [[0.01, 0.0], [0.0, 0.01]]
[cost]
q = [[1.0, 0.0], [0.0, 1.0]]
r = [[1.0]]
horizon = 5
[[constraints]]
kind = "state"
direction = [1.0, 0.0]
bound = 0.5
epsilon = 0.2
[[constraints]]
kind = "state"
direction = [0.0, 1.0]
bound = 0.5
epsilon = 0.2
[[constraints]]
kind = "nominal_input"
direction = [1.0]
bound = 1.0
epsilon = 0.01
[simulation]
steps = 30
x0 = [0.4, -0.4]
[overrides]
k = [[0.0, 0.0]]
"#,
        if family == NoiseFamily::Gaussian { "gaussian" } else { "laplace" }
    );
    Scenario::from_toml_str(&text).unwrap()
}

#[test]
fn scenario_files_match_builtins() {
    for name in ["buck_boost", "two_mass_spring"] {
        let (f, b) = (scenario_file(name), builtin(name).unwrap());
        assert_eq!(f.name, b.name);
        assert!((f.model.a() - b.model.a()).amax() < 1e-15, "{name}");
        assert_eq!(f.model.b(), b.model.b());
        assert_eq!(f.model.e(), b.model.e());
        assert_eq!(f.noise, b.noise);
        assert_eq!(f.cost, b.cost);
        assert_eq!(f.constraints, b.constraints);
        assert_eq!((f.steps, &f.x0), (b.steps, &b.x0));
        assert_eq!(f.k_override, b.k_override);
        assert_eq!(f.s_reference, b.s_reference);
    }
}

#[test]
fn buck_boost_steady_covariance() {
    let sc = builtin("buck_boost").unwrap();
    let d = sc.design().unwrap();
    let oracle = covariance_series(d.acl(), d.model().w());
    assert!((d.artifacts().sigma_bar() - &oracle).amax() < 1e-12);
    // published gain is stabilizing: eigenvalues of A + BK are real, inside the disc
    assert!(d.artifacts().spectral_radius() < 0.7);
}

#[test]
fn chance_constrained_input_is_infeasible_from_stage_one() {
    let sc = scenario_file("buck_boost_input_chance");
    let d = sc.design().unwrap();
    let k = d.artifacts().k();
    let kwk = (k * d.model().w() * k.transpose())[(0, 0)];
    // stage-1 input variance against the largest feasible variance ε b²
    assert!(kwk > 0.01 * 0.2 * 0.2, "{kwk}");
    for x0 in [dvector![0.0, 0.0], dvector![1.0, 2.0]] {
        let sol = d.solve(&x0, &DMatrix::zeros(2, 2), DR);
        assert_eq!(
            sol.status,
            OcpStatus::Infeasible(Infeasibility::StageRadius { constraint: 2, stage: 1 })
        );
    }
}

#[test]
fn two_mass_spring_velocity_variance_exceeds_dr_limit() {
    let sc = builtin("two_mass_spring").unwrap();
    let d = sc.design().unwrap();
    let w = d.model().w();
    // stage-1 velocity variance is Ts² · 0.07
    assert!((w[(2, 2)] - 7e-4).abs() < 1e-15 && (w[(3, 3)] - 7e-4).abs() < 1e-15);
    let dr_limit = 0.2 * 0.12 * 0.12;
    assert!(w[(3, 3)] <= dr_limit);
    let bar = covariance_series(d.acl(), w);
    assert!((d.artifacts().sigma_bar() - &bar).amax() < 1e-10);
    assert!(bar[(3, 3)] > dr_limit, "{}", bar[(3, 3)]);
    assert!(TerminalSet::new(d.constraints(), d.artifacts().k(), d.artifacts().sigma_bar(), DR).is_err());
    let sol = d.solve(&sc.x0, &DMatrix::zeros(4, 4), DR);
    assert!(matches!(sol.status, OcpStatus::Infeasible(Infeasibility::StageRadius { .. })));
    // the Gaussian baseline keeps a nonempty terminal set
    let gauss = d.solve(&sc.x0, &DMatrix::zeros(4, 4), TighteningMethod::Gaussian);
    assert!(gauss.is_optimal());
}

#[test]
fn two_mass_spring_gaussian_baseline_violates() {
    let sc = builtin("two_mass_spring").unwrap();
    let d = sc.design().unwrap();
    let mc = monte_carlo(&sc, &d, TighteningMethod::Gaussian, 40, 100, sc.steps, 0);
    assert!(mc.stats.max_count > 0);
    assert!(mc.stats.per_constraint.iter().flatten().all(|&c| c <= 40));
    assert_eq!(mc.stats.max_count, *mc.stats.any_state.iter().max().unwrap());
}

#[test]
fn buck_boost_terminal_box_is_not_invariant() {
    let sc = builtin("buck_boost").unwrap();
    let d = sc.design().unwrap();
    let ts = TerminalSet::new(d.constraints(), d.artifacts().k(), d.artifacts().sigma_bar(), DR).unwrap();
    let cert = certify_terminal(d.acl(), d.artifacts().k(), d.constraints(), &ts, DR);
    // vertex enumeration of the box: the max of a linear functional sits at a corner
    let r: Vec<f64> = ts.slabs.iter().map(|s| s.2).collect();
    let corners = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
    let first_row = corners
        .iter()
        .map(|&(s0, s1)| (d.acl().row(0) * dvector![s0 * r[0], s1 * r[1]])[0].abs())
        .fold(0.0, f64::max);
    assert!((cert.invariance_rows[0].max_value.unwrap() - first_row).abs() < 1e-6);
    assert!(first_row > r[0]);
    assert!(!cert.holds());
}

#[test]
fn contractive_loop_keeps_all_guarantees() {
    for family in [NoiseFamily::Gaussian, NoiseFamily::Laplace] {
        let sc = contractive(family);
        let d = sc.design().unwrap();
        let ts = TerminalSet::new(d.constraints(), d.artifacts().k(), d.artifacts().sigma_bar(), DR).unwrap();
        assert!(certify_terminal(d.acl(), d.artifacts().k(), d.constraints(), &ts, DR).holds());
        let runs = 200;
        let mc = monte_carlo(&sc, &d, DR, runs, 7, sc.steps, 0);
        let trace_sw = mc.trace_sw;
        let mut chained = 0;
        for rec in &mc.records {
            assert_eq!(rec.termination, Termination::Completed);
            assert!(rec.cost_decrease_violations(trace_sw).is_empty());
            chained += rec.strategy2_chained_steps();
            for w in rec.steps.windows(2) {
                if w[0].cost_s2.is_some() {
                    assert!(w[1].cost_s2.is_some(), "strategy 2 lost feasibility at {}", w[1].k);
                }
            }
            let strategies: Vec<Strategy> = rec.steps.iter().map(|s| s.strategy).collect();
            for (sig, st) in replay_sigma0(&d, &strategies).iter().zip(&rec.steps) {
                assert!(min_symmetric_eigenvalue(sig) >= -1e-12);
                assert!(loewner_leq(sig, d.artifacts().sigma_bar(), 1e-9));
                let fb = d.artifacts().k() * (&st.state - &st.nominal);
                assert_eq!(&st.input - &st.nominal_input, fb);
            }
        }
        assert!(chained > 0);
        // distribution-free guarantee, 3σ binomial slack
        let slack = 3.0 * (0.2f64 * 0.8 / runs as f64).sqrt();
        for k in 0..sc.steps {
            let rate = mc.stats.any_state[k] as f64 / runs as f64;
            assert!(rate <= 0.2 + slack, "{family:?} step {k}: {rate}");
        }
    }
}

#[test]
fn noise_free_origin_stays_at_origin() {
    let mut sc = builtin("buck_boost").unwrap();
    sc.noise = NoiseSpec::new(NoiseFamily::Gaussian, DMatrix::zeros(2, 2)).unwrap();
    sc.x0 = dvector![0.0, 0.0];
    let d = sc.design().unwrap();
    let rec = simulate_run(&sc, &d, DR, 1, 10);
    assert_eq!(rec.termination, Termination::Completed);
    for st in &rec.steps {
        assert!(st.state.amax() < 1e-9 && st.input.amax() < 1e-9);
    }
}

#[test]
fn monte_carlo_is_order_independent() {
    let sc = builtin("buck_boost").unwrap();
    let d = sc.design().unwrap();
    let single = simulate_run(&sc, &d, DR, 42, 8);
    let one = monte_carlo(&sc, &d, DR, 1, 42, 8, 1);
    assert_eq!(one.records[0], single);
    let a = monte_carlo(&sc, &d, DR, 6, 3, 8, 1);
    let b = monte_carlo(&sc, &d, DR, 6, 3, 8, 4);
    assert_eq!(a.records, b.records);
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.records[2].seed, 5);
}

#[test]
fn feasible_area_grows_with_epsilon() {
    let tight = builtin("buck_boost").unwrap();
    let mut loose = tight.clone();
    for c in loose.constraints.iter_mut().take(2) {
        *c = drsmpc::drcc::TwoSidedConstraint::state(c.direction().clone(), c.bound(), 0.35).unwrap();
    }
    let ax = GridAxis::new(-2.5, 2.5, 0.25).unwrap();
    let ay = GridAxis::new(-3.5, 3.5, 0.25).unwrap();
    let base = dvector![0.0, 0.0];
    let st = feasible_set_scan(&tight.design().unwrap(), DR, (0, 1), &base, ax, ay);
    let sl = feasible_set_scan(&loose.design().unwrap(), DR, (0, 1), &base, ax, ay);
    assert!(sl.area() >= st.area());
    for (p, q) in st.points.iter().zip(&sl.points) {
        assert!(!p.2 || q.2, "point ({}, {}) lost", p.0, p.1);
    }
}

#[test]
fn baselines_coincide_without_noise() {
    let mut sc = builtin("buck_boost").unwrap();
    sc.model = drsmpc::linalg::SystemModel::new(
        sc.model.a().clone(),
        sc.model.b().clone(),
        sc.model.e().clone(),
        DMatrix::zeros(2, 2),
    )
    .unwrap();
    let d = sc.design().unwrap();
    let runs: Vec<_> = TighteningMethod::ALL
        .iter()
        .map(|&m| simulate_run(&sc, &d, m, 0, 6))
        .collect();
    for r in &runs[1..] {
        for (a, b) in r.steps.iter().zip(&runs[0].steps) {
            assert!((&a.input - &b.input).amax() < 1e-5);
        }
    }
}

#[test]
fn covariance_shift_is_consistent() {
    let d = builtin("two_mass_spring").unwrap().design().unwrap();
    let n = d.horizon();
    let at_k = d.covariances(&DMatrix::zeros(4, 4));
    // Strategy 2 at k + 1 starts from Σ_{1|k}
    let at_next = d.covariances(&at_k[1]);
    for l in 0..n {
        assert!((&at_next[l] - &at_k[l + 1]).amax() < 1e-15, "stage {l}");
    }
    assert!(at_k.iter().all(|s| loewner_leq(s, d.artifacts().sigma_bar(), 1e-12)));
}
