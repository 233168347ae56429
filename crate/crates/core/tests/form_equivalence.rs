mod common;

use common::{random_design, random_state, rel_diff};
use drsmpc::drcc::TighteningMethod;
use drsmpc::ocp::{build_condensed, build_program, OcpSolution, OcpStatus};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn category(s: &OcpStatus) -> &'static str {
    match s {
        OcpStatus::Optimal => "optimal",
        OcpStatus::Infeasible(_) => "infeasible",
        OcpStatus::SolverError(_) => "error",
    }
}

#[test]
fn conic_and_condensed_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut checked, mut optimal) = (0, 0);
    while checked < 60 {
        let Some(design) = random_design(&mut rng) else { continue };
        let nx = design.model().nx();
        let x0 = random_state(&mut rng, nx, 2.0);
        let sigma0 = if rng.gen_bool(0.5) { DMatrix::zeros(nx, nx) } else { design.model().w().clone() };
        // a build error is an infeasibility detected before the solver runs
        let conic = build_program(&design, &x0, &sigma0)
            .map(|p| p.solve())
            .unwrap_or_else(OcpSolution::infeasible);
        let condensed = build_condensed(&design, &x0, &sigma0, TighteningMethod::DistributionallyRobust)
            .map(|p| p.solve())
            .unwrap_or_else(OcpSolution::infeasible);
        assert_eq!(category(&conic.status), category(&condensed.status), "instance {checked}");
        if conic.is_optimal() {
            optimal += 1;
            assert!(rel_diff(conic.cost, condensed.cost) <= 1e-5, "{} vs {}", conic.cost, condensed.cost);
            // auxiliaries reproduce the slab test
            assert_eq!(conic.stage_auxiliaries.len(), design.horizon());
        }
        checked += 1;
    }
    assert!(optimal >= 20, "only {optimal} optimal instances");
}
