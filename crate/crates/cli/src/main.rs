use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use drsmpc::drcc::{certify_terminal, Certificate, TerminalSet, TighteningMethod};
use drsmpc::ocp::{Infeasibility, OcpStatus};
use drsmpc::sim::{self, output, GridAxis, Scenario, Termination};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "drsmpc", version, about = "Distributionally robust stochastic MPC toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file, or a built-in name (buck_boost, two_mass_spring).
    #[arg(long)]
    scenario: String,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize K, S, the steady covariance and radii, and check the terminal set.
    Certify {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value = "dr")]
        method: TighteningMethod,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one optimal control problem from a nominal initial state.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Comma-separated initial state; the scenario's x0 when omitted.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long, default_value = "dr")]
        method: TighteningMethod,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop Monte Carlo simulation.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value = "dr")]
        method: TighteningMethod,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Steps per run; the scenario's value when omitted.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid scan of feasible initial nominal states over two state coordinates.
    FeasibleSet {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// dr, gauss, cantelli or all.
        #[arg(long, default_value = "all")]
        method: String,
        /// "x1min:x1max:step,x2min:x2max:step"
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// State coordinates spanned by the grid.
        #[arg(long, default_value = "0,1")]
        dims: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_scenario(arg: &ScenarioArg) -> Result<Scenario> {
    let path = Path::new(&arg.scenario);
    if path.exists() {
        return Scenario::load(path).with_context(|| format!("loading {}", path.display()));
    }
    sim::builtin(&arg.scenario).ok_or_else(|| {
        anyhow!(
            "`{}` is neither a file nor a built-in scenario ({})",
            arg.scenario,
            sim::BUILTIN_NAMES.join(", ")
        )
    })
}

fn parse_vector(s: &str) -> Result<DVector<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad vector `{s}`"))?;
    Ok(DVector::from_vec(v))
}

fn mat(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn emit(out: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn certify(scenario: &Scenario, method: TighteningMethod, out: Option<&Path>) -> Result<u8> {
    let design = scenario.design()?;
    let art = design.artifacts();
    let nx = design.model().nx();
    let mut report = json!({
        "scenario": scenario.name,
        "method": method.name(),
        "k": mat(art.k()),
        "s": mat(art.s()),
        "sigma_bar": mat(art.sigma_bar()),
        "spectral_radius": art.spectral_radius(),
        "trace_sw": sim::trace_sw(&design),
    });
    if let Some(sref) = &scenario.s_reference {
        report["s_reference_max_abs_diff"] = json!((art.s() - sref).amax());
    }
    let mut code = 0;
    let sigmas = design.covariances(&DMatrix::zeros(nx, nx));
    match design.radii(&sigmas, method) {
        Ok(r) => {
            report["stage_radii"] = json!(r.stages);
            report["terminal_radii"] = json!(r.terminal);
        }
        Err(e) => {
            eprintln!("{e}");
            report["stage_radii_error"] = json!(e.to_string());
            code = EXIT_INFEASIBLE;
        }
    }
    match TerminalSet::new(design.constraints(), art.k(), art.sigma_bar(), method) {
        Ok(ts) => {
            let cert = certify_terminal(design.acl(), art.k(), design.constraints(), &ts, method);
            for (what, c) in [("invariance", cert.invariant), ("input admissibility", cert.input_admissible)] {
                match c {
                    Certificate::Unbounded => eprintln!(
                        "warning: {what} is inconclusive, the terminal set is unbounded along a tested direction"
                    ),
                    Certificate::Fails => {
                        eprintln!("{what} certificate fails");
                        code = EXIT_INFEASIBLE;
                    }
                    Certificate::Holds => {}
                }
            }
            report["certificate"] = serde_json::to_value(&cert)?;
        }
        Err(e) => {
            eprintln!("{e}");
            report["terminal_error"] = json!(e.to_string());
            code = EXIT_INFEASIBLE;
        }
    }
    emit(out, &report)?;
    Ok(code)
}

fn describe(why: &Infeasibility) -> String {
    match why {
        Infeasibility::StageRadius { constraint, stage } => {
            format!("constraint {constraint} has an empty tightened set at stage {stage}")
        }
        Infeasibility::TerminalRadius { constraint } => {
            format!("terminal slab of constraint {constraint} is empty")
        }
        Infeasibility::InitialState { constraint } => {
            format!("initial state violates constraint {constraint}")
        }
        Infeasibility::Certificate(_) => "solver certificate of primal infeasibility".into(),
    }
}

fn solve(
    scenario: &Scenario,
    x0: Option<&str>,
    method: TighteningMethod,
    out: Option<&Path>,
) -> Result<u8> {
    let design = scenario.design()?;
    let x0 = match x0 {
        Some(s) => parse_vector(s)?,
        None => scenario.x0.clone(),
    };
    let nx = design.model().nx();
    if x0.len() != nx {
        bail!("x0 has length {}, expected {nx}", x0.len());
    }
    let sol = design.solve(&x0, &DMatrix::zeros(nx, nx), method);
    let (status, code) = match &sol.status {
        OcpStatus::Optimal => ("optimal".to_string(), 0),
        OcpStatus::Infeasible(why) => (format!("infeasible: {}", describe(why)), EXIT_INFEASIBLE),
        OcpStatus::SolverError(msg) => (format!("solver error: {msg}"), EXIT_SOLVER),
    };
    let mut report = json!({
        "scenario": scenario.name,
        "method": method.name(),
        "x0": vec_json(&x0),
        "status": status,
    });
    if sol.is_optimal() {
        report["cost"] = json!(sol.cost);
        report["trace_constant"] = json!(sol.trace_constant);
        report["nominal_states"] = json!(sol.nominal_states.iter().map(vec_json).collect::<Vec<_>>());
        report["nominal_inputs"] = json!(sol.nominal_inputs.iter().map(vec_json).collect::<Vec<_>>());
    }
    emit(out, &report)?;
    Ok(code)
}

fn simulate(
    scenario: &Scenario,
    method: TighteningMethod,
    runs: usize,
    steps: Option<usize>,
    seed: u64,
    jobs: usize,
    out: &Path,
) -> Result<u8> {
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let design = scenario.design()?;
    let steps = steps.unwrap_or(scenario.steps);
    let mc = sim::monte_carlo(scenario, &design, method, runs, seed, steps, jobs);
    output::write_monte_carlo(out, &mc).with_context(|| format!("writing {}", out.display()))?;
    let failed = mc.count(|t| matches!(t, Termination::SolverFailure { .. }));
    let never_started = mc.count(|t| *t == Termination::InitialInfeasible);
    let both = mc.count(|t| matches!(t, Termination::BothInfeasible { .. }));
    if both > 0 {
        eprintln!("warning: {both} run(s) stopped with both strategies infeasible");
    }
    Ok(if failed > 0 {
        EXIT_SOLVER
    } else if never_started == runs {
        eprintln!("the problem at the initial state is infeasible");
        EXIT_INFEASIBLE
    } else {
        0
    })
}

fn feasible_set(scenario: &Scenario, method: &str, grid: &str, dims: &str, out: &Path) -> Result<u8> {
    let design = scenario.design()?;
    let methods: Vec<TighteningMethod> = if method == "all" {
        TighteningMethod::ALL.to_vec()
    } else {
        vec![method.parse().map_err(|e| anyhow!("{e}"))?]
    };
    let (gx, gy) = grid
        .split_once(',')
        .ok_or_else(|| anyhow!("--grid needs two comma-separated axes"))?;
    let (ax, ay): (GridAxis, GridAxis) = (gx.parse()?, gy.parse()?);
    let d: Vec<usize> = dims
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .context("bad --dims")?;
    let nx = design.model().nx();
    let [d0, d1] = d[..] else {
        bail!("--dims needs two coordinates");
    };
    if d0 >= nx || d1 >= nx || d0 == d1 {
        bail!("--dims must name two distinct state coordinates below {nx}");
    }
    std::fs::create_dir_all(out)?;
    let mut csv = String::new();
    let mut areas = String::new();
    for m in methods {
        let scan = sim::feasible_set_scan(&design, m, (d0, d1), &scenario.x0, ax, ay);
        let text = output::feasible_csv(&scan);
        if csv.is_empty() {
            csv.push_str(&text);
        } else {
            csv.extend(text.lines().skip(1).map(|l| format!("{l}\n")));
        }
        areas.push_str(&format!("{} {:.16e}\n", m.name(), scan.area()));
    }
    std::fs::write(out.join("feasible.csv"), csv)?;
    std::fs::write(out.join("areas.txt"), areas)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Certify { scenario, method, out } => {
            certify(&load_scenario(&scenario)?, method, out.as_deref())
        }
        Command::Solve { scenario, x0, method, out } => {
            solve(&load_scenario(&scenario)?, x0.as_deref(), method, out.as_deref())
        }
        Command::Simulate { scenario, method, runs, steps, seed, jobs, out } => {
            simulate(&load_scenario(&scenario)?, method, runs, steps, seed, jobs, &out)
        }
        Command::FeasibleSet { scenario, method, grid, dims, out } => {
            feasible_set(&load_scenario(&scenario)?, &method, &grid, &dims, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
