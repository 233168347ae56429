//! CSV and text writers. Floats use `{:.16e}` so reruns compare byte for byte.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::feasible::FeasibleScan;
use super::run::MonteCarloResult;

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(f).collect::<Vec<_>>().join(",")
}

/// One line per recorded step of every run.
pub fn runs_csv(mc: &MonteCarloResult) -> String {
    let mut out = String::new();
    let Some(first) = mc.records.iter().find_map(|r| r.steps.first()) else {
        out.push_str("seed,method,k,termination\n");
        for r in &mc.records {
            let _ = writeln!(out, "{},{},,{}", r.seed, r.method.name(), r.termination.label());
        }
        return out;
    };
    let (nx, nu, nc) = (first.state.len(), first.input.len(), first.violated.len());
    let mut header = vec!["seed".to_string(), "method".into(), "k".into(), "strategy".into()];
    header.extend((0..nx).map(|i| format!("x{i}")));
    header.extend((0..nu).map(|i| format!("u{i}")));
    header.extend((0..nx).map(|i| format!("xbar{i}")));
    header.extend((0..nu).map(|i| format!("ubar{i}")));
    header.extend(["cost".into(), "cost_s1".into(), "cost_s2".into(), "stage_cost".into()]);
    header.extend((0..nc).map(|i| format!("viol{i}")));
    header.push("termination".into());
    out.push_str(&header.join(","));
    out.push('\n');
    let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
    for r in &mc.records {
        if r.steps.is_empty() {
            let _ = writeln!(out, "{},{},,,{}", r.seed, r.method.name(), r.termination.label());
        }
        for s in &r.steps {
            let viol: Vec<&str> = s.violated.iter().map(|&v| if v { "1" } else { "0" }).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.method.name(),
                s.k,
                s.strategy.label(),
                join(s.state.iter().copied()),
                join(s.input.iter().copied()),
                join(s.nominal.iter().copied()),
                join(s.nominal_input.iter().copied()),
                f(s.cost),
                opt(s.cost_s1),
                opt(s.cost_s2),
                f(s.stage_cost),
                viol.join(","),
                r.termination.label(),
            );
        }
    }
    out
}

/// Per-step violation counts and mean stage cost.
pub fn stats_csv(mc: &MonteCarloResult) -> String {
    let st = &mc.stats;
    let mut out = String::from("k,active,any_state");
    for i in 0..st.per_constraint.len() {
        let _ = write!(out, ",c{i}");
    }
    out.push_str(",mean_stage_cost\n");
    for k in 0..st.steps {
        let _ = write!(out, "{},{},{}", k, st.active[k], st.any_state[k]);
        for row in &st.per_constraint {
            let _ = write!(out, ",{}", row[k]);
        }
        let _ = writeln!(out, ",{}", f(mc.mean_stage_cost[k]));
    }
    out
}

pub fn summary_txt(mc: &MonteCarloResult) -> String {
    let st = &mc.stats;
    let completed = mc.count(|t| *t == super::Termination::Completed);
    let mut out = String::new();
    let _ = writeln!(out, "runs = {}", st.runs);
    let _ = writeln!(out, "completed = {completed}");
    let _ = writeln!(out, "max_count = {}", st.max_count);
    let _ = writeln!(out, "empirical_rate = {}", f(st.empirical_rate));
    let opt = |v: Option<f64>| v.map(f).unwrap_or_else(|| "nan".into());
    let _ = writeln!(out, "mean_terminal_cost = {}", opt(mc.mean_terminal_cost()));
    let _ = writeln!(out, "mean_cost_last20 = {}", opt(mc.tail_average_cost(20)));
    let _ = writeln!(out, "trace_sw = {}", f(mc.trace_sw));
    out
}

pub fn feasible_csv(scan: &FeasibleScan) -> String {
    let mut out = String::from("method,x,y,feasible\n");
    for &(x, y, ok) in &scan.points {
        let _ = writeln!(out, "{},{},{},{}", scan.method.name(), f(x), f(y), ok as u8);
    }
    out
}

/// Writes `runs.csv`, `stats.csv` and `summary.txt` into `dir`.
pub fn write_monte_carlo(dir: &Path, mc: &MonteCarloResult) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("runs.csv"), runs_csv(mc))?;
    std::fs::write(dir.join("stats.csv"), stats_csv(mc))?;
    std::fs::write(dir.join("summary.txt"), summary_txt(mc))
}
