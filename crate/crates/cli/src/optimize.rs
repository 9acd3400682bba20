use std::fmt::Write as _;
use std::path::Path;

use llso_core::model::turnover;
use llso_core::stats::{describe, Describe};
use llso_core::swarm::run;
use llso_core::{ConstraintSpec, MarketModel, RunResult, SwarmConfig};
use rayon::prelude::*;

use crate::config::RunSpec;
use crate::data::{constraints, latest_model, load_panel};
use crate::error::CliResult;
use crate::output::{ensure_dir, write_text, write_trace, Csv};

/// Seed of run `r` (0-based). Every cell of a comparison uses the same seeds,
/// so run `r` starts from the same population everywhere.
pub fn run_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// `runs` independent seeded runs, in run order.
pub fn multi_run(
    model: &MarketModel,
    spec: &ConstraintSpec,
    cfg: &SwarmConfig,
    runs: usize,
) -> CliResult<Vec<RunResult>> {
    let results: Vec<_> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let cfg = SwarmConfig {
                seed: run_seed(cfg.seed, r),
                ..cfg.clone()
            };
            run(model, spec, &cfg)
        })
        .collect();
    Ok(results.into_iter().collect::<Result<_, _>>()?)
}

/// Index of the best run: feasible first, then lowest objective.
pub fn best_run(results: &[RunResult]) -> usize {
    let key = |r: &RunResult| (!r.feasible, r.best_f);
    (0..results.len())
        .min_by(|&a, &b| {
            key(&results[a])
                .partial_cmp(&key(&results[b]))
                .expect("finite objectives")
        })
        .expect("at least one run")
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub label: String,
    pub stats: Describe,
    pub feasible_runs: usize,
    pub best_run: usize,
}

pub fn stats_text(spec: &RunSpec, rep: &OptimizeReport, best_msr: f64) -> String {
    let mut s = spec.echo();
    let d = &rep.stats;
    for (k, v) in [
        ("feasible_runs", rep.feasible_runs.to_string()),
        ("best_run", (rep.best_run + 1).to_string()),
        ("best_msr", best_msr.to_string()),
        ("mean", d.mean.to_string()),
        ("std", d.std.to_string()),
        ("min", d.min.to_string()),
        ("max", d.max.to_string()),
    ] {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn optimize(spec: &RunSpec, out: &Path) -> CliResult<OptimizeReport> {
    spec.validate()?;
    let panel = load_panel(spec)?;
    let model = latest_model(&panel, spec)?;
    let cons = constraints(&panel, spec)?;
    let results = multi_run(&model, &cons, spec.solver(), spec.runs)?;

    ensure_dir(out)?;
    let best = best_run(&results);
    let mut table = Csv::create(out.join("runs.csv"))?;
    table.row(["run", "seed", "best_f", "feasible", "n_assets", "turnover"])?;
    for (r, res) in results.iter().enumerate() {
        write_trace(out.join(format!("trace_run{:02}.csv", r + 1)), &res.trace)?;
        table.row([
            (r + 1).to_string(),
            run_seed(spec.solver().seed, r).to_string(),
            res.best_f.to_string(),
            res.feasible.to_string(),
            res.best.cardinality().to_string(),
            turnover(res.best.weights(), cons.x0()).to_string(),
        ])?;
    }
    table.finish()?;

    let mut port = Csv::create(out.join("portfolio.csv"))?;
    port.row(["ticker", "weight"])?;
    for (t, w) in panel.tickers().iter().zip(results[best].best.weights()) {
        if *w > 0.0 {
            port.row([t.clone(), w.to_string()])?;
        }
    }
    port.finish()?;

    let fs: Vec<f64> = results.iter().map(|r| r.best_f).collect();
    let report = OptimizeReport {
        label: spec.solver().label(),
        stats: describe(&fs)?,
        feasible_runs: results.iter().filter(|r| r.feasible).count(),
        best_run: best,
    };
    let msr = model.modified_sharpe(results[best].best.weights())?;
    write_text(out.join("stats.txt"), &stats_text(spec, &report, msr))?;
    Ok(report)
}
