use std::fmt::Write as _;
use std::path::Path;

use llso_core::stats::{describe, paired_t_test_less, relative_change, Describe};

use crate::config::RunSpec;
use crate::data::{constraints, latest_model, load_panel};
use crate::error::{CliError, CliResult};
use crate::optimize::multi_run;
use crate::output::{ensure_dir, write_text, Csv};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub best_f: Vec<f64>,
    pub feasible_runs: usize,
    pub stats: Describe,
}

/// Row cell `a` against column cell `b`: relative change of the means and the
/// left-sided paired p-value for "a is lower".
#[derive(Debug, Clone)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
    pub rel_change: f64,
    pub p_value: f64,
}

impl Pair {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub cells: Vec<Cell>,
    pub pairs: Vec<Pair>,
}

impl Comparison {
    /// Every pair `i < j` of the grid, in grid order.
    pub fn from_cells(cells: Vec<Cell>) -> CliResult<Self> {
        if cells.len() < 2 {
            return Err(CliError::Config(format!(
                "compare needs a grid of at least 2 cells, got {}",
                cells.len()
            )));
        }
        let mut pairs = Vec::new();
        for a in 0..cells.len() {
            for b in a + 1..cells.len() {
                pairs.push(Pair {
                    a,
                    b,
                    rel_change: relative_change(cells[a].stats.mean, cells[b].stats.mean),
                    p_value: paired_t_test_less(&cells[a].best_f, &cells[b].best_f)?,
                });
            }
        }
        Ok(Comparison { cells, pairs })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14} {:>5} {:>13} {:>13} {:>13} {:>13}",
            "cell", "feas", "mean", "std", "min", "max"
        );
        for c in &self.cells {
            let d = &c.stats;
            let _ = writeln!(
                s,
                "{:<14} {:>2}/{:<2} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e}",
                c.label, c.feasible_runs, d.n, d.mean, d.std, d.min, d.max
            );
        }
        let _ = writeln!(s);
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{} vs {}: change {:+.3}%  p = {:.4}{}",
                self.cells[p.a].label,
                self.cells[p.b].label,
                p.rel_change,
                p.p_value,
                if p.significant() { "  *" } else { "" }
            );
        }
        s
    }
}

pub fn compare(spec: &RunSpec, out: &Path) -> CliResult<Comparison> {
    if spec.grid.len() < 2 {
        return Err(CliError::Config(format!(
            "compare needs a grid of at least 2 cells, got {}",
            spec.grid.len()
        )));
    }
    spec.validate()?;
    let configs: Vec<_> = spec.grid.iter().map(|v| v.apply(spec.solver())).collect();
    for c in &configs {
        c.validate()
            .map_err(|e| CliError::Config(format!("grid cell {}: {e}", c.label())))?;
    }
    let panel = load_panel(spec)?;
    let model = latest_model(&panel, spec)?;
    let cons = constraints(&panel, spec)?;

    let mut cells = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let results = multi_run(&model, &cons, cfg, spec.runs)?;
        let best_f: Vec<f64> = results.iter().map(|r| r.best_f).collect();
        cells.push(Cell {
            label: cfg.label(),
            stats: describe(&best_f)?,
            feasible_runs: results.iter().filter(|r| r.feasible).count(),
            best_f,
        });
    }
    let cmp = Comparison::from_cells(cells)?;

    ensure_dir(out)?;
    let mut t = Csv::create(out.join("compare.csv"))?;
    t.row(["cell", "runs", "feasible_runs", "mean", "std", "min", "max"])?;
    for c in &cmp.cells {
        let d = &c.stats;
        t.row([
            c.label.clone(),
            d.n.to_string(),
            c.feasible_runs.to_string(),
            d.mean.to_string(),
            d.std.to_string(),
            d.min.to_string(),
            d.max.to_string(),
        ])?;
    }
    t.finish()?;

    let mut p = Csv::create(out.join("pairwise.csv"))?;
    p.row(["a", "b", "rel_change_pct", "p_value", "significant"])?;
    for pr in &cmp.pairs {
        p.row([
            cmp.cells[pr.a].label.clone(),
            cmp.cells[pr.b].label.clone(),
            pr.rel_change.to_string(),
            pr.p_value.to_string(),
            pr.significant().to_string(),
        ])?;
    }
    p.finish()?;

    let mut runs = Csv::create(out.join("best_f.csv"))?;
    let mut header = vec!["run".to_string()];
    header.extend(cmp.cells.iter().map(|c| c.label.clone()));
    runs.row(&header)?;
    for r in 0..spec.runs {
        let mut row = vec![(r + 1).to_string()];
        row.extend(cmp.cells.iter().map(|c| c.best_f[r].to_string()));
        runs.row(&row)?;
    }
    runs.finish()?;
    write_text(out.join("compare.txt"), &cmp.render())?;
    Ok(cmp)
}
