use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use llso_core::backtest::cardinality_for;
use llso_core::{run_backtest, BacktestConfig, BacktestLedger, PricePanel, Summary};

use crate::config::RunSpec;
use crate::data::{load_panel, read_weights};
use crate::error::CliResult;
use crate::output::{ensure_dir, write_text, Csv};

const SUMMARY_FIELDS: [&str; 7] = [
    "sharpe",
    "omega",
    "cagr",
    "mean_drawdown",
    "std_drawdown",
    "mean_cost",
    "cost_pct",
];

fn summary_values(s: &Summary) -> [String; 7] {
    [
        s.sharpe.map_or("NA".to_string(), |v| v.to_string()),
        s.omega.to_string(),
        s.cagr.to_string(),
        s.mean_drawdown.to_string(),
        s.std_drawdown.to_string(),
        s.mean_cost.to_string(),
        s.cost_pct.to_string(),
    ]
}

pub fn summary_text(ledger: &BacktestLedger, k: usize, k_fraction: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "k_fraction = {k_fraction}");
    let _ = writeln!(s, "k = {k}");
    let _ = writeln!(s, "periods = {}", ledger.records.len());
    let _ = writeln!(s, "initial_wealth = {}", ledger.initial_wealth);
    let final_w = ledger.records.last().map_or(ledger.initial_wealth, |r| r.wealth);
    let _ = writeln!(s, "final_wealth = {final_w}");
    for (f, v) in SUMMARY_FIELDS.iter().zip(summary_values(&ledger.summary)) {
        let _ = writeln!(s, "{f} = {v}");
    }
    let _ = writeln!(s, "benchmark = {}", ledger.benchmark_label);
    for (f, v) in SUMMARY_FIELDS.iter().zip(summary_values(&ledger.benchmark)) {
        let _ = writeln!(s, "benchmark_{f} = {v}");
    }
    s
}

pub fn write_ledger(
    dir: &Path,
    panel: &PricePanel,
    ledger: &BacktestLedger,
    k: usize,
    k_fraction: f64,
) -> CliResult<()> {
    ensure_dir(dir)?;
    let mut l = Csv::create(dir.join("ledger.csv"))?;
    l.row(["t", "date", "cost", "wealth", "ret_out", "turnover", "n_assets"])?;
    for r in &ledger.records {
        l.row([
            r.t.to_string(),
            r.date.to_string(),
            r.cost.to_string(),
            r.wealth.to_string(),
            r.ret_out.to_string(),
            r.turnover.to_string(),
            r.n_assets.to_string(),
        ])?;
    }
    l.finish()?;

    let mut w = Csv::create(dir.join("weights.csv"))?;
    let mut header = vec!["t".to_string(), "date".to_string()];
    header.extend(panel.tickers().iter().cloned());
    w.row(&header)?;
    for r in &ledger.records {
        let mut row = vec![r.t.to_string(), r.date.to_string()];
        row.extend(r.weights.iter().map(|v| v.to_string()));
        w.row(&row)?;
    }
    w.finish()?;
    write_text(dir.join("summary.txt"), &summary_text(ledger, k, k_fraction))
}

/// Label of a grid entry's output directory: `0.3` gives `k30`.
pub fn grid_dir(fraction: f64) -> String {
    format!("k{}", (fraction * 100.0).round() as i64)
}

/// Runs one backtest per cardinality fraction. Without a grid the configured
/// `k_fraction` is used and artifacts land directly in `out`.
pub fn backtest(spec: &RunSpec, out: &Path) -> CliResult<Vec<(f64, BacktestLedger)>> {
    spec.validate()?;
    let panel = load_panel(spec)?;
    let mut base = spec.backtest.clone();
    if let Some(p) = &spec.benchmark {
        base.benchmark_weights = Some(read_weights(p, panel.tickers())?);
    }
    let grid = !spec.k_grid.is_empty();
    let fractions = if grid {
        spec.k_grid.clone()
    } else {
        vec![base.k_fraction]
    };

    let mut ledgers = Vec::with_capacity(fractions.len());
    for &f in &fractions {
        let cfg = BacktestConfig {
            k_fraction: f,
            ..base.clone()
        };
        ledgers.push((f, run_backtest(&panel, &cfg)?));
    }

    ensure_dir(out)?;
    let mut table = Csv::create(out.join("summary.csv"))?;
    let mut header = vec!["portfolio", "k_fraction", "k"];
    header.extend(SUMMARY_FIELDS);
    table.row(&header)?;
    for (f, ledger) in &ledgers {
        let k = cardinality_for(panel.n_assets(), *f);
        let dir: PathBuf = if grid {
            out.join(grid_dir(*f))
        } else {
            out.to_path_buf()
        };
        write_ledger(&dir, &panel, ledger, k, *f)?;
        let mut row = vec![spec.solver().label(), f.to_string(), k.to_string()];
        row.extend(summary_values(&ledger.summary));
        table.row(&row)?;
    }
    if let Some((_, first)) = ledgers.first() {
        let mut row = vec![
            first.benchmark_label.to_string(),
            String::new(),
            panel.n_assets().to_string(),
        ];
        row.extend(summary_values(&first.benchmark));
        table.row(&row)?;
    }
    table.finish()?;
    Ok(ledgers)
}
