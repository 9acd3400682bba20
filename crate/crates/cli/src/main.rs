use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use llso_cli::{backtest, compare, optimize, CliError, CliResult, RunSpec};

#[derive(Parser)]
#[command(
    name = "llso",
    version,
    about = "Level-based swarm optimizer for cardinality-constrained portfolios"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one rebalance over several seeded runs.
    Optimize(Common),
    /// Run an algorithm grid from shared initial populations and test the differences.
    Compare(Common),
    /// Rolling-window out-of-sample backtest.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// Cardinality fractions, one backtest each (e.g. 0.30,0.15,0.05,0.02).
        #[arg(long, value_delimiter = ',')]
        k_grid: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` file; the defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override one key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn spec(&self) -> CliResult<RunSpec> {
        let mut spec = match &self.config {
            Some(p) => RunSpec::load(p)?,
            None => RunSpec::default(),
        };
        for kv in &self.set {
            spec.apply_override(kv)?;
        }
        if let Some(s) = self.seed {
            spec.backtest.solver.seed = s;
        }
        if let Some(r) = self.runs {
            spec.runs = r;
        }
        Ok(spec)
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Command::Optimize(c) => {
            let spec = c.spec()?;
            let rep = optimize::optimize(&spec, &c.out)?;
            let d = rep.stats;
            println!(
                "{}: {} runs, {} feasible, best f {:.6e} (run {}), mean {:.6e}, std {:.3e}",
                rep.label,
                d.n,
                rep.feasible_runs,
                d.min,
                rep.best_run + 1,
                d.mean,
                d.std
            );
        }
        Command::Compare(c) => {
            let spec = c.spec()?;
            print!("{}", compare::compare(&spec, &c.out)?.render());
        }
        Command::Backtest { common, k_grid } => {
            let mut spec = common.spec()?;
            if !k_grid.is_empty() {
                spec.k_grid = k_grid;
            }
            for (f, l) in backtest::backtest(&spec, &common.out)? {
                let last = l.records.last().map_or(l.initial_wealth, |r| r.wealth);
                let sr = l.summary.sharpe.map_or("NA".to_string(), |v| format!("{v:.4}"));
                println!(
                    "k = {:.0}%: final wealth {last:.2}, SR {sr}, CAGR {:.4}",
                    f * 100.0,
                    l.summary.cagr
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            report_sources(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn report_sources(e: &CliError) {
    let mut src = std::error::Error::source(e);
    while let Some(s) = src {
        eprintln!("  caused by: {s}");
        src = s.source();
    }
}
