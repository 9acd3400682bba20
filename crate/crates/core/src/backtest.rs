//! Rolling-window out-of-sample backtest with tiered transaction costs.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::estimation::{compute_returns, estimate_model, PricePanel, Shrinkage};
use crate::model::{feasibility, turnover, ConstraintSpec};
use crate::swarm::{run, SwarmConfig};

/// Trades smaller than this many currency units are free.
pub const MIN_TRADE: f64 = 1e-6;

/// Fee schedule for one traded-value bracket `[lower, next lower)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTier {
    pub lower: f64,
    pub fixed: f64,
    pub rate: f64,
}

pub fn default_tiers() -> Vec<CostTier> {
    vec![
        CostTier {
            lower: 0.0,
            fixed: 40.0,
            rate: 0.0,
        },
        CostTier {
            lower: 8_000.0,
            fixed: 0.0,
            rate: 0.005,
        },
        CostTier {
            lower: 50_000.0,
            fixed: 0.0,
            rate: 0.004,
        },
        CostTier {
            lower: 100_000.0,
            fixed: 0.0,
            rate: 0.0025,
        },
        CostTier {
            lower: 200_000.0,
            fixed: 400.0,
            rate: 0.0,
        },
    ]
}

/// Tiers must start at zero with strictly increasing lower bounds.
pub fn validate_tiers(tiers: &[CostTier]) -> Result<()> {
    match tiers.first() {
        Some(t) if t.lower == 0.0 => {}
        _ => return Err(Error::InvalidConfig("cost tiers must start at 0".into())),
    }
    for w in tiers.windows(2) {
        if !(w[1].lower > w[0].lower) {
            return Err(Error::InvalidConfig("cost tier bounds must increase".into()));
        }
    }
    if tiers.iter().any(|t| !(t.fixed >= 0.0 && t.rate >= 0.0)) {
        return Err(Error::InvalidConfig("fees and rates must be nonnegative".into()));
    }
    Ok(())
}

/// Fee for a single trade of `value` currency units.
pub fn trade_cost(value: f64, tiers: &[CostTier]) -> f64 {
    if value < MIN_TRADE {
        return 0.0;
    }
    let tier = tiers.iter().rev().find(|t| value >= t.lower).unwrap_or(&tiers[0]);
    tier.fixed + tier.rate * value
}

/// Total fee for moving from `x_old` to `x_new` at wealth `wealth`.
pub fn transaction_cost(x_new: &[f64], x_old: &[f64], wealth: f64, tiers: &[CostTier]) -> f64 {
    x_new
        .iter()
        .zip(x_old)
        .map(|(a, b)| trade_cost((a - b).abs() * wealth, tiers))
        .sum()
}

/// Weights after one period of gross returns, renormalized.
pub fn drift_weights(x_prev: &[f64], gross: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = x_prev.iter().zip(gross).map(|(x, g)| x * g).sum();
    if !(total > 0.0) {
        return Err(Error::WipedOut(total));
    }
    Ok(x_prev.iter().zip(gross).map(|(x, g)| x * g / total).collect())
}

pub fn step_wealth(w_prev: f64, r_out: f64, cost: f64) -> f64 {
    w_prev * (1.0 + r_out) - cost
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub window: usize,
    pub horizon: usize,
    pub initial_wealth: f64,
    pub tiers: Vec<CostTier>,
    /// Cardinality as a fraction of the number of assets, rounded, at least 1.
    pub k_fraction: f64,
    pub lower: f64,
    pub upper: f64,
    pub turnover_cap: f64,
    pub risk_free: f64,
    pub shrinkage: Shrinkage,
    pub periods_per_year: f64,
    pub solver: SwarmConfig,
    /// Benchmark weights; equal weights when absent.
    pub benchmark_weights: Option<Vec<f64>>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: 60,
            horizon: 61,
            initial_wealth: 10_000_000.0,
            tiers: default_tiers(),
            k_fraction: 0.3,
            lower: 0.001,
            upper: 0.05,
            turnover_cap: 0.2,
            risk_free: 0.0,
            shrinkage: Shrinkage::Auto,
            periods_per_year: 12.0,
            solver: SwarmConfig::default(),
            benchmark_weights: None,
        }
    }
}

/// Cardinality for `n` assets.
pub fn cardinality_for(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub t: usize,
    /// Date at the end of the realized period.
    pub date: NaiveDate,
    pub weights: Vec<f64>,
    pub drifted: Vec<f64>,
    pub cost: f64,
    pub wealth: f64,
    pub ret_out: f64,
    pub turnover: f64,
    pub n_assets: usize,
    pub benchmark_return: f64,
    pub benchmark_wealth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    /// `None` when the ex-post volatility is zero or undefined.
    pub sharpe: Option<f64>,
    /// `+inf` when no period lost money.
    pub omega: f64,
    pub cagr: f64,
    pub mean_drawdown: f64,
    pub std_drawdown: f64,
    pub mean_cost: f64,
    pub cost_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestLedger {
    pub records: Vec<PeriodRecord>,
    pub summary: Summary,
    pub benchmark: Summary,
    /// `"equal-weight"` or `"cap-weight"`.
    pub benchmark_label: &'static str,
    pub initial_wealth: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    (mean, std)
}

/// Ex-post Sharpe ratio `μ/σ` of a return series.
pub fn sharpe_out(returns: &[f64]) -> Result<f64> {
    let (mean, std) = mean_std(returns);
    if !(std > 0.0) {
        return Err(Error::UndefinedRatio);
    }
    Ok(mean / std)
}

pub fn omega(returns: &[f64]) -> f64 {
    // fold from +0.0: an empty f64 sum is -0.0
    let gains = returns.iter().filter(|&&r| r > 0.0).fold(0.0, |a, r| a + r);
    let losses = returns.iter().filter(|&&r| r < 0.0).fold(0.0, |a, r| a - r);
    if losses == 0.0 {
        f64::INFINITY
    } else {
        gains / losses
    }
}

pub fn cagr(w0: f64, w_end: f64, periods: usize, periods_per_year: f64) -> f64 {
    (w_end / w0).powf(periods_per_year / periods as f64) - 1.0
}

/// `min(0, (W_t - peak)/peak)` with the running peak starting at `W0`.
pub fn drawdowns(w0: f64, wealth: &[f64]) -> Vec<f64> {
    let mut peak = w0;
    wealth
        .iter()
        .map(|&w| {
            peak = peak.max(w);
            ((w - peak) / peak).min(0.0)
        })
        .collect()
}

/// Summary metrics from per-period returns, wealth path and costs.
pub fn ex_post_metrics(w0: f64, returns: &[f64], wealth: &[f64], costs: &[f64], periods_per_year: f64) -> Summary {
    let dd = drawdowns(w0, wealth);
    let (mean_dd, std_dd) = mean_std(&dd);
    let prev = std::iter::once(w0).chain(wealth.iter().copied());
    let cost_pct = costs.iter().zip(prev).map(|(c, w)| c / w).sum::<f64>() / costs.len() as f64 * 100.0;
    Summary {
        sharpe: sharpe_out(returns).ok(),
        omega: omega(returns),
        cagr: cagr(w0, *wealth.last().unwrap_or(&w0), wealth.len(), periods_per_year),
        mean_drawdown: mean_dd,
        std_drawdown: if std_dd.is_nan() { 0.0 } else { std_dd },
        mean_cost: costs.iter().sum::<f64>() / costs.len() as f64,
        cost_pct,
    }
}

/// Number of prices the panel needs for `window` and `horizon`.
pub fn required_prices(window: usize, horizon: usize) -> usize {
    window + horizon + 1
}

/// Rebalances every period on the trailing `window` returns and realizes the
/// next period. Period `t` (1-based) estimates on return rows
/// `t-1 .. t-1+window` and earns row `t-1+window`.
pub fn run_backtest(panel: &PricePanel, cfg: &BacktestConfig) -> Result<BacktestLedger> {
    if cfg.window < 2 {
        return Err(Error::InvalidConfig("window must be at least 2 periods".into()));
    }
    if cfg.horizon < 1 {
        return Err(Error::InvalidConfig("horizon must be at least 1 period".into()));
    }
    validate_tiers(&cfg.tiers)?;
    let need = required_prices(cfg.window, cfg.horizon);
    if panel.n_periods() < need {
        return Err(Error::InsufficientData(format!(
            "window {} and horizon {} need {need} prices per asset, the panel has {}",
            cfg.window,
            cfg.horizon,
            panel.n_periods()
        )));
    }
    let n = panel.n_assets();
    let bench: Vec<f64> = match &cfg.benchmark_weights {
        Some(w) if w.len() != n => {
            return Err(Error::Dimension {
                what: "benchmark weights",
                expected: n,
                got: w.len(),
            })
        }
        Some(w) => {
            let s: f64 = w.iter().sum();
            if !(s > 0.0) || w.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidConfig(
                    "benchmark weights must be nonnegative with positive sum".into(),
                ));
            }
            w.iter().map(|v| v / s).collect()
        }
        None => vec![1.0 / n as f64; n],
    };
    let k = cardinality_for(n, cfg.k_fraction);
    let cold = ConstraintSpec::uniform(n, k, cfg.lower, cfg.upper, 1.0, vec![0.0; n])?;
    let returns = compute_returns(panel);

    let mut records = Vec::with_capacity(cfg.horizon);
    let mut wealth = cfg.initial_wealth;
    let mut bench_wealth = cfg.initial_wealth;
    let mut prev: Option<(Vec<f64>, usize)> = None;
    for t in 1..=cfg.horizon {
        let wrap = |e: Error| Error::Period {
            period: t,
            source: Box::new(e),
        };
        let start = t - 1;
        let realized = start + cfg.window;
        let drifted = match &prev {
            None => vec![0.0; n],
            Some((x, row)) => drift_weights(x, &returns.gross()[*row]).map_err(wrap)?,
        };
        let spec = if prev.is_none() {
            cold.clone()
        } else {
            cold.with_x0(drifted.clone(), cfg.turnover_cap).map_err(wrap)?
        };
        let model = estimate_model(&returns.window(start..realized), cfg.risk_free, cfg.shrinkage).map_err(wrap)?;
        let solver = SwarmConfig {
            seed: cfg.solver.seed.wrapping_add(t as u64),
            ..cfg.solver.clone()
        };
        let result = run(&model, &spec, &solver).map_err(wrap)?;
        if !feasibility(&spec, result.best.weights()).is_feasible() {
            return Err(wrap(Error::InvalidSpec("solver returned no feasible portfolio".into())));
        }
        let x = result.best.into_weights();

        let r = &returns.simple()[realized];
        let ret_out: f64 = x.iter().zip(r).map(|(a, b)| a * b).sum();
        let cost = transaction_cost(&x, &drifted, wealth, &cfg.tiers);
        wealth = step_wealth(wealth, ret_out, cost);
        let bench_ret: f64 = bench.iter().zip(r).map(|(a, b)| a * b).sum();
        bench_wealth *= 1.0 + bench_ret;
        records.push(PeriodRecord {
            t,
            date: panel.dates()[realized + 1],
            turnover: turnover(&x, &drifted),
            n_assets: x.iter().filter(|&&w| w > 0.0).count(),
            drifted,
            cost,
            wealth,
            ret_out,
            benchmark_return: bench_ret,
            benchmark_wealth: bench_wealth,
            weights: x.clone(),
        });
        prev = Some((x, realized));
    }

    let col = |f: fn(&PeriodRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let summary = ex_post_metrics(
        cfg.initial_wealth,
        &col(|r| r.ret_out),
        &col(|r| r.wealth),
        &col(|r| r.cost),
        cfg.periods_per_year,
    );
    let zero_costs = vec![0.0; records.len()];
    let benchmark = ex_post_metrics(
        cfg.initial_wealth,
        &col(|r| r.benchmark_return),
        &col(|r| r.benchmark_wealth),
        &zero_costs,
        cfg.periods_per_year,
    );
    Ok(BacktestLedger {
        records,
        summary,
        benchmark,
        benchmark_label: if cfg.benchmark_weights.is_some() {
            "cap-weight"
        } else {
            "equal-weight"
        },
        initial_wealth: cfg.initial_wealth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tier_examples() {
        let t = default_tiers();
        assert!(validate_tiers(&t).is_ok());
        assert!((trade_cost(10_000.0, &t) - 50.0).abs() < 1e-12);
        assert_eq!(trade_cost(5_000.0, &t), 40.0);
        assert_eq!(trade_cost(250_000.0, &t), 400.0);
        assert_eq!(trade_cost(0.0, &t), 0.0);
        assert_eq!(trade_cost(7_999.0, &t), 40.0);
        assert!((trade_cost(8_000.0, &t) - 40.0).abs() < 1e-12);
        assert!((trade_cost(60_000.0, &t) - 240.0).abs() < 1e-12);
        assert!((trade_cost(150_000.0, &t) - 375.0).abs() < 1e-12);
        let bad = vec![CostTier {
            lower: 5.0,
            fixed: 0.0,
            rate: 0.0,
        }];
        assert!(validate_tiers(&bad).is_err());
    }

    #[test]
    fn cost_sums_assets() {
        let t = default_tiers();
        // trades of 10,000 and 5,000; the untouched asset is free
        let c = transaction_cost(&[0.5, 0.3, 0.2], &[0.4, 0.35, 0.2], 100_000.0, &t);
        assert!((c - 90.0).abs() < 1e-9);
    }

    #[test]
    fn drift_examples() {
        assert_eq!(drift_weights(&[0.5, 0.5], &[1.1, 1.1]).unwrap(), vec![0.5, 0.5]);
        let d = drift_weights(&[0.5, 0.5], &[1.1, 0.9]).unwrap();
        assert!((d[0] - 0.55).abs() < 1e-15 && (d[1] - 0.45).abs() < 1e-15);
        assert_eq!(drift_weights(&[0.0, 1.0], &[1.3, 0.8]).unwrap(), vec![0.0, 1.0]);
        assert!(drift_weights(&[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn wealth_examples() {
        assert_eq!(step_wealth(100.0, 0.0, 0.0), 100.0);
        assert!((step_wealth(100.0, 0.1, 5.0) - 105.0).abs() < 1e-12);
        assert!(step_wealth(100.0, -0.5, 60.0) < 0.0);
    }

    #[test]
    fn metric_examples() {
        assert!((omega(&[0.1, -0.05]) - 2.0).abs() < 1e-15);
        assert_eq!(omega(&[0.1, 0.0]), f64::INFINITY);
        assert!(omega(&[-0.1, -0.2]).is_sign_positive());
        assert!((cagr(100.0, 121.0, 24, 12.0) - 0.1).abs() < 1e-12);
        let s = ex_post_metrics(100.0, &[0.0, 0.0], &[100.0, 100.0], &[0.0, 0.0], 12.0);
        assert_eq!(s.cagr, 0.0);
        assert_eq!(s.mean_drawdown, 0.0);
        assert!(s.sharpe.is_none());
        assert_eq!(drawdowns(100.0, &[90.0, 110.0, 99.0]), vec![-0.1, 0.0, -0.1]);
        assert!(sharpe_out(&[0.01]).is_err());
    }

    fn synthetic_panel(n: usize, periods: usize, seed: u64) -> PricePanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = NaiveDate::from_ymd_opt(2010, 1, 31).unwrap();
        let dates = (0..periods).map(|i| start + Duration::days(30 * i as i64)).collect();
        let mut prices = vec![vec![100.0; n]];
        for _ in 1..periods {
            let last = prices.last().unwrap().clone();
            let market = rng.gen_range(-0.03..0.04);
            prices.push(
                last.iter()
                    .enumerate()
                    .map(|(i, p)| p * (1.0 + market + 0.001 * i as f64 + rng.gen_range(-0.05..0.05)))
                    .collect(),
            );
        }
        PricePanel::new((0..n).map(|i| format!("A{i}")).collect(), dates, prices).unwrap()
    }

    fn small_cfg() -> BacktestConfig {
        BacktestConfig {
            window: 24,
            horizon: 6,
            k_fraction: 0.5,
            lower: 0.01,
            upper: 0.3,
            solver: SwarmConfig {
                np: 30,
                nl_init: 6,
                nl_max: 15,
                g_max: 15,
                seed: 9,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn ledger_invariants() {
        let panel = synthetic_panel(12, 40, 1);
        let cfg = small_cfg();
        let ledger = run_backtest(&panel, &cfg).unwrap();
        assert_eq!(ledger.records.len(), 6);
        let mut w = cfg.initial_wealth;
        for r in &ledger.records {
            let again = w * (1.0 + r.ret_out) - r.cost;
            assert!((again - r.wealth).abs() < 1e-6);
            w = r.wealth;
            if r.t >= 2 {
                assert!(r.turnover <= cfg.turnover_cap + 1e-9);
            }
        }
        assert!(drawdowns(
            cfg.initial_wealth,
            &ledger.records.iter().map(|r| r.wealth).collect::<Vec<_>>()
        )
        .iter()
        .all(|&d| d <= 0.0));
        assert_eq!(ledger.benchmark_label, "equal-weight");
        let again = run_backtest(&panel, &cfg).unwrap();
        assert_eq!(ledger, again);
    }

    #[test]
    fn single_period_and_short_panel() {
        let panel = synthetic_panel(8, 30, 2);
        let cfg = BacktestConfig {
            horizon: 1,
            k_fraction: 0.75,
            ..small_cfg()
        };
        let ledger = run_backtest(&panel, &cfg).unwrap();
        assert_eq!(ledger.records.len(), 1);
        assert!(ledger.summary.cagr.is_finite());
        let too_long = BacktestConfig { horizon: 10, ..cfg };
        let err = run_backtest(&panel, &too_long).unwrap_err().to_string();
        assert!(err.contains("35"), "{err}");
    }

    proptest! {
        #[test]
        fn cost_monotone_within_tiers(a in 0.0f64..400_000.0, b in 0.0f64..400_000.0) {
            let t = default_tiers();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let tier = |v: f64| t.iter().rposition(|x| v >= x.lower).unwrap();
            if tier(lo) == tier(hi) {
                prop_assert!(trade_cost(lo, &t) <= trade_cost(hi, &t) + 1e-12 || lo < MIN_TRADE);
            }
        }

        #[test]
        fn drift_sums_to_one(
            x in proptest::collection::vec(0.0f64..1.0, 2..10),
            seed in any::<u64>(),
        ) {
            let s: f64 = x.iter().sum();
            prop_assume!(s > 1e-6);
            let x: Vec<f64> = x.iter().map(|v| v / s).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g: Vec<f64> = x.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
            let d = drift_weights(&x, &g).unwrap();
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
