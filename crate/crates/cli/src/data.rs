//! Inputs: price panels, weight files and the model/constraints built from them.

use std::path::Path;

use llso_core::backtest::cardinality_for;
use llso_core::estimation::{compute_returns, estimate_model, load_prices};
use llso_core::synthetic::price_panel;
use llso_core::{ConstraintSpec, MarketModel, PricePanel};

use crate::config::RunSpec;
use crate::error::{CliError, CliResult};

/// The configured price panel: the CSV file, or a synthetic one.
pub fn load_panel(spec: &RunSpec) -> CliResult<PricePanel> {
    if let Some(path) = &spec.prices {
        let loaded = load_prices(path)?;
        for t in &loaded.dropped {
            eprintln!("warning: {}: dropped {t} (missing prices)", path.display());
        }
        return Ok(loaded.panel);
    }
    Ok(price_panel(
        spec.synthetic_assets,
        spec.synthetic_len(),
        spec.synthetic_seed,
    )?)
}

/// Reads `ticker,weight` rows and aligns them to `tickers`. Tickers absent
/// from the file get zero weight.
pub fn read_weights(path: &Path, tickers: &[String]) -> CliResult<Vec<f64>> {
    let fail = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let mut w = vec![0.0; tickers.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        if rec.len() != 2 {
            return Err(fail(format!("expected `ticker,weight`, got {} fields", rec.len())));
        }
        let i = tickers
            .iter()
            .position(|t| t == &rec[0])
            .ok_or_else(|| fail(format!("unknown ticker `{}`", &rec[0])))?;
        w[i] = rec[1].parse().map_err(|_| fail(format!("bad weight `{}`", &rec[1])))?;
    }
    Ok(w)
}

/// Model estimated on the last `window` returns of the panel.
pub fn latest_model(panel: &PricePanel, spec: &RunSpec) -> CliResult<MarketModel> {
    let returns = compute_returns(panel);
    let window = spec.backtest.window;
    let t = returns.n_periods();
    if t < window {
        return Err(CliError::Config(format!(
            "estimation window {window} needs {} prices per asset, the panel has {}",
            window + 1,
            panel.n_periods()
        )));
    }
    Ok(estimate_model(
        &returns.window(t - window..t),
        spec.backtest.risk_free,
        spec.backtest.shrinkage,
    )?)
}

/// Constraints for a single rebalance. Without current holdings the
/// turnover cap is lifted.
pub fn constraints(panel: &PricePanel, spec: &RunSpec) -> CliResult<ConstraintSpec> {
    let n = panel.n_assets();
    let b = &spec.backtest;
    let k = spec.k.unwrap_or_else(|| cardinality_for(n, b.k_fraction));
    let cold = ConstraintSpec::uniform(n, k, b.lower, b.upper, 1.0, vec![0.0; n])?;
    match &spec.current {
        None => Ok(cold),
        Some(path) => Ok(cold.with_x0(read_weights(path, panel.tickers())?, b.turnover_cap)?),
    }
}
