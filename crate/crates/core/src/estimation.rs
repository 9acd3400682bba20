//! Price panels, return panels and the mean/covariance estimator.

use std::io::Read;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::MarketModel;

/// Prices indexed by period (rows) and asset (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    prices: Vec<Vec<f64>>,
}

impl PricePanel {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, prices: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::Dimension {
                what: "price rows",
                expected: dates.len(),
                got: prices.len(),
            });
        }
        if dates.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "need at least 3 price rows, got {}",
                dates.len()
            )));
        }
        if tickers.is_empty() {
            return Err(Error::InsufficientData("no assets".into()));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        for row in &prices {
            if row.len() != tickers.len() {
                return Err(Error::Dimension {
                    what: "price columns",
                    expected: tickers.len(),
                    got: row.len(),
                });
            }
            if let Some(p) = row.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
                return Err(Error::InvalidConfig(format!("price {p} is not strictly positive")));
            }
        }
        Ok(Self { tickers, dates, prices })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_periods(&self) -> usize {
        self.dates.len()
    }
}

/// A loaded panel together with the tickers dropped for missing values.
#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: PricePanel,
    pub dropped: Vec<String>,
}

/// Reads a price CSV: `date` column first, one column per ticker.
///
/// Assets with a blank or `NA` cell are dropped and listed in
/// [`LoadedPanel::dropped`]. Any other unparsable or non-positive price is
/// an error.
pub fn load_prices(path: impl AsRef<Path>) -> Result<LoadedPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    parse_prices(file).map_err(|e| match e {
        Error::Data { .. } => e,
        other => Error::Data {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    })
}

pub fn parse_prices(reader: impl Read) -> Result<LoadedPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::InvalidConfig(e.to_string()))?.clone();
    if headers.len() < 2 || !headers[0].eq_ignore_ascii_case("date") {
        return Err(Error::InvalidConfig(
            "header must start with `date` followed by tickers".into(),
        ));
    }
    let all_tickers: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let n = all_tickers.len();
    let mut dates = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let row = line + 2;
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| Error::InvalidConfig(format!("row {row}: bad date `{}`: {e}", &rec[0])))?;
        dates.push(date);
        let mut vals = Vec::with_capacity(n);
        for (j, field) in rec.iter().skip(1).enumerate() {
            if field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan") {
                vals.push(None);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidConfig(format!("row {row}, {}: unparsable price `{field}`", all_tickers[j]))
            })?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "row {row}, {}: price {v} is not strictly positive",
                    all_tickers[j]
                )));
            }
            vals.push(Some(v));
        }
        cells.push(vals);
    }
    if dates.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 price rows, got {}",
            dates.len()
        )));
    }
    let keep: Vec<usize> = (0..n).filter(|&j| cells.iter().all(|r| r[j].is_some())).collect();
    let dropped = (0..n)
        .filter(|j| !keep.contains(j))
        .map(|j| all_tickers[j].clone())
        .collect();
    if keep.is_empty() {
        return Err(Error::InsufficientData("no asset without missing prices".into()));
    }
    let tickers = keep.iter().map(|&j| all_tickers[j].clone()).collect();
    let prices = cells
        .iter()
        .map(|r| keep.iter().map(|&j| r[j].unwrap()).collect())
        .collect();
    Ok(LoadedPanel {
        panel: PricePanel::new(tickers, dates, prices)?,
        dropped,
    })
}

/// Simple and gross period returns, `(T-1) × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    simple: Vec<Vec<f64>>,
    gross: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn simple(&self) -> &[Vec<f64>] {
        &self.simple
    }

    pub fn gross(&self) -> &[Vec<f64>] {
        &self.gross
    }

    pub fn n_periods(&self) -> usize {
        self.simple.len()
    }

    pub fn n_assets(&self) -> usize {
        self.simple.first().map_or(0, Vec::len)
    }

    /// Rows `range` of both matrices.
    pub fn window(&self, range: Range<usize>) -> ReturnPanel {
        ReturnPanel {
            simple: self.simple[range.clone()].to_vec(),
            gross: self.gross[range].to_vec(),
        }
    }
}

pub fn compute_returns(panel: &PricePanel) -> ReturnPanel {
    let gross: Vec<Vec<f64>> = panel
        .prices
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(now, prev)| now / prev).collect())
        .collect();
    let simple = gross.iter().map(|r| r.iter().map(|g| g - 1.0).collect()).collect();
    ReturnPanel { simple, gross }
}

/// Covariance shrinkage toward `(tr(S)/n)·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shrinkage {
    None,
    Fixed(f64),
    /// Ledoit-Wolf optimal intensity for the scaled-identity target.
    Auto,
}

/// Unbiased sample covariance (`T - 1` denominator over `T` observations).
pub fn sample_covariance(returns: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let t = returns.len();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 return observations, got {t}"
        )));
    }
    let n = returns[0].len();
    let mean: Vec<f64> = (0..n)
        .map(|j| returns.iter().map(|r| r[j]).sum::<f64>() / t as f64)
        .collect();
    let centered = DMatrix::from_fn(t, n, |i, j| returns[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (t as f64 - 1.0);
    Ok((mean, cov))
}

/// Ledoit-Wolf intensity toward the scaled identity, clipped to `[0, 1]`.
pub fn ledoit_wolf_intensity(returns: &[Vec<f64>]) -> Result<f64> {
    let t = returns.len();
    if t < 2 {
        return Err(Error::InsufficientData("need at least 2 observations".into()));
    }
    let n = returns[0].len();
    let mean: Vec<f64> = (0..n)
        .map(|j| returns.iter().map(|r| r[j]).sum::<f64>() / t as f64)
        .collect();
    let x = DMatrix::from_fn(t, n, |i, j| returns[i][j] - mean[j]);
    let s = (x.transpose() * &x) / t as f64;
    let m = s.trace() / n as f64;
    let d2 = (&s - DMatrix::identity(n, n) * m).norm_squared();
    if d2 <= 0.0 {
        return Ok(0.0);
    }
    let s_norm2 = s.norm_squared();
    let mut b_bar2 = 0.0;
    for i in 0..t {
        let row = x.row(i).transpose();
        let r2 = row.norm_squared();
        let quad = (row.transpose() * &s * &row)[(0, 0)];
        // ‖x xᵀ - S‖² = ‖x‖⁴ - 2 xᵀSx + ‖S‖²
        b_bar2 += r2 * r2 - 2.0 * quad + s_norm2;
    }
    b_bar2 /= (t * t) as f64;
    Ok((b_bar2.min(d2) / d2).clamp(0.0, 1.0))
}

/// Historical mean returns and a shrunk sample covariance.
pub fn estimate_model(returns: &ReturnPanel, risk_free: f64, shrinkage: Shrinkage) -> Result<MarketModel> {
    let simple = returns.simple();
    let (mu, s) = sample_covariance(simple)?;
    let intensity = match shrinkage {
        Shrinkage::None => 0.0,
        Shrinkage::Fixed(d) if (0.0..=1.0).contains(&d) => d,
        Shrinkage::Fixed(d) => return Err(Error::InvalidConfig(format!("shrinkage intensity {d} outside [0, 1]"))),
        Shrinkage::Auto => ledoit_wolf_intensity(simple)?,
    };
    let cov = shrink(&s, intensity);
    MarketModel::new(mu, cov, risk_free)
}

/// `(1-δ)·S + δ·(tr(S)/n)·I`.
pub fn shrink(s: &DMatrix<f64>, intensity: f64) -> DMatrix<f64> {
    let n = s.nrows();
    if intensity == 0.0 {
        return s.clone();
    }
    let target = s.trace() / n as f64;
    let mut out = s * (1.0 - intensity);
    for i in 0..n {
        out[(i, i)] += intensity * target;
    }
    out
}
