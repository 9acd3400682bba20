//! Summary statistics over independent runs and the paired comparison test.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Describe {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn describe(xs: &[f64]) -> Result<Describe> {
    if xs.is_empty() {
        return Err(Error::InsufficientData("no values to summarize".into()));
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Describe {
        n,
        mean,
        std,
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `(a - b) / b · 100`. For negative objectives a positive value means `a` is lower.
pub fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b) / b * 100.0
}

/// One-sided paired t-test of `mean(a - b) < 0`. Returns the p-value.
///
/// When all differences are equal the statistic is undefined: the p-value is
/// then 0 for a negative common difference and 1 otherwise.
pub fn paired_t_test_less(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            what: "paired samples",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = describe(&d)?;
    if s.std == 0.0 {
        return Ok(if s.mean < 0.0 { 0.0 } else { 1.0 });
    }
    let t = s.mean / (s.std / (s.n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (s.n - 1) as f64).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(dist.cdf(t))
}
