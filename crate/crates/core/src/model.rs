//! Portfolio domain types and the modified Sharpe objective.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetry tolerance on covariance entries.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a covariance matrix.
pub const PSD_TOL: f64 = -1e-10;
/// Quadratic forms in `[-QUAD_TOL, 0)` are rounding noise and clamp to zero.
pub const QUAD_TOL: f64 = 1e-12;

pub const BUDGET_TOL: f64 = 1e-9;
pub const TURNOVER_TOL: f64 = 1e-9;
pub const BOX_TOL: f64 = 1e-12;

/// Expected returns, covariance and risk-free rate for `n` assets.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    mu: Vec<f64>,
    cov: DMatrix<f64>,
    risk_free: f64,
}

impl MarketModel {
    pub fn new(mu: Vec<f64>, cov: DMatrix<f64>, risk_free: f64) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidModel("no assets".into()));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::Dimension {
                what: "covariance",
                expected: n,
                got: cov.nrows().max(cov.ncols()),
            });
        }
        if mu.iter().chain(cov.iter()).any(|v| !v.is_finite()) || !risk_free.is_finite() {
            return Err(Error::InvalidModel("non-finite entry".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidModel(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        let min_eig = SymmetricEigen::new(sym.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < PSD_TOL {
            return Err(Error::InvalidModel(format!(
                "covariance not positive semi-definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self {
            mu,
            cov: sym,
            risk_free,
        })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn risk_free(&self) -> f64 {
        self.risk_free
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n() {
            return Err(Error::Dimension {
                what: "weights",
                expected: self.n(),
                got: w.len(),
            });
        }
        Ok(())
    }

    pub fn expected_return(&self, w: &[f64]) -> Result<f64> {
        self.check_len(w)?;
        Ok(w.iter().zip(&self.mu).map(|(w, m)| w * m).sum())
    }

    /// `wᵀ C w`, summing only over the nonzero weights.
    pub fn quadratic_form(&self, w: &[f64]) -> Result<f64> {
        self.check_len(w)?;
        let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] != 0.0).collect();
        let mut q = 0.0;
        for &i in &support {
            let mut row = 0.0;
            for &j in &support {
                row += self.cov[(i, j)] * w[j];
            }
            q += w[i] * row;
        }
        Ok(q)
    }

    pub fn volatility(&self, w: &[f64]) -> Result<f64> {
        let q = self.quadratic_form(w)?;
        if q < -QUAD_TOL {
            return Err(Error::NotPsd(q));
        }
        Ok(q.max(0.0).sqrt())
    }

    /// Modified Sharpe ratio of raw weights.
    pub fn modified_sharpe(&self, w: &[f64]) -> Result<f64> {
        let excess = self.expected_return(w)? - self.risk_free;
        let sigma = self.volatility(w)?;
        modified_sharpe_ratio(excess, sigma)
    }

    /// Minimization objective `-MSR(w)`.
    pub fn objective(&self, w: &[f64]) -> Result<f64> {
        Ok(-self.modified_sharpe(w)?)
    }
}

/// `excess / σ` for nonnegative excess, `excess · σ` otherwise.
///
/// `sign(0)` is taken as `+1`, so a zero excess return scores zero for any `σ`.
pub fn modified_sharpe_ratio(excess: f64, sigma: f64) -> Result<f64> {
    if excess > 0.0 {
        if sigma <= 0.0 {
            return Err(Error::UndefinedRatio);
        }
        Ok(excess / sigma)
    } else if excess == 0.0 {
        Ok(0.0)
    } else {
        Ok(excess * sigma)
    }
}

/// Cardinality, box, turnover and the current holdings a rebalance starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    k: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    turnover_cap: f64,
    x0: Vec<f64>,
}

impl ConstraintSpec {
    pub fn new(k: usize, lower: Vec<f64>, upper: Vec<f64>, turnover_cap: f64, x0: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        if n == 0 {
            return Err(Error::InvalidSpec("no assets".into()));
        }
        for (what, len) in [("upper bounds", upper.len()), ("x0", x0.len())] {
            if len != n {
                return Err(Error::Dimension {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        if k == 0 || k > n {
            return Err(Error::InvalidSpec(format!("cardinality k={k} outside 1..={n}")));
        }
        for i in 0..n {
            let (l, u) = (lower[i], upper[i]);
            if !(l > 0.0 && l < u && u <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "bounds for asset {i} must satisfy 0 < l < u <= 1 (l={l}, u={u})"
                )));
            }
        }
        if !(0.0..=1.0).contains(&turnover_cap) {
            return Err(Error::InvalidSpec(format!(
                "turnover cap {turnover_cap} outside [0, 1]"
            )));
        }
        if x0.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidSpec("x0 has negative or non-finite entries".into()));
        }
        let total: f64 = x0.iter().sum();
        if total != 0.0 && (total - 1.0).abs() > BUDGET_TOL {
            return Err(Error::InvalidSpec(format!(
                "x0 must be the zero vector or sum to one (sum {total})"
            )));
        }
        if crate::projection::find_certificate(k, &lower, &upper).is_none() {
            return Err(Error::InvalidSpec(
                "no support of size <= k can carry the budget inside its boxes".into(),
            ));
        }
        Ok(Self {
            k,
            lower,
            upper,
            turnover_cap,
            x0,
        })
    }

    /// Same bounds for every asset.
    pub fn uniform(n: usize, k: usize, l: f64, u: f64, turnover_cap: f64, x0: Vec<f64>) -> Result<Self> {
        Self::new(k, vec![l; n], vec![u; n], turnover_cap, x0)
    }

    /// No current holdings and unrestricted turnover.
    pub fn cold_start(k: usize, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        Self::new(k, lower, upper, 1.0, vec![0.0; n])
    }

    pub fn with_x0(&self, x0: Vec<f64>, turnover_cap: f64) -> Result<Self> {
        Self::new(self.k, self.lower.clone(), self.upper.clone(), turnover_cap, x0)
    }

    pub fn n(&self) -> usize {
        self.lower.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn turnover_cap(&self) -> f64 {
        self.turnover_cap
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn is_cold_start(&self) -> bool {
        self.x0.iter().all(|&v| v == 0.0)
    }
}

/// Long-only weight vector. The support is every strictly positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    weights: Vec<f64>,
}

impl Portfolio {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidModel(
                "portfolio weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|&w| w >= 0.0));
        Self { weights }
    }

    pub fn zeros(n: usize) -> Self {
        Self { weights: vec![0.0; n] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        support_of(&self.weights)
    }

    pub fn cardinality(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

pub(crate) fn support_of(w: &[f64]) -> Vec<usize> {
    (0..w.len()).filter(|&i| w[i] > 0.0).collect()
}

pub fn portfolio_return(m: &MarketModel, p: &Portfolio) -> Result<f64> {
    m.expected_return(p.weights())
}

pub fn portfolio_risk(m: &MarketModel, p: &Portfolio) -> Result<f64> {
    m.volatility(p.weights())
}

pub fn modified_sharpe(m: &MarketModel, p: &Portfolio) -> Result<f64> {
    m.modified_sharpe(p.weights())
}

pub fn objective(m: &MarketModel, p: &Portfolio) -> Result<f64> {
    m.objective(p.weights())
}

/// Per-constraint slack. Negative slack means the constraint is violated.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub budget_gap: f64,
    pub cardinality: usize,
    pub cardinality_slack: i64,
    /// Assets whose nonzero weight lies outside `[l_i, u_i]`.
    pub box_violations: Vec<usize>,
    pub turnover: f64,
    pub turnover_slack: f64,
}

impl FeasibilityReport {
    pub fn budget_ok(&self) -> bool {
        self.budget_gap <= BUDGET_TOL
    }

    pub fn cardinality_ok(&self) -> bool {
        self.cardinality_slack >= 0
    }

    pub fn box_ok(&self) -> bool {
        self.box_violations.is_empty()
    }

    pub fn turnover_ok(&self) -> bool {
        self.turnover_slack >= -TURNOVER_TOL
    }

    /// Budget, cardinality and box: membership in the projection target set.
    pub fn structural_ok(&self) -> bool {
        self.budget_ok() && self.cardinality_ok() && self.box_ok()
    }

    pub fn is_feasible(&self) -> bool {
        self.structural_ok() && self.turnover_ok()
    }
}

pub fn feasibility(spec: &ConstraintSpec, w: &[f64]) -> FeasibilityReport {
    let budget_gap = (w.iter().sum::<f64>() - 1.0).abs();
    let cardinality = w.iter().filter(|&&v| v > 0.0).count();
    let box_violations = (0..w.len())
        .filter(|&i| w[i] != 0.0 && (w[i] < spec.lower[i] - BOX_TOL || w[i] > spec.upper[i] + BOX_TOL))
        .collect();
    let turnover = turnover(w, spec.x0());
    FeasibilityReport {
        budget_gap,
        cardinality,
        cardinality_slack: spec.k as i64 - cardinality as i64,
        box_violations,
        turnover,
        turnover_slack: spec.turnover_cap - turnover,
    }
}

pub fn is_feasible(spec: &ConstraintSpec, p: &Portfolio) -> FeasibilityReport {
    feasibility(spec, p.weights())
}

/// `Σ|x_i - x0_i|`.
pub fn turnover(x: &[f64], x0: &[f64]) -> f64 {
    x.iter().zip(x0).map(|(a, b)| (a - b).abs()).sum()
}
