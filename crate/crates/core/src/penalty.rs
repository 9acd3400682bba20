//! Constraint handling: turnover violation, the self-adaptive penalty used
//! after projection, and the exact ℓ1 penalty with its adaptive weights.

use crate::error::{Error, Result};
use crate::model::{turnover, ConstraintSpec, BOX_TOL, BUDGET_TOL, TURNOVER_TOL};

/// `Σ|x_i - x0_i| - TR`; nonpositive exactly when the turnover cap holds.
pub fn turnover_violation(x: &[f64], spec: &ConstraintSpec) -> f64 {
    turnover(x, spec.x0()) - spec.turnover_cap()
}

/// One evaluated point offered to [`HybridPenaltyState::penalize`].
#[derive(Debug, Clone, Copy)]
pub struct PenaltyInput<'a> {
    pub x: &'a [f64],
    pub f: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub weights: Vec<f64>,
    pub f: f64,
}

/// Normalization bounds of the last penalized set plus the best
/// turnover-feasible point seen so far.
#[derive(Debug, Clone, Default)]
pub struct HybridPenaltyState {
    pub f_min: f64,
    pub f_max: f64,
    pub psi_max: f64,
    pub feasibility_ratio: f64,
    reference: Option<Reference>,
}

impl HybridPenaltyState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    /// True until the first turnover-feasible point has been seen.
    pub fn is_bootstrap(&self) -> bool {
        self.reference.is_none()
    }

    fn normalize(&self, f: f64) -> f64 {
        let span = self.f_max - self.f_min;
        if span > 0.0 {
            (f - self.f_min) / span
        } else {
            0.0
        }
    }

    /// Penalized fitness of every point in `set`.
    ///
    /// Feasible points score their normalized objective. Infeasible points
    /// add `R_f · Ψ` to either the reference point's normalized objective
    /// (when they look better than it) or their own.
    pub fn penalize(&mut self, set: &[PenaltyInput<'_>]) -> Result<Vec<f64>> {
        if set.is_empty() {
            return Err(Error::EmptyGeneration);
        }
        let mut f_min = f64::INFINITY;
        let mut f_max = f64::NEG_INFINITY;
        let mut psi_max = 0.0f64;
        let mut feasible = 0usize;
        let mut best_feasible: Option<&PenaltyInput<'_>> = None;
        for p in set {
            f_min = f_min.min(p.f);
            f_max = f_max.max(p.f);
            if p.psi <= 0.0 {
                feasible += 1;
                if best_feasible.is_none_or(|b| p.f < b.f) {
                    best_feasible = Some(p);
                }
            } else {
                psi_max = psi_max.max(p.psi);
            }
        }
        self.f_min = f_min;
        self.f_max = f_max;
        self.psi_max = psi_max;
        self.feasibility_ratio = feasible as f64 / set.len() as f64;
        if let Some(b) = best_feasible {
            if self.reference.as_ref().is_none_or(|r| b.f < r.f) {
                self.reference = Some(Reference {
                    weights: b.x.to_vec(),
                    f: b.f,
                });
            }
        }

        let (f_ref, f_hat_ref) = match &self.reference {
            Some(r) => (r.f, self.normalize(r.f).clamp(0.0, 1.0)),
            None => (f_max, 1.0),
        };
        let rf = self.feasibility_ratio;
        Ok(set
            .iter()
            .map(|p| {
                if p.psi <= 0.0 {
                    return self.normalize(p.f);
                }
                let violation = if psi_max > 0.0 { p.psi.max(0.0) / psi_max } else { 0.0 };
                if p.f <= f_ref {
                    f_hat_ref + rf * violation
                } else {
                    self.normalize(p.f) + rf * violation
                }
            })
            .collect())
    }
}

/// Free function form of [`HybridPenaltyState::penalize`].
pub fn hybrid_penalize(set: &[PenaltyInput<'_>], state: &mut HybridPenaltyState) -> Result<Vec<f64>> {
    state.penalize(set)
}

pub const EPS0_MIN: f64 = 1e-15;
pub const EPS0_MAX: f64 = 1.0;
pub const EPS_MIN: f64 = 1e-4;
pub const EPS_MAX: f64 = 1e4;
pub const EPS0_PERIOD: usize = 5;
pub const EPS_PERIOD: usize = 10;

/// Budget gap, cardinality excess, lower-box shortfall, upper-box excess,
/// binarity defect and turnover excess.
///
/// Residuals within the tolerances of [`feasibility`](crate::model::feasibility)
/// count as zero, so every feasible point has no violation at all.
pub fn l1_violations(x: &[f64], delta: &[f64], spec: &ConstraintSpec) -> [f64; 6] {
    let (l, u) = (spec.lower(), spec.upper());
    let past = |v: f64, tol: f64| if v > tol { v } else { 0.0 };
    let budget = past((x.iter().sum::<f64>() - 1.0).abs(), BUDGET_TOL);
    let card = (delta.iter().sum::<f64>() - spec.k() as f64).max(0.0);
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut binarity = 0.0;
    for i in 0..x.len() {
        lower += past(delta[i] * l[i] - x[i], BOX_TOL);
        upper += past(x[i] - delta[i] * u[i], BOX_TOL);
        binarity += (delta[i] * (1.0 - delta[i])).abs();
    }
    let turnover = past(turnover_violation(x, spec), TURNOVER_TOL);
    [budget, card, lower, upper, binarity, turnover]
}

/// `f + (1/ε₀)·Σ ε_i·CV_i`.
pub fn l1_penalty(f: f64, cv: &[f64; 6], eps: &[f64; 7]) -> f64 {
    let weighted: f64 = cv.iter().zip(&eps[1..]).map(|(c, e)| c * e).sum();
    f + weighted / eps[0]
}

/// How the ε₀ schedule decides that the objective improved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImprovementTest {
    /// Shrink when `f_prev - f_curr > 0.1·|f_prev|`; sign-safe for negative objectives.
    #[default]
    Relative,
    /// Shrink when `f_curr < 0.9·f_prev` as written.
    Literal,
}

pub fn update_eps0(eps0: f64, f_curr: f64, f_prev: f64, test: ImprovementTest) -> f64 {
    let strong_decrease = match test {
        ImprovementTest::Literal => f_curr < 0.9 * f_prev,
        ImprovementTest::Relative => f_prev - f_curr > 0.1 * f_prev.abs(),
    };
    if f_curr >= f_prev {
        (3.0 * eps0).min(EPS0_MAX)
    } else if strong_decrease {
        (0.6 * eps0).max(EPS0_MIN)
    } else {
        eps0
    }
}

pub fn update_eps_i(eps_i: f64, cv_curr: f64, cv_prev: f64) -> f64 {
    if cv_curr > 0.95 * cv_prev {
        (2.0 * eps_i).min(EPS_MAX)
    } else if cv_curr < 0.9 * cv_prev {
        (0.5 * eps_i).max(EPS_MIN)
    } else {
        eps_i
    }
}

/// Adaptive ε weights of the ℓ1 penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct L1PenaltyState {
    pub eps: [f64; 7],
    pub cv_prev: [f64; 6],
    pub f_prev: Option<f64>,
    pub test: ImprovementTest,
}

impl Default for L1PenaltyState {
    fn default() -> Self {
        Self::new(ImprovementTest::default())
    }
}

impl L1PenaltyState {
    pub fn new(test: ImprovementTest) -> Self {
        Self {
            eps: [1e-4, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            cv_prev: [0.0; 6],
            f_prev: None,
            test,
        }
    }

    pub fn penalty(&self, f: f64, cv: &[f64; 6]) -> f64 {
        l1_penalty(f, cv, &self.eps)
    }

    /// Records generation `g` and applies the ε₀ update every 5 generations
    /// and the ε_i updates every 10.
    pub fn observe(&mut self, g: usize, f_curr: f64, cv_curr: [f64; 6]) {
        if let Some(f_prev) = self.f_prev {
            if g >= 1 && g.is_multiple_of(EPS0_PERIOD) {
                self.eps[0] = update_eps0(self.eps[0], f_curr, f_prev, self.test);
            }
            if g >= 1 && g.is_multiple_of(EPS_PERIOD) {
                for i in 0..6 {
                    self.eps[i + 1] = update_eps_i(self.eps[i + 1], cv_curr[i], self.cv_prev[i]);
                }
            }
        }
        self.f_prev = Some(f_curr);
        self.cv_prev = cv_curr;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitRefine {
    pub delta: Vec<f64>,
    pub x: Vec<f64>,
    /// No coordinate was inside its box; `x` is returned unchanged.
    pub degenerate: bool,
}

/// Selection from in-box coordinates, then renormalization onto the selection.
pub fn split_refine(x: &[f64], spec: &ConstraintSpec) -> SplitRefine {
    let (l, u) = (spec.lower(), spec.upper());
    let delta: Vec<f64> = (0..x.len())
        .map(|i| if x[i] >= l[i] && x[i] <= u[i] { 1.0 } else { 0.0 })
        .collect();
    let mass: f64 = x.iter().zip(&delta).map(|(a, d)| a * d).sum();
    if mass > 0.0 {
        SplitRefine {
            x: x.iter().zip(&delta).map(|(a, d)| a * d / mass).collect(),
            delta,
            degenerate: false,
        }
    } else {
        let top = (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a)));
        let mut delta = vec![0.0; x.len()];
        if let Some(i) = top {
            delta[i] = 1.0;
        }
        SplitRefine {
            delta,
            x: x.to_vec(),
            degenerate: true,
        }
    }
}
