//! Projection onto the budget/box/cardinality set.
//!
//! The target set holds every weight vector with at most `k` nonzero
//! entries, each nonzero entry inside its `[l_i, u_i]` box, summing to one.
//! Support selection comes first (the `k` largest coordinates of the point),
//! then a box-constrained simplex projection on the chosen support via a
//! scalar shift `η`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{ConstraintSpec, Portfolio, BUDGET_TOL};

/// Residual accepted by [`solve_eta`].
pub const ETA_TOL: f64 = 1e-10;
const MAX_BISECTION_STEPS: usize = 200;

/// Indices of the `k` largest components of `y`, largest first.
///
/// Equal values are ordered by ascending index.
pub fn top_k_support(y: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > y.len() {
        return Err(Error::InvalidConfig(format!(
            "support size k={k} outside 1..={}",
            y.len()
        )));
    }
    let mut idx: Vec<usize> = (0..y.len()).collect();
    let by_value_desc = |a: &usize, b: &usize| y[*b].total_cmp(&y[*a]).then(a.cmp(b));
    if k < y.len() {
        idx.select_nth_unstable_by(k - 1, by_value_desc);
        idx.truncate(k);
    }
    idx.sort_by(by_value_desc);
    Ok(idx)
}

/// Componentwise clamp of `y` into `[l, u]`.
pub fn project_box(y: &[f64], l: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if l.len() != y.len() || u.len() != y.len() {
        return Err(Error::Dimension {
            what: "box bounds",
            expected: y.len(),
            got: l.len().min(u.len()),
        });
    }
    l.iter()
        .zip(u)
        .zip(y)
        .map(|((&l, &u), &y)| {
            if l > u {
                Err(Error::InvalidSpec(format!("box lower bound {l} above upper bound {u}")))
            } else {
                Ok(y.max(l).min(u))
            }
        })
        .collect()
}

fn shifted_mass(y: &[f64], l: &[f64], u: &[f64], eta: f64) -> f64 {
    y.iter()
        .zip(l.iter().zip(u))
        .map(|(&y, (&l, &u))| (y - eta).max(l).min(u))
        .sum()
}

/// Finds `η` with `Σ clamp(y_i - η, l_i, u_i) = 1`.
///
/// The mass function is piecewise linear and nonincreasing in `η`, with kinks
/// at `y_i - u_i` and `y_i - l_i`. Bisection over the sorted kinks isolates
/// the linear piece containing the root, which is then solved in closed form.
pub fn solve_eta(y: &[f64], l: &[f64], u: &[f64]) -> Result<f64> {
    let m = y.len();
    if l.len() != m || u.len() != m {
        return Err(Error::Dimension {
            what: "support bounds",
            expected: m,
            got: l.len().min(u.len()),
        });
    }
    let sum_l: f64 = l.iter().sum();
    let sum_u: f64 = u.iter().sum();
    if m == 0 || sum_l > 1.0 + ETA_TOL || sum_u < 1.0 - ETA_TOL {
        return Err(Error::InfeasibleSupport);
    }

    let mut kinks: Vec<f64> = Vec::with_capacity(2 * m);
    for i in 0..m {
        kinks.push(y[i] - u[i]);
        kinks.push(y[i] - l[i]);
    }
    kinks.sort_by(f64::total_cmp);

    // Mass is Σu at the first kink and Σl at the last one.
    let (mut lo, mut hi) = (0usize, kinks.len() - 1);
    let mut steps = 0;
    while hi - lo > 1 && steps < MAX_BISECTION_STEPS {
        let mid = (lo + hi) / 2;
        if shifted_mass(y, l, u, kinks[mid]) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let (a, b) = (kinks[lo], kinks[hi]);
    let ga = shifted_mass(y, l, u, a);
    let gb = shifted_mass(y, l, u, b);
    let eta = if ga - gb > 0.0 {
        // linear between the two kinks
        a + (ga - 1.0) * (b - a) / (ga - gb)
    } else {
        a
    };
    let eta = polish_eta(y, l, u, eta);
    let residual = (shifted_mass(y, l, u, eta) - 1.0).abs();
    if residual > ETA_TOL {
        return Err(Error::InfeasibleSupport);
    }
    Ok(eta)
}

/// One Newton step on the current linear piece to absorb rounding.
fn polish_eta(y: &[f64], l: &[f64], u: &[f64], eta: f64) -> f64 {
    let g = shifted_mass(y, l, u, eta);
    let free = y
        .iter()
        .zip(l.iter().zip(u))
        .filter(|(&y, (&l, &u))| {
            let v = y - eta;
            v > l && v < u
        })
        .count();
    if free == 0 {
        eta
    } else {
        eta + (g - 1.0) / free as f64
    }
}

/// The budget/box/cardinality set for one constraint specification.
#[derive(Debug, Clone)]
pub struct FeasibleSetB {
    k: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    certificate: Vec<usize>,
}

/// Result of [`FeasibleSetB::project`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub portfolio: Portfolio,
    /// No prefix of the top-`k` support could carry the budget, so the
    /// construction-time certificate support was used instead.
    pub fallback: bool,
}

impl FeasibleSetB {
    pub fn new(spec: &ConstraintSpec) -> Result<Self> {
        Self::from_bounds(spec.k(), spec.lower().to_vec(), spec.upper().to_vec())
    }

    pub fn from_bounds(k: usize, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        if upper.len() != n {
            return Err(Error::Dimension {
                what: "upper bounds",
                expected: n,
                got: upper.len(),
            });
        }
        if k == 0 || k > n {
            return Err(Error::InvalidSpec(format!("cardinality k={k} outside 1..={n}")));
        }
        let certificate = find_certificate(k, &lower, &upper).ok_or_else(|| {
            Error::InvalidSpec("no support of size <= k can carry the budget inside its boxes".into())
        })?;
        Ok(Self {
            k,
            lower,
            upper,
            certificate,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// A support known to admit a point of the set.
    pub fn certificate(&self) -> &[usize] {
        &self.certificate
    }

    fn place(&self, y: &[f64], support: &[usize]) -> Result<(Vec<f64>, f64)> {
        let ys: Vec<f64> = support.iter().map(|&i| y[i]).collect();
        let ls: Vec<f64> = support.iter().map(|&i| self.lower[i]).collect();
        let us: Vec<f64> = support.iter().map(|&i| self.upper[i]).collect();
        let eta = solve_eta(&ys, &ls, &us)?;
        let mut x = vec![0.0; y.len()];
        let mut cost = 0.0;
        for (j, &i) in support.iter().enumerate() {
            let v = (ys[j] - eta).max(ls[j]).min(us[j]);
            x[i] = v;
            cost += (v - ys[j]) * (v - ys[j]) - ys[j] * ys[j];
        }
        Ok((x, cost))
    }

    /// Orthogonal projection of `y`.
    ///
    /// Candidate supports are the prefixes of the top-`k` index set. With
    /// equal bounds across assets, an exchange argument shows the nearest
    /// point of each support size sits on the largest coordinates, so the
    /// best prefix is the exact projection. Prefixes that cannot carry the
    /// budget are skipped.
    pub fn project(&self, y: &[f64]) -> Result<Projection> {
        if y.len() != self.n() {
            return Err(Error::Dimension {
                what: "point",
                expected: self.n(),
                got: y.len(),
            });
        }
        let order = top_k_support(y, self.k)?;
        let mut best: Option<(Vec<f64>, f64)> = None;
        let (mut sum_l, mut sum_u) = (0.0, 0.0);
        for m in 1..=order.len() {
            let i = order[m - 1];
            sum_l += self.lower[i];
            sum_u += self.upper[i];
            if sum_l > 1.0 + ETA_TOL {
                break;
            }
            if sum_u < 1.0 - ETA_TOL {
                continue;
            }
            // cost relative to the all-zero point: Σ_S (x-y)² - y²
            let (x, cost) = self.place(y, &order[..m])?;
            if best.as_ref().is_none_or(|(_, c)| cost < *c) {
                best = Some((x, cost));
            }
        }
        let (x, fallback) = match best {
            Some((x, _)) => (x, false),
            None => (self.place(y, &self.certificate)?.0, true),
        };
        Ok(Projection {
            portfolio: Portfolio::from_raw(x),
            fallback,
        })
    }
}

/// Tries a few greedy orderings for a support with `Σl ≤ 1 ≤ Σu`.
pub(crate) fn find_certificate(k: usize, lower: &[f64], upper: &[f64]) -> Option<Vec<usize>> {
    let n = lower.len();
    let orderings: [&dyn Fn(&usize, &usize) -> Ordering; 3] = [
        &|a, b| upper[*b].total_cmp(&upper[*a]).then(a.cmp(b)),
        &|a, b| {
            (upper[*b] - lower[*b])
                .total_cmp(&(upper[*a] - lower[*a]))
                .then(a.cmp(b))
        },
        &|a, b| {
            (upper[*b] / lower[*b])
                .total_cmp(&(upper[*a] / lower[*a]))
                .then(a.cmp(b))
        },
    ];
    for cmp in orderings {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(cmp);
        let (mut sl, mut su) = (0.0, 0.0);
        for (m, &i) in idx.iter().enumerate().take(k) {
            sl += lower[i];
            su += upper[i];
            if sl > 1.0 + BUDGET_TOL {
                break;
            }
            if su >= 1.0 - BUDGET_TOL {
                let mut s = idx[..=m].to_vec();
                s.sort_unstable();
                return Some(s);
            }
        }
    }
    None
}

/// Convenience wrapper returning only the projected portfolio.
pub fn project_onto_b(set: &FeasibleSetB, y: &[f64]) -> Result<Portfolio> {
    Ok(set.project(y)?.portfolio)
}

/// Selection indicator of a portfolio: 1 on the support, 0 elsewhere.
pub fn reconstruct_delta(p: &Portfolio) -> Vec<f64> {
    p.weights().iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::feasibility;
    use crate::oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn top_k_examples() {
        let y = [0.3, 0.1, 0.5, -0.2];
        assert_eq!(top_k_support(&y, 2).unwrap(), vec![2, 0]);
        // enumerate all six pairs: the winner minimizes the distance
        let brute = oracle::best_support_unbounded(&y, 2);
        assert_eq!(sorted(top_k_support(&y, 2).unwrap()), brute);

        assert_eq!(top_k_support(&[0.2; 4], 2).unwrap(), vec![0, 1]);
        assert_eq!(sorted(top_k_support(&y, 4).unwrap()), vec![0, 1, 2, 3]);
        assert!(top_k_support(&y, 0).is_err());
        assert!(top_k_support(&y, 5).is_err());
    }

    #[test]
    fn box_examples() {
        let l = [0.0, 0.0];
        let u = [1.0, 1.0];
        assert_eq!(project_box(&[0.2, 0.7], &l, &u).unwrap(), vec![0.2, 0.7]);
        assert_eq!(project_box(&[-1.0, 2.0], &l, &u).unwrap(), vec![0.0, 1.0]);
        assert_eq!(project_box(&[0.05], &[0.1], &[0.6]).unwrap(), vec![0.1]);
        assert!(project_box(&[0.5], &[0.6], &[0.1]).is_err());
    }

    #[test]
    fn eta_examples() {
        let eta = solve_eta(&[0.5, 0.4], &[0.1, 0.1], &[0.6, 0.6]).unwrap();
        assert!((eta + 0.05).abs() < 1e-12);
        let eta = solve_eta(&[0.7], &[0.0], &[1.0]).unwrap();
        assert!((eta + 0.3).abs() < 1e-12);
        let eta = solve_eta(&[0.3, 0.3, 0.4], &[0.1; 3], &[0.6; 3]).unwrap();
        assert!(eta.abs() < 1e-12);
        assert!(matches!(
            solve_eta(&[0.5, 0.5], &[0.6, 0.6], &[0.9, 0.9]),
            Err(Error::InfeasibleSupport)
        ));
        assert!(matches!(
            solve_eta(&[0.5], &[0.1], &[0.6]),
            Err(Error::InfeasibleSupport)
        ));
    }

    #[test]
    fn eta_residual_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let m = rng.gen_range(1..30);
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let l: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0 / m as f64)).collect();
            let u: Vec<f64> = l.iter().map(|&l| l + rng.gen_range(0.0..1.0)).collect();
            if u.iter().sum::<f64>() < 1.0 {
                continue;
            }
            let eta = solve_eta(&y, &l, &u).unwrap();
            assert!((shifted_mass(&y, &l, &u, eta) - 1.0).abs() <= ETA_TOL);
        }
    }

    fn set(n: usize, k: usize, l: f64, u: f64) -> FeasibleSetB {
        FeasibleSetB::from_bounds(k, vec![l; n], vec![u; n]).unwrap()
    }

    #[test]
    fn projection_examples() {
        let b = set(3, 2, 0.1, 0.6);
        let x = b.project(&[0.5, 0.4, 0.2]).unwrap();
        assert!(!x.fallback);
        let w = x.portfolio.weights();
        assert!((w[0] - 0.55).abs() < 1e-12 && (w[1] - 0.45).abs() < 1e-12 && w[2] == 0.0);
        let brute = oracle::brute_force_projection(&[0.5, 0.4, 0.2], 2, &[0.1; 3], &[0.6; 3]);
        assert!(oracle::distance(w, &brute) < 1e-9);

        // already inside the set
        let y = [0.4, 0.0, 0.6];
        let w = b.project(&y).unwrap().portfolio;
        assert!(oracle::distance(w.weights(), &y) < 1e-12);

        // all-negative point: the top-k prefixes still carry the budget
        let b4 = set(4, 2, 0.1, 0.6);
        let y = [-0.4, -0.1, -0.3, -0.2];
        let w = b4.project(&y).unwrap().portfolio;
        let spec = ConstraintSpec::uniform(4, 2, 0.1, 0.6, 1.0, vec![0.0; 4]).unwrap();
        assert!(feasibility(&spec, w.weights()).structural_ok());
        assert_eq!(w.support(), vec![1, 3]);
    }

    #[test]
    fn small_positive_coordinate_is_dropped() {
        // forcing the tiny coordinate up to its lower bound costs more than
        // leaving it out
        let b = set(3, 3, 0.05, 0.8);
        let y = [0.5, 0.5, 0.001];
        let w = b.project(&y).unwrap().portfolio;
        assert_eq!(w.support(), vec![0, 1]);
        let brute = oracle::brute_force_projection(&y, 3, &[0.05; 3], &[0.8; 3]);
        assert!(oracle::distance(w.weights(), &brute) < 1e-9);
    }

    #[test]
    fn nonuniform_bounds_use_certificate_when_needed() {
        // the top-1 coordinate cannot hold the budget and k = 1
        let b = FeasibleSetB::from_bounds(1, vec![0.1, 0.5], vec![0.5, 1.0]).unwrap();
        let p = b.project(&[0.9, 0.1]).unwrap();
        assert!(p.fallback);
        assert_eq!(p.portfolio.weights(), &[0.0, 1.0]);
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(FeasibleSetB::from_bounds(2, vec![0.1; 3], vec![0.4; 3]).is_err());
    }

    #[test]
    fn reconstruct_delta_examples() {
        let p = Portfolio::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert_eq!(reconstruct_delta(&p), vec![1.0, 1.0, 0.0]);
        assert_eq!(reconstruct_delta(&Portfolio::zeros(3)), vec![0.0; 3]);
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(
            y in proptest::collection::vec(-1.0f64..1.0, 8),
            k in 3usize..8,
        ) {
            let b = set(8, k, 0.05, 0.4);
            let spec = ConstraintSpec::uniform(8, k, 0.05, 0.4, 1.0, vec![0.0; 8]).unwrap();
            let once = b.project(&y).unwrap();
            prop_assert!(!once.fallback);
            prop_assert!(feasibility(&spec, once.portfolio.weights()).structural_ok());
            let twice = b.project(once.portfolio.weights()).unwrap();
            prop_assert!(oracle::distance(once.portfolio.weights(), twice.portfolio.weights()) < 1e-9);
        }

        #[test]
        fn top_k_dominates_outside(y in proptest::collection::vec(-5.0f64..5.0, 2..20), kf in 0.0f64..1.0) {
            let k = 1 + ((y.len() - 1) as f64 * kf) as usize;
            let s = top_k_support(&y, k).unwrap();
            prop_assert_eq!(s.len(), k);
            let min_in = s.iter().map(|&i| y[i]).fold(f64::INFINITY, f64::min);
            for i in 0..y.len() {
                if !s.contains(&i) {
                    prop_assert!(y[i] <= min_in);
                }
            }
        }
    }
}
