//! Brute-force reference computations for tests.
//!
//! Everything here is deliberately naive and shares no code with the
//! solver paths it is used to check.

use crate::model::MarketModel;

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// All subsets of `0..n` with exactly `k` elements, in lexicographic order.
pub fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `½‖x_K - y‖²` minimized over `x_i ≥ 0` on `K`, zero elsewhere.
pub fn unbounded_support_cost(y: &[f64], support: &[usize]) -> f64 {
    let mut c = 0.0;
    for (i, &v) in y.iter().enumerate() {
        if support.contains(&i) {
            let x = v.max(0.0);
            c += 0.5 * (x - v) * (x - v);
        } else {
            c += 0.5 * v * v;
        }
    }
    c
}

/// Minimal cost over every support of size `k`.
pub fn min_unbounded_support_cost(y: &[f64], k: usize) -> f64 {
    subsets_of_size(y.len(), k)
        .iter()
        .map(|s| unbounded_support_cost(y, s))
        .fold(f64::INFINITY, f64::min)
}

/// First support of size `k` reaching the minimal cost.
pub fn best_support_unbounded(y: &[f64], k: usize) -> Vec<usize> {
    let mut best = (f64::INFINITY, Vec::new());
    for s in subsets_of_size(y.len(), k) {
        let c = unbounded_support_cost(y, &s);
        if c < best.0 {
            best = (c, s);
        }
    }
    best.1
}

/// Plain real-line bisection for `Σ clamp(y_i - η, l_i, u_i) = 1`.
fn bisect_shift(y: &[f64], l: &[f64], u: &[f64]) -> Option<f64> {
    let sl: f64 = l.iter().sum();
    let su: f64 = u.iter().sum();
    if sl > 1.0 || su < 1.0 {
        return None;
    }
    let mass = |eta: f64| -> f64 { (0..y.len()).map(|i| (y[i] - eta).max(l[i]).min(u[i])).sum() };
    let mut lo = (0..y.len()).map(|i| y[i] - u[i]).fold(f64::INFINITY, f64::min);
    let mut hi = (0..y.len()).map(|i| y[i] - l[i]).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Nearest point with at most `k` nonzeros, boxes on the support, unit sum:
/// enumerate every support and solve the shift on each.
pub fn brute_force_projection(y: &[f64], k: usize, l: &[f64], u: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best = (f64::INFINITY, vec![0.0; n]);
    for m in 1..=k {
        for s in subsets_of_size(n, m) {
            let ys: Vec<f64> = s.iter().map(|&i| y[i]).collect();
            let ls: Vec<f64> = s.iter().map(|&i| l[i]).collect();
            let us: Vec<f64> = s.iter().map(|&i| u[i]).collect();
            let Some(eta) = bisect_shift(&ys, &ls, &us) else {
                continue;
            };
            let mut x = vec![0.0; n];
            for (j, &i) in s.iter().enumerate() {
                x[i] = (ys[j] - eta).max(ls[j]).min(us[j]);
            }
            let d = distance(&x, y);
            if d < best.0 {
                best = (d, x);
            }
        }
    }
    best.1
}

/// Highest modified Sharpe ratio over all supports of size `1..=k` with
/// boxed weights summing to one, by grid search plus coordinate pattern
/// search on each support. Returns `(msr, weights)`.
pub fn exhaustive_best_msr(model: &MarketModel, k: usize, l: &[f64], u: &[f64], grid: usize) -> (f64, Vec<f64>) {
    let n = model.n();
    let msr = |w: &[f64]| -> f64 {
        let ret: f64 = w.iter().zip(model.mu()).map(|(a, b)| a * b).sum::<f64>() - model.risk_free();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += w[i] * model.cov()[(i, j)] * w[j];
            }
        }
        let s = q.max(0.0).sqrt();
        if ret >= 0.0 {
            if s == 0.0 {
                f64::INFINITY
            } else {
                ret / s
            }
        } else {
            ret * s
        }
    };
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    for m in 1..=k {
        for s in subsets_of_size(n, m) {
            if s.iter().map(|&i| l[i]).sum::<f64>() > 1.0 || s.iter().map(|&i| u[i]).sum::<f64>() < 1.0 {
                continue;
            }
            // grid over the first m-1 coordinates, last one takes the rest
            let mut cand: Option<(f64, Vec<f64>)> = None;
            let mut counters = vec![0usize; m.saturating_sub(1)];
            loop {
                let mut w = vec![0.0; n];
                let mut used = 0.0;
                let mut ok = true;
                for (j, &c) in counters.iter().enumerate() {
                    let i = s[j];
                    let v = l[i] + (u[i] - l[i]) * c as f64 / grid as f64;
                    w[i] = v;
                    used += v;
                }
                let last = s[m - 1];
                let rest = 1.0 - used;
                if rest < l[last] - 1e-12 || rest > u[last] + 1e-12 {
                    ok = false;
                }
                w[last] = rest;
                if ok {
                    let v = msr(&w);
                    if cand.as_ref().is_none_or(|(b, _)| v > *b) {
                        cand = Some((v, w));
                    }
                }
                // odometer
                let mut pos = 0;
                loop {
                    if pos == counters.len() {
                        break;
                    }
                    counters[pos] += 1;
                    if counters[pos] > grid {
                        counters[pos] = 0;
                        pos += 1;
                    } else {
                        break;
                    }
                }
                if pos == counters.len() {
                    break;
                }
            }
            let Some((mut val, mut w)) = cand else { continue };
            // pattern search: move mass between support pairs
            let mut step = 1.0 / grid as f64;
            while step > 1e-10 {
                let mut improved = false;
                for &a in &s {
                    for &b in &s {
                        if a == b {
                            continue;
                        }
                        let mut t = w.clone();
                        t[a] += step;
                        t[b] -= step;
                        if t[a] > u[a] || t[b] < l[b] {
                            continue;
                        }
                        let v = msr(&t);
                        if v > val {
                            val = v;
                            w = t;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            if val > best.0 {
                best = (val, w);
            }
        }
    }
    best
}
