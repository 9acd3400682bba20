//! Level-1 mutation: a generalized multi-swap that moves weight to unused
//! assets and a shrinking-window refinement of the held weights.

use rand::seq::index::sample;
use rand::Rng;

use crate::model::ConstraintSpec;

/// Which way the swap probability moves with the generation counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwapGate {
    /// Swap with probability `1 - p_swap(g)`: mostly swaps early, mostly refinement late.
    #[default]
    Decaying,
    /// Swap with probability `p_swap(g)` as the logistic is written.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutationConfig {
    pub k_max_swap: usize,
    pub g_max: usize,
    pub gate: SwapGate,
}

impl MutationConfig {
    pub fn new(k: usize, g_max: usize) -> Self {
        Self {
            k_max_swap: default_k_max_swap(k),
            g_max,
            gate: SwapGate::default(),
        }
    }
}

/// `⌊0.05·k⌋`, but never below one.
pub fn default_k_max_swap(k: usize) -> usize {
    (k / 20).max(1)
}

pub fn p_swap(g: usize) -> f64 {
    1.0 / (1.0 + (-0.005 * g as f64).exp())
}

/// Probability that the swap branch runs at generation `g`.
pub fn swap_probability(g: usize, gate: SwapGate) -> f64 {
    match gate {
        SwapGate::Logistic => p_swap(g),
        SwapGate::Decaying => 1.0 - p_swap(g),
    }
}

/// Affine image of `x_b ∈ [l_b, u_b]` in `[l_a, u_a]`.
pub fn swap_value(x_b: f64, l_b: f64, u_b: f64, l_a: f64, u_a: f64) -> f64 {
    let rel = ((x_b - l_b) / (u_b - l_b)).clamp(0.0, 1.0);
    l_a + rel * (u_a - l_a)
}

/// Moves `k_swap ∈ {1..k_max_swap}` held positions to distinct empty ones.
/// Returns the input unchanged when there is nothing to swap.
pub fn swap_mutation<R: Rng + ?Sized>(x: &[f64], spec: &ConstraintSpec, k_max_swap: usize, rng: &mut R) -> Vec<f64> {
    let zeros: Vec<usize> = (0..x.len()).filter(|&i| x[i] == 0.0).collect();
    let held: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    let cap = k_max_swap.max(1).min(zeros.len()).min(held.len());
    if cap == 0 {
        return x.to_vec();
    }
    let k_swap = rng.gen_range(1..=cap);
    let into = sample(rng, zeros.len(), k_swap);
    let out_of = sample(rng, held.len(), k_swap);
    let (l, u) = (spec.lower(), spec.upper());
    let mut y = x.to_vec();
    for (ai, bi) in into.iter().zip(out_of.iter()) {
        let (a, b) = (zeros[ai], held[bi]);
        y[a] = swap_value(x[b], l[b], u[b], l[a], u[a]);
        y[b] = 0.0;
    }
    y
}

/// Half-width of the refinement window at generation `g`.
pub fn refine_window(g: usize, g_max: usize, l: f64, u: f64) -> f64 {
    (1.0 - g as f64 / (g_max as f64 + 1.0)) * (u - l)
}

/// Resamples every held weight inside its shrinking window, intersected with its box.
pub fn refine_mutation<R: Rng + ?Sized>(
    x: &[f64],
    spec: &ConstraintSpec,
    g: usize,
    g_max: usize,
    rng: &mut R,
) -> Vec<f64> {
    let (l, u) = (spec.lower(), spec.upper());
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            if xi <= 0.0 {
                return 0.0;
            }
            let d = refine_window(g, g_max, l[i], u[i]);
            let lo = (xi - d).max(l[i]);
            let hi = (xi + d).min(u[i]);
            // a held weight slightly outside its box leaves an empty window
            if lo < hi {
                rng.gen_range(lo..=hi)
            } else {
                xi.clamp(l[i], u[i])
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Swap,
    Refine,
}

/// One gate draw, then exactly one branch. Budget is not restored here.
pub fn mutate<R: Rng + ?Sized>(
    x: &[f64],
    spec: &ConstraintSpec,
    cfg: &MutationConfig,
    g: usize,
    rng: &mut R,
) -> (Vec<f64>, Branch) {
    if rng.gen::<f64>() <= swap_probability(g, cfg.gate) {
        (swap_mutation(x, spec, cfg.k_max_swap, rng), Branch::Swap)
    } else {
        (refine_mutation(x, spec, g, cfg.g_max, rng), Branch::Refine)
    }
}
