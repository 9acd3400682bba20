//! Level-based learning swarm: configuration, the per-generation operators,
//! the initializer and the drivers.

mod init;
mod pso;
mod run;

pub use init::{initialize_positions, initialize_swarm, neighbourhood_particle, random_feasible_seed};
pub use pso::coefficients as pso_coefficients;
pub use run::{run, run_from, Particle, RunResult, TraceRow};

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::mutation::SwapGate;
use crate::penalty::ImprovementTest;

/// Level pool used by the static-level mode.
pub const DEFAULT_LEVEL_POOL: [usize; 6] = [4, 6, 8, 10, 20, 50];

/// Which swarm update drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Adaptive level count and φ.
    #[default]
    Allso,
    /// Level count drawn from a fixed pool each generation, constant φ.
    Dllso,
    /// Global-best PSO with linearly varying coefficients.
    Pso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Handler {
    /// Projection onto B plus the self-adaptive turnover penalty.
    #[default]
    Hybrid,
    /// Exact ℓ1 penalty with split-and-refine, no projection.
    L1,
}

/// Denominator of the aggregation indicator and the relative improvement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndicatorForm {
    /// `|f_gbest| + ξ`, which keeps the sign meaningful for negative objectives.
    #[default]
    Absolute,
    /// `f_gbest + ξ` as written.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub np: usize,
    pub nl_min: usize,
    pub nl_max: usize,
    pub nl_init: usize,
    pub delta_bar: f64,
    pub px: f64,
    pub xi: f64,
    pub g_max: usize,
    /// φ for the static-level mode.
    pub phi_fixed: f64,
    pub level_pool: Vec<usize>,
    pub seed: u64,
    pub d_min: f64,
    pub d_max: f64,
    /// Velocity bound as a multiple of the upper box bound.
    pub v_max_scale: f64,
    pub indicator: IndicatorForm,
    pub algorithm: Algorithm,
    pub handler: Handler,
    pub mutation: bool,
    pub swap_gate: SwapGate,
    pub eps0_test: ImprovementTest,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            np: 500,
            nl_min: 2,
            nl_max: 50,
            nl_init: 20,
            delta_bar: 0.01,
            px: 0.01,
            xi: 1e-6,
            g_max: 2000,
            phi_fixed: 0.4,
            level_pool: DEFAULT_LEVEL_POOL.to_vec(),
            seed: 0,
            d_min: 0.0005,
            d_max: 0.005,
            v_max_scale: 1.0,
            indicator: IndicatorForm::default(),
            algorithm: Algorithm::default(),
            handler: Handler::default(),
            mutation: true,
            swap_gate: SwapGate::default(),
            eps0_test: ImprovementTest::default(),
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.np < 2 {
            return bad("population size must be at least 2");
        }
        if !(2 <= self.nl_min && self.nl_min <= self.nl_max && self.nl_max <= self.np) {
            return bad("level bounds must satisfy 2 <= nl_min <= nl_max <= np");
        }
        if self.nl_init < self.nl_min || self.nl_init > self.nl_max {
            return bad("initial level count must lie in [nl_min, nl_max]");
        }
        if !(self.delta_bar > 0.0) {
            return bad("delta_bar must be positive");
        }
        if !(0.0..=1.0).contains(&self.px) {
            return bad("px must lie in [0, 1]");
        }
        if !(self.xi > 0.0) {
            return bad("xi must be positive");
        }
        if !(0.0..=1.0).contains(&self.phi_fixed) {
            return bad("phi must lie in [0, 1]");
        }
        if self.algorithm == Algorithm::Dllso && !self.level_pool.iter().any(|&l| (2..=self.np).contains(&l)) {
            return bad("level pool has no usable entry for this population size");
        }
        if !(0.0 <= self.d_min && self.d_min < self.d_max) {
            return bad("need 0 <= d_min < d_max");
        }
        if !(self.v_max_scale > 0.0) {
            return bad("v_max_scale must be positive");
        }
        if self.algorithm == Algorithm::Pso && self.mutation {
            return bad("the PSO baseline has no level 1 to mutate; set mutation = off");
        }
        Ok(())
    }

    /// Short label such as `ALLSO-MUT-H`.
    pub fn label(&self) -> String {
        let alg = match self.algorithm {
            Algorithm::Allso => "ALLSO",
            Algorithm::Dllso => "DLLSO",
            Algorithm::Pso => "PSO",
        };
        let h = match self.handler {
            Handler::Hybrid => "H",
            Handler::L1 => "L1",
        };
        if self.mutation {
            format!("{alg}-MUT-{h}")
        } else {
            format!("{alg}-{h}")
        }
    }
}

/// Level sizes for `np` particles in `nl` levels; the last level takes the remainder.
pub fn level_sizes(np: usize, nl: usize) -> Vec<usize> {
    assert!(nl >= 1 && nl <= np, "need 1 <= nl <= np");
    let lp = np / nl;
    let mut sizes = vec![lp; nl];
    sizes[nl - 1] += np % nl;
    sizes
}

/// Start offset of each level in the sorted swarm.
pub fn level_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    for &s in sizes {
        off.push(acc);
        acc += s;
    }
    off
}

pub fn clamp_velocity(v: &mut [f64], bound: &[f64]) {
    for (vi, &b) in v.iter_mut().zip(bound) {
        *vi = vi.clamp(-b, b);
    }
}

/// Velocity and position update with given draws `r = (r1, r2, r3)`.
pub fn update_particle(
    x: &[f64],
    v: &[f64],
    exemplar1: &[f64],
    exemplar2: &[f64],
    phi: f64,
    r: [f64; 3],
    bound: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut v_new: Vec<f64> = (0..x.len())
        .map(|i| r[0] * v[i] + r[1] * (exemplar1[i] - x[i]) + phi * r[2] * (exemplar2[i] - x[i]))
        .collect();
    clamp_velocity(&mut v_new, bound);
    let x_new = x.iter().zip(&v_new).map(|(a, b)| a + b).collect();
    (v_new, x_new)
}

fn denominator(f_gbest: f64, xi: f64, form: IndicatorForm) -> f64 {
    match form {
        IndicatorForm::Absolute => f_gbest.abs() + xi,
        IndicatorForm::Literal => f_gbest + xi,
    }
}

/// `s(g) = (mean − f_gbest) / (f_gbest + ξ)` with the chosen denominator.
pub fn aggregation_indicator(mean: f64, f_gbest: f64, xi: f64, form: IndicatorForm) -> f64 {
    (mean - f_gbest) / denominator(f_gbest, xi, form)
}

/// `t(g) = (f_prev − f_curr) / (f_curr + ξ)` with the chosen denominator.
pub fn relative_improvement(f_prev: f64, f_curr: f64, xi: f64, form: IndicatorForm) -> f64 {
    if f_prev == f_curr {
        return 0.0;
    }
    (f_prev - f_curr) / denominator(f_curr, xi, form)
}

pub fn update_phi(s: f64) -> f64 {
    0.35 + 0.1 / (1.0 + 10.0 * s.max(0.0))
}

/// Doubles or halves the level count, then applies the out-of-range rule.
pub fn update_num_levels<R: Rng + ?Sized>(nl: usize, s: f64, cfg: &SwarmConfig, rng: &mut R) -> usize {
    let raw = if s < cfg.delta_bar { 2 * nl } else { nl / 2 };
    resolve_num_levels(raw, cfg.nl_min, cfg.nl_max, cfg.px, rng)
}

pub fn resolve_num_levels<R: Rng + ?Sized>(raw: usize, nl_min: usize, nl_max: usize, px: f64, rng: &mut R) -> usize {
    if (nl_min..=nl_max).contains(&raw) {
        return raw;
    }
    if rng.gen::<f64>() < px {
        rng.gen_range(nl_min..=nl_max)
    } else if raw > nl_max {
        nl_max
    } else {
        nl_min
    }
}

/// Mean Euclidean distance to the centroid.
pub fn diversity(positions: &[&[f64]]) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let n = positions[0].len();
    let m = positions.len() as f64;
    let mut centroid = vec![0.0; n];
    for x in positions {
        for (c, v) in centroid.iter_mut().zip(x.iter()) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= m);
    positions
        .iter()
        .map(|x| {
            x.iter()
                .zip(&centroid)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / m
}

/// `-MSR` that never fails: volatility is floored at 1e-12 and tiny negative
/// quadratic forms from rounding are read as zero.
pub fn fitness_objective(model: &MarketModel, x: &[f64]) -> f64 {
    let excess = x.iter().zip(model.mu()).map(|(a, b)| a * b).sum::<f64>() - model.risk_free();
    let q = model.quadratic_form(x).unwrap_or(0.0);
    let sigma = q.max(0.0).sqrt().max(1e-12);
    if excess >= 0.0 {
        -excess / sigma
    } else {
        -excess * sigma
    }
}
