//! The generation loop shared by the level-based modes.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    aggregation_indicator, diversity, fitness_objective, level_offsets, level_sizes, pso, relative_improvement,
    update_num_levels, update_particle, update_phi, Algorithm, Handler, SwarmConfig,
};
use crate::error::{Error, Result};
use crate::model::{feasibility, ConstraintSpec, MarketModel, Portfolio};
use crate::mutation::{default_k_max_swap, mutate, MutationConfig};
use crate::penalty::{
    l1_violations, split_refine, turnover_violation, HybridPenaltyState, L1PenaltyState, PenaltyInput,
};
use crate::projection::FeasibleSetB;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Raw objective `-MSR`.
    pub f: f64,
    /// Turnover violation; nonpositive when the cap holds.
    pub psi: f64,
    /// ℓ1 constraint violations (all zero in hybrid mode).
    pub cv: [f64; 6],
    /// Penalized fitness from the last penalization pass.
    pub fitness: f64,
    pub feasible: bool,
}

impl Particle {
    fn violation(&self) -> f64 {
        self.psi.max(0.0) + self.cv.iter().sum::<f64>()
    }

    /// Feasible first, then lower objective; among infeasible, lower violation.
    pub fn beats(&self, other: &Particle) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.f < other.f,
            (false, false) => self.violation() < other.violation(),
        }
    }
}

/// One row of the per-generation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub generation: usize,
    /// Objective of the best feasible point so far, `+inf` before one exists.
    pub gbest_fitness: f64,
    pub gbest_f: f64,
    pub mean_fitness: f64,
    pub diversity: f64,
    pub num_levels: usize,
    pub phi: f64,
    pub feasible_count: usize,
}

impl TraceRow {
    pub const HEADER: &'static str = "gen,gbest_F,gbest_f,mean_F,diversity,NL,phi,feasible_count";
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: Portfolio,
    pub best_f: f64,
    pub feasible: bool,
    pub trace: Vec<TraceRow>,
}

pub(super) struct Context<'a> {
    pub model: &'a MarketModel,
    pub spec: &'a ConstraintSpec,
    pub cfg: &'a SwarmConfig,
    set: FeasibleSetB,
    pub bound: Vec<f64>,
}

impl<'a> Context<'a> {
    pub fn new(model: &'a MarketModel, spec: &'a ConstraintSpec, cfg: &'a SwarmConfig) -> Result<Self> {
        cfg.validate()?;
        if model.n() != spec.n() {
            return Err(Error::Dimension {
                what: "constraint spec",
                expected: model.n(),
                got: spec.n(),
            });
        }
        let bound = spec.upper().iter().map(|u| u * cfg.v_max_scale).collect();
        Ok(Self {
            model,
            spec,
            cfg,
            set: FeasibleSetB::new(spec)?,
            bound,
        })
    }

    fn evaluate(&self, y: &[f64], v: Vec<f64>) -> Result<Particle> {
        let (x, cv) = match self.cfg.handler {
            Handler::Hybrid => (self.set.project(y)?.portfolio.into_weights(), [0.0; 6]),
            Handler::L1 => {
                let sr = split_refine(y, self.spec);
                let cv = l1_violations(&sr.x, &sr.delta, self.spec);
                (sr.x, cv)
            }
        };
        Ok(Particle {
            f: fitness_objective(self.model, &x),
            psi: turnover_violation(&x, self.spec),
            feasible: feasibility(self.spec, &x).is_feasible(),
            cv,
            fitness: f64::NAN,
            x,
            v,
        })
    }

    /// Evaluates in parallel; output order follows input order.
    pub fn evaluate_all(&self, ys: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Vec<Particle>> {
        ys.into_par_iter().map(|(y, v)| self.evaluate(&y, v)).collect()
    }
}

pub(super) enum Penalizer {
    Hybrid(HybridPenaltyState),
    L1(L1PenaltyState),
}

impl Penalizer {
    pub fn new(cfg: &SwarmConfig) -> Self {
        match cfg.handler {
            Handler::Hybrid => Penalizer::Hybrid(HybridPenaltyState::new()),
            Handler::L1 => Penalizer::L1(L1PenaltyState::new(cfg.eps0_test)),
        }
    }

    pub fn penalize(&mut self, ps: &[&Particle]) -> Result<Vec<f64>> {
        match self {
            Penalizer::Hybrid(st) => {
                let inputs: Vec<PenaltyInput<'_>> = ps
                    .iter()
                    .map(|p| PenaltyInput {
                        x: &p.x,
                        f: p.f,
                        psi: p.psi,
                    })
                    .collect();
                st.penalize(&inputs)
            }
            Penalizer::L1(st) => {
                if ps.is_empty() {
                    return Err(Error::EmptyGeneration);
                }
                Ok(ps.iter().map(|p| st.penalty(p.f, &p.cv)).collect())
            }
        }
    }

    pub fn assign(&mut self, ps: &mut [Particle]) -> Result<()> {
        let fits = self.penalize(&ps.iter().collect::<Vec<_>>())?;
        for (p, f) in ps.iter_mut().zip(fits) {
            p.fitness = f;
        }
        Ok(())
    }

    /// Advances the ℓ1 weights after generation `g`; no-op in hybrid mode.
    pub fn observe(&mut self, g: usize, ps: &[Particle]) {
        if let Penalizer::L1(st) = self {
            let best = ps
                .iter()
                .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
                .expect("non-empty swarm");
            let m = ps.len() as f64;
            let mut cv = [0.0; 6];
            for p in ps {
                for (c, v) in cv.iter_mut().zip(&p.cv) {
                    *c += v / m;
                }
            }
            st.observe(g, best.f, cv);
        }
    }
}

pub(super) fn sort_by_fitness(ps: &mut [Particle]) {
    ps.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
}

pub(super) fn best_of<'p>(gbest: Option<&'p Particle>, ps: &'p [Particle]) -> &'p Particle {
    let mut best = gbest.unwrap_or(&ps[0]);
    for p in ps {
        if p.beats(best) {
            best = p;
        }
    }
    best
}

pub(super) fn trace_row(g: usize, gbest: &Particle, ps: &[Particle], nl: usize, phi: f64) -> TraceRow {
    let m = ps.len() as f64;
    let xs: Vec<&[f64]> = ps.iter().map(|p| p.x.as_slice()).collect();
    TraceRow {
        generation: g,
        gbest_fitness: if gbest.feasible { gbest.f } else { f64::INFINITY },
        gbest_f: gbest.f,
        mean_fitness: ps.iter().map(|p| p.fitness).sum::<f64>() / m,
        diversity: diversity(&xs),
        num_levels: nl,
        phi,
        feasible_count: ps.iter().filter(|p| p.feasible).count(),
    }
}

pub(super) fn finish(gbest: Particle, trace: Vec<TraceRow>) -> RunResult {
    RunResult {
        best_f: gbest.f,
        feasible: gbest.feasible,
        best: Portfolio::new(gbest.x).unwrap_or_else(|_| unreachable!("evaluated positions are nonnegative")),
        trace,
    }
}

fn replace_position(dst: &mut Particle, src: &Particle, fitness: f64) {
    dst.x.clone_from(&src.x);
    dst.f = src.f;
    dst.psi = src.psi;
    dst.cv = src.cv;
    dst.feasible = src.feasible;
    dst.fitness = fitness;
}

fn algorithm_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs the configured algorithm from a fresh initial population.
pub fn run(model: &MarketModel, spec: &ConstraintSpec, cfg: &SwarmConfig) -> Result<RunResult> {
    let init = super::initialize_swarm(spec, cfg)?;
    run_from(model, spec, cfg, init)
}

/// Runs the configured algorithm from the given starting positions.
pub fn run_from(
    model: &MarketModel,
    spec: &ConstraintSpec,
    cfg: &SwarmConfig,
    init: Vec<Vec<f64>>,
) -> Result<RunResult> {
    let ctx = Context::new(model, spec, cfg)?;
    if init.len() != cfg.np {
        return Err(Error::Dimension {
            what: "initial population",
            expected: cfg.np,
            got: init.len(),
        });
    }
    let mut rng = algorithm_rng(cfg.seed);
    if cfg.algorithm == Algorithm::Pso {
        return pso::run_pso(&ctx, init, &mut rng);
    }
    run_levels(&ctx, init, &mut rng)
}

fn run_levels(ctx: &Context<'_>, init: Vec<Vec<f64>>, rng: &mut ChaCha8Rng) -> Result<RunResult> {
    let cfg = ctx.cfg;
    let np = cfg.np;
    let n = ctx.spec.n();
    let adaptive = cfg.algorithm == Algorithm::Allso;
    let pool: Vec<usize> = cfg
        .level_pool
        .iter()
        .copied()
        .filter(|&l| (2..=np).contains(&l))
        .collect();
    let mcfg = MutationConfig {
        k_max_swap: default_k_max_swap(ctx.spec.k()),
        g_max: cfg.g_max,
        gate: cfg.swap_gate,
    };
    let mut pen = Penalizer::new(cfg);

    let mut swarm = ctx.evaluate_all(init.into_iter().map(|x| (x, vec![0.0; n])).collect())?;
    pen.assign(&mut swarm)?;
    sort_by_fitness(&mut swarm);
    let mut gbest = best_of(None, &swarm).clone();
    let mut nl = cfg.nl_init;
    let mean_f = |ps: &[Particle]| ps.iter().map(|p| p.f).sum::<f64>() / ps.len() as f64;
    let s0 = aggregation_indicator(mean_f(&swarm), gbest.f, cfg.xi, cfg.indicator);
    let phi0 = if adaptive { update_phi(s0) } else { cfg.phi_fixed };
    let mut trace = vec![trace_row(0, &gbest, &swarm, nl, phi0)];
    let mut t_prev = 0.0;

    for g in 1..=cfg.g_max {
        let sizes = level_sizes(np, nl);
        let offsets = level_offsets(&sizes);
        let lp = sizes[0];

        if cfg.mutation {
            let mutants: Vec<(Vec<f64>, Vec<f64>)> = swarm[..lp]
                .iter()
                .map(|p| (mutate(&p.x, ctx.spec, &mcfg, g, rng).0, p.v.clone()))
                .collect();
            let mutants = ctx.evaluate_all(mutants)?;
            let union: Vec<&Particle> = swarm[..lp].iter().chain(mutants.iter()).collect();
            let fits = pen.penalize(&union)?;
            for p in 0..lp {
                swarm[p].fitness = fits[p];
                if fits[lp + p] < fits[p] {
                    replace_position(&mut swarm[p], &mutants[p], fits[lp + p]);
                }
            }
            sort_by_fitness(&mut swarm[..lp]);
        }

        let s = aggregation_indicator(mean_f(&swarm), gbest.f, cfg.xi, cfg.indicator);
        let phi = if adaptive { update_phi(s) } else { cfg.phi_fixed };

        // all draws happen here, in particle order, before any evaluation
        let mut moves = Vec::with_capacity(np - lp);
        for level in 1..sizes.len() {
            for p in offsets[level]..offsets[level] + sizes[level] {
                let (e1, e2) = if level == 1 {
                    if lp == 1 {
                        (0, 0)
                    } else {
                        let pick = sample(rng, lp, 2);
                        let (a, b) = (pick.index(0), pick.index(1));
                        (a.min(b), a.max(b))
                    }
                } else {
                    let pick = sample(rng, level, 2);
                    let (l1, l2) = (pick.index(0).min(pick.index(1)), pick.index(0).max(pick.index(1)));
                    (
                        offsets[l1] + rng.gen_range(0..sizes[l1]),
                        offsets[l2] + rng.gen_range(0..sizes[l2]),
                    )
                };
                let r = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
                let me = &swarm[p];
                let (v, y) = update_particle(&me.x, &me.v, &swarm[e1].x, &swarm[e2].x, phi, r, &ctx.bound);
                moves.push((y, v));
            }
        }
        let moved = ctx.evaluate_all(moves)?;
        let union: Vec<&Particle> = swarm.iter().chain(moved.iter()).collect();
        let fits = pen.penalize(&union)?;
        for (j, cand) in moved.iter().enumerate() {
            let idx = lp + j;
            swarm[idx].v.clone_from(&cand.v);
            if fits[np + j] < fits[idx] {
                replace_position(&mut swarm[idx], cand, fits[np + j]);
            }
        }

        pen.observe(g, &swarm);
        pen.assign(&mut swarm)?;
        sort_by_fitness(&mut swarm);

        let prev_f = gbest.f;
        let candidate = best_of(Some(&gbest), &swarm);
        if !std::ptr::eq(candidate, &gbest) {
            gbest = candidate.clone();
        }
        let t = relative_improvement(prev_f, gbest.f, cfg.xi, cfg.indicator);

        let nl_used = nl;
        if adaptive {
            if t < t_prev || t == 0.0 {
                nl = update_num_levels(nl, s, cfg, rng);
            }
        } else {
            nl = pool[rng.gen_range(0..pool.len())];
        }
        t_prev = t;
        trace.push(trace_row(g, &gbest, &swarm, nl_used, phi));
    }
    Ok(finish(gbest, trace))
}
