//! Global-best PSO baseline with linearly varying inertia and acceleration.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::run::{best_of, finish, trace_row, Context, Particle, Penalizer, RunResult};
use crate::error::Result;

pub const OMEGA: (f64, f64) = (0.9, 0.4);
pub const C1: (f64, f64) = (2.5, 0.5);
pub const C2: (f64, f64) = (0.5, 2.5);

/// `(ω, c1, c2)` at generation `g` of `g_max`.
pub fn coefficients(g: usize, g_max: usize) -> (f64, f64, f64) {
    let frac = if g_max == 0 { 0.0 } else { g as f64 / g_max as f64 };
    let lerp = |(a, b): (f64, f64)| a + (b - a) * frac;
    (lerp(OMEGA), lerp(C1), lerp(C2))
}

pub(super) fn run_pso(ctx: &Context<'_>, init: Vec<Vec<f64>>, rng: &mut ChaCha8Rng) -> Result<RunResult> {
    let cfg = ctx.cfg;
    let n = ctx.spec.n();
    let mut pen = Penalizer::new(cfg);
    let mut swarm = ctx.evaluate_all(init.into_iter().map(|x| (x, vec![0.0; n])).collect())?;
    pen.assign(&mut swarm)?;
    let mut pbest: Vec<Particle> = swarm.clone();
    let mut gbest = best_of(None, &pbest).clone();
    let mut trace = vec![trace_row(0, &gbest, &swarm, 0, 0.0)];

    for g in 1..=cfg.g_max {
        let (w, c1, c2) = coefficients(g, cfg.g_max);
        let mut moves = Vec::with_capacity(swarm.len());
        for (p, best) in swarm.iter().zip(&pbest) {
            let (r1, r2) = (rng.gen::<f64>(), rng.gen::<f64>());
            let v: Vec<f64> = (0..n)
                .map(|i| {
                    let v = w * p.v[i] + c1 * r1 * (best.x[i] - p.x[i]) + c2 * r2 * (gbest.x[i] - p.x[i]);
                    v.clamp(-ctx.bound[i], ctx.bound[i])
                })
                .collect();
            let y = p.x.iter().zip(&v).map(|(a, b)| a + b).collect();
            moves.push((y, v));
        }
        swarm = ctx.evaluate_all(moves)?;
        let np = swarm.len();
        let union: Vec<&Particle> = pbest.iter().chain(swarm.iter()).collect();
        let fits = pen.penalize(&union)?;
        for i in 0..np {
            swarm[i].fitness = fits[np + i];
            pbest[i].fitness = fits[i];
            if fits[np + i] < fits[i] {
                pbest[i] = swarm[i].clone();
            }
        }
        pen.observe(g, &swarm);
        let candidate = best_of(Some(&gbest), &pbest);
        if !std::ptr::eq(candidate, &gbest) {
            gbest = candidate.clone();
        }
        trace.push(trace_row(g, &gbest, &swarm, 0, 0.0));
    }
    Ok(finish(gbest, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_schedule() {
        assert_eq!(coefficients(0, 100), (0.9, 2.5, 0.5));
        let (w, c1, c2) = coefficients(100, 100);
        assert!((w - 0.4).abs() < 1e-15 && (c1 - 0.5).abs() < 1e-15 && (c2 - 2.5).abs() < 1e-15);
        let (w, c1, c2) = coefficients(50, 100);
        assert!((w - 0.65).abs() < 1e-15 && (c1 - 1.5).abs() < 1e-15 && (c2 - 1.5).abs() < 1e-15);
    }
}
