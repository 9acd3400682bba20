//! Initial positions in a neighbourhood of the current portfolio.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SwarmConfig;
use crate::error::{Error, Result};
use crate::model::{feasibility, turnover, ConstraintSpec};
use crate::projection::FeasibleSetB;

const ATTEMPTS: usize = 100;
const HALVINGS: usize = 30;

/// Random point of B: uniform weights on a random support of size `k`,
/// projected.
pub fn random_feasible_seed<R: Rng + ?Sized>(set: &FeasibleSetB, rng: &mut R) -> Vec<f64> {
    let n = set.n();
    let mut y = vec![0.0; n];
    for i in sample(rng, n, set.k()) {
        y[i] = rng.gen_range(f64::EPSILON..1.0);
    }
    // a point of B always exists, so the projection cannot fail here
    set.project(&y)
        .expect("non-empty feasible set")
        .portfolio
        .into_weights()
}

/// Draws `m` amounts in `[d_min, d_max]` and rescales them to sum to `total`.
fn split_amount<R: Rng + ?Sized>(m: usize, total: f64, d_min: f64, d_max: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(d_min..=d_max)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|d| d * total / s).collect()
}

/// One attempt at moving `d_total` of weight away from `seed`: sell from `k'`
/// held assets, buy `k'' <= k'` new ones. Held assets that must be closed to
/// stay within `k` are sold in full. Returns `None` when a box is violated.
pub fn neighbourhood_particle<R: Rng + ?Sized>(
    seed: &[f64],
    spec: &ConstraintSpec,
    d_total: f64,
    d_min: f64,
    d_max: f64,
    rng: &mut R,
) -> Option<Vec<f64>> {
    if d_total <= 0.0 {
        return Some(seed.to_vec());
    }
    let (l, u) = (spec.lower(), spec.upper());
    let held: Vec<usize> = (0..seed.len()).filter(|&i| seed[i] > 0.0).collect();
    let empty: Vec<usize> = (0..seed.len()).filter(|&i| seed[i] == 0.0).collect();
    let m = held.len();
    if m == 0 || empty.is_empty() {
        return None;
    }
    let k_sell = rng.gen_range(1..=m);
    let k_buy = rng.gen_range(1..=k_sell.min(empty.len()));
    let sell: Vec<usize> = sample(rng, m, k_sell).iter().map(|j| held[j]).collect();
    let buy: Vec<usize> = sample(rng, empty.len(), k_buy).iter().map(|j| empty[j]).collect();

    let close = (m + k_buy).saturating_sub(spec.k());
    let (closed, partial) = sell.split_at(close);
    let closed_mass: f64 = closed.iter().map(|&j| seed[j]).sum();
    let rest = d_total - closed_mass;
    if rest < 0.0 || (partial.is_empty() && rest > 1e-15) {
        return None;
    }

    let mut x = seed.to_vec();
    for &j in closed {
        x[j] = 0.0;
    }
    if !partial.is_empty() && rest > 0.0 {
        for (&j, d) in partial.iter().zip(split_amount(partial.len(), rest, d_min, d_max, rng)) {
            let v = seed[j] - d;
            if v < l[j] {
                return None;
            }
            x[j] = v;
        }
    }
    for (&j, d) in buy.iter().zip(split_amount(k_buy, d_total, d_min, d_max, rng)) {
        if d < l[j] || d > u[j] {
            return None;
        }
        x[j] = d;
    }
    Some(x)
}

/// `np` starting points. With a current portfolio each one is built around
/// it, or around its projection onto B when it is itself infeasible; on a
/// cold start each is built around its own random point of B.
pub fn initialize_positions<R: Rng + ?Sized>(
    spec: &ConstraintSpec,
    np: usize,
    d_min: f64,
    d_max: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let set = FeasibleSetB::new(spec)?;
    let cold = spec.is_cold_start();
    let (center, cap) = if cold {
        (Vec::new(), spec.turnover_cap())
    } else if feasibility(spec, spec.x0()).is_feasible() {
        (spec.x0().to_vec(), spec.turnover_cap())
    } else {
        // a drifted portfolio can leave its boxes: start from its projection
        // and spend only the turnover left after getting there
        let c = set.project(spec.x0())?.portfolio.into_weights();
        let slack = (spec.turnover_cap() - turnover(&c, spec.x0())).max(0.0);
        (c, slack)
    };
    let mut out = Vec::with_capacity(np);
    for _ in 0..np {
        let seed = if cold {
            random_feasible_seed(&set, rng)
        } else {
            center.clone()
        };
        let mut d = rng.gen_range(0.0..=cap / 2.0);
        let mut particle = None;
        'outer: for _ in 0..HALVINGS {
            for _ in 0..ATTEMPTS {
                if let Some(x) = neighbourhood_particle(&seed, spec, d, d_min, d_max, rng) {
                    particle = Some(x);
                    break 'outer;
                }
            }
            d *= 0.5;
        }
        out.push(particle.unwrap_or(seed));
    }
    Ok(out)
}

/// Initial positions drawn from the initialization stream of `cfg.seed`, so
/// every algorithm run with the same seed starts from the same population.
pub fn initialize_swarm(spec: &ConstraintSpec, cfg: &SwarmConfig) -> Result<Vec<Vec<f64>>> {
    if !(0.0 <= cfg.d_min && cfg.d_min < cfg.d_max) {
        return Err(Error::InvalidConfig("need 0 <= d_min < d_max".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    initialize_positions(spec, cfg.np, cfg.d_min, cfg.d_max, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::turnover;

    fn warm_spec(seed: u64) -> ConstraintSpec {
        let n = 40;
        let cold = ConstraintSpec::uniform(n, 12, 0.01, 0.3, 1.0, vec![0.0; n]).unwrap();
        let set = FeasibleSetB::new(&cold).unwrap();
        let x0 = random_feasible_seed(&set, &mut ChaCha8Rng::seed_from_u64(seed));
        cold.with_x0(x0, 0.2).unwrap()
    }

    #[test]
    fn all_particles_feasible() {
        let spec = warm_spec(1);
        let cfg = SwarmConfig {
            np: 300,
            seed: 4,
            ..Default::default()
        };
        let xs = initialize_swarm(&spec, &cfg).unwrap();
        assert_eq!(xs.len(), 300);
        let mut moved = 0;
        for x in &xs {
            let rep = feasibility(&spec, x);
            assert!(rep.is_feasible(), "{rep:?}");
            assert!(turnover(x, spec.x0()) <= 0.2 + 1e-12);
            if x != spec.x0() {
                moved += 1;
            }
        }
        assert!(moved > 250);
    }

    #[test]
    fn zero_reallocation_returns_seed() {
        let spec = warm_spec(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = neighbourhood_particle(spec.x0(), &spec, 0.0, 0.0005, 0.005, &mut rng).unwrap();
        assert_eq!(x, spec.x0());
    }

    #[test]
    fn same_seed_same_swarm() {
        let spec = warm_spec(3);
        let cfg = SwarmConfig {
            np: 50,
            seed: 77,
            ..Default::default()
        };
        assert_eq!(
            initialize_swarm(&spec, &cfg).unwrap(),
            initialize_swarm(&spec, &cfg).unwrap()
        );
    }

    #[test]
    fn cold_start_particles_are_in_b() {
        let spec = ConstraintSpec::uniform(30, 8, 0.02, 0.4, 1.0, vec![0.0; 30]).unwrap();
        let cfg = SwarmConfig {
            np: 100,
            seed: 5,
            ..Default::default()
        };
        let xs = initialize_swarm(&spec, &cfg).unwrap();
        let distinct: std::collections::HashSet<Vec<u64>> =
            xs.iter().map(|x| x.iter().map(|v| v.to_bits()).collect()).collect();
        assert!(distinct.len() > 90);
        for x in &xs {
            assert!(feasibility(&spec, x).is_feasible());
        }
    }

    #[test]
    fn infeasible_x0_recentered() {
        // drifted past its upper bound by 0.02
        let x0 = vec![0.32, 0.28, 0.2, 0.2, 0.0, 0.0];
        let spec = ConstraintSpec::uniform(6, 4, 0.05, 0.3, 0.2, x0.clone()).unwrap();
        let cfg = SwarmConfig {
            np: 50,
            nl_init: 2,
            nl_max: 50,
            ..Default::default()
        };
        let xs = initialize_swarm(&spec, &cfg).unwrap();
        for x in &xs {
            assert!(feasibility(&spec, x).is_feasible());
        }
        let too_far = ConstraintSpec::uniform(6, 4, 0.05, 0.3, 0.01, x0).unwrap();
        for x in initialize_swarm(&too_far, &cfg).unwrap() {
            assert!(feasibility(&too_far, &x).structural_ok());
        }
    }
}
