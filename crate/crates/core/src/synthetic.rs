//! Seeded synthetic markets for tests, benchmarks and demos.

use chrono::{Months, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::estimation::PricePanel;
use crate::model::{ConstraintSpec, MarketModel};
use crate::projection::FeasibleSetB;
use crate::swarm::random_feasible_seed;

const FACTORS: usize = 3;

/// Three-factor model with idiosyncratic noise. Returns are on a weekly scale.
pub fn factor_model(n: usize, seed: u64) -> Result<MarketModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loadings = DMatrix::from_fn(n, FACTORS, |_, j| {
        let scale = [0.02, 0.012, 0.008][j];
        scale * rng.gen_range(0.3..1.5)
    });
    let idio: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01f64..0.05).powi(2)).collect();
    let mut cov = &loadings * loadings.transpose();
    for (i, v) in idio.iter().enumerate() {
        cov[(i, i)] += v;
    }
    let mu = (0..n)
        .map(|i| {
            let beta = loadings[(i, 0)] / 0.02;
            0.0005 + 0.002 * beta + rng.gen_range(-0.001..0.003)
        })
        .collect();
    MarketModel::new(mu, cov, 0.0)
}

/// Constraint set with uniform boxes and a random feasible current portfolio.
pub fn rebalancing_spec(n: usize, k: usize, l: f64, u: f64, tr: f64, seed: u64) -> Result<ConstraintSpec> {
    let cold = ConstraintSpec::uniform(n, k, l, u, 1.0, vec![0.0; n])?;
    let set = FeasibleSetB::new(&cold)?;
    let x0 = random_feasible_seed(&set, &mut ChaCha8Rng::seed_from_u64(seed));
    cold.with_x0(x0, tr)
}

/// Month-end prices simulated from a factor model, starting at 100.
pub fn price_panel(n: usize, periods: usize, seed: u64) -> Result<PricePanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.002..0.012)).collect();
    let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let vol: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..0.08)).collect();
    let start = NaiveDate::from_ymd_opt(2000, 1, 31).expect("valid date");
    let dates = (0..periods)
        .map(|i| start.checked_add_months(Months::new(i as u32)).expect("date in range"))
        .collect();
    let mut prices = Vec::with_capacity(periods);
    prices.push(vec![100.0; n]);
    for _ in 1..periods {
        let z: f64 = StandardNormal.sample(&mut rng);
        let market = 0.04 * z;
        let last = prices.last().expect("nonempty");
        let next = (0..n)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let r = (drift[i] + beta[i] * market + vol[i] * z).max(-0.9);
                last[i] * (1.0 + r)
            })
            .collect();
        prices.push(next);
    }
    PricePanel::new((0..n).map(|i| format!("S{i:03}")).collect(), dates, prices)
}
