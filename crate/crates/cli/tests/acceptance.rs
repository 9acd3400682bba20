//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each and exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use llso_core::backtest::{cagr, default_tiers, drift_weights, step_wealth, trade_cost, transaction_cost};
use llso_core::estimation::compute_returns;
use llso_core::model::{feasibility, turnover};
use llso_core::mutation::{mutate, MutationConfig};
use llso_core::oracle::{
    brute_force_projection, distance, exhaustive_best_msr, min_unbounded_support_cost, unbounded_support_cost,
};
use llso_core::penalty::{
    l1_penalty, l1_violations, update_eps0, update_eps_i, PenaltyInput, EPS0_MAX, EPS0_MIN, EPS_MAX, EPS_MIN,
};
use llso_core::projection::top_k_support;
use llso_core::stats::paired_t_test_less;
use llso_core::swarm::{initialize_swarm, random_feasible_seed, run};
use llso_core::synthetic::{factor_model, price_panel, rebalancing_spec};
use llso_core::{
    run_backtest, BacktestConfig, ConstraintSpec, FeasibleSetB, HybridPenaltyState, ImprovementTest, L1PenaltyState,
    MarketModel, SwarmConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s as f64, || {
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

/// Random cardinality-constrained spec with a feasible current portfolio.
fn random_spec(rng: &mut ChaCha8Rng, tr: f64) -> ConstraintSpec {
    let n = rng.gen_range(20..=120);
    let u: f64 = rng.gen_range(0.05..0.3);
    let k_min = (1.0 / u).ceil() as usize + 1;
    let k = rng.gen_range(k_min..=(n / 2).max(k_min));
    let l = rng.gen_range(0.001..0.01);
    let cold = ConstraintSpec::uniform(n, k, l, u, 1.0, vec![0.0; n]).unwrap();
    let x0 = random_feasible_seed(&FeasibleSetB::new(&cold).unwrap(), rng);
    cold.with_x0(x0, tr).unwrap()
}

fn c1_projection_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..500 {
        // k = 1 cannot reach a unit budget with u = 0.8
        let k = rng.gen_range(2..=3);
        let n = rng.gen_range(k..=6);
        let (l, u) = (vec![0.05; n], vec![0.8; n]);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..1.0)).collect();
        let set = FeasibleSetB::from_bounds(k, l.clone(), u.clone()).map_err(|e| e.to_string())?;
        let got = set.project(&y).map_err(|e| e.to_string())?.portfolio.into_weights();
        let want = brute_force_projection(&y, k, &l, &u);
        let d = distance(&got, &want);
        worst = worst.max(d);
        ensure(d <= 1e-6, || {
            format!("case {case}: y={y:?} k={k} got {got:?} want {want:?}")
        })?;
    }
    within(start.elapsed(), 30)?;
    Ok(format!("500 instances, max distance to brute force {worst:.1e}"))
}

fn c2_support_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..500 {
        let n = rng.gen_range(2..=8);
        let k = rng.gen_range(1..=3.min(n));
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let top = top_k_support(&y, k).map_err(|e| e.to_string())?;
        let c = unbounded_support_cost(&y, &top);
        let best = min_unbounded_support_cost(&y, k);
        ensure(c <= best, || {
            format!("case {case}: top-k cost {c} > min {best} for y={y:?}")
        })?;
    }
    within(start.elapsed(), 10)?;
    Ok("500 vectors, top-k support always minimal".into())
}

fn c3_mutation_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut specs = Vec::new();
    for _ in 0..20 {
        let s = random_spec(&mut rng, 0.2);
        let set = FeasibleSetB::new(&s).unwrap();
        specs.push((s, set));
    }
    let g_max = 2000;
    let mut violations = 0;
    for _ in 0..10_000 {
        let (spec, set) = &specs[rng.gen_range(0..specs.len())];
        let x = random_feasible_seed(set, &mut rng);
        let g = rng.gen_range(0..=g_max);
        let cfg = MutationConfig::new(spec.k(), g_max);
        let (y, _) = mutate(&x, spec, &cfg, g, &mut rng);
        let card = y.iter().filter(|&&v| v > 0.0).count();
        let boxes = (0..y.len()).all(|i| y[i] == 0.0 || (spec.lower()[i] <= y[i] && y[i] <= spec.upper()[i]));
        if card > spec.k() || !boxes {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violating mutants"))?;
    Ok("10000 mutants, 0 violations".into())
}

fn c4_initialization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut bad = 0;
    for case in 0..100 {
        let spec = random_spec(&mut rng, 0.2);
        let cfg = SwarmConfig {
            np: 500,
            seed: case,
            ..Default::default()
        };
        let xs = initialize_swarm(&spec, &cfg).map_err(|e| e.to_string())?;
        ensure(xs.len() == 500, || format!("case {case}: {} particles", xs.len()))?;
        bad += xs.iter().filter(|x| !feasibility(&spec, x).is_feasible()).count();
    }
    ensure(bad == 0, || format!("{bad} infeasible particles"))?;
    Ok("100 specs x 500 particles, all feasible with TR = 0.2".into())
}

fn c5_penalty() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let model = factor_model(60, 5).map_err(|e| e.to_string())?;
    let spec = rebalancing_spec(60, 20, 0.005, 0.15, 0.2, 6).map_err(|e| e.to_string())?;
    let points = initialize_swarm(
        &spec,
        &SwarmConfig {
            np: 1000,
            seed: 7,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    for (i, x) in points.iter().enumerate() {
        ensure(feasibility(&spec, x).is_feasible(), || {
            format!("point {i} not feasible")
        })?;
        let delta: Vec<f64> = x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let cv = l1_violations(x, &delta, &spec);
        let mut eps = [0.0; 7];
        eps[0] = 10f64.powf(rng.gen_range(-15.0..0.0));
        for e in &mut eps[1..] {
            *e = 10f64.powf(rng.gen_range(-4.0..4.0));
        }
        let f = model.objective(x).map_err(|e| e.to_string())?;
        let fl1 = l1_penalty(f, &cv, &eps);
        ensure(fl1 == f, || format!("point {i}: F_l1 {fl1} != f {f} (cv {cv:?})"))?;
    }

    let mut state = HybridPenaltyState::new();
    for gen in 0..100 {
        let m = rng.gen_range(5..60);
        let xs: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.gen::<f64>()]).collect();
        let fs: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.1)).collect();
        let psi: Vec<f64> = (0..m)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    -rng.gen::<f64>() * 0.1
                } else {
                    rng.gen::<f64>() * 0.3
                }
            })
            .collect();
        let set: Vec<PenaltyInput> = (0..m)
            .map(|i| PenaltyInput {
                x: &xs[i],
                f: fs[i],
                psi: psi[i],
            })
            .collect();
        let big_f = state.penalize(&set).map_err(|e| e.to_string())?;
        let mut feas: Vec<usize> = (0..m).filter(|&i| psi[i] <= 0.0).collect();
        let mut by_f = feas.clone();
        by_f.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        feas.sort_by(|&a, &b| big_f[a].total_cmp(&big_f[b]));
        ensure(feas == by_f, || {
            format!("generation {gen}: F order {feas:?} != f order {by_f:?}")
        })?;
    }
    Ok("1000 feasible points with F_l1 == f; 100 generations with matching order".into())
}

fn c6_eps_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let in_bounds = |eps: &[f64; 7]| {
        (EPS0_MIN..=EPS0_MAX).contains(&eps[0]) && eps[1..].iter().all(|e| (EPS_MIN..=EPS_MAX).contains(e))
    };
    let mut state = L1PenaltyState::new(ImprovementTest::Relative);
    let mut literal = L1PenaltyState::new(ImprovementTest::Literal);
    let (mut e0, mut ei) = (1e-4, 1.0);
    for step in 0..100_000usize {
        let f = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-3..3));
        let mut cv = [0.0; 6];
        for c in &mut cv {
            *c = if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen::<f64>() * 10f64.powi(rng.gen_range(-6..2))
            };
        }
        state.observe(step, f, cv);
        literal.observe(step, f, cv);
        e0 = update_eps0(e0, f, rng.gen_range(-1.0..1.0), ImprovementTest::Relative);
        ei = update_eps_i(ei, cv[0], rng.gen::<f64>());
        ensure(in_bounds(&state.eps) && in_bounds(&literal.eps), || {
            format!("step {step}: {:?}", state.eps)
        })?;
        ensure(
            (EPS0_MIN..=EPS0_MAX).contains(&e0) && (EPS_MIN..=EPS_MAX).contains(&ei),
            || format!("step {step}: direct updates left bounds ({e0}, {ei})"),
        )?;
    }
    Ok("100000 fuzzed steps inside [1e-15, 1] x [1e-4, 1e4]^6".into())
}

fn c7_elitism() -> Outcome {
    let model = factor_model(50, 70).map_err(|e| e.to_string())?;
    let spec = rebalancing_spec(50, 10, 0.01, 0.2, 0.2, 71).map_err(|e| e.to_string())?;
    for seed in 0..20 {
        let cfg = SwarmConfig {
            g_max: 200,
            seed,
            ..Default::default()
        };
        let res = run(&model, &spec, &cfg).map_err(|e| e.to_string())?;
        ensure(res.trace.len() == 201, || {
            format!("seed {seed}: {} trace rows", res.trace.len())
        })?;
        for w in res.trace.windows(2) {
            ensure(w[1].gbest_fitness <= w[0].gbest_fitness, || {
                format!(
                    "seed {seed}: gbest rose at generation {}: {} -> {}",
                    w[1].generation, w[0].gbest_fitness, w[1].gbest_fitness
                )
            })?;
        }
    }
    Ok("20 runs, gbest trace nonincreasing at every generation".into())
}

fn c8_mutation_benefit() -> Outcome {
    let start = Instant::now();
    let model = factor_model(200, 11).map_err(|e| e.to_string())?;
    let spec = rebalancing_spec(200, 60, 0.001, 0.05, 0.2, 12).map_err(|e| e.to_string())?;
    let base = SwarmConfig {
        np: 100,
        g_max: 500,
        ..Default::default()
    };
    let mut with = Vec::new();
    let mut without = Vec::new();
    for seed in 0..10 {
        let mutated = run(
            &model,
            &spec,
            &SwarmConfig {
                seed,
                mutation: true,
                ..base.clone()
            },
        )
        .map_err(|e| e.to_string())?;
        let plain = run(
            &model,
            &spec,
            &SwarmConfig {
                seed,
                mutation: false,
                ..base.clone()
            },
        )
        .map_err(|e| e.to_string())?;
        with.push(mutated.best_f);
        without.push(plain.best_f);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&with), mean(&without));
    let p = paired_t_test_less(&with, &without).map_err(|e| e.to_string())?;
    let change = (a - b) / b * 100.0;
    let detail = format!("ALLSO-MUT-H mean {a:.6}, ALLSO-H mean {b:.6}, change {change:+.3}%, p = {p:.4}");
    within(start.elapsed(), 600)?;
    ensure(a <= b && p < 0.05, || detail.clone())?;
    Ok(detail)
}

/// n = 10, k = 3; asset 7 has by far the highest mean and lowest variance.
fn dominant_model() -> MarketModel {
    let n = 10;
    let mut mu: Vec<f64> = (0..n).map(|i| 0.004 + 0.0005 * i as f64).collect();
    let mut sd: Vec<f64> = (0..n).map(|i| 0.04 + 0.002 * i as f64).collect();
    mu[7] = 0.03;
    sd[7] = 0.01;
    let cov = nalgebra::DMatrix::from_fn(n, n, |i, j| if i == j { sd[i] * sd[i] } else { 0.2 * sd[i] * sd[j] });
    MarketModel::new(mu, cov, 0.0).unwrap()
}

fn c9_known_optimum() -> Outcome {
    let start = Instant::now();
    let model = dominant_model();
    let (l, u) = (vec![0.05; 10], vec![0.6; 10]);
    let spec = ConstraintSpec::cold_start(3, l.clone(), u.clone()).map_err(|e| e.to_string())?;
    let cfg = SwarmConfig {
        np: 100,
        g_max: 300,
        seed: 9,
        ..Default::default()
    };
    let res = run(&model, &spec, &cfg).map_err(|e| e.to_string())?;
    let w = res.best.weights();
    let msr = model.modified_sharpe(w).map_err(|e| e.to_string())?;
    let (best, _) = exhaustive_best_msr(&model, 3, &l, &u, 40);
    ensure((w[7] - 0.6).abs() < 1e-9, || format!("dominant weight {} != u", w[7]))?;
    ensure((msr - best).abs() <= 1e-3, || format!("MSR {msr} vs exhaustive {best}"))?;
    within(start.elapsed(), 60)?;
    Ok(format!(
        "dominant weight {:.6}, MSR {msr:.6} vs exhaustive {best:.6}",
        w[7]
    ))
}

fn c10_backtest_arithmetic() -> Outcome {
    let tiers = default_tiers();
    for (value, cost) in [(10_000.0, 50.0), (5_000.0, 40.0), (250_000.0, 400.0)] {
        let c = trade_cost(value, &tiers);
        ensure(c == cost, || format!("trade of {value} cost {c}, expected {cost}"))?;
    }
    let g = cagr(100.0, 121.0, 24, 12.0);
    ensure((g - 0.1).abs() <= 1e-12, || format!("CAGR {g}"))?;

    let panel = price_panel(30, 40, 10).map_err(|e| e.to_string())?;
    let cfg = BacktestConfig {
        window: 24,
        horizon: 15,
        upper: 0.2,
        solver: SwarmConfig {
            np: 60,
            nl_max: 20,
            g_max: 60,
            seed: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let ledger = run_backtest(&panel, &cfg).map_err(|e| e.to_string())?;
    ensure(ledger.records.len() == 15, || {
        format!("{} ledger rows", ledger.records.len())
    })?;
    // recompute every row from prices alone
    let returns = compute_returns(&panel);
    let prices = panel.prices();
    let mut wealth = cfg.initial_wealth;
    let mut prev: Option<Vec<f64>> = None;
    let mut max_to = 0.0f64;
    for rec in &ledger.records {
        let row = rec.t - 1 + cfg.window;
        let drifted = match &prev {
            None => vec![0.0; 30],
            Some(x) => drift_weights(x, &returns.gross()[row - 1]).map_err(|e| e.to_string())?,
        };
        let r: f64 = (0..30)
            .map(|i| rec.weights[i] * (prices[row + 1][i] / prices[row][i] - 1.0))
            .sum();
        let cost = transaction_cost(&rec.weights, &drifted, wealth, &tiers);
        wealth = step_wealth(wealth, r, cost);
        ensure((wealth - rec.wealth).abs() <= 1e-6, || {
            format!("t={}: wealth {} vs recomputed {wealth}", rec.t, rec.wealth)
        })?;
        if rec.t >= 2 {
            let to = turnover(&rec.weights, &drifted);
            max_to = max_to.max(to);
            ensure(to <= cfg.turnover_cap + 1e-9, || format!("t={}: turnover {to}", rec.t))?;
        }
        prev = Some(rec.weights.clone());
    }
    Ok(format!(
        "tiers exact, CAGR {g:.12}, 15 rows re-verified, max turnover {max_to:.6}"
    ))
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "synthetic_assets = 60\nupper = 0.15\nnp = 60\nnl_max = 20\ng_max = 80\nruns = 2\nseed = 42\n",
    )
    .map_err(|e| e.to_string())?;
    let exe = env!("CARGO_BIN_EXE_llso");
    let go = |out: &Path| -> Result<(), String> {
        let st = Command::new(exe)
            .args(["optimize", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(st.status.success(), || String::from_utf8_lossy(&st.stderr).into_owned())
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    go(&a)?;
    go(&b)?;
    let files = [
        "portfolio.csv",
        "trace_run01.csv",
        "trace_run02.csv",
        "runs.csv",
        "stats.txt",
    ];
    for f in files {
        let x = std::fs::read(a.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(!x.is_empty() && x == y, || format!("{f} differs between executions"))?;
    }
    Ok(format!(
        "{} artifacts byte-identical across two executions",
        files.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("projection oracle equivalence", c1_projection_oracle),
        ("top-k support optimality", c2_support_optimality),
        ("mutation invariants", c3_mutation_invariants),
        ("initialization feasibility", c4_initialization),
        ("penalty exactness and ordering", c5_penalty),
        ("epsilon schedule bounds", c6_eps_bounds),
        ("elitism", c7_elitism),
        ("mutation improves ALLSO-H", c8_mutation_benefit),
        ("known-optimum solve", c9_known_optimum),
        ("backtest arithmetic", c10_backtest_arithmetic),
        ("determinism", c11_determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name} ({secs:.1}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {msg}", i + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
