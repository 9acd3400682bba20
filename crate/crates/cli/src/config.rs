//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment. An empty file gives the reference
//! setup: ALLSO with mutation and the hybrid handler, NP = 500, 2000
//! generations, k = 30% of the assets, boxes [0.001, 0.05], TR = 0.2 and 25
//! runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use llso_core::backtest::{required_prices, BacktestConfig};
use llso_core::{Algorithm, Handler, ImprovementTest, IndicatorForm, Shrinkage, SwapGate, SwarmConfig};

use crate::error::{CliError, CliResult};

/// One algorithm/handler/mutation combination, written like `ALLSO-MUT-H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub algorithm: Algorithm,
    pub handler: Handler,
    pub mutation: bool,
}

impl Variant {
    pub fn parse(label: &str) -> Result<Self, String> {
        let parts: Vec<String> = label.trim().split('-').map(|p| p.trim().to_ascii_uppercase()).collect();
        let (alg, mutation, handler) = match parts.as_slice() {
            [a, m, h] if m == "MUT" => (a, true, h),
            [a, h] => (a, false, h),
            _ => {
                return Err(format!(
                    "cannot parse algorithm label `{label}` (expected e.g. ALLSO-MUT-H)"
                ))
            }
        };
        let algorithm = match alg.as_str() {
            "ALLSO" => Algorithm::Allso,
            "DLLSO" => Algorithm::Dllso,
            "PSO" => Algorithm::Pso,
            other => return Err(format!("unknown algorithm `{other}` in `{label}`")),
        };
        let handler = match handler.as_str() {
            "H" => Handler::Hybrid,
            "L1" => Handler::L1,
            other => return Err(format!("unknown handler `{other}` in `{label}`")),
        };
        Ok(Variant {
            algorithm,
            handler,
            mutation,
        })
    }

    /// Solver settings of `base` with this variant's switches.
    pub fn apply(&self, base: &SwarmConfig) -> SwarmConfig {
        SwarmConfig {
            algorithm: self.algorithm,
            handler: self.handler,
            mutation: self.mutation,
            ..base.clone()
        }
    }

    pub fn label(&self) -> String {
        self.apply(&SwarmConfig::default()).label()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Price CSV: `date` column, then one column per ticker.
    pub prices: Option<PathBuf>,
    /// Current holdings as `ticker,weight`. Without it the optimize command
    /// starts from cash with no turnover limit.
    pub current: Option<PathBuf>,
    /// Benchmark weights as `ticker,weight` for the backtest.
    pub benchmark: Option<PathBuf>,
    /// Used instead of `prices` when positive.
    pub synthetic_assets: usize,
    /// 0 means just enough prices for the backtest window and horizon.
    pub synthetic_periods: usize,
    pub synthetic_seed: u64,
    /// Explicit cardinality; `None` uses `k_fraction` of the assets.
    pub k: Option<usize>,
    pub runs: usize,
    pub grid: Vec<Variant>,
    pub k_grid: Vec<f64>,
    /// Constraint, estimation and cost settings plus the solver.
    pub backtest: BacktestConfig,
}

impl Default for RunSpec {
    fn default() -> Self {
        let allso_h = Variant {
            algorithm: Algorithm::Allso,
            handler: Handler::Hybrid,
            mutation: false,
        };
        Self {
            prices: None,
            current: None,
            benchmark: None,
            synthetic_assets: 0,
            synthetic_periods: 0,
            synthetic_seed: 0,
            k: None,
            runs: 25,
            grid: vec![
                Variant {
                    mutation: true,
                    ..allso_h
                },
                allso_h,
            ],
            k_grid: Vec::new(),
            backtest: BacktestConfig::default(),
        }
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(s.trim()))
        .collect()
}

fn on_off(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on/off, got `{v}`")),
    }
}

fn path_in(base: &Path, v: &str) -> Option<PathBuf> {
    if v.is_empty() {
        return None;
    }
    let p = PathBuf::from(v);
    Some(if p.is_relative() { base.join(p) } else { p })
}

impl RunSpec {
    /// Sets one key. Relative paths are taken relative to `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let v = value.trim();
        let s = &mut self.backtest.solver;
        match key.trim() {
            "prices" => self.prices = path_in(base, v),
            "current" => self.current = path_in(base, v),
            "benchmark" => self.benchmark = path_in(base, v),
            "synthetic_assets" => self.synthetic_assets = num(v)?,
            "synthetic_periods" => self.synthetic_periods = num(v)?,
            "synthetic_seed" => self.synthetic_seed = num(v)?,
            "runs" => self.runs = num(v)?,
            "grid" => {
                self.grid = v
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(Variant::parse)
                    .collect::<Result<_, _>>()?
            }
            "k_grid" => self.k_grid = list(v)?,
            "k" => self.k = if v == "auto" { None } else { Some(num(v)?) },
            "k_fraction" => self.backtest.k_fraction = num(v)?,
            "lower" => self.backtest.lower = num(v)?,
            "upper" => self.backtest.upper = num(v)?,
            "turnover_cap" => self.backtest.turnover_cap = num(v)?,
            "risk_free" => self.backtest.risk_free = num(v)?,
            "shrinkage" => {
                self.backtest.shrinkage = match v {
                    "auto" => Shrinkage::Auto,
                    "none" => Shrinkage::None,
                    d => Shrinkage::Fixed(num(d)?),
                }
            }
            "window" => self.backtest.window = num(v)?,
            "horizon" => self.backtest.horizon = num(v)?,
            "initial_wealth" => self.backtest.initial_wealth = num(v)?,
            "periods_per_year" => self.backtest.periods_per_year = num(v)?,
            "seed" => s.seed = num(v)?,
            "np" => s.np = num(v)?,
            "nl_min" => s.nl_min = num(v)?,
            "nl_max" => s.nl_max = num(v)?,
            "nl_init" => s.nl_init = num(v)?,
            "delta_bar" => s.delta_bar = num(v)?,
            "px" => s.px = num(v)?,
            "xi" => s.xi = num(v)?,
            "g_max" => s.g_max = num(v)?,
            "phi" => s.phi_fixed = num(v)?,
            "level_pool" => s.level_pool = list(v)?,
            "d_min" => s.d_min = num(v)?,
            "d_max" => s.d_max = num(v)?,
            "v_max_scale" => s.v_max_scale = num(v)?,
            "algorithm" => {
                s.algorithm = match v.to_ascii_lowercase().as_str() {
                    "allso" => Algorithm::Allso,
                    "dllso" => Algorithm::Dllso,
                    "pso" => Algorithm::Pso,
                    _ => return Err(format!("algorithm must be allso, dllso or pso, got `{v}`")),
                }
            }
            "handler" => {
                s.handler = match v.to_ascii_lowercase().as_str() {
                    "hybrid" => Handler::Hybrid,
                    "l1" => Handler::L1,
                    _ => return Err(format!("handler must be hybrid or l1, got `{v}`")),
                }
            }
            "mutation" => s.mutation = on_off(v)?,
            "swap_gate" => {
                s.swap_gate = match v {
                    "decaying" => SwapGate::Decaying,
                    "logistic" => SwapGate::Logistic,
                    _ => return Err(format!("swap_gate must be decaying or logistic, got `{v}`")),
                }
            }
            "indicator" => {
                s.indicator = match v {
                    "absolute" => IndicatorForm::Absolute,
                    "literal" => IndicatorForm::Literal,
                    _ => return Err(format!("indicator must be absolute or literal, got `{v}`")),
                }
            }
            "eps0_test" => {
                s.eps0_test = match v {
                    "relative" => ImprovementTest::Relative,
                    "literal" => ImprovementTest::Literal,
                    _ => return Err(format!("eps0_test must be relative or literal, got `{v}`")),
                }
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parses config text. `origin` names the source in error messages and
    /// `base` anchors relative paths.
    pub fn parse(text: &str, origin: &str, base: &Path) -> CliResult<Self> {
        let mut spec = RunSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            spec.set(key, value, base)
                .map_err(|m| CliError::Config(format!("{origin}:{}: {m}", i + 1)))?;
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Applies a `key=value` command-line override.
    pub fn apply_override(&mut self, kv: &str) -> CliResult<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{kv}`")))?;
        self.set(k, v, Path::new("."))
            .map_err(|m| CliError::Config(format!("--set {kv}: {m}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.prices.is_none() && self.synthetic_assets == 0 {
            return bad("no price data: set `prices` or `synthetic_assets`".into());
        }
        if let Some(&f) = self.k_grid.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return bad(format!("k_grid entry {f} outside (0, 1]"));
        }
        if !(self.backtest.k_fraction > 0.0 && self.backtest.k_fraction <= 1.0) {
            return bad(format!("k_fraction {} outside (0, 1]", self.backtest.k_fraction));
        }
        self.backtest.solver.validate()?;
        Ok(())
    }

    pub fn solver(&self) -> &SwarmConfig {
        &self.backtest.solver
    }

    /// Prices the synthetic panel needs.
    pub fn synthetic_len(&self) -> usize {
        if self.synthetic_periods > 0 {
            self.synthetic_periods
        } else {
            required_prices(self.backtest.window, self.backtest.horizon)
        }
    }

    /// Canonical text of the settings that shape a run, echoed into outputs.
    pub fn echo(&self) -> String {
        let s = self.solver();
        let b = &self.backtest;
        let mut out = String::new();
        let shrink = match b.shrinkage {
            Shrinkage::Auto => "auto".to_string(),
            Shrinkage::None => "none".to_string(),
            Shrinkage::Fixed(d) => d.to_string(),
        };
        let k = self.k.map_or("auto".to_string(), |k| k.to_string());
        for (key, val) in [
            ("label", s.label()),
            ("seed", s.seed.to_string()),
            ("runs", self.runs.to_string()),
            ("np", s.np.to_string()),
            ("g_max", s.g_max.to_string()),
            ("k", k),
            ("k_fraction", b.k_fraction.to_string()),
            ("lower", b.lower.to_string()),
            ("upper", b.upper.to_string()),
            ("turnover_cap", b.turnover_cap.to_string()),
            ("risk_free", b.risk_free.to_string()),
            ("shrinkage", shrink),
            ("window", b.window.to_string()),
        ] {
            let _ = writeln!(out, "{key} = {val}");
        }
        out
    }
}
