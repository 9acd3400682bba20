//! Cardinality-constrained portfolio selection with a level-based learning
//! swarm optimizer.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod backtest;
pub mod error;
pub mod estimation;
pub mod model;
pub mod mutation;
pub mod penalty;
pub mod projection;
pub mod stats;
pub mod swarm;
pub mod synthetic;

#[cfg(any(test, feature = "oracles"))]
pub mod oracle;

pub use backtest::{run_backtest, BacktestConfig, BacktestLedger, CostTier, PeriodRecord, Summary};
pub use error::{Error, Result};
pub use estimation::{PricePanel, ReturnPanel, Shrinkage};
pub use model::{ConstraintSpec, FeasibilityReport, MarketModel, Portfolio};
pub use mutation::{MutationConfig, SwapGate};
pub use penalty::{HybridPenaltyState, ImprovementTest, L1PenaltyState};
pub use projection::{FeasibleSetB, Projection};
pub use swarm::{Algorithm, Handler, IndicatorForm, RunResult, SwarmConfig, TraceRow};
