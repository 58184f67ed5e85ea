//! Budget-constrained allocation of retryable success-or-fail solvers.
//!
//! The crate covers the reliability-per-dollar metric `-ln(1 - p) / c`, exact
//! and relaxed budget allocation, Clopper-Pearson estimation, power-law cost
//! fitting, seeded strategy simulation, and run-log reporting.

pub mod allocation;
pub mod cli;
pub mod cost_scaling;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod knapsack;
pub mod report;
pub mod runlog;
pub mod sim;
pub mod sim_config;

pub use allocation::{
    crossover_holds, kshot_profile, lp_allocate, metric, optimal_moves, AgentScalingPoint,
    Allocation, AllocationMethod, Budget, CrossoverDecision, CrossoverFlag, OptimalMoves,
    SolverProfile,
};
pub use cost_scaling::{fit_power_law, normalize, predict_cost, CostScalingModel, FitOptions};
pub use error::{Error, Result};
pub use estimation::{
    adaptive_estimate, adaptive_from_outcomes, clopper_pearson, mirror_symmetry_check,
    AdaptiveEstimate, BernoulliEstimate, StoppingRule,
};
pub use exec::Exec;
pub use knapsack::{knapsack_allocate, knapsack_allocate_with, KnapsackOptions};
pub use report::{
    averaged_curve, cumulative_curve, metric_table, Aggregation, AveragedCurve, Axis, Curve,
    CurvePoint, MetricRow,
};
pub use runlog::{ingest, serialize, IngestError, RunRecord, Verdict};
pub use sim::{
    simulate_agent, simulate_kshot, simulate_partitioned, sweep_curves, BudgetKind,
    CostDistribution, SimResult, Simulator, StrategySpec, SweepPoint, SyntheticAgentModel,
    TrialRecord,
};
pub use sim_config::SimConfig;
