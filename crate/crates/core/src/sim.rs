//! Seeded Monte Carlo simulation of k-shot sampling, a single agent run, and
//! budget-partitioned agent runs.
//!
//! Every trial draws from its own ChaCha8 stream (root seed, stream = trial
//! index), so trial `i` does not depend on how many trials are run or on the
//! execution policy, and results are reduced in trial order.
//!
//! The agent is synthetic: its failure probability after spending `B` dollars
//! is `exp(-lambda * max(0, B - B0))`, i.e. log-failure is linear in budget.
//! Equivalently the dollar amount at which it succeeds is `B0 + Exp(lambda)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, LogNormal};
use serde::{Deserialize, Serialize};

use crate::allocation::{Budget, SolverProfile};
use crate::cost_scaling::CostScalingModel;
use crate::error::{domain, Result};
use crate::estimation::{clopper_pearson, BernoulliEstimate};
use crate::exec::Exec;

/// Relative slack on the monetary cap so that e.g. twenty $0.10 attempts fit
/// in $2.00 despite rounding in the running sum.
const SPEND_SLACK: f64 = 1e-9;

/// Longest query count the agent cost model is scanned for.
const MAX_AGENT_QUERIES: u64 = 1_000_000;

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// How the cost of one k-shot attempt is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostDistribution {
    #[default]
    Fixed,
    /// Lognormal with its mean pinned to the profile's attempt cost.
    LogNormal { sigma: f64 },
}

enum CostSampler {
    Fixed(f64),
    LogNormal(LogNormal<f64>),
}

impl CostSampler {
    fn new(mean: f64, dist: CostDistribution) -> Result<Self> {
        match dist {
            CostDistribution::Fixed => Ok(CostSampler::Fixed(mean)),
            CostDistribution::LogNormal { sigma } => {
                if !(sigma.is_finite() && sigma >= 0.0) {
                    return Err(domain(format!(
                        "cost sigma must be non-negative, got {sigma}"
                    )));
                }
                let mu = mean.ln() - 0.5 * sigma * sigma;
                LogNormal::new(mu, sigma)
                    .map(CostSampler::LogNormal)
                    .map_err(|e| domain(e.to_string()))
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            CostSampler::Fixed(c) => *c,
            CostSampler::LogNormal(d) => d.sample(rng),
        }
    }
}

/// Agent whose log failure likelihood falls linearly in the dollars spent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAgentModel {
    /// `lambda`, nats of failure likelihood removed per dollar.
    pub hazard_rate: f64,
    /// `B0`, dollars spent before the agent can succeed at all.
    pub onset_cost: f64,
    /// Cumulative cost of the first `q` queries.
    pub cost_model: CostScalingModel,
}

impl SyntheticAgentModel {
    pub fn new(hazard_rate: f64, onset_cost: f64, cost_model: CostScalingModel) -> Result<Self> {
        let model = SyntheticAgentModel {
            hazard_rate,
            onset_cost,
            cost_model,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hazard_rate.is_finite() && self.hazard_rate >= 0.0) {
            return Err(domain(format!(
                "hazard rate must be >= 0, got {}",
                self.hazard_rate
            )));
        }
        if !(self.onset_cost.is_finite() && self.onset_cost >= 0.0) {
            return Err(domain(format!(
                "onset cost must be >= 0, got {}",
                self.onset_cost
            )));
        }
        let first = self.cost_model.predict(1)?;
        if first <= 0.0 {
            return Err(domain(format!(
                "cost model predicts non-positive cost {first} for one query"
            )));
        }
        // With gamma > 1 the prediction is strictly increasing in q iff b > 0.
        if self.cost_model.b <= 0.0 {
            return Err(domain(
                "cost model must increase with the number of queries (b > 0)",
            ));
        }
        Ok(())
    }

    /// Analytic success probability at budget `budget`.
    pub fn success_prob(&self, budget: f64) -> f64 {
        -(-self.exposure(budget)).exp_m1()
    }

    fn exposure(&self, budget: f64) -> f64 {
        self.hazard_rate * (budget - self.onset_cost).max(0.0)
    }

    /// Cumulative costs `zeta_1..=zeta_qmax` for the largest `qmax` with
    /// `zeta_qmax <= budget`.
    fn affordable_costs(&self, budget: f64) -> Result<Vec<f64>> {
        let mut costs = Vec::new();
        for q in 1..=MAX_AGENT_QUERIES {
            let c = self.cost_model.predict(q)?;
            if c > budget {
                return Ok(costs);
            }
            costs.push(c);
        }
        Err(domain(format!(
            "budget {budget} affords more than {MAX_AGENT_QUERIES} agent queries"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cost: f64,
    pub queries: u64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub trials: u64,
    pub successes: u64,
    pub mean_cost: f64,
    pub mean_queries: f64,
    pub records: Vec<TrialRecord>,
}

impl SimResult {
    fn from_records(records: Vec<TrialRecord>) -> Self {
        let trials = records.len() as u64;
        let mut successes = 0;
        let mut cost = 0.0;
        let mut queries = 0.0;
        for r in &records {
            successes += u64::from(r.success);
            cost += r.cost;
            queries += r.queries as f64;
        }
        let n = trials.max(1) as f64;
        SimResult {
            trials,
            successes,
            mean_cost: cost / n,
            mean_queries: queries / n,
            records,
        }
    }

    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// Clopper-Pearson interval on the success rate.
    pub fn interval(&self, confidence: f64) -> Result<BernoulliEstimate> {
        clopper_pearson(self.successes, self.trials, confidence)
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(domain("at least one trial is required"))
    } else {
        Ok(())
    }
}

fn check_agent_budget(budget: f64) -> Result<()> {
    if budget.is_finite() && budget > 0.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "agent budget must be positive, got {budget}"
        )))
    }
}

/// Runs simulations under a fixed execution policy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Simulator {
    pub exec: Exec,
}

impl Simulator {
    pub fn new(exec: Exec) -> Self {
        Simulator { exec }
    }

    pub fn kshot(
        &self,
        solver: &SolverProfile,
        cost: CostDistribution,
        budget: Budget,
        trials: u64,
        seed: u64,
    ) -> Result<SimResult> {
        check_trials(trials)?;
        budget.validate()?;
        let sampler = CostSampler::new(solver.attempt_cost, cost)?;
        let p = solver.success_prob;
        let records = self.exec.map_indexed(trials, |i| {
            let mut rng = trial_rng(seed, i);
            let mut spent = 0.0;
            let mut attempts = 0u64;
            loop {
                let may_start = match budget {
                    Budget::Monetary(cap) => spent < cap - SPEND_SLACK * cap.max(1.0),
                    Budget::QueryCount(k_max) => attempts < k_max,
                };
                if !may_start {
                    return TrialRecord {
                        cost: spent,
                        queries: attempts,
                        success: false,
                    };
                }
                spent += sampler.draw(&mut rng);
                attempts += 1;
                if rng.random::<f64>() < p {
                    return TrialRecord {
                        cost: spent,
                        queries: attempts,
                        success: true,
                    };
                }
            }
        });
        Ok(SimResult::from_records(records))
    }

    pub fn agent(
        &self,
        model: &SyntheticAgentModel,
        budget: f64,
        trials: u64,
        seed: u64,
    ) -> Result<SimResult> {
        self.partitioned(model, budget, 1, trials, seed)
    }

    pub fn partitioned(
        &self,
        model: &SyntheticAgentModel,
        budget: f64,
        parts: u64,
        trials: u64,
        seed: u64,
    ) -> Result<SimResult> {
        check_trials(trials)?;
        check_agent_budget(budget)?;
        model.validate()?;
        if parts == 0 {
            return Err(domain("parts must be at least 1"));
        }
        let part_budget = budget / parts as f64;
        let costs = model.affordable_costs(part_budget)?;
        let exposure = model.exposure(part_budget);
        let records = self.exec.map_indexed(trials, |i| {
            let mut rng = trial_rng(seed, i);
            let mut total = TrialRecord {
                cost: 0.0,
                queries: 0,
                success: false,
            };
            for _ in 0..parts {
                let part = agent_run(model, &costs, exposure, &mut rng);
                total.cost += part.cost;
                total.queries += part.queries;
                total.success |= part.success;
            }
            total
        });
        Ok(SimResult::from_records(records))
    }
}

/// One agent run with the affordable cumulative costs precomputed.
fn agent_run(
    model: &SyntheticAgentModel,
    costs: &[f64],
    exposure: f64,
    rng: &mut ChaCha8Rng,
) -> TrialRecord {
    let e: f64 = Exp1.sample(rng);
    let success = e < exposure;
    let queries = if success {
        // Dollars spent when the agent succeeds; charge up to the first query
        // whose cumulative cost reaches it.
        let spent_at_success = model.onset_cost + e / model.hazard_rate;
        let q = costs.partition_point(|&c| c < spent_at_success) + 1;
        q.min(costs.len())
    } else {
        costs.len()
    };
    TrialRecord {
        cost: if queries == 0 {
            0.0
        } else {
            costs[queries - 1]
        },
        queries: queries as u64,
        success,
    }
}

/// k-shot sampling with fixed per-attempt cost.
pub fn simulate_kshot(
    solver: &SolverProfile,
    budget: Budget,
    trials: u64,
    seed: u64,
) -> Result<SimResult> {
    Simulator::default().kshot(solver, CostDistribution::Fixed, budget, trials, seed)
}

pub fn simulate_agent(
    model: &SyntheticAgentModel,
    budget: f64,
    trials: u64,
    seed: u64,
) -> Result<SimResult> {
    Simulator::default().agent(model, budget, trials, seed)
}

/// `parts` independent agent runs at `budget / parts` each; a trial succeeds
/// if any run does. Parts never hand unused budget to each other.
pub fn simulate_partitioned(
    model: &SyntheticAgentModel,
    budget: f64,
    parts: u64,
    trials: u64,
    seed: u64,
) -> Result<SimResult> {
    Simulator::default().partitioned(model, budget, parts, trials, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    #[default]
    Monetary,
    QueryCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    Kshot {
        solver: SolverProfile,
        #[serde(default)]
        cost: CostDistribution,
        #[serde(default)]
        budget_kind: BudgetKind,
    },
    Agent {
        model: SyntheticAgentModel,
    },
    PartitionedAgent {
        model: SyntheticAgentModel,
        parts: u64,
    },
}

impl StrategySpec {
    /// Label written next to every simulated curve.
    pub fn source_label(&self) -> String {
        match self {
            StrategySpec::Kshot { .. } => "synthetic-kshot".to_string(),
            StrategySpec::Agent { .. } => "synthetic-hazard-agent".to_string(),
            StrategySpec::PartitionedAgent { parts, .. } => {
                format!("synthetic-hazard-agent-1/{parts}x{parts}")
            }
        }
    }

    pub fn budget_axis(&self) -> BudgetKind {
        match self {
            StrategySpec::Kshot { budget_kind, .. } => *budget_kind,
            _ => BudgetKind::Monetary,
        }
    }

    pub fn simulate(
        &self,
        sim: &Simulator,
        budget: f64,
        trials: u64,
        seed: u64,
    ) -> Result<SimResult> {
        match self {
            StrategySpec::Kshot {
                solver,
                cost,
                budget_kind,
            } => {
                let budget = match budget_kind {
                    BudgetKind::Monetary => Budget::monetary(budget)?,
                    BudgetKind::QueryCount => {
                        if !(budget >= 0.0 && budget.fract() == 0.0) {
                            return Err(domain(format!(
                                "query-count budget must be a whole number, got {budget}"
                            )));
                        }
                        Budget::QueryCount(budget as u64)
                    }
                };
                sim.kshot(solver, *cost, budget, trials, seed)
            }
            StrategySpec::Agent { model } => sim.agent(model, budget, trials, seed),
            StrategySpec::PartitionedAgent { model, parts } => {
                sim.partitioned(model, budget, *parts, trials, seed)
            }
        }
    }
}

/// Summary of one budget level of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub budget: f64,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub mean_queries: f64,
    pub mean_cost: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

pub fn sweep_curves(
    spec: &StrategySpec,
    budgets: &[f64],
    trials: u64,
    seed: u64,
    confidence: f64,
) -> Result<Vec<SweepPoint>> {
    sweep_curves_with(
        &Simulator::default(),
        spec,
        budgets,
        trials,
        seed,
        confidence,
    )
}

/// Simulates every budget with the same seed, so neighbouring budgets share
/// random numbers and the curve is smooth.
pub fn sweep_curves_with(
    sim: &Simulator,
    spec: &StrategySpec,
    budgets: &[f64],
    trials: u64,
    seed: u64,
    confidence: f64,
) -> Result<Vec<SweepPoint>> {
    if budgets
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(domain("sweep budgets must be strictly ascending"));
    }
    budgets
        .iter()
        .map(|&budget| {
            let res = spec.simulate(sim, budget, trials, seed)?;
            let ci = res.interval(confidence)?;
            Ok(SweepPoint {
                budget,
                trials: res.trials,
                successes: res.successes,
                success_rate: res.success_rate(),
                mean_queries: res.mean_queries,
                mean_cost: res.mean_cost,
                ci_lower: ci.lower,
                ci_upper: ci.upper,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_agent(lambda: f64, onset: f64) -> SyntheticAgentModel {
        SyntheticAgentModel::new(
            lambda,
            onset,
            CostScalingModel::from_params(0.05, 0.002, 2.0).unwrap(),
        )
        .unwrap()
    }

    fn within_3_sigma(res: &SimResult, p: f64) -> bool {
        let sd = (p * (1.0 - p) / res.trials as f64).sqrt();
        (res.success_rate() - p).abs() <= 3.0 * sd.max(1e-12)
    }

    #[test]
    fn near_certain_solver_stops_after_first_attempt() {
        let s = SolverProfile::new("s", 0.999999, 0.1).unwrap();
        let res = simulate_kshot(&s, Budget::Monetary(2.0), 2_000, 1).unwrap();
        assert_eq!(res.successes, 2_000);
        assert!((res.mean_cost - 0.1).abs() < 1e-12);
    }

    #[test]
    fn monetary_cap_allows_ceil_attempts() {
        let s = SolverProfile::new("s", 1e-9, 0.1).unwrap();
        let res = simulate_kshot(&s, Budget::Monetary(2.0), 50, 3).unwrap();
        assert!(res.records.iter().all(|r| r.queries == 20 && !r.success));
        let res = simulate_kshot(&s, Budget::Monetary(0.25), 50, 3).unwrap();
        assert!(res.records.iter().all(|r| r.queries == 3));
        assert!((res.mean_cost - 0.3).abs() < 1e-12);
    }

    #[test]
    fn query_cap() {
        let s = SolverProfile::new("s", 0.02, 0.1).unwrap();
        let res = simulate_kshot(&s, Budget::QueryCount(50), 5_000, 9).unwrap();
        assert!(res.records.iter().all(|r| r.queries <= 50));
        assert!(res
            .records
            .iter()
            .filter(|r| !r.success)
            .all(|r| r.queries == 50));
        assert!(res.records.iter().any(|r| !r.success));
    }

    #[test]
    fn lognormal_costs_keep_their_mean() {
        let s = SolverProfile::new("s", 1e-9, 0.1).unwrap();
        let res = Simulator::default()
            .kshot(
                &s,
                CostDistribution::LogNormal { sigma: 0.5 },
                Budget::QueryCount(1),
                50_000,
                5,
            )
            .unwrap();
        assert!((res.mean_cost - 0.1).abs() < 0.002, "{}", res.mean_cost);
    }

    #[test]
    fn zero_hazard_never_succeeds() {
        let res = simulate_agent(&quad_agent(0.0, 0.0), 2.0, 1_000, 7).unwrap();
        assert_eq!(res.successes, 0);
    }

    #[test]
    fn pre_onset_never_succeeds() {
        let res = simulate_agent(&quad_agent(3.0, 1.0), 0.8, 1_000, 7).unwrap();
        assert_eq!(res.successes, 0);
    }

    #[test]
    fn agent_query_accounting() {
        let model = quad_agent(0.0, 0.0);
        // 0.05 + 0.002 q^2 <= 2.0  =>  q <= 31
        let res = simulate_agent(&model, 2.0, 10, 1).unwrap();
        assert!(res.records.iter().all(|r| r.queries == 31));
        assert!((res.mean_cost - model.cost_model.predict(31).unwrap()).abs() < 1e-12);

        let succeeding = simulate_agent(&quad_agent(5.0, 0.0), 2.0, 2_000, 2).unwrap();
        for r in succeeding.records.iter().filter(|r| r.success) {
            assert!(r.queries >= 1 && r.queries <= 31);
            assert!(r.cost <= 2.0);
        }
    }

    #[test]
    fn agent_hazard_law() {
        let res = simulate_agent(&quad_agent(0.5528, 0.0), 2.0, 100_000, 11).unwrap();
        assert!(within_3_sigma(&res, 1.0 - (-1.1056f64).exp()));
    }

    #[test]
    fn single_part_matches_agent_exactly() {
        let model = quad_agent(0.8, 0.2);
        let a = simulate_agent(&model, 1.5, 3_000, 42).unwrap();
        let p = simulate_partitioned(&model, 1.5, 1, 3_000, 42).unwrap();
        assert_eq!(a, p);
    }

    #[test]
    fn partitioned_law() {
        let model = quad_agent(1.0, 0.4);
        let res = simulate_partitioned(&model, 2.0, 3, 100_000, 13).unwrap();
        let per_part = model.success_prob(2.0 / 3.0);
        assert!((per_part - 0.2340717).abs() < 1e-6);
        let combined = 1.0 - (1.0 - per_part).powi(3);
        assert!((combined - 0.5506710).abs() < 1e-6);
        assert!(within_3_sigma(&res, combined));
        assert!((model.success_prob(2.0) - 0.7981035).abs() < 1e-6);
    }

    #[test]
    fn invalid_inputs() {
        let model = quad_agent(1.0, 0.0);
        assert!(simulate_agent(&model, 0.0, 10, 1).is_err());
        assert!(simulate_agent(&model, 1.0, 0, 1).is_err());
        assert!(simulate_partitioned(&model, 1.0, 0, 10, 1).is_err());
        let negative = CostScalingModel::from_params(-0.1, 0.002, 2.0).unwrap();
        assert!(SyntheticAgentModel::new(1.0, 0.0, negative).is_err());
    }

    #[test]
    fn trial_streams_do_not_depend_on_trial_count() {
        let s = SolverProfile::new("s", 0.3, 0.1).unwrap();
        let short = simulate_kshot(&s, Budget::Monetary(1.0), 100, 77).unwrap();
        let long = simulate_kshot(&s, Budget::Monetary(1.0), 1_000, 77).unwrap();
        assert_eq!(short.records[..], long.records[..100]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn execution_policies_agree() {
        let s = SolverProfile::new("s", 0.3, 0.1).unwrap();
        let seq = Simulator::new(Exec::Sequential)
            .kshot(
                &s,
                CostDistribution::LogNormal { sigma: 0.3 },
                Budget::Monetary(1.0),
                5_000,
                4,
            )
            .unwrap();
        let par = Simulator::new(Exec::Parallel)
            .kshot(
                &s,
                CostDistribution::LogNormal { sigma: 0.3 },
                Budget::Monetary(1.0),
                5_000,
                4,
            )
            .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn sweep_kshot() {
        let spec = StrategySpec::Kshot {
            solver: SolverProfile::new("s", 0.3, 0.1).unwrap(),
            cost: CostDistribution::Fixed,
            budget_kind: BudgetKind::Monetary,
        };
        let pts = sweep_curves(&spec, &[0.5, 1.0, 2.0], 50_000, 3, 0.95).unwrap();
        let expected = [
            1.0 - 0.7f64.powi(5),
            1.0 - 0.7f64.powi(10),
            1.0 - 0.7f64.powi(20),
        ];
        for (pt, p) in pts.iter().zip(expected) {
            let sd = (p * (1.0 - p) / pt.trials as f64).sqrt();
            assert!((pt.success_rate - p).abs() <= 3.0 * sd, "{pt:?}");
            assert!(pt.ci_lower <= pt.success_rate && pt.success_rate <= pt.ci_upper);
        }
        assert!(pts
            .windows(2)
            .all(|w| w[0].success_rate <= w[1].success_rate));

        assert_eq!(sweep_curves(&spec, &[1.0], 10, 1, 0.95).unwrap().len(), 1);
        assert!(sweep_curves(&spec, &[1.0, 0.5], 10, 1, 0.95).is_err());
    }

    #[test]
    fn query_count_sweep_requires_whole_numbers() {
        let spec = StrategySpec::Kshot {
            solver: SolverProfile::new("s", 0.3, 0.1).unwrap(),
            cost: CostDistribution::Fixed,
            budget_kind: BudgetKind::QueryCount,
        };
        assert!(sweep_curves(&spec, &[1.5], 10, 1, 0.95).is_err());
        assert_eq!(
            sweep_curves(&spec, &[1.0, 5.0], 10, 1, 0.95).unwrap().len(),
            2
        );
    }
}
