//! Solver profiles, the reliability-per-dollar metric and budget allocation.
//!
//! A solver is anything that can be retried independently and either succeeds
//! or fails: one model call, one agent trajectory, a batch of k calls. Running
//! solver `i` exactly `k_i` times fails with probability `prod (1 - p_i)^k_i`,
//! so maximizing success under a budget is the unbounded knapsack
//!
//! ```text
//! maximize  sum_i k_i * (-ln(1 - p_i))
//! s.t.      sum_i k_i * c_i <= C,   k_i in Z>=0
//! ```
//!
//! whose LP relaxation puts the whole budget on the solver with the largest
//! `-ln(1 - p) / c`.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::cost_scaling::CostScalingModel;
use crate::error::{domain, Error, Result};

/// Slack used when comparing the two sides of the crossover condition, so
/// that exact analytic ties survive floating-point rounding.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Negative log failure likelihood of a single attempt, `-ln(1 - p)`, in nats.
#[inline]
pub(crate) fn log_survival_gain(p: f64) -> f64 {
    -(-p).ln_1p()
}

fn check_prob_open(p: f64, what: &str) -> Result<()> {
    if p.is_finite() && p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProfile(format!(
            "{what} must lie in the open interval (0, 1), got {p}"
        )))
    }
}

fn check_cost(c: f64, what: &str) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidProfile(format!(
            "{what} must be a positive dollar amount, got {c}"
        )))
    }
}

/// Negative log failure likelihood per dollar, `-ln(1 - p) / c`.
pub fn metric(p: f64, c: f64) -> Result<f64> {
    check_prob_open(p, "success probability")?;
    check_cost(c, "attempt cost")?;
    Ok(log_survival_gain(p) / c)
}

/// A retryable success-or-fail solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct SolverProfile {
    pub id: String,
    pub success_prob: f64,
    pub attempt_cost: f64,
    /// `-ln(1 - success_prob)`, kept exactly through k-shot composition
    /// instead of being recomputed from a probability that may sit near 1.
    #[serde(skip)]
    log_gain: f64,
}

#[derive(Deserialize)]
struct RawProfile {
    id: String,
    success_prob: f64,
    attempt_cost: f64,
}

impl TryFrom<RawProfile> for SolverProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        SolverProfile::new(raw.id, raw.success_prob, raw.attempt_cost)
    }
}

impl SolverProfile {
    pub fn new(id: impl Into<String>, success_prob: f64, attempt_cost: f64) -> Result<Self> {
        check_prob_open(success_prob, "success probability")?;
        check_cost(attempt_cost, "attempt cost")?;
        Ok(Self {
            id: id.into(),
            success_prob,
            attempt_cost,
            log_gain: log_survival_gain(success_prob),
        })
    }

    pub fn metric(&self) -> f64 {
        self.log_gain / self.attempt_cost
    }

    /// Per-attempt objective contribution, `-ln(1 - p)`.
    pub fn log_gain(&self) -> f64 {
        self.log_gain
    }

    /// The solver "run this one `k` times, succeed if any run succeeds".
    ///
    /// Success probability becomes `1 - (1 - p)^k` and cost `k * c`; the metric
    /// is unchanged.
    pub fn kshot(&self, k: u64) -> Result<SolverProfile> {
        if k == 0 {
            return Err(domain("k-shot repetition count must be at least 1"));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let kf = k as f64;
        let log_gain = kf * self.log_gain;
        let p = -(-log_gain).exp_m1();
        // 1 - (1-p)^k rounds to exactly 1 once (1-p)^k < 2^-53.
        if p >= 1.0 {
            return Err(Error::InvalidProfile(format!(
                "{k}-shot success probability of `{}` rounds to 1",
                self.id
            )));
        }
        Ok(SolverProfile {
            id: format!("{}x{k}", self.id),
            success_prob: p,
            attempt_cost: kf * self.attempt_cost,
            log_gain,
        })
    }
}

/// Free-function form of [`SolverProfile::kshot`].
pub fn kshot_profile(solver: &SolverProfile, k: u64) -> Result<SolverProfile> {
    solver.kshot(k)
}

/// A per-problem budget cap, either in dollars or in model calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "amount", rename_all = "snake_case")]
pub enum Budget {
    Monetary(f64),
    QueryCount(u64),
}

impl Budget {
    /// Monetary cap used in the reference deployment scenario (USD per problem).
    pub const DEFAULT_MONETARY: f64 = 2.0;
    /// Query cap used in the reference deployment scenario (calls per problem).
    pub const DEFAULT_QUERIES: u64 = 50;

    pub fn monetary(amount: f64) -> Result<Self> {
        if amount.is_finite() && amount >= 0.0 {
            Ok(Budget::Monetary(amount))
        } else {
            Err(domain(format!(
                "budget must be a non-negative amount, got {amount}"
            )))
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Budget::Monetary(a) => Budget::monetary(a).map(|_| ()),
            Budget::QueryCount(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationMethod {
    LpRelaxation,
    Knapsack,
}

/// Attempt counts per solver, with the resulting cost, objective and
/// success probability.
///
/// Counts are whole numbers for [`AllocationMethod::Knapsack`] and may be
/// fractional for [`AllocationMethod::LpRelaxation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub method: AllocationMethod,
    pub budget: f64,
    pub counts: IndexMap<String, f64>,
    pub total_cost: f64,
    /// `-sum k_i ln(1 - p_i)`, in nats.
    pub objective: f64,
    pub success_prob: f64,
}

impl Allocation {
    pub(crate) fn from_counts(
        method: AllocationMethod,
        budget: f64,
        solvers: &[SolverProfile],
        counts: &[f64],
    ) -> Self {
        debug_assert_eq!(solvers.len(), counts.len());
        let mut total_cost = 0.0;
        let mut objective = 0.0;
        for (s, &k) in solvers.iter().zip(counts) {
            total_cost += k * s.attempt_cost;
            objective += k * s.log_gain();
        }
        Allocation {
            method,
            budget,
            counts: solvers
                .iter()
                .zip(counts)
                .map(|(s, &k)| (s.id.clone(), k))
                .collect(),
            total_cost,
            objective,
            success_prob: -(-objective).exp_m1(),
        }
    }

    pub fn count(&self, id: &str) -> Option<f64> {
        self.counts.get(id).copied()
    }
}

pub(crate) fn check_solvers(solvers: &[SolverProfile]) -> Result<()> {
    if solvers.is_empty() {
        return Err(Error::Empty("solver list"));
    }
    let mut seen = std::collections::HashSet::new();
    for s in solvers {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::DuplicateId(s.id.clone()));
        }
    }
    Ok(())
}

/// Index of the metric-maximizing solver; the earliest one wins ties.
pub fn best_solver_index(solvers: &[SolverProfile]) -> Result<usize> {
    if solvers.is_empty() {
        return Err(Error::Empty("solver list"));
    }
    let mut best = 0;
    let mut best_metric = solvers[0].metric();
    for (i, s) in solvers.iter().enumerate().skip(1) {
        let m = s.metric();
        if m > best_metric {
            best = i;
            best_metric = m;
        }
    }
    Ok(best)
}

/// Optimum of the LP relaxation: the whole budget goes to the solver with the
/// highest metric, as a real-valued attempt count.
pub fn lp_allocate(solvers: &[SolverProfile], budget: f64) -> Result<Allocation> {
    check_solvers(solvers)?;
    Budget::monetary(budget)?;
    let j = best_solver_index(solvers)?;
    let mut counts = vec![0.0; solvers.len()];
    counts[j] = budget / solvers[j].attempt_cost;
    Ok(Allocation::from_counts(
        AllocationMethod::LpRelaxation,
        budget,
        solvers,
        &counts,
    ))
}

/// One measured point on an agent's scaling curve: with a cap of `queries`
/// model calls it succeeds with `success_prob` and costs `cost` dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentScalingPoint {
    pub queries: u64,
    pub success_prob: f64,
    pub cost: f64,
}

impl AgentScalingPoint {
    pub fn new(queries: u64, success_prob: f64, cost: f64) -> Result<Self> {
        let pt = AgentScalingPoint {
            queries,
            success_prob,
            cost,
        };
        pt.validate()?;
        Ok(pt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries == 0 {
            return Err(domain("agent scaling point needs queries >= 1"));
        }
        if !(self.cost.is_finite() && self.cost > 0.0) {
            return Err(domain(format!(
                "agent cost must be positive, got {}",
                self.cost
            )));
        }
        if !(self.success_prob >= 0.0 && self.success_prob < 1.0) {
            return Err(domain(format!(
                "agent success probability must lie in [0, 1), got {}",
                self.success_prob
            )));
        }
        Ok(())
    }

    /// Metric of this point; zero when the agent never succeeds.
    pub fn metric(&self) -> f64 {
        log_survival_gain(self.success_prob) / self.cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalMoves {
    pub q_star: u64,
    pub metric: f64,
}

/// The cost-optimal query cap `q* = argmax_q -ln(1 - pi_q) / zeta_q`.
/// Ties go to the smaller `q`.
pub fn optimal_moves(points: &[AgentScalingPoint]) -> Result<OptimalMoves> {
    if points.is_empty() {
        return Err(Error::Empty("agent scaling points"));
    }
    let mut seen = std::collections::HashSet::new();
    for p in points {
        p.validate()?;
        if !seen.insert(p.queries) {
            return Err(domain(format!("duplicate query count {}", p.queries)));
        }
    }
    let mut sorted: Vec<_> = points.to_vec();
    sorted.sort_by_key(|p| p.queries);
    let mut best = OptimalMoves {
        q_star: sorted[0].queries,
        metric: sorted[0].metric(),
    };
    for p in &sorted[1..] {
        let m = p.metric();
        if m > best.metric {
            best = OptimalMoves {
                q_star: p.queries,
                metric: m,
            };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverFlag {
    /// `q = 1` was supplied; the comparison is only meaningful for `q >= 2`.
    SingleQuery,
    /// `pi_q = 1`: the agent's metric is infinite, so it trivially wins.
    CertainAgent,
}

/// Outcome of comparing an agent with `q` queries against repeated single
/// calls of the base model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverDecision {
    /// `pi_q >= 1 - (1 - p_1)^(a' + b' q^gamma)`.
    pub holds: bool,
    /// `-ln(1 - pi_q) / zeta_q >= -ln(1 - p_1) / c_1`, evaluated separately.
    pub log_form_holds: bool,
    /// Smallest agent success probability that would make the agent win.
    pub threshold_prob: f64,
    pub agent_metric: f64,
    pub kshot_metric: f64,
    pub flags: Vec<CrossoverFlag>,
}

/// Whether an agent with `q` queries and success probability `pi_q` is at
/// least as cost-efficient as independent repeats of `base`, for any number
/// of repeats.
pub fn crossover_holds(
    base: &SolverProfile,
    model: &CostScalingModel,
    q: u64,
    pi_q: f64,
) -> Result<CrossoverDecision> {
    if q == 0 {
        return Err(domain("agent query count must be at least 1"));
    }
    if !(0.0..=1.0).contains(&pi_q) {
        return Err(domain(format!("pi_q must lie in [0, 1], got {pi_q}")));
    }
    let zeta = model.predict(q)?;
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(domain(format!(
            "predicted agent cost at q={q} is {zeta}; must be positive"
        )));
    }
    let (a_norm, b_norm) = model.normalize(base.attempt_cost)?;
    let exponent = a_norm + b_norm * (q as f64).powf(model.gamma);
    let threshold_prob = -(exponent * (-base.success_prob).ln_1p()).exp_m1();
    let kshot_metric = base.metric();

    let mut flags = Vec::new();
    if q == 1 {
        flags.push(CrossoverFlag::SingleQuery);
    }
    if pi_q == 1.0 {
        flags.push(CrossoverFlag::CertainAgent);
        return Ok(CrossoverDecision {
            holds: true,
            log_form_holds: true,
            threshold_prob,
            agent_metric: f64::INFINITY,
            kshot_metric,
            flags,
        });
    }

    let agent_metric = log_survival_gain(pi_q) / zeta;
    Ok(CrossoverDecision {
        holds: pi_q >= threshold_prob - TIE_TOLERANCE,
        log_form_holds: agent_metric >= kshot_metric * (1.0 - TIE_TOLERANCE),
        threshold_prob,
        agent_metric,
        kshot_metric,
        flags,
    })
}
