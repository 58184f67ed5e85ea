//! Flat config-file format for `simulate`.
//!
//! ```toml
//! kind = "partitioned_agent"   # kshot | agent | partitioned_agent
//! lambda = 1.0
//! onset = 0.4
//! parts = 3
//! budgets = [0.5, 1.0, 2.0]
//! trials = 10000
//! seed = 42
//!
//! [cost_model]
//! a = 0.05
//! b = 0.002
//! gamma = 2.0
//! ```
//!
//! k-shot specs use `p`, `c`, and optionally `cost_sigma` and
//! `budget_kind = "query_count"`. JSON files with the same keys are accepted.

use std::path::Path;

use serde::Deserialize;

use crate::allocation::{Budget, SolverProfile};
use crate::cost_scaling::CostScalingModel;
use crate::error::{domain, Result};
use crate::sim::{BudgetKind, CostDistribution, StrategySpec, SyntheticAgentModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Kshot,
    Agent,
    PartitionedAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModelConfig {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub kind: StrategyKind,
    pub p: Option<f64>,
    pub c: Option<f64>,
    pub cost_sigma: Option<f64>,
    #[serde(default)]
    pub budget_kind: BudgetKind,
    pub lambda: Option<f64>,
    pub onset: Option<f64>,
    pub cost_model: Option<CostModelConfig>,
    pub parts: Option<u64>,
    pub budgets: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub confidence: Option<f64>,
}

impl SimConfig {
    pub const DEFAULT_TRIALS: u64 = 10_000;
    pub const DEFAULT_PARTS: u64 = 3;
    pub const DEFAULT_CONFIDENCE: f64 = 0.95;

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| domain(format!("invalid simulation config: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| domain(format!("invalid simulation config: {e}")))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| domain(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|ext| ext == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn strategy(&self) -> Result<StrategySpec> {
        match self.kind {
            StrategyKind::Kshot => {
                let p = self.p.ok_or_else(|| domain("kshot config needs `p`"))?;
                let c = self.c.ok_or_else(|| domain("kshot config needs `c`"))?;
                let cost = match self.cost_sigma {
                    Some(sigma) if sigma > 0.0 => CostDistribution::LogNormal { sigma },
                    _ => CostDistribution::Fixed,
                };
                Ok(StrategySpec::Kshot {
                    solver: SolverProfile::new("kshot", p, c)?,
                    cost,
                    budget_kind: self.budget_kind,
                })
            }
            StrategyKind::Agent => Ok(StrategySpec::Agent {
                model: self.agent_model()?,
            }),
            StrategyKind::PartitionedAgent => {
                let parts = self.parts.unwrap_or(Self::DEFAULT_PARTS);
                if parts == 0 {
                    return Err(domain("parts must be at least 1"));
                }
                Ok(StrategySpec::PartitionedAgent {
                    model: self.agent_model()?,
                    parts,
                })
            }
        }
    }

    fn agent_model(&self) -> Result<SyntheticAgentModel> {
        let lambda = self
            .lambda
            .ok_or_else(|| domain("agent config needs `lambda`"))?;
        let cm = self
            .cost_model
            .ok_or_else(|| domain("agent config needs a `cost_model` table"))?;
        SyntheticAgentModel::new(
            lambda,
            self.onset.unwrap_or(0.0),
            CostScalingModel::from_params(cm.a, cm.b, cm.gamma)?,
        )
    }

    /// Configured budgets, defaulting to the reference cap for the budget kind.
    pub fn budgets(&self) -> Vec<f64> {
        self.budgets
            .clone()
            .unwrap_or_else(|| match self.budget_kind {
                BudgetKind::Monetary => vec![Budget::DEFAULT_MONETARY],
                BudgetKind::QueryCount => vec![Budget::DEFAULT_QUERIES as f64],
            })
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(Self::DEFAULT_TRIALS)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn confidence(&self) -> f64 {
        self.confidence.unwrap_or(Self::DEFAULT_CONFIDENCE)
    }
}
