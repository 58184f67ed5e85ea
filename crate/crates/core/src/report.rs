//! Cumulative solved-vs-budget curves and per-strategy metric tables.

use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::allocation::metric;
use crate::error::{domain, Result};
use crate::estimation::clopper_pearson;
use crate::runlog::RunRecord;
use crate::sim::SweepPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Cost,
    Queries,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Cost => "cost",
            Axis::Queries => "queries",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cost" => Ok(Axis::Cost),
            "queries" => Ok(Axis::Queries),
            other => Err(format!("unknown axis `{other}` (expected cost or queries)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub solved: u64,
}

/// Number of problems solved within each budget threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub axis: Axis,
    pub strategy: String,
    /// Distinct problems attempted under the strategy.
    pub problems: u64,
    pub points: Vec<CurvePoint>,
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(domain("thresholds must be finite"));
    }
    if thresholds
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(domain("thresholds must be strictly ascending"));
    }
    Ok(())
}

/// Budget at which each problem is first solved, or `None` if never.
/// Attempts are charged in `attempt_index` order up to and including the
/// first OK; later attempts are ignored.
fn solve_points(
    records: &[RunRecord],
    strategy: &str,
    axis: Axis,
) -> IndexMap<String, Option<f64>> {
    let mut by_problem: IndexMap<&str, Vec<&RunRecord>> = IndexMap::new();
    for r in records.iter().filter(|r| r.strategy == strategy) {
        by_problem.entry(r.problem_id.as_str()).or_default().push(r);
    }
    by_problem
        .into_iter()
        .map(|(problem, mut attempts)| {
            attempts.sort_by_key(|r| r.attempt_index);
            let mut spent = 0.0;
            let mut solved_at = None;
            for r in attempts {
                spent += match axis {
                    Axis::Cost => r.cost,
                    Axis::Queries => r.queries as f64,
                };
                if r.verdict.is_ok() {
                    solved_at = Some(spent);
                    break;
                }
            }
            (problem.to_string(), solved_at)
        })
        .collect()
}

pub fn cumulative_curve(
    records: &[RunRecord],
    strategy: &str,
    axis: Axis,
    thresholds: &[f64],
) -> Result<Curve> {
    check_thresholds(thresholds)?;
    let solved = solve_points(records, strategy, axis);
    if solved.is_empty() {
        return Err(domain(format!("no records for strategy `{strategy}`")));
    }
    let points = thresholds
        .iter()
        .map(|&t| CurvePoint {
            threshold: t,
            solved: solved
                .values()
                .filter(|s| s.is_some_and(|b| b <= t))
                .count() as u64,
        })
        .collect();
    Ok(Curve {
        axis,
        strategy: strategy.to_string(),
        problems: solved.len() as u64,
        points,
    })
}

/// How curves from several groups (e.g. one per model) are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Total solved over total problems across all groups.
    #[default]
    Pooled,
    /// Unweighted mean of each group's solved fraction.
    MeanPerGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionPoint {
    pub threshold: f64,
    pub fraction_solved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedCurve {
    pub axis: Axis,
    pub aggregation: Aggregation,
    pub strategies: Vec<String>,
    pub points: Vec<FractionPoint>,
}

pub fn averaged_curve(
    records: &[RunRecord],
    strategies: &[String],
    axis: Axis,
    thresholds: &[f64],
    aggregation: Aggregation,
) -> Result<AveragedCurve> {
    if strategies.is_empty() {
        return Err(crate::Error::Empty("strategy list"));
    }
    let curves = strategies
        .iter()
        .map(|s| cumulative_curve(records, s, axis, thresholds))
        .collect::<Result<Vec<_>>>()?;
    let points = thresholds
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let fraction_solved = match aggregation {
                Aggregation::Pooled => {
                    let solved: u64 = curves.iter().map(|c| c.points[i].solved).sum();
                    let total: u64 = curves.iter().map(|c| c.problems).sum();
                    solved as f64 / total as f64
                }
                Aggregation::MeanPerGroup => {
                    curves
                        .iter()
                        .map(|c| c.points[i].solved as f64 / c.problems as f64)
                        .sum::<f64>()
                        / curves.len() as f64
                }
            };
            FractionPoint {
                threshold: t,
                fraction_solved,
            }
        })
        .collect();
    Ok(AveragedCurve {
        axis,
        aggregation,
        strategies: strategies.to_vec(),
        points,
    })
}

/// Attempt-level reliability summary for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub strategy: String,
    pub attempts: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub mean_cost: f64,
    pub metric: Option<f64>,
    /// Why `metric` is absent.
    pub metric_note: Option<String>,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// One row per strategy, in order of first appearance.
pub fn metric_table(records: &[RunRecord], confidence: f64) -> Result<Vec<MetricRow>> {
    let mut groups: IndexMap<&str, (u64, u64, f64)> = IndexMap::new();
    for r in records {
        let g = groups.entry(r.strategy.as_str()).or_insert((0, 0, 0.0));
        g.0 += 1;
        g.1 += u64::from(r.verdict.is_ok());
        g.2 += r.cost;
    }
    groups
        .into_iter()
        .map(|(strategy, (attempts, successes, cost))| {
            let success_rate = successes as f64 / attempts as f64;
            let mean_cost = cost / attempts as f64;
            let (metric, metric_note) = if successes == 0 {
                (None, Some("rate=0".to_string()))
            } else if successes == attempts {
                (None, Some("rate=1".to_string()))
            } else if mean_cost <= 0.0 {
                (None, Some("mean_cost=0".to_string()))
            } else {
                (Some(metric(success_rate, mean_cost)?), None)
            };
            let ci = clopper_pearson(successes, attempts, confidence)?;
            Ok(MetricRow {
                strategy: strategy.to_string(),
                attempts,
                successes,
                success_rate,
                mean_cost,
                metric,
                metric_note,
                ci_lower: ci.lower,
                ci_upper: ci.upper,
            })
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(curve: &Curve, mut out: W) -> std::io::Result<()> {
    writeln!(out, "strategy,axis,threshold,solved,problems")?;
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&curve.strategy),
            curve.axis.as_str(),
            p.threshold,
            p.solved,
            curve.problems
        )?;
    }
    Ok(())
}

pub fn write_averaged_csv<W: Write>(curve: &AveragedCurve, mut out: W) -> std::io::Result<()> {
    let agg = match curve.aggregation {
        Aggregation::Pooled => "pooled",
        Aggregation::MeanPerGroup => "mean_per_group",
    };
    writeln!(out, "aggregation,axis,threshold,fraction_solved")?;
    for p in &curve.points {
        writeln!(
            out,
            "{agg},{},{},{}",
            curve.axis.as_str(),
            p.threshold,
            p.fraction_solved
        )?;
    }
    Ok(())
}

/// Sweep rows share the curve columns (`threshold`, `solved`) so the same
/// tooling can plot logged and simulated curves.
pub fn write_sweep_csv<W: Write>(
    source: &str,
    axis: Axis,
    points: &[SweepPoint],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(
        out,
        "strategy,axis,threshold,solved,problems,success_rate,mean_queries,mean_cost,ci_lower,ci_upper"
    )?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(source),
            axis.as_str(),
            p.budget,
            p.successes,
            p.trials,
            p.success_rate,
            p.mean_queries,
            p.mean_cost,
            p.ci_lower,
            p.ci_upper
        )?;
    }
    Ok(())
}

pub fn write_metric_table_csv<W: Write>(rows: &[MetricRow], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "strategy,attempts,successes,success_rate,mean_cost,metric,metric_note,ci_lower,ci_upper"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&r.strategy),
            r.attempts,
            r.successes,
            r.success_rate,
            r.mean_cost,
            r.metric.map(|m| m.to_string()).unwrap_or_default(),
            r.metric_note.as_deref().unwrap_or(""),
            r.ci_lower,
            r.ci_upper
        )?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
