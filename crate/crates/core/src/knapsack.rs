//! Exact integer allocation by dynamic programming over quantized budget units.

use crate::allocation::{check_solvers, Allocation, AllocationMethod, Budget, SolverProfile};
use crate::error::{Error, Result};

/// Largest relative rounding error accepted when snapping a cost to the grid.
pub const QUANTIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnapsackOptions {
    /// Size of one budget unit, in dollars.
    pub granularity: f64,
    /// Refuse instances whose budget spans more units than this.
    pub max_units: u64,
}

impl Default for KnapsackOptions {
    fn default() -> Self {
        KnapsackOptions {
            granularity: 0.01,
            max_units: 10_000_000,
        }
    }
}

/// Snaps a positive dollar cost to a whole number of grid units.
pub fn quantize_cost(cost: f64, granularity: f64) -> Result<u64> {
    let units = (cost / granularity).round();
    let rel_error = ((units * granularity - cost) / cost).abs();
    if units < 1.0 || rel_error > QUANTIZATION_TOLERANCE {
        return Err(Error::Quantization {
            cost,
            granularity,
            rel_error,
        });
    }
    Ok(units as u64)
}

/// Number of whole grid units that fit in `budget`.
pub fn budget_units(budget: f64, granularity: f64) -> u64 {
    let ratio = budget / granularity;
    // 0.07 / 0.01 evaluates to 7.000000000000001 but 0.3 / 0.1 to 2.9999999999999996
    (ratio + QUANTIZATION_TOLERANCE * ratio.max(1.0)).floor() as u64
}

/// Exact optimum of the unbounded knapsack with the default grid cap.
pub fn knapsack_allocate(
    solvers: &[SolverProfile],
    budget: f64,
    granularity: f64,
) -> Result<Allocation> {
    knapsack_allocate_with(
        solvers,
        budget,
        &KnapsackOptions {
            granularity,
            ..KnapsackOptions::default()
        },
    )
}

pub fn knapsack_allocate_with(
    solvers: &[SolverProfile],
    budget: f64,
    opts: &KnapsackOptions,
) -> Result<Allocation> {
    check_solvers(solvers)?;
    Budget::monetary(budget)?;
    if !(opts.granularity.is_finite() && opts.granularity > 0.0) {
        return Err(Error::Domain(format!(
            "granularity must be positive, got {}",
            opts.granularity
        )));
    }
    let weights = solvers
        .iter()
        .map(|s| quantize_cost(s.attempt_cost, opts.granularity))
        .collect::<Result<Vec<_>>>()?;
    let capacity = budget_units(budget, opts.granularity);
    if capacity > opts.max_units {
        return Err(Error::GridTooLarge {
            units: capacity,
            cap: opts.max_units,
        });
    }

    let counts = solve_units(solvers, &weights, capacity as usize);
    let counts: Vec<f64> = counts.into_iter().map(|k| k as f64).collect();
    Ok(Allocation::from_counts(
        AllocationMethod::Knapsack,
        budget,
        solvers,
        &counts,
    ))
}

const CARRY: u32 = u32::MAX;

fn solve_units(solvers: &[SolverProfile], weights: &[u64], capacity: usize) -> Vec<u64> {
    let values: Vec<f64> = solvers.iter().map(SolverProfile::log_gain).collect();
    // best[u]: optimum using at most u units; last[u]: solver added last, or CARRY
    // when the optimum at u is the optimum at u - 1.
    let mut best = vec![0.0f64; capacity + 1];
    let mut last = vec![CARRY; capacity + 1];
    for u in 1..=capacity {
        let mut value = best[u - 1];
        let mut pick = CARRY;
        for (i, (&w, &v)) in weights.iter().zip(&values).enumerate() {
            let w = w as usize;
            if w <= u {
                let cand = best[u - w] + v;
                if cand > value {
                    value = cand;
                    pick = i as u32;
                }
            }
        }
        best[u] = value;
        last[u] = pick;
    }

    let mut counts = vec![0u64; solvers.len()];
    let mut u = capacity;
    while u > 0 {
        match last[u] {
            CARRY => u -= 1,
            i => {
                counts[i as usize] += 1;
                u -= weights[i as usize] as usize;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::lp_allocate;
    use approx::assert_relative_eq;

    fn solver(id: &str, p: f64, c: f64) -> SolverProfile {
        SolverProfile::new(id, p, c).unwrap()
    }

    #[test]
    fn worked_instance() {
        let solvers = [solver("A", 0.5, 0.03), solver("B", 0.3, 0.02)];
        let alloc = knapsack_allocate(&solvers, 0.07, 0.01).unwrap();
        assert_eq!(alloc.count("A"), Some(1.0));
        assert_eq!(alloc.count("B"), Some(2.0));
        assert_relative_eq!(alloc.objective, 1.406497, epsilon = 1e-6);
        assert_relative_eq!(alloc.success_prob, 0.755, epsilon = 1e-9);
        assert_relative_eq!(alloc.total_cost, 0.07, epsilon = 1e-12);

        let lp = lp_allocate(&solvers, 0.07).unwrap();
        assert_relative_eq!(lp.objective, 7.0 / 3.0 * 2f64.ln(), epsilon = 1e-12);
        assert!(lp.objective >= alloc.objective);
    }

    #[test]
    fn nothing_affordable() {
        let solvers = [solver("A", 0.5, 0.03), solver("B", 0.3, 0.05)];
        let alloc = knapsack_allocate(&solvers, 0.02, 0.01).unwrap();
        assert!(alloc.counts.values().all(|&k| k == 0.0));
        assert_eq!(alloc.objective, 0.0);
        assert_eq!(alloc.total_cost, 0.0);
    }

    #[test]
    fn rejects_off_grid_costs() {
        let solvers = [solver("A", 0.5, 0.015)];
        assert!(matches!(
            knapsack_allocate(&solvers, 0.1, 0.01),
            Err(Error::Quantization { .. })
        ));
        let tiny = [solver("A", 0.5, 0.001)];
        assert!(knapsack_allocate(&tiny, 0.1, 0.01).is_err());
    }

    #[test]
    fn grid_cap() {
        let solvers = [solver("A", 0.5, 0.01)];
        let opts = KnapsackOptions {
            granularity: 0.01,
            max_units: 100,
        };
        assert_eq!(
            knapsack_allocate_with(&solvers, 2.0, &opts),
            Err(Error::GridTooLarge {
                units: 200,
                cap: 100
            })
        );
        assert!(knapsack_allocate_with(&solvers, 1.0, &opts).is_ok());
    }

    #[test]
    fn budget_units_absorbs_division_noise() {
        assert_eq!(budget_units(0.07, 0.01), 7);
        assert_eq!(budget_units(0.3, 0.1), 3);
        assert_eq!(budget_units(0.079, 0.01), 7);
        assert_eq!(budget_units(0.0, 0.01), 0);
    }

    #[test]
    fn monotone_in_budget() {
        let solvers = [
            solver("A", 0.42, 0.07),
            solver("B", 0.13, 0.02),
            solver("C", 0.77, 0.19),
        ];
        let mut prev = 0.0;
        for cents in 0..=120 {
            let a = knapsack_allocate(&solvers, cents as f64 * 0.01, 0.01).unwrap();
            assert!(a.objective >= prev, "budget {cents}");
            assert!(a.total_cost <= cents as f64 * 0.01 + 1e-9);
            prev = a.objective;
        }
    }
}
