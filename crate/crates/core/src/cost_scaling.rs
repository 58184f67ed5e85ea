//! Power-law cost model `zeta_q = a + b * q^gamma` for an agent allowed `q`
//! queries, and its least-squares fit.
//!
//! For a fixed exponent the model is linear in `(a, b)`, so the fit reduces to
//! a one-dimensional search over `gamma`: a coarse grid followed by
//! golden-section refinement around the best grid point.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostScalingModel {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    /// Residual sum of squares of the fit, in dollars squared.
    pub rss: f64,
    /// Observations used by the fit; 0 for models built from parameters.
    pub n_points: usize,
}

impl CostScalingModel {
    /// A model from known parameters (no fit diagnostics).
    pub fn from_params(a: f64, b: f64, gamma: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(domain("cost model coefficients must be finite"));
        }
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(domain(format!("cost exponent must exceed 1, got {gamma}")));
        }
        Ok(CostScalingModel {
            a,
            b,
            gamma,
            rss: 0.0,
            n_points: 0,
        })
    }

    /// Predicted cumulative cost of `q` queries.
    pub fn predict(&self, q: u64) -> Result<f64> {
        if q < 1 {
            return Err(domain("query count must be at least 1"));
        }
        Ok(self.a + self.b * (q as f64).powf(self.gamma))
    }

    /// Coefficients in units of one base-model call: `(a / c1, b / c1)`.
    pub fn normalize(&self, base_cost: f64) -> Result<(f64, f64)> {
        if !(base_cost.is_finite() && base_cost > 0.0) {
            return Err(domain(format!(
                "base cost must be positive, got {base_cost}"
            )));
        }
        Ok((self.a / base_cost, self.b / base_cost))
    }

    /// Residual sum of squares of this model on `points`.
    pub fn rss_on(&self, points: &[(u64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(q, y)| {
                let r = self.a + self.b * (q as f64).powf(self.gamma) - y;
                r * r
            })
            .sum()
    }
}

pub fn predict_cost(model: &CostScalingModel, q: u64) -> Result<f64> {
    model.predict(q)
}

pub fn normalize(model: &CostScalingModel, base_cost: f64) -> Result<(f64, f64)> {
    model.normalize(base_cost)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub gamma_max: f64,
    pub grid_step: f64,
    /// Width at which golden-section refinement stops.
    pub refine_tolerance: f64,
    pub exec: Exec,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gamma_max: 6.0,
            grid_step: 0.01,
            refine_tolerance: 1e-12,
            exec: Exec::default(),
        }
    }
}

/// Distance from either end of the exponent range treated as "at the boundary".
const BOUNDARY_SLACK: f64 = 1e-6;

struct LinearFit {
    a: f64,
    b: f64,
    rss: f64,
}

fn fit_linear(gamma: f64, qs: &[f64], ys: &[f64]) -> LinearFit {
    let n = qs.len() as f64;
    let xs: Vec<f64> = qs.iter().map(|q| q.powf(gamma)).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - x_mean;
        sxx += dx * dx;
        sxy += dx * (y - y_mean);
    }
    let b = sxy / sxx;
    let a = y_mean - b * x_mean;
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = a + b * x - y;
            r * r
        })
        .sum();
    LinearFit { a, b, rss }
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

pub fn fit_power_law(points: &[(u64, f64)]) -> Result<CostScalingModel> {
    fit_power_law_with(points, &FitOptions::default())
}

/// Least-squares fit of `cost = a + b * q^gamma` with `gamma` in `(1, gamma_max]`.
pub fn fit_power_law_with(points: &[(u64, f64)], opts: &FitOptions) -> Result<CostScalingModel> {
    let mut distinct: Vec<u64> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::TooFewPoints(distinct.len()));
    }
    for &(q, cost) in points {
        if q < 1 {
            return Err(domain("query counts must be at least 1"));
        }
        if !(cost.is_finite() && cost > 0.0) {
            return Err(domain(format!("costs must be positive, got {cost}")));
        }
    }
    if !(opts.gamma_max > 1.0 && opts.grid_step > 0.0 && opts.refine_tolerance > 0.0) {
        return Err(domain("invalid fit options"));
    }

    let qs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let rss_at = |gamma: f64| fit_linear(gamma, &qs, &ys).rss;

    let steps = ((opts.gamma_max - 1.0) / opts.grid_step).round().max(1.0) as u64;
    let grid_gamma = |k: u64| 1.0 + (opts.gamma_max - 1.0) * (k + 1) as f64 / steps as f64;
    let grid = opts.exec.map_indexed(steps, |k| rss_at(grid_gamma(k)));
    let best_k = grid
        .iter()
        .enumerate()
        .fold(0, |best, (k, &r)| if r < grid[best] { k } else { best }) as u64;
    let centre = grid_gamma(best_k);

    let lo = (centre - opts.grid_step).max(1.0);
    let hi = (centre + opts.grid_step).min(opts.gamma_max);
    let refined = golden_section(rss_at, lo, hi, opts.refine_tolerance);
    let gamma = if rss_at(refined) <= grid[best_k as usize] {
        refined
    } else {
        centre
    };

    if gamma - 1.0 < BOUNDARY_SLACK {
        return Err(Error::GammaNotAboveOne(gamma));
    }
    if opts.gamma_max - gamma < BOUNDARY_SLACK {
        return Err(Error::GammaAtUpperBound(opts.gamma_max));
    }

    let LinearFit { a, b, .. } = fit_linear(gamma, &qs, &ys);
    let mut model = CostScalingModel {
        a,
        b,
        gamma,
        rss: 0.0,
        n_points: points.len(),
    };
    model.rss = model.rss_on(points);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn generate(a: f64, b: f64, gamma: f64, qs: impl Iterator<Item = u64>) -> Vec<(u64, f64)> {
        qs.map(|q| (q, a + b * (q as f64).powf(gamma))).collect()
    }

    #[test]
    fn recovers_noiseless_quadratic() {
        let pts = generate(0.05, 0.002, 2.0, 1..=20);
        let m = fit_power_law(&pts).unwrap();
        assert_abs_diff_eq!(m.a, 0.05, epsilon = 1e-6);
        assert_abs_diff_eq!(m.b, 0.002, epsilon = 1e-6);
        assert_abs_diff_eq!(m.gamma, 2.0, epsilon = 1e-6);
        assert!(m.rss <= 1e-12);
        assert_eq!(m.n_points, 20);
    }

    #[test]
    fn too_few_distinct_queries() {
        let pts = [(1, 0.1), (2, 0.3), (2, 0.31)];
        assert_eq!(fit_power_law(&pts), Err(Error::TooFewPoints(2)));
    }

    #[test]
    fn linear_data_is_rejected() {
        let pts = generate(0.1, 0.05, 1.0, 1..=10);
        assert!(matches!(
            fit_power_law(&pts),
            Err(Error::GammaNotAboveOne(_))
        ));
    }

    #[test]
    fn steep_data_hits_upper_bound() {
        let pts = generate(0.0, 1e-6, 8.0, 1..=15);
        assert!(matches!(
            fit_power_law(&pts),
            Err(Error::GammaAtUpperBound(_))
        ));
    }

    #[test]
    fn rejects_bad_costs() {
        assert!(fit_power_law(&[(1, 0.1), (2, -0.2), (3, 0.5)]).is_err());
        assert!(fit_power_law(&[(0, 0.1), (2, 0.2), (3, 0.5)]).is_err());
    }

    #[test]
    fn predict_and_normalize() {
        let m = CostScalingModel::from_params(0.05, 0.002, 2.0).unwrap();
        assert_abs_diff_eq!(predict_cost(&m, 10).unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(predict_cost(&m, 1).unwrap(), 0.052, epsilon = 1e-15);
        assert!(predict_cost(&m, 0).is_err());

        let flat = CostScalingModel::from_params(0.3, 0.0, 2.0).unwrap();
        assert_eq!(flat.predict(17).unwrap(), 0.3);
        assert_eq!(flat.normalize(0.1).unwrap().1, 0.0);

        let (ap, bp) = normalize(&m, 0.1).unwrap();
        assert_abs_diff_eq!(ap, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(bp, 0.02, epsilon = 1e-12);
        assert_eq!(m.normalize(m.a).unwrap().0, 1.0);
        assert!(m.normalize(0.0).is_err());
        assert!(CostScalingModel::from_params(0.0, 1.0, 1.0).is_err());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn execution_policy_does_not_change_fit() {
        let pts: Vec<_> = (1..=30u64)
            .map(|q| {
                (
                    q,
                    0.02 + 0.004 * (q as f64).powf(1.7) + 0.0005 * ((q * 7919) % 13) as f64,
                )
            })
            .collect();
        let seq = fit_power_law_with(
            &pts,
            &FitOptions {
                exec: Exec::Sequential,
                ..Default::default()
            },
        )
        .unwrap();
        let par = fit_power_law_with(
            &pts,
            &FitOptions {
                exec: Exec::Parallel,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(seq, par);
    }
}
