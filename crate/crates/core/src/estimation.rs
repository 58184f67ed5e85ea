//! Exact (Clopper-Pearson) binomial confidence intervals and a sequential
//! sampler that stops once the interval is short enough.
//!
//! Bounds are found by bisection on binomial tail sums evaluated in log
//! space, so no incomplete-beta implementation is needed:
//!
//! * lower bound `p_lo` solves `P[X >= s | n, p_lo] = alpha / 2` (0 when `s = 0`)
//! * upper bound `p_hi` solves `P[X <= s | n, p_hi] = alpha / 2` (1 when `s = n`)

use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-13;
/// Hard iteration cap; halving from width 1 reaches 2^-60 well below the tolerance.
pub const BISECTION_MAX_ITER: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliEstimate {
    #[serde(rename = "s")]
    pub successes: u64,
    #[serde(rename = "n")]
    pub trials: u64,
    pub confidence: f64,
    pub lower: f64,
    pub upper: f64,
    /// `s / n`; absent when `n = 0`.
    pub point: Option<f64>,
}

impl BernoulliEstimate {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    fn uninformative(confidence: f64) -> Self {
        BernoulliEstimate {
            successes: 0,
            trials: 0,
            confidence,
            lower: 0.0,
            upper: 1.0,
            point: None,
        }
    }
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )))
    }
}

/// `ln k!` for `k = 0..=n`.
fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

struct Binomial {
    n: u64,
    ln_fact: Vec<f64>,
}

impl Binomial {
    fn new(n: u64) -> Self {
        Binomial {
            n,
            ln_fact: ln_factorials(n),
        }
    }

    fn ln_pmf(&self, k: u64, ln_p: f64, ln_q: f64) -> f64 {
        let n = self.n as usize;
        let k_ = k as usize;
        self.ln_fact[n] - self.ln_fact[k_] - self.ln_fact[n - k_]
            + k as f64 * ln_p
            + (self.n - k) as f64 * ln_q
    }

    /// `ln P[X >= s]` for success probability `p` in (0, 1).
    fn ln_upper_tail(&self, s: u64, p: f64) -> f64 {
        let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
        log_sum_exp((s..=self.n).map(move |k| self.ln_pmf(k, ln_p, ln_q)))
    }

    /// `ln P[X <= s]` for success probability `p` in (0, 1).
    fn ln_lower_tail(&self, s: u64, p: f64) -> f64 {
        let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
        log_sum_exp((0..=s).map(move |k| self.ln_pmf(k, ln_p, ln_q)))
    }
}

/// Root of an increasing function on `[lo, hi]` by bisection; returns the
/// midpoint of the final bracket and the number of halvings performed.
pub(crate) fn bisect_increasing(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> (f64, u32) {
    let mut iters = 0;
    while hi - lo > BISECTION_TOLERANCE && iters < BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    (0.5 * (lo + hi), iters)
}

/// Exact two-sided binomial confidence interval for `s` successes in `n` trials.
pub fn clopper_pearson(s: u64, n: u64, confidence: f64) -> Result<BernoulliEstimate> {
    check_confidence(confidence)?;
    if n == 0 {
        return Err(domain("Clopper-Pearson interval needs at least one trial"));
    }
    if s > n {
        return Err(domain(format!("successes ({s}) exceed trials ({n})")));
    }
    let ln_half_alpha = ((1.0 - confidence) / 2.0).ln();
    let binom = Binomial::new(n);

    let lower = if s == 0 {
        0.0
    } else {
        bisect_increasing(|p| binom.ln_upper_tail(s, p) - ln_half_alpha, 0.0, 1.0).0
    };
    let upper = if s == n {
        1.0
    } else {
        // P[X <= s] decreases in p, so negate it for the increasing solver.
        bisect_increasing(|p| ln_half_alpha - binom.ln_lower_tail(s, p), 0.0, 1.0).0
    };
    Ok(BernoulliEstimate {
        successes: s,
        trials: n,
        confidence,
        lower,
        upper,
        point: Some(s as f64 / n as f64),
    })
}

/// Checks that relabeling successes as failures mirrors the interval about 1/2.
pub fn mirror_symmetry_check(s: u64, n: u64, confidence: f64) -> Result<bool> {
    let direct = clopper_pearson(s, n, confidence)?;
    let flipped = clopper_pearson(n - s, n, confidence)?;
    Ok((direct.lower - (1.0 - flipped.upper)).abs() <= 1e-9
        && (direct.upper - (1.0 - flipped.lower)).abs() <= 1e-9)
}

/// When to stop sampling: interval no longer than `target_length`, or
/// `max_trials` draws, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub target_length: f64,
    pub confidence: f64,
    pub max_trials: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            target_length: 0.1,
            confidence: 0.95,
            max_trials: 10_000,
        }
    }
}

impl StoppingRule {
    pub fn new(target_length: f64, confidence: f64, max_trials: u64) -> Result<Self> {
        let rule = StoppingRule {
            target_length,
            confidence,
            max_trials,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_length > 0.0 && self.target_length <= 1.0) {
            return Err(domain(format!(
                "target interval length must lie in (0, 1], got {}",
                self.target_length
            )));
        }
        check_confidence(self.confidence)?;
        if self.max_trials == 0 {
            return Err(domain("max_trials must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEstimate {
    #[serde(flatten)]
    pub estimate: BernoulliEstimate,
    pub met_target: bool,
}

/// Draws from `oracle` until the stopping rule fires. At least one draw is
/// always made. Oracle errors are returned with the 1-based trial number.
pub fn adaptive_estimate<F, E>(mut oracle: F, rule: &StoppingRule) -> Result<AdaptiveEstimate>
where
    F: FnMut() -> std::result::Result<bool, E>,
    E: Display,
{
    rule.validate()?;
    let mut tracker = Tracker::new(*rule);
    loop {
        let trial = tracker.trials() + 1;
        let outcome = oracle().map_err(|e| Error::Oracle {
            trial,
            message: e.to_string(),
        })?;
        if let Some(done) = tracker.push(outcome)? {
            return Ok(done);
        }
    }
}

/// Same protocol as [`adaptive_estimate`], fed from outcomes drawn in advance
/// (for example by a parallel batch). If the sequence runs out first, the
/// estimate over everything consumed is returned with `met_target = false`.
pub fn adaptive_from_outcomes<I>(outcomes: I, rule: &StoppingRule) -> Result<AdaptiveEstimate>
where
    I: IntoIterator<Item = bool>,
{
    rule.validate()?;
    let mut tracker = Tracker::new(*rule);
    for outcome in outcomes {
        if let Some(done) = tracker.push(outcome)? {
            return Ok(done);
        }
    }
    tracker.exhausted()
}

struct Tracker {
    rule: StoppingRule,
    successes: u64,
    trials: u64,
    last: BernoulliEstimate,
}

impl Tracker {
    fn new(rule: StoppingRule) -> Self {
        Tracker {
            rule,
            successes: 0,
            trials: 0,
            last: BernoulliEstimate::uninformative(rule.confidence),
        }
    }

    fn trials(&self) -> u64 {
        self.trials
    }

    fn push(&mut self, success: bool) -> Result<Option<AdaptiveEstimate>> {
        self.trials += 1;
        self.successes += u64::from(success);
        self.last = clopper_pearson(self.successes, self.trials, self.rule.confidence)?;
        let met_target = self.last.length() <= self.rule.target_length;
        if met_target || self.trials >= self.rule.max_trials {
            Ok(Some(AdaptiveEstimate {
                estimate: self.last,
                met_target,
            }))
        } else {
            Ok(None)
        }
    }

    fn exhausted(self) -> Result<AdaptiveEstimate> {
        if self.trials == 0 {
            return Err(Error::Empty("outcome sequence"));
        }
        Ok(AdaptiveEstimate {
            estimate: self.last,
            met_target: false,
        })
    }
}
