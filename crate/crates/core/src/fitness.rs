//! Output-type dispatched fitness, lower is better, always in `[0, 1]`.
//!
//! Numeric outputs use a range-normalized RMSE, booleans use the
//! misclassification rate, strings use per-row normalized edit distance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate_batch, EvalError, EvalOutcome};
use crate::grammar::ExprTree;
use crate::sampler::Dataset;
use crate::values::{Sort, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitnessError {
    #[error("length mismatch: {0} predictions for {1} targets")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("tree sort {tree} does not match dataset return sort {dataset}")]
    SortMismatch { tree: Sort, dataset: Sort },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessScore {
    pub value: f64,
    pub n_faults: usize,
    pub exact_matches: usize,
}

impl FitnessScore {
    pub fn is_perfect(&self) -> bool {
        self.value == 0.0
    }
}

/// Smallest positive score, given to numerically indistinguishable but not
/// bit-identical predictions so that `0` stays reserved for exact fits.
const NEAR_MISS: f64 = 1e-12;

fn check_lengths(p: usize, a: usize) -> Result<(), FitnessError> {
    if p != a {
        return Err(FitnessError::LengthMismatch(p, a));
    }
    if a == 0 {
        return Err(FitnessError::Empty);
    }
    Ok(())
}

/// Range of the finite actual values, saturating at `f64::MAX`.
fn finite_range(actual: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &a in actual.iter().filter(|a| a.is_finite()) {
        lo = lo.min(a);
        hi = hi.max(a);
    }
    if lo > hi {
        return 0.0;
    }
    let r = hi - lo;
    if r.is_finite() {
        r
    } else {
        f64::MAX
    }
}

/// Squared residual divided by `range^2`, capped at 1. `None` predictions are
/// faults. NaN against NaN, and equal infinities, count as exact.
fn normalized_sq_error(p: Option<f64>, a: f64, range: f64) -> f64 {
    let Some(p) = p else { return 1.0 };
    if p.is_nan() && a.is_nan() {
        return 0.0;
    }
    if !p.is_finite() || !a.is_finite() {
        return if p == a { 0.0 } else { 1.0 };
    }
    if p == a {
        return 0.0;
    }
    if range == 0.0 {
        return 1.0;
    }
    let r = p / range - a / range;
    (r * r).min(1.0)
}

/// NRMSE: `sqrt(mean((p - a)^2)) / (max(a) - min(a))` over finite actuals,
/// with each sample's squared error capped at `range^2`. A zero range gives 0
/// for an exact fit and 1 otherwise.
pub fn nrmse(predicted: &[f64], actual: &[f64]) -> Result<f64, FitnessError> {
    check_lengths(predicted.len(), actual.len())?;
    let preds: Vec<Option<f64>> = predicted.iter().map(|&p| Some(p)).collect();
    Ok(nrmse_with_faults(&preds, actual))
}

fn nrmse_with_faults(predicted: &[Option<f64>], actual: &[f64]) -> f64 {
    let range = finite_range(actual);
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(&p, &a)| normalized_sq_error(p, a, range))
        .sum();
    if range == 0.0 {
        return if total == 0.0 { 0.0 } else { 1.0 };
    }
    (total / actual.len() as f64).sqrt().clamp(0.0, 1.0)
}

/// Misclassification rate.
pub fn boolean_fitness(predicted: &[bool], actual: &[bool]) -> Result<f64, FitnessError> {
    check_lengths(predicted.len(), actual.len())?;
    let matches = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(1.0 - matches as f64 / actual.len() as f64)
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    if short.len() <= 64 {
        return myers(short, long);
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Bit-parallel edit distance (Myers, in Hyyrö's formulation) for a
/// pattern of 1 to 64 characters.
fn myers(pattern: &[char], text: &[char]) -> usize {
    let m = pattern.len();
    let mut ascii = [0u64; 128];
    let mut other: Vec<(char, u64)> = Vec::new();
    for (i, &c) in pattern.iter().enumerate() {
        if (c as u32) < 128 {
            ascii[c as usize] |= 1 << i;
        } else if let Some(e) = other.iter_mut().find(|(k, _)| *k == c) {
            e.1 |= 1 << i;
        } else {
            other.push((c, 1 << i));
        }
    }
    let last = 1u64 << (m - 1);
    let (mut pv, mut mv, mut dist) = (!0u64, 0u64, m);
    for &c in text {
        let eq = if (c as u32) < 128 {
            ascii[c as usize]
        } else {
            other.iter().find(|(k, _)| *k == c).map_or(0, |e| e.1)
        };
        let xv = eq | mv;
        let xh = ((eq & pv).wrapping_add(pv) ^ pv) | eq;
        let mut ph = mv | !(xh | pv);
        let mut mh = pv & xh;
        if ph & last != 0 {
            dist += 1;
        } else if mh & last != 0 {
            dist -= 1;
        }
        ph = (ph << 1) | 1;
        mh <<= 1;
        pv = mh | !(xv | ph);
        mv = ph & xv;
    }
    dist
}

/// Scores evaluated outcomes against the dataset's outputs.
pub fn score_outcomes(outcomes: &[EvalOutcome], dataset: &Dataset) -> Result<FitnessScore, FitnessError> {
    check_lengths(outcomes.len(), dataset.len())?;
    let n = dataset.len();
    let n_faults = outcomes.iter().filter(|o| o.is_err()).count();
    let exact_matches = outcomes
        .iter()
        .zip(dataset.outputs())
        .filter(|(o, a)| matches!(o, Ok(p) if p.same_class(a)))
        .count();
    let value = match dataset.signature.ret {
        Sort::Bool => {
            // a fault is a mismatch
            1.0 - exact_matches as f64 / n as f64
        }
        Sort::String => {
            let total: f64 = outcomes
                .iter()
                .zip(dataset.outputs())
                .map(|(o, a)| {
                    let a = a.as_str().expect("string output");
                    match o {
                        Ok(Value::Str(p)) => {
                            let len = p.chars().count().max(a.chars().count()).max(1);
                            levenshtein(p, a) as f64 / len as f64
                        }
                        _ => 1.0,
                    }
                })
                .sum();
            total / n as f64
        }
        _ => {
            let preds: Vec<Option<f64>> = outcomes.iter().map(|o| o.as_ref().ok().and_then(Value::as_f64)).collect();
            let actual: Vec<f64> = dataset.outputs().map(|a| a.as_f64().expect("numeric output")).collect();
            nrmse_with_faults(&preds, &actual)
        }
    };
    let value = if exact_matches == n {
        0.0
    } else {
        value.clamp(NEAR_MISS, 1.0)
    };
    Ok(FitnessScore { value, n_faults, exact_matches })
}

/// Evaluates `tree` on the dataset and scores it.
pub fn score(tree: &ExprTree, dataset: &Dataset) -> Result<FitnessScore, FitnessError> {
    if tree.sort() != dataset.signature.ret {
        return Err(FitnessError::SortMismatch { tree: tree.sort(), dataset: dataset.signature.ret });
    }
    let outcomes = evaluate_batch(tree, dataset)?;
    score_outcomes(&outcomes, dataset)
}
