//! Per-`(k, method)` aggregates and the threshold comparison between methods.

use std::collections::BTreeMap;

use crate::config::Method;
use crate::records::{SummaryRow, SweepRecord};
use crate::BenchError;

/// Median; the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] })
}

/// One row per `(k, method)`, ordered by `k` then method.
pub fn summarize(records: &[SweepRecord], success_tol: f64) -> Result<Vec<SummaryRow>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Config("no records to summarize".into()));
    }
    let mut groups: BTreeMap<(usize, Method), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((r.k, r.method)).or_default().push(r.rel_error);
    }
    Ok(groups
        .into_iter()
        .map(|((k, method), errs)| SummaryRow {
            k,
            method,
            median_rel_error: median(&errs).expect("group is non-empty"),
            success_fraction: errs.iter().filter(|&&e| e < success_tol).count() as f64 / errs.len() as f64,
            n_trials: errs.len(),
        })
        .collect())
}

/// Manifold medians above this multiple of the l2,1 median count as regressions.
pub const REGRESSION_FACTOR: f64 = 10.0;

/// Smallest `k` whose median error is below `tol`.
pub fn threshold_k(rows: &[SummaryRow], method: Method, tol: f64) -> Option<usize> {
    rows.iter()
        .filter(|r| r.method == method && r.median_rel_error < tol)
        .map(|r| r.k)
        .min()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub manifold_threshold: Option<usize>,
    pub l21_threshold: Option<usize>,
    /// `l21_threshold - manifold_threshold`. When l2,1 never reaches the
    /// tolerance on the grid its threshold counts as one grid step past
    /// the largest `k`.
    pub margin: Option<i64>,
    /// Grid points where the manifold median exceeds the l2,1 median by
    /// more than a factor of ten.
    pub regressions: Vec<usize>,
}

pub fn compare(rows: &[SummaryRow], tol: f64) -> Comparison {
    let manifold_threshold = threshold_k(rows, Method::Manifold, tol);
    let l21_threshold = threshold_k(rows, Method::L21, tol);
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let beyond_grid = match ks.as_slice() {
        [.., a, b] => b + (b - a),
        [b] => b + 1,
        [] => 0,
    };
    let margin = manifold_threshold.map(|m| l21_threshold.unwrap_or(beyond_grid) as i64 - m as i64);
    let med = |k: usize, m: Method| rows.iter().find(|r| r.k == k && r.method == m).map(|r| r.median_rel_error);
    let regressions = ks
        .iter()
        .filter(|&&k| matches!((med(k, Method::Manifold), med(k, Method::L21)), (Some(a), Some(b)) if a > REGRESSION_FACTOR * b))
        .copied()
        .collect();
    Comparison {
        manifold_threshold,
        l21_threshold,
        margin,
        regressions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, method: Method, e: f64) -> SweepRecord {
        SweepRecord {
            k,
            trial: 0,
            method,
            rel_error: e,
            support_match: e < 1e-3,
            iterations: 1,
            restarts: 0,
            wall_ms: 0,
            seed: 0,
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0]), Some(3.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[5.0, 1.0, 3.0]), Some(3.0));
    }

    #[test]
    fn summary_groups_and_thresholds() {
        let recs = vec![
            rec(40, Method::Manifold, 0.5),
            rec(40, Method::Manifold, 1e-9),
            rec(40, Method::L21, 0.4),
            rec(44, Method::Manifold, 1e-9),
            rec(44, Method::Manifold, 1e-8),
            rec(44, Method::L21, 0.2),
            rec(48, Method::L21, 1e-10),
            rec(48, Method::Manifold, 1e-10),
        ];
        let rows = summarize(&recs, 1e-3).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[0].k, rows[0].method, rows[0].n_trials), (40, Method::Manifold, 2));
        assert_eq!(rows[0].success_fraction, 0.5);
        let c = compare(&rows, 1e-3);
        assert_eq!(c.manifold_threshold, Some(44));
        assert_eq!(c.l21_threshold, Some(48));
        assert_eq!(c.margin, Some(4));
        assert!(c.regressions.is_empty());
    }

    #[test]
    fn missing_l21_threshold_counts_past_the_grid() {
        let recs = vec![
            rec(40, Method::Manifold, 1e-9),
            rec(40, Method::L21, 0.3),
            rec(44, Method::Manifold, 0.9),
            rec(44, Method::L21, 0.05),
        ];
        let c = compare(&summarize(&recs, 1e-3).unwrap(), 1e-3);
        assert_eq!(c.l21_threshold, None);
        assert_eq!(c.margin, Some(8));
        assert_eq!(c.regressions, vec![44]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(summarize(&[], 1e-3).is_err());
    }
}
