//! Top-k ranking and Precision@k / MRR@k aggregation.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;

use crate::data::{ItemVocabulary, TrainExample};
use crate::error::{Error, Result};
use crate::graph::{build_graph, pad_graph};
use crate::model::{predict, ModelParams, VariantConfig};
use crate::tensor::Scalar;

/// Aggregated metrics, as percentages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub k: usize,
    /// Share of examples whose label is in the top k.
    pub precision_at_k: f64,
    /// Mean of `1/rank` for ranks ≤ k, 0 otherwise.
    pub mrr_at_k: f64,
    pub examples: usize,
}

impl Metrics {
    /// Plain-text table.
    pub fn table(&self) -> String {
        format!(
            "metric        value\nPrecision@{k:<3} {p:>6.2}\nMRR@{k:<9} {r:>6.2}\nexamples      {n}\n",
            k = self.k,
            p = self.precision_at_k,
            r = self.mrr_at_k,
            n = self.examples
        )
    }

    /// `key=value` block, one entry per line.
    pub fn key_values(&self) -> String {
        format!(
            "precision_at_{k}={p:.2}\nmrr_at_{k}={r:.2}\nexamples={n}\n",
            k = self.k,
            p = self.precision_at_k,
            r = self.mrr_at_k,
            n = self.examples
        )
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P@{k}={:.2} MRR@{k}={:.2} (n={})",
            self.precision_at_k,
            self.mrr_at_k,
            self.examples,
            k = self.k
        )
    }
}

/// Descending score, ascending index on ties.
fn by_score<T: Scalar>(scores: &[T]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// The `k` best item indices, best first.
pub fn rank_topk<T: Scalar>(scores: &[T], k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::Contract(format!(
            "k={k} exceeds {} candidates",
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(Error::Contract(format!("non-finite score at item {i}")));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let cmp = by_score(scores);
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    idx.truncate(k);
    Ok(idx)
}

/// `(hit, reciprocal rank)` of `label` within the first `k` of `ranked`.
pub fn metrics_for(ranked: &[usize], label: usize, k: usize) -> (u8, f64) {
    match ranked.iter().take(k).position(|&i| i == label) {
        Some(pos) => (1, 1.0 / (pos + 1) as f64),
        None => (0, 0.0),
    }
}

/// 1-based rank of `label` under the same ordering as [`rank_topk`],
/// without sorting.
pub fn rank_of<T: Scalar>(scores: &[T], label: usize) -> usize {
    let s = scores[label];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(i, &v)| v > s || (v == s && i < label))
        .count()
}

/// Accumulates per-example outcomes in a fixed order.
#[derive(Clone, Debug, Default)]
pub struct MetricAccumulator {
    hits: u64,
    rr_sum: f64,
    n: usize,
}

impl MetricAccumulator {
    pub fn push(&mut self, hit: u8, rr: f64) {
        self.hits += u64::from(hit);
        self.rr_sum += rr;
        self.n += 1;
    }

    pub fn finish(&self, k: usize) -> Result<Metrics> {
        if self.n == 0 {
            return Err(Error::Contract("cannot evaluate an empty test set".into()));
        }
        let n = self.n as f64;
        Ok(Metrics {
            k,
            precision_at_k: round2(100.0 * self.hits as f64 / n),
            mrr_at_k: round2(100.0 * self.rr_sum / n),
            examples: self.n,
        })
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Metrics from precomputed score vectors.
pub fn metrics_from_scores<T: Scalar>(
    scores: &[Vec<T>],
    labels: &[usize],
    k: usize,
) -> Result<Metrics> {
    let mut acc = MetricAccumulator::default();
    for (s, &label) in scores.iter().zip(labels) {
        let ranked = rank_topk(s, k.min(s.len()))?;
        let (hit, rr) = metrics_for(&ranked, label, k);
        acc.push(hit, rr);
    }
    acc.finish(k)
}

/// Scores every example with the model and aggregates P@k and MRR@k.
///
/// Candidates are the `m` real items; items already in the prefix stay
/// eligible. Examples are scored in parallel and folded in input order.
pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    config: VariantConfig,
    examples: &[TrainExample],
    k: usize,
) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::Contract("cannot evaluate an empty test set".into()));
    }
    let m = params.num_items();
    if k == 0 || k > m {
        return Err(Error::Config(format!("k must be in 1..={m}, got {k}")));
    }
    crate::data::check_indices(examples, m)?;
    let outcomes: Vec<(u8, f64)> = examples
        .par_iter()
        .map(|e| {
            let graph = build_graph(&e.prefix)?;
            let padded = pad_graph(&graph, graph.len(), params.pad_index())?;
            let probs = predict(params, &padded, config)?;
            let ranked = rank_topk(&probs, k)?;
            Ok(metrics_for(&ranked, e.label, k))
        })
        .collect::<Result<_>>()?;
    let mut acc = MetricAccumulator::default();
    for (hit, rr) in outcomes {
        acc.push(hit, rr);
    }
    acc.finish(k)
}

/// Rejects a checkpoint built against a different vocabulary.
pub fn check_vocabulary(expected_hash: u64, vocab: &ItemVocabulary) -> Result<()> {
    let found = vocab.fingerprint();
    if found == expected_hash {
        Ok(())
    } else {
        Err(Error::VocabularyMismatch {
            expected: expected_hash,
            found,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topk_sorts_descending() {
        assert_eq!(rank_topk(&[0.1f32, 0.9, 0.5], 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn topk_ties_by_index() {
        assert_eq!(rank_topk(&[0.3f32; 5], 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn topk_full_is_permutation() {
        let scores = [0.2f64, 0.1, 0.7, 0.1];
        let mut r = rank_topk(&scores, 4).unwrap();
        assert_eq!(r, vec![2, 0, 1, 3]);
        r.sort();
        assert_eq!(r, vec![0, 1, 2, 3]);
    }

    #[test]
    fn topk_rejects_nan_and_large_k() {
        assert!(rank_topk(&[0.1f32, f32::NAN], 1).is_err());
        assert!(rank_topk(&[0.1f32], 2).is_err());
    }

    #[test]
    fn hit_and_rr() {
        let ranked: Vec<usize> = (0..30).collect();
        assert_eq!(metrics_for(&ranked, 0, 20), (1, 1.0));
        assert_eq!(metrics_for(&ranked, 20, 20), (0, 0.0));
        assert_eq!(metrics_for(&ranked, 3, 20), (1, 0.25));
    }

    #[test]
    fn aggregation() {
        let mut acc = MetricAccumulator::default();
        acc.push(1, 1.0);
        acc.push(0, 0.0);
        let m = acc.finish(20).unwrap();
        assert_eq!((m.precision_at_k, m.mrr_at_k), (50.0, 50.0));
        assert!(MetricAccumulator::default().finish(20).is_err());
        assert!(m
            .key_values()
            .starts_with("precision_at_20=50.00\nmrr_at_20=50.00\nexamples=2"));
    }

    #[test]
    fn rank_of_matches_sort() {
        let scores = [0.5f64, 0.9, 0.5, 0.1];
        assert_eq!(rank_of(&scores, 1), 1);
        assert_eq!(rank_of(&scores, 0), 2);
        assert_eq!(rank_of(&scores, 2), 3);
        assert_eq!(rank_of(&scores, 3), 4);
    }
}
