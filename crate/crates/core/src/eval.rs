//! Link prediction ranking (raw and filtered mean rank, Hits@10) and triple
//! classification with per-relation thresholds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, RelationId, Slot, Triple};
use crate::train::corrupt_at;

/// Anything that assigns an energy to a triple; lower is more plausible.
pub trait TripleScorer: Sync {
    fn score(&self, t: &Triple) -> f64;
}

impl<F> TripleScorer for F
where
    F: Fn(&Triple) -> f64 + Sync,
{
    fn score(&self, t: &Triple) -> f64 {
        self(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankResult {
    pub triple: Triple,
    pub slot: Slot,
    pub raw_rank: usize,
    pub filtered_rank: usize,
}

/// Ranks the true id of `slot` among every substitution. A candidate counts
/// against the target when its score is lower or tied. The filtered rank
/// skips candidates that are themselves known triples.
pub fn rank_slot(
    triple: &Triple,
    slot: Slot,
    graph: &KnowledgeGraph,
    scorer: &dyn TripleScorer,
) -> Result<RankResult> {
    graph.contains(triple)?;
    let target = scorer.score(triple);
    let cur = slot.current(triple);
    let (mut raw, mut filtered) = (1, 1);
    for id in 0..slot.vocab_size(graph) {
        if id == cur {
            continue;
        }
        let candidate = slot.substitute(triple, id);
        // NaN scores count against the target
        if !(scorer.score(&candidate) > target) {
            raw += 1;
            if !graph.is_known(&candidate) {
                filtered += 1;
            }
        }
    }
    Ok(RankResult {
        triple: *triple,
        slot,
        raw_rank: raw,
        filtered_rank: filtered,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Head and tail prediction, pooled.
    Concept,
    Relation,
}

impl Task {
    pub fn slots(self) -> &'static [Slot] {
        match self {
            Task::Concept => &[Slot::Head, Slot::Tail],
            Task::Relation => &[Slot::Relation],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Concept => "concept",
            Task::Relation => "relation",
        })
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concept" => Ok(Task::Concept),
            "relation" => Ok(Task::Relation),
            _ => Err(Error::Config(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub n_test: usize,
    pub n_rankings: usize,
    pub mean_rank_raw: f64,
    pub mean_rank_filtered: f64,
    /// Percentages in [0, 100].
    pub hits10_raw: f64,
    pub hits10_filtered: f64,
}

impl EvalReport {
    pub fn from_ranks(task: Task, n_test: usize, ranks: &[RankResult]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::EmptyInput("no rankings to aggregate".into()));
        }
        let n = ranks.len() as f64;
        let sum = |f: fn(&RankResult) -> usize| ranks.iter().map(f).sum::<usize>() as f64;
        let hits = |f: fn(&RankResult) -> usize| ranks.iter().filter(|r| f(r) <= 10).count() as f64;
        Ok(EvalReport {
            task,
            n_test,
            n_rankings: ranks.len(),
            mean_rank_raw: sum(|r| r.raw_rank) / n,
            mean_rank_filtered: sum(|r| r.filtered_rank) / n,
            hits10_raw: 100.0 * hits(|r| r.raw_rank) / n,
            hits10_filtered: 100.0 * hits(|r| r.filtered_rank) / n,
        })
    }
}

/// Every ranking of the task's slots for every test triple, in input order.
pub fn rank_all(
    test: &[Triple],
    graph: &KnowledgeGraph,
    scorer: &dyn TripleScorer,
    task: Task,
) -> Result<Vec<RankResult>> {
    let nested: Vec<Vec<RankResult>> = test
        .par_iter()
        .map(|t| {
            task.slots()
                .iter()
                .map(|&slot| rank_slot(t, slot, graph, scorer))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

pub fn eval_link_prediction(
    test: &[Triple],
    graph: &KnowledgeGraph,
    scorer: &dyn TripleScorer,
    task: Task,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyInput("empty test set".into()));
    }
    let ranks = rank_all(test, graph, scorer, task)?;
    EvalReport::from_ranks(task, test.len(), &ranks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub positive: bool,
}

/// Each golden triple followed by three negatives: its head, relation and
/// tail replaced in turn by a random id such that the result is unknown.
pub fn gen_classification_negatives(
    golden: &[Triple],
    graph: &KnowledgeGraph,
    seed: u64,
) -> Result<Vec<LabeledTriple>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(golden.len() * 4);
    for t in golden {
        out.push(LabeledTriple { triple: *t, positive: true });
        for slot in [Slot::Head, Slot::Relation, Slot::Tail] {
            let neg = corrupt_at(t, slot, graph, &mut rng).ok_or(Error::Exhausted {
                head: t.head.0,
                rel: t.rel.0,
                tail: t.tail.0,
            })?;
            out.push(LabeledTriple { triple: neg, positive: false });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Scores strictly below `delta` are classified positive.
    pub delta: f64,
    /// Fraction correct on the fitting data.
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
    /// The fitting data held only one label.
    pub single_label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub thresholds: BTreeMap<RelationId, Threshold>,
    /// Threshold for relations absent from the fitting data.
    pub fallback: Threshold,
    pub accuracy_valid: f64,
}

impl ClassifierModel {
    pub fn threshold(&self, rel: RelationId) -> f64 {
        self.thresholds.get(&rel).unwrap_or(&self.fallback).delta
    }

    /// Relations whose threshold accepts or rejects everything.
    pub fn flagged(&self) -> Vec<RelationId> {
        self.thresholds
            .iter()
            .filter(|(_, t)| t.single_label)
            .map(|(r, _)| *r)
            .collect()
    }
}

/// Accuracy-maximizing threshold for `score < delta => positive`.
///
/// Candidates are `-inf`, the midpoints between adjacent distinct scores, and
/// `+inf`. Accuracy ties go to the midpoint with the wider gap to its
/// neighbors (sentinels count as zero gap), then to the smaller threshold.
pub fn best_threshold(scored: &[(f64, bool)]) -> Threshold {
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let positives = sorted.iter().filter(|s| s.1).count();
    let single_label = positives == 0 || positives == n;

    // delta = -inf: everything negative
    let mut correct = (n - positives) as i64;
    let mut best = (correct, 0.0, f64::NEG_INFINITY);
    let better = |cand: (i64, f64, f64), best: (i64, f64, f64)| {
        cand.0 > best.0 || (cand.0 == best.0 && cand.1 > best.1 * (1.0 + 1e-12))
    };
    let mut i = 0;
    while i < n {
        let s = sorted[i].0;
        while i < n && sorted[i].0 == s {
            correct += if sorted[i].1 { 1 } else { -1 };
            i += 1;
        }
        let cand = if i < n {
            let next = sorted[i].0;
            (correct, (next - s) / 2.0, s + (next - s) / 2.0)
        } else {
            (correct, 0.0, f64::INFINITY)
        };
        if better(cand, best) {
            best = cand;
        }
    }
    Threshold {
        delta: best.2,
        accuracy: if n == 0 { 0.0 } else { best.0 as f64 / n as f64 },
        correct: best.0 as usize,
        n,
        single_label,
    }
}

/// Fits one threshold per relation on validation data, plus a pooled fallback.
pub fn fit_thresholds(valid: &[LabeledTriple], scorer: &dyn TripleScorer) -> Result<ClassifierModel> {
    if valid.is_empty() {
        return Err(Error::EmptyInput("empty validation set for threshold fitting".into()));
    }
    let scores: Vec<f64> = valid.par_iter().map(|l| scorer.score(&l.triple)).collect();
    let mut by_rel: BTreeMap<RelationId, Vec<(f64, bool)>> = BTreeMap::new();
    for (l, &s) in valid.iter().zip(&scores) {
        by_rel.entry(l.triple.rel).or_default().push((s, l.positive));
    }
    let thresholds: BTreeMap<_, _> = by_rel.iter().map(|(r, v)| (*r, best_threshold(v))).collect();
    if thresholds.values().all(|t| t.single_label) {
        return Err(Error::Domain(
            "no relation has both positive and negative validation triples".into(),
        ));
    }
    let pooled: Vec<(f64, bool)> = valid.iter().zip(&scores).map(|(l, &s)| (s, l.positive)).collect();
    let fallback = best_threshold(&pooled);
    let correct: usize = thresholds.values().map(|t| t.correct).sum();
    Ok(ClassifierModel {
        thresholds,
        fallback,
        accuracy_valid: correct as f64 / valid.len() as f64,
    })
}

/// `true` (positive) iff the score is strictly below the relation's threshold.
pub fn classify(t: &Triple, model: &ClassifierModel, scorer: &dyn TripleScorer) -> bool {
    scorer.score(t) < model.threshold(t.rel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `(correct, total)` per relation.
    pub per_relation: BTreeMap<RelationId, (usize, usize)>,
}

pub fn eval_classification(
    test: &[LabeledTriple],
    model: &ClassifierModel,
    scorer: &dyn TripleScorer,
) -> Result<ClassificationReport> {
    if test.is_empty() {
        return Err(Error::EmptyInput("empty classification test set".into()));
    }
    let hits: Vec<bool> = test
        .par_iter()
        .map(|l| classify(&l.triple, model, scorer) == l.positive)
        .collect();
    let mut per_relation: BTreeMap<RelationId, (usize, usize)> = BTreeMap::new();
    for (l, &hit) in test.iter().zip(&hits) {
        let e = per_relation.entry(l.triple.rel).or_default();
        e.0 += hit as usize;
        e.1 += 1;
    }
    let correct = hits.iter().filter(|&&h| h).count();
    Ok(ClassificationReport {
        n: test.len(),
        correct,
        accuracy: correct as f64 / test.len() as f64,
        per_relation,
    })
}
