//! Helpers and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semkge::energy::Param;
use semkge::graph::{KnowledgeGraph, Slot, SplitRatios, Triple, Vocab};
use semkge::matrix::Matrix;
use semkge::resources::{ClassVectors, SemanticClass, SemanticResourceSet};
use semkge::train::{TrainConfig, TrainState};

/// Random graph with every concept and relation declared, split 60/20/20.
pub fn random_graph(seed: u64, concepts: usize, relations: usize, triples: usize) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<Triple> = (0..triples)
        .map(|_| {
            Triple::new(
                rng.random_range(0..concepts),
                rng.random_range(0..relations),
                rng.random_range(0..concepts),
            )
        })
        .collect();
    let g = KnowledgeGraph::from_splits(
        Vocab::from_labels((0..concepts).map(|i| format!("c{i}"))),
        Vocab::from_labels((0..relations).map(|i| format!("r{i}"))),
        pool,
        Vec::new(),
        Vec::new(),
    )
    .unwrap();
    g.split_per_relation(SplitRatios::DEFAULT, seed).unwrap().0
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Resource set with the given classes, each covering a random subset.
pub fn random_resources(
    rng: &mut impl Rng,
    k: usize,
    concepts: usize,
    classes: &[SemanticClass],
    coverage: f64,
) -> SemanticResourceSet {
    let mut set = SemanticResourceSet::new(k, concepts);
    for &class in classes {
        let covered: Vec<bool> = (0..concepts).map(|_| rng.random_bool(coverage)).collect();
        let mut m = random_matrix(rng, concepts, k, 1.0);
        for (i, &c) in covered.iter().enumerate() {
            if !c {
                m.row_mut(i).iter_mut().for_each(|x| *x = 0.0);
            }
        }
        set.insert(class, ClassVectors::new(m, covered).unwrap()).unwrap();
    }
    set
}

/// Scores every candidate for `slot` into a list, then counts the ones that
/// score no higher than the target.
pub fn brute_rank(
    triple: &Triple,
    slot: Slot,
    graph: &KnowledgeGraph,
    score: impl Fn(&Triple) -> f64,
) -> (usize, usize) {
    let target = score(triple);
    let n = match slot {
        Slot::Relation => graph.num_relations(),
        _ => graph.num_concepts(),
    };
    let mut candidates = Vec::new();
    for id in 0..n {
        let c = match slot {
            Slot::Head => Triple::new(id, triple.rel.0, triple.tail.0),
            Slot::Tail => Triple::new(triple.head.0, triple.rel.0, id),
            Slot::Relation => Triple::new(triple.head.0, id, triple.tail.0),
        };
        if c != *triple {
            let known = graph.train().contains(&c) || graph.valid().contains(&c) || graph.test().contains(&c);
            candidates.push((score(&c), known));
        }
    }
    let raw = 1 + candidates.iter().filter(|(s, _)| *s <= target).count();
    let filtered = 1 + candidates.iter().filter(|(s, k)| *s <= target && !k).count();
    (raw, filtered)
}

/// Every parameter row a (positive, negative) pair can touch.
pub fn pair_params(state: &TrainState, pos: &Triple, neg: &Triple, config: &TrainConfig) -> Vec<Param> {
    let mut out = Vec::new();
    for t in [pos, neg] {
        for c in [t.head.0, t.tail.0] {
            out.push(Param::Concept(c));
            for &class in &config.active {
                if state.resources.get(class, semkge::graph::ConceptId(c)).is_some() {
                    out.push(Param::Semantic(class, c));
                }
            }
        }
        if state.transr.is_some() {
            out.push(Param::RelationSpace(t.rel.0));
            out.push(Param::Projection(t.rel.0));
        } else {
            out.push(Param::Relation(t.rel.0));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Relative L2 error between the analytic pair-loss gradient and central
/// finite differences with step `h`, over every parameter the pair touches.
pub fn gradient_check(state: &mut TrainState, pos: &Triple, neg: &Triple, config: &TrainConfig, h: f64) -> f64 {
    let mut grad = semkge::energy::Gradient::new();
    state.pair_loss_grad(pos, neg, config, &mut grad);
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for p in pair_params(state, pos, neg, config) {
        let len = state.param(p).len();
        let g = grad.get(&p).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len]);
        for i in 0..len {
            let orig = state.param(p)[i];
            state.param_mut(p)[i] = orig + h;
            let up = state.pair_loss(pos, neg, config);
            state.param_mut(p)[i] = orig - h;
            let down = state.pair_loss(pos, neg, config);
            state.param_mut(p)[i] = orig;
            numeric.push((up - down) / (2.0 * h));
            analytic.push(g[i]);
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = l2(&analytic).max(l2(&numeric));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Accuracy of the best threshold found by trying every distinct score and
/// both infinities directly.
pub fn exhaustive_best_accuracy(scored: &[(f64, bool)]) -> usize {
    let mut cands: Vec<f64> = scored.iter().map(|s| s.0).collect();
    cands.push(f64::INFINITY);
    cands.push(f64::NEG_INFINITY);
    cands
        .iter()
        .map(|&d| scored.iter().filter(|(s, pos)| (*s < d) == *pos).count())
        .max()
        .unwrap()
}
