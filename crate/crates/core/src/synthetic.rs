//! Synthetic graphs drawn from a planted translation model, for testing
//! whether training recovers known structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, SplitRatios, SplitSummary, Triple, Vocab};
use crate::matrix::{normalize, Matrix};
use crate::resources::{ClassVectors, SemanticClass, SemanticResourceSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub concepts: usize,
    pub relations: usize,
    /// Number of lowest-energy triples kept as the gold set.
    pub triples: usize,
    pub latent_dim: usize,
    /// L2 length of each relation translation.
    pub translation_norm: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            concepts: 60,
            relations: 6,
            triples: 600,
            latent_dim: 20,
            translation_norm: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Planted {
    /// Unsplit graph; concept `i` is labelled `c{i}`, relation `j` is `r{j}`.
    pub graph: KnowledgeGraph,
    pub concepts: Matrix,
    pub relations: Matrix,
}

fn unit_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize, length: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        let row = m.row_mut(i);
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        normalize(row);
        row.iter_mut().for_each(|x| *x *= length);
    }
    m
}

/// Draws unit concept vectors and fixed-length translations, scores every
/// (h, r, t) with `h != t` by `||h + r - t||` and keeps the lowest ones.
pub fn planted_graph(config: &PlantedConfig) -> Result<Planted> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let concepts = unit_rows(&mut rng, config.concepts, config.latent_dim, 1.0);
    let relations = unit_rows(&mut rng, config.relations, config.latent_dim, config.translation_norm);

    let mut scored = Vec::with_capacity(config.concepts * config.concepts * config.relations);
    for h in 0..config.concepts {
        for r in 0..config.relations {
            for t in 0..config.concepts {
                if h == t {
                    continue;
                }
                let e: f64 = (0..config.latent_dim)
                    .map(|i| {
                        let d = concepts.get(h, i) + relations.get(r, i) - concepts.get(t, i);
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt();
                scored.push((e, h, r, t));
            }
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));
    scored.truncate(config.triples);
    scored.sort_by_key(|&(_, h, r, t)| (r, h, t));

    let triples = scored.iter().map(|&(_, h, r, t)| Triple::new(h, r, t)).collect();
    let graph = KnowledgeGraph::from_splits(
        Vocab::from_labels((0..config.concepts).map(|i| format!("c{i}"))),
        Vocab::from_labels((0..config.relations).map(|j| format!("r{j}"))),
        triples,
        Vec::new(),
        Vec::new(),
    )?;
    Ok(Planted {
        graph,
        concepts,
        relations,
    })
}

impl Planted {
    pub fn split(&self, ratios: SplitRatios, seed: u64) -> Result<(KnowledgeGraph, SplitSummary)> {
        self.graph.split_per_relation(ratios, seed)
    }

    /// Latent concept vectors zero-padded to dimension `k`, plus independent
    /// `N(0, sigma^2)` noise on every component, as a dense TXT class.
    pub fn noisy_txt(&self, k: usize, sigma: f64, seed: u64) -> Result<SemanticResourceSet> {
        let d = self.concepts.cols();
        if k < d {
            return Err(Error::Dimension { expected: d, found: k });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::Domain(format!("noise scale {sigma}: {e}")))?;
        let mut m = Matrix::zeros(self.concepts.rows(), k);
        for i in 0..m.rows() {
            let row = m.row_mut(i);
            row[..d].copy_from_slice(self.concepts.row(i));
            for x in row.iter_mut() {
                *x += rng.sample(noise);
            }
        }
        let mut set = SemanticResourceSet::new(k, m.rows());
        set.insert(SemanticClass::Txt, ClassVectors::dense(m))?;
        Ok(set)
    }
}
