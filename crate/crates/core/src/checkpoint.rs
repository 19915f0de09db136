//! Trained-state snapshots tied to the vocabulary they were trained on.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{EmbeddingSpace, TransRParams};
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::resources::SemanticResourceSet;
use crate::train::{TrainConfig, TrainState};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub k: usize,
    pub vocab_hash: String,
    pub num_concepts: usize,
    pub num_relations: usize,
    pub config: TrainConfig,
    pub epoch: usize,
    pub best_metric: Option<f64>,
    pub space: EmbeddingSpace,
    pub resources: SemanticResourceSet,
    pub transr: Option<TransRParams>,
}

impl Checkpoint {
    pub fn from_state(state: &TrainState, graph: &KnowledgeGraph, config: &TrainConfig) -> Self {
        Checkpoint {
            format: FORMAT_VERSION,
            k: state.space.k(),
            vocab_hash: graph.vocab_hash(),
            num_concepts: graph.num_concepts(),
            num_relations: graph.num_relations(),
            config: config.clone(),
            epoch: state.epoch,
            best_metric: state.best_metric,
            space: state.space.clone(),
            resources: state.resources.clone(),
            transr: state.transr.clone(),
        }
    }

    /// Rebuilds a training state. The generator is reseeded from the config
    /// seed and epoch, so resumed runs are deterministic but do not continue
    /// the original random stream.
    pub fn to_state(&self) -> TrainState {
        let stream = self.config.seed ^ (self.epoch as u64).rotate_left(32);
        TrainState {
            space: self.space.clone(),
            resources: self.resources.clone(),
            transr: self.transr.clone(),
            epoch: self.epoch,
            best_metric: self.best_metric,
            rng: ChaCha8Rng::seed_from_u64(stream),
        }
    }

    pub fn check_compatible(&self, graph: &KnowledgeGraph) -> Result<()> {
        if self.vocab_hash != graph.vocab_hash() {
            return Err(Error::Incompatible(format!(
                "checkpoint vocabulary ({} concepts, {} relations, hash {}) does not match dataset \
                 ({} concepts, {} relations, hash {})",
                self.num_concepts,
                self.num_relations,
                short(&self.vocab_hash),
                graph.num_concepts(),
                graph.num_relations(),
                short(&graph.vocab_hash()),
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| Error::Serde(e.to_string()))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT_VERSION {
            return Err(Error::Incompatible(format!(
                "checkpoint format {} (expected {FORMAT_VERSION})",
                self.format
            )));
        }
        let dims_ok = self.space.k() == self.k
            && self.space.num_concepts() == self.num_concepts
            && self.space.num_relations() == self.num_relations
            && self.resources.k() == self.k
            && self.resources.num_concepts() == self.num_concepts;
        if !dims_ok {
            return Err(Error::Serde("checkpoint matrix shapes disagree with its header".into()));
        }
        Ok(())
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}
