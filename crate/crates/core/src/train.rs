//! Margin-ranking SGD over golden and corrupted triples.

use std::fmt;
use std::str::FromStr;

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{
    energy_total_grad, energy_transr_grad, total_unchecked, transr_unchecked, EmbeddingSpace, EnergyConfig,
    Gradient, NormOrder, Param, ScoreMode, TransRParams,
};
use crate::error::{Error, Result};
use crate::eval::{eval_link_prediction, Task};
use crate::graph::{KnowledgeGraph, Slot, Triple};
use crate::matrix::{normalize, Matrix};
use crate::resources::{SemanticClass, SemanticResourceSet};

/// Whether semantic vectors are trained alongside knowledge vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Semantic vectors stay at their prepared values.
    #[default]
    Fixed,
    /// Semantic vectors receive gradients and are renormalized like knowledge vectors.
    Variable,
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Setting::Fixed),
            "variable" => Ok(Setting::Variable),
            _ => Err(Error::Config(format!("unknown setting {s:?} (expected fixed or variable)"))),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Fixed => "fixed",
            Setting::Variable => "variable",
        })
    }
}

/// Knowledge model underneath the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    #[default]
    TransE,
    /// Standalone TransR baseline with relation-space dimension `relation_dim`.
    TransR { relation_dim: usize },
}

/// Probabilities of corrupting the head, tail or relation of a triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionWeights {
    pub head: f64,
    pub tail: f64,
    pub relation: f64,
}

impl Default for CorruptionWeights {
    fn default() -> Self {
        CorruptionWeights {
            head: 0.45,
            tail: 0.45,
            relation: 0.10,
        }
    }
}

impl CorruptionWeights {
    pub fn new(head: f64, tail: f64, relation: f64) -> Result<Self> {
        let w = CorruptionWeights { head, tail, relation };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.head, self.tail, self.relation];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config(format!("corruption weights must be >= 0, got {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("corruption weights must sum to 1, got {parts:?}")));
        }
        Ok(())
    }

    fn weight(&self, pos: Slot) -> f64 {
        match pos {
            Slot::Head => self.head,
            Slot::Tail => self.tail,
            Slot::Relation => self.relation,
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> Slot {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = Slot::Head;
        for slot in Slot::ALL {
            let w = self.weight(slot);
            if w > 0.0 {
                last = slot;
                acc += w;
                if u < acc {
                    return slot;
                }
            }
        }
        last
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub margin: f64,
    pub dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub setting: Setting,
    pub corruption: CorruptionWeights,
    pub seed: u64,
    pub norm: NormOrder,
    pub active: Vec<SemanticClass>,
    pub score_mode: ScoreMode,
    pub architecture: Architecture,
    /// Epochs without validation improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    /// Validation triples ranked after each epoch; 0 disables validation.
    pub valid_sample: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            margin: 1.0,
            dim: 100,
            batch_size: 5000,
            epochs: 1000,
            setting: Setting::Fixed,
            corruption: CorruptionWeights::default(),
            seed: 0,
            norm: NormOrder::L2,
            active: Vec::new(),
            score_mode: ScoreMode::Total,
            architecture: Architecture::TransE,
            patience: 10,
            valid_sample: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return bad(format!("margin must be > 0, got {}", self.margin));
        }
        if self.dim == 0 {
            return bad("dimension must be > 0".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be > 0".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be > 0".into());
        }
        self.corruption.validate()?;
        if let Architecture::TransR { relation_dim } = self.architecture {
            if relation_dim == 0 {
                return bad("TransR relation dimension must be > 0".into());
            }
            if !self.active.is_empty() {
                return bad("TransR does not combine with semantic classes".into());
            }
        }
        Ok(())
    }

    /// Energy used for ranking and classification.
    pub fn energy(&self) -> EnergyConfig {
        EnergyConfig::new(self.norm, self.active.iter().copied(), self.score_mode)
    }

    /// Energy used by the training loss: always the overall energy.
    pub fn training_energy(&self) -> EnergyConfig {
        self.energy().with_score_mode(ScoreMode::Total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeSample {
    pub original: Triple,
    pub corrupted: Triple,
    pub position: Slot,
}

const MAX_REJECTIONS: usize = 32;

/// Replaces the id at `pos` with a uniformly drawn different id such that the
/// result is not a known triple. Falls back to enumerating all candidates.
pub(crate) fn corrupt_at(
    t: &Triple,
    pos: Slot,
    graph: &KnowledgeGraph,
    rng: &mut impl Rng,
) -> Option<Triple> {
    let n = pos.vocab_size(graph);
    if n < 2 {
        return None;
    }
    let cur = pos.current(t);
    for _ in 0..MAX_REJECTIONS {
        let mut id = rng.random_range(0..n - 1);
        if id >= cur {
            id += 1;
        }
        let c = pos.substitute(t, id);
        if !graph.is_known(&c) {
            return Some(c);
        }
    }
    let free: Vec<Triple> = (0..n)
        .filter(|&id| id != cur)
        .map(|id| pos.substitute(t, id))
        .filter(|c| !graph.is_known(c))
        .collect();
    if free.is_empty() {
        None
    } else {
        Some(free[rng.random_range(0..free.len())])
    }
}

/// Draws one corrupted triple absent from the graph. The position follows
/// `weights`; if it has no free candidate, other positions with positive
/// weight are tried.
pub fn sample_negative(
    t: &Triple,
    graph: &KnowledgeGraph,
    weights: &CorruptionWeights,
    rng: &mut impl Rng,
) -> Result<NegativeSample> {
    let first = weights.draw(rng);
    let order = std::iter::once(first).chain(
        Slot::ALL
            .into_iter()
            .filter(move |&p| p != first && weights.weight(p) > 0.0),
    );
    for position in order {
        if let Some(corrupted) = corrupt_at(t, position, graph, rng) {
            return Ok(NegativeSample {
                original: *t,
                corrupted,
                position,
            });
        }
    }
    Err(Error::Exhausted {
        head: t.head.0,
        rel: t.rel.0,
        tail: t.tail.0,
    })
}

/// `max(0, margin + pos - neg)`
pub fn margin_loss(pos_energy: f64, neg_energy: f64, margin: f64) -> f64 {
    (margin + (pos_energy - neg_energy)).max(0.0)
}

/// Trainable parameters plus the training cursor.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub space: EmbeddingSpace,
    pub resources: SemanticResourceSet,
    pub transr: Option<TransRParams>,
    pub epoch: usize,
    pub best_metric: Option<f64>,
    pub rng: ChaCha8Rng,
}

/// Draws knowledge vectors uniformly from `[-6/sqrt(k), 6/sqrt(k)]`,
/// normalizes concept rows and copies the active classes' semantic vectors.
pub fn init_embeddings(
    graph: &KnowledgeGraph,
    config: &TrainConfig,
    resources: &SemanticResourceSet,
) -> Result<TrainState> {
    config.validate()?;
    let k = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let uniform = |rng: &mut ChaCha8Rng, rows: usize, cols: usize| {
        let bound = 6.0 / (cols as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        Matrix::from_vec(rows, cols, data)
    };
    let mut concept = uniform(&mut rng, graph.num_concepts(), k);
    for i in 0..concept.rows() {
        normalize(concept.row_mut(i));
    }
    let relation = uniform(&mut rng, graph.num_relations(), k);

    let transr = match config.architecture {
        Architecture::TransE => None,
        Architecture::TransR { relation_dim } => {
            let rel = uniform(&mut rng, graph.num_relations(), relation_dim);
            let mut proj = Matrix::zeros(k, relation_dim);
            for i in 0..k.min(relation_dim) {
                proj.row_mut(i)[i] = 1.0;
            }
            Some(TransRParams::new(rel, vec![proj; graph.num_relations()])?)
        }
    };

    let mut semantic = SemanticResourceSet::new(k, graph.num_concepts());
    for &class in &config.active {
        let cv = resources
            .class(class)
            .ok_or_else(|| Error::Config(format!("model needs {class} vectors but none were prepared")))?;
        if resources.k() != k || resources.num_concepts() != graph.num_concepts() {
            return Err(Error::Config(format!(
                "{class} vectors are {}x{}, expected {}x{k}",
                resources.num_concepts(),
                resources.k(),
                graph.num_concepts()
            )));
        }
        semantic.insert(class, cv.clone())?;
    }

    Ok(TrainState {
        space: EmbeddingSpace::new(concept, relation)?,
        resources: semantic,
        transr,
        epoch: 0,
        best_metric: None,
        rng,
    })
}

impl TrainState {
    pub fn param(&self, p: Param) -> &[f64] {
        match p {
            Param::Concept(i) => self.space.concept.row(i),
            Param::Relation(i) => self.space.relation.row(i),
            Param::Semantic(class, i) => self.resources.class(class).expect("class present").vectors.row(i),
            Param::RelationSpace(i) => self.transr.as_ref().expect("TransR state").relation.row(i),
            Param::Projection(i) => self.transr.as_ref().expect("TransR state").projection[i].as_slice(),
        }
    }

    pub fn param_mut(&mut self, p: Param) -> &mut [f64] {
        match p {
            Param::Concept(i) => self.space.concept.row_mut(i),
            Param::Relation(i) => self.space.relation.row_mut(i),
            Param::Semantic(class, i) => self
                .resources
                .class_mut(class)
                .expect("class present")
                .vectors
                .row_mut(i),
            Param::RelationSpace(i) => self.transr.as_mut().expect("TransR state").relation.row_mut(i),
            Param::Projection(i) => self.transr.as_mut().expect("TransR state").projection[i].as_mut_slice(),
        }
    }

    /// Energy of `t` under `energy` (TransR ignores semantic classes and score mode).
    pub fn score(&self, t: &Triple, energy: &EnergyConfig) -> f64 {
        match &self.transr {
            Some(p) => transr_unchecked(t, p, &self.space.concept, energy.norm),
            None => total_unchecked(t, &self.space, &self.resources, energy),
        }
    }

    fn energy_grad(&self, t: &Triple, sign: f64, energy: &EnergyConfig, grad: &mut Gradient) -> f64 {
        match &self.transr {
            Some(p) => energy_transr_grad(t, sign, p, &self.space.concept, energy.norm, grad),
            None => energy_total_grad(t, sign, &self.space, &self.resources, energy, grad),
        }
    }

    /// Margin loss of one (golden, corrupted) pair.
    pub fn pair_loss(&self, pos: &Triple, neg: &Triple, config: &TrainConfig) -> f64 {
        let energy = config.training_energy();
        margin_loss(self.score(pos, &energy), self.score(neg, &energy), config.margin)
    }

    /// Adds the pair's loss gradient into `grad` (nothing when the loss is 0)
    /// and returns the loss.
    pub fn pair_loss_grad(&self, pos: &Triple, neg: &Triple, config: &TrainConfig, grad: &mut Gradient) -> f64 {
        let energy = config.training_energy();
        let mut local = Gradient::new();
        let e_pos = self.energy_grad(pos, 1.0, &energy, &mut local);
        let e_neg = self.energy_grad(neg, -1.0, &energy, &mut local);
        let loss = margin_loss(e_pos, e_neg, config.margin);
        if loss > 0.0 {
            grad.merge(&local);
        }
        loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub loss_sum: f64,
    pub pairs: usize,
    pub violating: usize,
}

/// One SGD update: the batch's pair gradients are summed at the current
/// parameters and applied once, then touched knowledge concept rows are
/// renormalized. In the Variable setting every covered semantic row of the
/// active classes is renormalized too.
pub fn sgd_step(state: &mut TrainState, batch: &[NegativeSample], config: &TrainConfig) -> Result<StepStats> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("empty training batch".into()));
    }
    let mut grad = Gradient::new();
    let mut stats = StepStats::default();
    for pair in batch {
        let loss = state.pair_loss_grad(&pair.original, &pair.corrupted, config, &mut grad);
        stats.loss_sum += loss;
        stats.pairs += 1;
        if loss > 0.0 {
            stats.violating += 1;
        }
    }
    if !stats.loss_sum.is_finite() || !grad.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite loss or gradient at epoch {} (batch loss {})",
            state.epoch, stats.loss_sum
        )));
    }
    if config.setting == Setting::Fixed {
        grad.retain(|p| !matches!(p, Param::Semantic(..)));
    }
    let lr = config.learning_rate;
    for (&p, g) in grad.iter() {
        let row = state.param_mut(p);
        for (w, d) in row.iter_mut().zip(g) {
            *w -= lr * d;
        }
        if matches!(p, Param::Concept(_)) {
            normalize(row);
        }
    }
    if config.setting == Setting::Variable {
        for class in config.active.iter().copied() {
            if let Some(cv) = state.resources.class_mut(class) {
                for i in 0..cv.covered.len() {
                    if cv.covered[i] {
                        normalize(cv.vectors.row_mut(i));
                    }
                }
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub valid_filtered_mean_rank: Option<f64>,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={}\tmean_loss={:.6}", self.epoch, self.mean_loss)?;
        match self.valid_filtered_mean_rank {
            Some(m) => write!(f, "\tvalid_filtered_mean_rank={m:.4}"),
            None => write!(f, "\tvalid_filtered_mean_rank=NA"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Trains from a fresh initialization. Returns the state with the best
/// validation mean rank (or the last state when validation is disabled).
pub fn train(
    graph: &KnowledgeGraph,
    config: &TrainConfig,
    resources: &SemanticResourceSet,
) -> Result<(TrainState, TrainLog)> {
    let state = init_embeddings(graph, config, resources)?;
    train_from(state, graph, config)
}

/// Continues training from `state`.
pub fn train_from(
    mut state: TrainState,
    graph: &KnowledgeGraph,
    config: &TrainConfig,
) -> Result<(TrainState, TrainLog)> {
    config.validate()?;
    if graph.train().is_empty() {
        return Err(Error::EmptyInput("no training triples".into()));
    }
    let mut valid: Vec<Triple> = graph.valid().to_vec();
    valid.shuffle(&mut state.rng);
    valid.truncate(config.valid_sample);

    let mut order: Vec<Triple> = graph.train().to_vec();
    let mut log = TrainLog::default();
    let mut best: Option<(EmbeddingSpace, SemanticResourceSet, Option<TransRParams>)> = None;
    let mut stale = 0usize;

    for _ in 0..config.epochs {
        state.epoch += 1;
        order.shuffle(&mut state.rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = chunk
                .iter()
                .map(|t| sample_negative(t, graph, &config.corruption, &mut state.rng))
                .collect::<Result<Vec<_>>>()?;
            loss_sum += sgd_step(&mut state, &batch, config)?.loss_sum;
        }
        let mean_loss = loss_sum / order.len() as f64;

        let metric = if valid.is_empty() {
            None
        } else {
            let energy = config.energy();
            let scorer = |t: &Triple| state.score(t, &energy);
            let report = eval_link_prediction(&valid, graph, &scorer, Task::Concept)?;
            Some(report.mean_rank_filtered)
        };
        let record = EpochRecord {
            epoch: state.epoch,
            mean_loss,
            valid_filtered_mean_rank: metric,
        };
        debug!("{record}");
        log.epochs.push(record);

        if let Some(m) = metric {
            if state.best_metric.is_none_or(|b| m < b) {
                state.best_metric = Some(m);
                log.best_epoch = Some(state.epoch);
                best = Some((state.space.clone(), state.resources.clone(), state.transr.clone()));
                stale = 0;
            } else {
                stale += 1;
                if config.patience > 0 && stale >= config.patience {
                    log.stopped_early = true;
                    break;
                }
            }
        }
    }
    if let Some((space, resources, transr)) = best {
        state.space = space;
        state.resources = resources;
        state.transr = transr;
    }
    Ok((state, log))
}
