//! Knowledge graph storage: vocabularies, triple files, per-relation splits
//! and membership queries.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::resources::SemanticResourceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: ConceptId,
    pub rel: RelationId,
    pub tail: ConceptId,
}

impl Triple {
    pub fn new(head: usize, rel: usize, tail: usize) -> Self {
        Triple {
            head: ConceptId(head),
            rel: RelationId(rel),
            tail: ConceptId(tail),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head.0, self.rel.0, self.tail.0)
    }
}

/// Position of a triple that can be substituted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Head,
    Tail,
    Relation,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Head, Slot::Tail, Slot::Relation];

    /// `t` with `id` substituted at this position.
    pub fn substitute(self, t: &Triple, id: usize) -> Triple {
        match self {
            Slot::Head => Triple { head: ConceptId(id), ..*t },
            Slot::Tail => Triple { tail: ConceptId(id), ..*t },
            Slot::Relation => Triple { rel: RelationId(id), ..*t },
        }
    }

    pub fn current(self, t: &Triple) -> usize {
        match self {
            Slot::Head => t.head.0,
            Slot::Tail => t.tail.0,
            Slot::Relation => t.rel.0,
        }
    }

    pub fn vocab_size(self, graph: &KnowledgeGraph) -> usize {
        match self {
            Slot::Head | Slot::Tail => graph.num_concepts(),
            Slot::Relation => graph.num_relations(),
        }
    }
}

/// Lowercases and joins whitespace-separated words with `_`.
pub fn normalize_concept_label(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Dense label <-> id mapping in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab::new();
        for label in labels {
            vocab.intern(label.into());
        }
        vocab
    }

    pub fn intern(&mut self, label: String) -> usize {
        if let Some(&id) = self.index.get(&label) {
            return id;
        }
        let id = self.labels.len();
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        id
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Concepts, relations and the train/valid/test triple sets.
///
/// A freshly loaded graph is unsplit: every triple sits in `train`.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    concepts: Vocab,
    relations: Vocab,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    all: HashSet<Triple>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const DEFAULT: SplitRatios = SplitRatios {
        train: 0.6,
        valid: 0.2,
        test: 0.2,
    };

    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, valid, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Config(format!(
                "split ratios must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Per-relation counts produced by [`KnowledgeGraph::split_per_relation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSummary {
    pub seed: u64,
    /// `(relation label, train, valid, test)` in relation id order.
    pub per_relation: Vec<(String, usize, usize, usize)>,
    /// Relations with fewer than three triples, kept entirely in train.
    pub undersized: Vec<String>,
}

impl SplitSummary {
    pub fn totals(&self) -> (usize, usize, usize) {
        self.per_relation
            .iter()
            .fold((0, 0, 0), |(a, b, c), (_, x, y, z)| (a + x, b + y, c + z))
    }
}

fn parse_triple_line(line: &str, origin: &str, lineno: usize) -> Result<Option<[String; 3]>> {
    let trimmed = line.trim_end_matches(['\r', '\n']);
    if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = trimmed.split('\t').collect();
    if fields.len() != 3 {
        return Err(Error::parse(
            origin,
            lineno,
            format!("expected 3 tab-separated fields, found {}", fields.len()),
        ));
    }
    if let Some(pos) = fields.iter().position(|f| f.trim().is_empty()) {
        return Err(Error::parse(
            origin,
            lineno,
            format!("field {} is empty", pos + 1),
        ));
    }
    Ok(Some([
        normalize_concept_label(fields[0]),
        fields[1].trim().to_string(),
        normalize_concept_label(fields[2]),
    ]))
}

fn read_records(reader: impl Read, origin: &str) -> Result<Vec<[String; 3]>> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if let Some(rec) = parse_triple_line(&line, origin, i + 1)? {
            records.push(rec);
        }
    }
    Ok(records)
}

/// Loads a tab-separated triple file into an unsplit graph.
pub fn load_triples(path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_triples(file, &path.display().to_string())
}

/// Reads triples from any reader; `origin` names the source in diagnostics.
pub fn read_triples(reader: impl Read, origin: &str) -> Result<KnowledgeGraph> {
    let records = read_records(reader, origin)?;
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("{origin} contains no triples")));
    }
    let mut g = KnowledgeGraph::empty();
    let mut pool = Vec::with_capacity(records.len());
    for rec in records {
        pool.push(g.intern(rec));
    }
    g.train = g.dedup(pool);
    g.all = g.train.iter().copied().collect();
    Ok(g)
}

impl KnowledgeGraph {
    fn empty() -> Self {
        KnowledgeGraph {
            concepts: Vocab::new(),
            relations: Vocab::new(),
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
            all: HashSet::new(),
        }
    }

    fn intern(&mut self, [h, r, t]: [String; 3]) -> Triple {
        let head = self.concepts.intern(h);
        let rel = self.relations.intern(r);
        let tail = self.concepts.intern(t);
        Triple::new(head, rel, tail)
    }

    /// Drops triples already present in `self.all` or earlier in `triples`.
    fn dedup(&self, triples: Vec<Triple>) -> Vec<Triple> {
        let mut seen = HashSet::with_capacity(triples.len());
        triples
            .into_iter()
            .filter(|t| !self.all.contains(t) && seen.insert(*t))
            .collect()
    }

    /// Builds a graph from explicit splits. Vocabularies cover the three
    /// splits in train, valid, test order. A triple repeated across splits is
    /// kept only in its first split.
    pub fn from_splits(
        concepts: Vocab,
        relations: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let mut g = KnowledgeGraph {
            concepts,
            relations,
            ..KnowledgeGraph::empty()
        };
        for t in train.iter().chain(&valid).chain(&test) {
            g.check(t)?;
        }
        g.train = g.dedup(train);
        g.all.extend(g.train.iter().copied());
        g.valid = g.dedup(valid);
        g.all.extend(g.valid.iter().copied());
        g.test = g.dedup(test);
        g.all.extend(g.test.iter().copied());
        Ok(g)
    }

    /// Loads the three split files written by [`KnowledgeGraph::write_splits`].
    pub fn load_split_files(
        train: impl AsRef<Path>,
        valid: impl AsRef<Path>,
        test: impl AsRef<Path>,
    ) -> Result<Self> {
        let mut g = KnowledgeGraph::empty();
        let mut parts = Vec::with_capacity(3);
        for path in [train.as_ref(), valid.as_ref(), test.as_ref()] {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let records = read_records(file, &path.display().to_string())?;
            parts.push(records.into_iter().map(|r| g.intern(r)).collect::<Vec<_>>());
        }
        let test = parts.pop().unwrap_or_default();
        let valid = parts.pop().unwrap_or_default();
        let train = parts.pop().unwrap_or_default();
        if train.is_empty() && valid.is_empty() && test.is_empty() {
            return Err(Error::EmptyInput("all split files are empty".into()));
        }
        KnowledgeGraph::from_splits(g.concepts, g.relations, train, valid, test)
    }

    pub fn concepts(&self) -> &Vocab {
        &self.concepts
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    /// Every triple: train, then valid, then test.
    pub fn pool(&self) -> Vec<Triple> {
        self.train
            .iter()
            .chain(&self.valid)
            .chain(&self.test)
            .copied()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    fn check(&self, t: &Triple) -> Result<()> {
        if t.head.0 >= self.concepts.len() || t.tail.0 >= self.concepts.len() {
            return Err(Error::Domain(format!(
                "triple {t} references a concept outside 0..{}",
                self.concepts.len()
            )));
        }
        if t.rel.0 >= self.relations.len() {
            return Err(Error::Domain(format!(
                "triple {t} references a relation outside 0..{}",
                self.relations.len()
            )));
        }
        Ok(())
    }

    /// Membership in train ∪ valid ∪ test.
    pub fn contains(&self, t: &Triple) -> Result<bool> {
        self.check(t)?;
        Ok(self.all.contains(t))
    }

    /// Membership without id validation; out-of-range ids are simply absent.
    pub fn is_known(&self, t: &Triple) -> bool {
        self.all.contains(t)
    }

    /// Shuffles each relation's triples with a seeded generator and cuts them
    /// into train/valid/test. Cut points are floored; the remainder goes to
    /// train. Relations with fewer than three triples go entirely to train.
    pub fn split_per_relation(
        &self,
        ratios: SplitRatios,
        seed: u64,
    ) -> Result<(KnowledgeGraph, SplitSummary)> {
        ratios.validate()?;
        let mut by_rel: Vec<Vec<Triple>> = vec![Vec::new(); self.relations.len()];
        for t in self.pool() {
            by_rel[t.rel.0].push(t);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
        let mut summary = SplitSummary {
            seed,
            per_relation: Vec::with_capacity(by_rel.len()),
            undersized: Vec::new(),
        };
        for (rel, mut triples) in by_rel.into_iter().enumerate() {
            let label = self.relations.label(rel).to_string();
            let n = triples.len();
            if n < 3 {
                if n > 0 {
                    warn!("relation {label} has only {n} triples; all assigned to train");
                }
                summary.undersized.push(label.clone());
                summary.per_relation.push((label, n, 0, 0));
                train.extend(triples);
                continue;
            }
            triples.shuffle(&mut rng);
            let n_valid = (n as f64 * ratios.valid).floor() as usize;
            let n_test = (n as f64 * ratios.test).floor() as usize;
            let n_train = n - n_valid - n_test;
            summary
                .per_relation
                .push((label, n_train, n_valid, n_test));
            let mut it = triples.into_iter();
            train.extend(it.by_ref().take(n_train));
            valid.extend(it.by_ref().take(n_valid));
            test.extend(it);
        }
        let g = KnowledgeGraph::from_splits(
            self.concepts.clone(),
            self.relations.clone(),
            train,
            valid,
            test,
        )?;
        Ok((g, summary))
    }

    /// Keeps only concepts covered by every class present in `resources`,
    /// re-indexing vocabularies densely. Returns the new graph and, for each
    /// new concept id, its id in `self`.
    pub fn restrict_to_covered(
        &self,
        resources: &SemanticResourceSet,
    ) -> Result<(KnowledgeGraph, Vec<ConceptId>)> {
        let keep: Vec<bool> = (0..self.num_concepts())
            .map(|c| resources.covered_by_all(ConceptId(c)))
            .collect();
        let retained = |t: &Triple| keep[t.head.0] && keep[t.tail.0];

        let mut g = KnowledgeGraph::empty();
        let mut old_ids = Vec::new();
        let mut remap = |g: &mut KnowledgeGraph, triples: &[Triple]| -> Vec<Triple> {
            triples
                .iter()
                .filter(|t| retained(t))
                .map(|t| {
                    let before = g.concepts.len();
                    let rec = [
                        self.concepts.label(t.head.0).to_string(),
                        self.relations.label(t.rel.0).to_string(),
                        self.concepts.label(t.tail.0).to_string(),
                    ];
                    let nt = g.intern(rec);
                    // record provenance of newly interned concepts
                    for (c, old) in [(nt.head, t.head), (nt.tail, t.tail)] {
                        if c.0 >= before && c.0 == old_ids.len() {
                            old_ids.push(old);
                        }
                    }
                    nt
                })
                .collect()
        };
        let train = remap(&mut g, &self.train);
        let valid = remap(&mut g, &self.valid);
        let test = remap(&mut g, &self.test);
        if train.is_empty() && valid.is_empty() && test.is_empty() {
            return Err(Error::EmptyCoverage {
                coverage: resources.coverage_counts(),
            });
        }
        let restricted = KnowledgeGraph::from_splits(g.concepts, g.relations, train, valid, test)?;
        debug_assert_eq!(old_ids.len(), restricted.num_concepts());
        Ok((restricted, old_ids))
    }

    /// SHA-256 over the concept and relation vocabularies, in id order.
    pub fn vocab_hash(&self) -> String {
        let mut h = Sha256::new();
        for label in self.concepts.labels() {
            h.update(label.as_bytes());
            h.update(b"\n");
        }
        h.update(b"\x00");
        for label in self.relations.labels() {
            h.update(label.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Renders triples in the on-disk format.
    pub fn format_triples(&self, triples: &[Triple]) -> String {
        let mut out = String::new();
        for t in triples {
            out.push_str(self.concepts.label(t.head.0));
            out.push('\t');
            out.push_str(self.relations.label(t.rel.0));
            out.push('\t');
            out.push_str(self.concepts.label(t.tail.0));
            out.push('\n');
        }
        out
    }

    pub fn write_triples(&self, path: impl AsRef<Path>, triples: &[Triple]) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.format_triples(triples).as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Writes `<stem>.train.tsv`, `<stem>.valid.tsv` and `<stem>.test.tsv`
    /// into `dir` and returns their paths.
    pub fn write_splits(
        &self,
        dir: impl AsRef<Path>,
        stem: &str,
    ) -> Result<[std::path::PathBuf; 3]> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = split_paths(dir, stem);
        self.write_triples(&paths[0], &self.train)?;
        self.write_triples(&paths[1], &self.valid)?;
        self.write_triples(&paths[2], &self.test)?;
        Ok(paths)
    }

    /// SHA-256 of a split rendered in file format.
    pub fn checksum(&self, triples: &[Triple]) -> String {
        hex::encode(Sha256::digest(self.format_triples(triples).as_bytes()))
    }
}

pub fn split_paths(dir: &Path, stem: &str) -> [std::path::PathBuf; 3] {
    ["train", "valid", "test"].map(|part| dir.join(format!("{stem}.{part}.tsv")))
}
