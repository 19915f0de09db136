//! Auxiliary semantic vectors: word-vector files, phrase and instance
//! averaging, retrofitting, dimension alignment, and the per-class concept
//! matrices consumed by the energy functions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ConceptId, KnowledgeGraph, Triple};
use crate::matrix::{dot, Matrix};

/// Keyed table of equal-length real vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    keys: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Matrix,
}

impl VectorTable {
    /// Empty table of a fixed dimension.
    pub fn empty(dim: usize) -> Self {
        VectorTable {
            keys: Vec::new(),
            index: HashMap::new(),
            vectors: Matrix::zeros(0, dim),
        }
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut keys = Vec::new();
        let mut index = HashMap::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (key, v) in entries {
            let key = key.into();
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    found: v.len(),
                });
            }
            if d == 0 {
                return Err(Error::Domain("vectors must have dimension > 0".into()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("non-finite component for key {key}")));
            }
            if index.insert(key.clone(), keys.len()).is_some() {
                return Err(Error::Domain(format!("duplicate key {key}")));
            }
            keys.push(key);
            data.extend(v);
        }
        let dim = dim.ok_or_else(|| Error::EmptyInput("vector table has no entries".into()))?;
        Ok(VectorTable {
            vectors: Matrix::from_vec(keys.len(), dim, data),
            keys,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index.get(key).map(|&i| self.vectors.row(i))
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn position(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.as_str(), self.vectors.row(i)))
    }

    fn with_vectors(&self, vectors: Matrix) -> Self {
        VectorTable {
            keys: self.keys.clone(),
            index: self.index.clone(),
            vectors,
        }
    }

    /// Writes the table in word-vector text format, with a `<count> <dim>` header.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (key, v) in self.iter() {
            write!(w, "{key}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn load_vector_file(path: impl AsRef<Path>) -> Result<VectorTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_vector_table(file, &path.display().to_string())
}

/// Parses the word-vector text format: an optional `<count> <dim>` header,
/// then `key x1 .. xd` per line.
pub fn read_vector_table(reader: impl Read, origin: &str) -> Result<VectorTable> {
    let mut header: Option<(usize, usize)> = None;
    let mut dim: Option<usize> = None;
    let mut keys = Vec::new();
    let mut index = HashMap::new();
    let mut data = Vec::new();

    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let mut fields = line.split_whitespace();
        let Some(key) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();

        if keys.is_empty() && header.is_none() && dim.is_none() && rest.len() == 1 {
            if let (Ok(n), Ok(d)) = (key.parse::<usize>(), rest[0].parse::<usize>()) {
                if d == 0 {
                    return Err(Error::parse(origin, lineno, "header dimension is 0"));
                }
                header = Some((n, d));
                dim = Some(d);
                continue;
            }
        }

        let d = *dim.get_or_insert(rest.len());
        if d == 0 {
            return Err(Error::parse(origin, lineno, format!("key {key} has no components")));
        }
        if rest.len() != d {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {d} components, found {}", rest.len()),
            ));
        }
        for field in &rest {
            let x: f64 = field.parse().map_err(|_| {
                Error::parse(origin, lineno, format!("non-numeric component {field:?}"))
            })?;
            if !x.is_finite() {
                return Err(Error::parse(origin, lineno, format!("non-finite component {field}")));
            }
            data.push(x);
        }
        if index.insert(key.to_string(), keys.len()).is_some() {
            return Err(Error::parse(origin, lineno, format!("duplicate key {key}")));
        }
        keys.push(key.to_string());
    }

    let dim = dim.ok_or_else(|| Error::EmptyInput(format!("{origin} contains no vectors")))?;
    if let Some((n, _)) = header {
        if n != keys.len() {
            return Err(Error::parse(
                origin,
                1,
                format!("header announces {n} vectors, file has {}", keys.len()),
            ));
        }
    }
    Ok(VectorTable {
        vectors: Matrix::from_vec(keys.len(), dim, data),
        keys,
        index,
    })
}

fn mean_of<'a>(vectors: impl Iterator<Item = &'a [f64]>, dim: usize) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

/// Mean of the vectors of the phrase's tokens (split on `_` and whitespace)
/// that the table knows. `None` when no token is found.
pub fn phrase_vector(phrase: &str, table: &VectorTable) -> Option<Vec<f64>> {
    let tokens = phrase
        .split(|c: char| c == '_' || c.is_whitespace())
        .filter(|t| !t.is_empty());
    mean_of(tokens.filter_map(|t| table.get(t)), table.dim())
}

/// How concept labels are matched against table keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyMatch {
    /// The normalized label must be a key.
    Exact,
    /// Exact key if present, otherwise the phrase average of its tokens.
    Phrase,
}

pub fn concept_vector(label: &str, table: &VectorTable, mode: KeyMatch) -> Option<Vec<f64>> {
    match table.get(label) {
        Some(v) => Some(v.to_vec()),
        None if mode == KeyMatch::Phrase => phrase_vector(label, table),
        None => None,
    }
}

/// Hyponym instances of one concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceList {
    pub concept: String,
    pub instances: Vec<String>,
}

pub fn load_instance_lists(path: impl AsRef<Path>) -> Result<Vec<InstanceList>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_instance_lists(file, &path.display().to_string())
}

/// Parses `concept<TAB>inst1|inst2|...` records.
pub fn read_instance_lists(reader: impl Read, origin: &str) -> Result<Vec<InstanceList>> {
    let mut lists = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let Some((concept, rest)) = line.split_once('\t') else {
            return Err(Error::parse(origin, i + 1, "expected concept<TAB>instances"));
        };
        let concept = crate::graph::normalize_concept_label(concept);
        let instances: Vec<String> = rest
            .split('|')
            .map(crate::graph::normalize_concept_label)
            .filter(|s| !s.is_empty())
            .collect();
        if concept.is_empty() || instances.is_empty() {
            return Err(Error::parse(origin, i + 1, "empty concept or instance list"));
        }
        lists.push(InstanceList { concept, instances });
    }
    Ok(lists)
}

/// Common-knowledge vectors: each concept's vector is the mean of the phrase
/// vectors of its resolvable instances. Concepts with no resolvable instance
/// are left out.
pub fn build_common_knowledge(lists: &[InstanceList], table: &VectorTable) -> Result<VectorTable> {
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut seen = BTreeSet::new();
    for list in lists {
        if !seen.insert(list.concept.as_str()) {
            return Err(Error::Domain(format!(
                "concept {} has more than one instance list",
                list.concept
            )));
        }
        let resolved: Vec<Vec<f64>> = list
            .instances
            .iter()
            .filter_map(|inst| phrase_vector(inst, table))
            .collect();
        if let Some(mean) = mean_of(resolved.iter().map(Vec::as_slice), table.dim()) {
            entries.push((list.concept.clone(), mean));
        }
    }
    if entries.is_empty() {
        return Ok(VectorTable::empty(table.dim()));
    }
    VectorTable::from_entries(entries)
}

/// Neighborhood structure and weights for retrofitting. Edges are undirected
/// and carry one symmetric weight.
#[derive(Debug, Clone)]
pub struct RetrofitGraph {
    alpha: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

/// Weight scheme used when deriving a [`RetrofitGraph`] from triples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RetrofitWeights {
    /// `alpha_i = 1`, `beta_ij = 1 / degree(i)`; stored as `alpha_i = degree(i)`
    /// with unit edge weights, which yields the same updates with symmetric
    /// edge weights.
    DegreeNormalized,
    Uniform { alpha: f64, beta: f64 },
}

impl RetrofitGraph {
    /// `edges` are `(i, j, beta_ij)` over table positions; self loops are ignored
    /// and repeated pairs keep the last weight.
    pub fn new(alpha: Vec<f64>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = alpha.len();
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Domain("alpha weights must be finite and >= 0".into()));
        }
        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, beta) in edges {
            if i >= n || j >= n {
                return Err(Error::Domain(format!("edge ({i}, {j}) outside 0..{n}")));
            }
            if !(beta.is_finite() && beta >= 0.0) {
                return Err(Error::Domain("beta weights must be finite and >= 0".into()));
            }
            if i != j {
                pairs.insert((i.min(j), i.max(j)), beta);
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for (&(i, j), &beta) in &pairs {
            neighbors[i].push((j, beta));
            neighbors[j].push((i, beta));
        }
        Ok(RetrofitGraph { alpha, neighbors })
    }

    /// Neighbors are concept pairs linked by any relation in `triples`, where
    /// both concepts have a key in `table`.
    pub fn from_triples(
        table: &VectorTable,
        graph: &KnowledgeGraph,
        triples: &[Triple],
        weights: RetrofitWeights,
    ) -> Result<Self> {
        let pos = |c: ConceptId| table.position(graph.concepts().label(c.0));
        let mut pairs = BTreeSet::new();
        for t in triples {
            if let (Some(i), Some(j)) = (pos(t.head), pos(t.tail)) {
                if i != j {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
        let n = table.len();
        let (alpha, beta) = match weights {
            RetrofitWeights::DegreeNormalized => {
                let mut degree = vec![0.0; n];
                for &(i, j) in &pairs {
                    degree[i] += 1.0;
                    degree[j] += 1.0;
                }
                (degree, 1.0)
            }
            RetrofitWeights::Uniform { alpha, beta } => (vec![alpha; n], beta),
        };
        let edges: Vec<_> = pairs.into_iter().map(|(i, j)| (i, j, beta)).collect();
        RetrofitGraph::new(alpha, &edges)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `sum_i alpha_i |w_i - w0_i|^2 + sum_{i<j} beta_ij |w_i - w_j|^2`.
    pub fn objective(&self, original: &Matrix, current: &Matrix) -> f64 {
        let mut total = 0.0;
        for i in 0..self.len() {
            total += self.alpha[i] * sq_dist(current.row(i), original.row(i));
            for &(j, beta) in &self.neighbors[i] {
                if j > i {
                    total += beta * sq_dist(current.row(i), current.row(j));
                }
            }
        }
        total
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of [`retrofit`]: the refined table and the objective value before
/// the first sweep and after every sweep.
#[derive(Debug, Clone)]
pub struct Retrofitted {
    pub table: VectorTable,
    pub objective: Vec<f64>,
}

/// Pulls each vector toward its graph neighbors while keeping it near its
/// original value. Each sweep visits keys in order and sets
/// `w_i = (alpha_i w0_i + sum_j beta_ij w_j) / (alpha_i + sum_j beta_ij)`
/// using the latest neighbor values. Keys without neighbors keep their vector.
pub fn retrofit(table: &VectorTable, graph: &RetrofitGraph, iterations: usize) -> Result<Retrofitted> {
    if graph.len() != table.len() {
        return Err(Error::Dimension {
            expected: table.len(),
            found: graph.len(),
        });
    }
    if iterations == 0 {
        return Err(Error::Domain("retrofitting needs at least one iteration".into()));
    }
    for (i, nbrs) in graph.neighbors.iter().enumerate() {
        if !nbrs.is_empty() {
            let denom = graph.alpha[i] + nbrs.iter().map(|(_, b)| b).sum::<f64>();
            if denom <= 0.0 {
                return Err(Error::DegenerateWeights {
                    key: table.keys[i].clone(),
                });
            }
        }
    }

    let original = &table.vectors;
    let mut current = original.clone();
    let mut objective = vec![graph.objective(original, &current)];
    let dim = table.dim();
    let mut acc = vec![0.0; dim];
    for _ in 0..iterations {
        for i in 0..graph.len() {
            let nbrs = &graph.neighbors[i];
            if nbrs.is_empty() {
                continue;
            }
            let alpha = graph.alpha[i];
            let mut denom = alpha;
            for (a, w0) in acc.iter_mut().zip(original.row(i)) {
                *a = alpha * w0;
            }
            for &(j, beta) in nbrs {
                denom += beta;
                for (a, wj) in acc.iter_mut().zip(current.row(j)) {
                    *a += beta * wj;
                }
            }
            for (w, a) in current.row_mut(i).iter_mut().zip(&acc) {
                *w = a / denom;
            }
        }
        objective.push(graph.objective(original, &current));
    }
    Ok(Retrofitted {
        table: table.with_vectors(current),
        objective,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMethod {
    Truncate,
    PadZero,
    RandomProjection,
}

impl FromStr for AlignMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncate" => Ok(AlignMethod::Truncate),
            "pad_zero" => Ok(AlignMethod::PadZero),
            "random_projection" => Ok(AlignMethod::RandomProjection),
            other => Err(Error::Config(format!("unknown alignment method {other:?}"))),
        }
    }
}

/// Seeded `d x k` Gaussian projection matrix, already scaled by `1/sqrt(k)`.
/// Entries are drawn row by row from a ChaCha8 stream.
pub fn projection_matrix(d: usize, k: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (k as f64).sqrt();
    let data = (0..d * k)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    Matrix::from_vec(d, k, data)
}

/// Maps every vector of `table` to dimension `k`. Tables already at `k` are
/// returned unchanged whatever the method.
pub fn align_dimension(
    table: &VectorTable,
    k: usize,
    method: AlignMethod,
    seed: u64,
) -> Result<VectorTable> {
    if k == 0 {
        return Err(Error::Domain("target dimension must be > 0".into()));
    }
    let d = table.dim();
    if d == k {
        return Ok(table.clone());
    }
    let n = table.len();
    let out = match method {
        AlignMethod::Truncate => {
            if d < k {
                return Err(Error::Dimension {
                    expected: k,
                    found: d,
                });
            }
            let data = table.vectors.iter_rows().flat_map(|r| r[..k].to_vec()).collect();
            Matrix::from_vec(n, k, data)
        }
        AlignMethod::PadZero => {
            if d > k {
                return Err(Error::Dimension {
                    expected: k,
                    found: d,
                });
            }
            let mut m = Matrix::zeros(n, k);
            for i in 0..n {
                m.row_mut(i)[..d].copy_from_slice(table.vector(i));
            }
            m
        }
        AlignMethod::RandomProjection => {
            let proj = projection_matrix(d, k, seed);
            let data = table.vectors.iter_rows().flat_map(|r| proj.left_mul(r)).collect();
            Matrix::from_vec(n, k, data)
        }
    };
    Ok(table.with_vectors(out))
}

/// A class of auxiliary semantic description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemanticClass {
    /// Textual word vectors.
    #[serde(rename = "TXT")]
    Txt,
    /// Affective valence vectors.
    #[serde(rename = "AFF")]
    Aff,
    /// Common-knowledge instance averages.
    #[serde(rename = "CK")]
    Ck,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 3] = [SemanticClass::Txt, SemanticClass::Aff, SemanticClass::Ck];

    pub fn tag(self) -> &'static str {
        match self {
            SemanticClass::Txt => "TXT",
            SemanticClass::Aff => "AFF",
            SemanticClass::Ck => "CK",
        }
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SemanticClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TXT" => Ok(SemanticClass::Txt),
            "AFF" => Ok(SemanticClass::Aff),
            "CK" => Ok(SemanticClass::Ck),
            _ => Err(Error::Config(format!("unknown semantic class {s:?}"))),
        }
    }
}

/// One class's concept vectors, indexed by concept id. Uncovered rows are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVectors {
    pub vectors: Matrix,
    pub covered: Vec<bool>,
}

impl ClassVectors {
    pub fn new(vectors: Matrix, covered: Vec<bool>) -> Result<Self> {
        if vectors.rows() != covered.len() {
            return Err(Error::Dimension {
                expected: vectors.rows(),
                found: covered.len(),
            });
        }
        if !vectors.is_finite() {
            return Err(Error::Domain("semantic vectors must be finite".into()));
        }
        Ok(ClassVectors { vectors, covered })
    }

    /// All concepts covered.
    pub fn dense(vectors: Matrix) -> Self {
        let covered = vec![true; vectors.rows()];
        ClassVectors { vectors, covered }
    }

    pub fn get(&self, c: ConceptId) -> Option<&[f64]> {
        self.covered
            .get(c.0)
            .copied()
            .unwrap_or(false)
            .then(|| self.vectors.row(c.0))
    }

    pub fn coverage(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }
}

/// Per-class semantic vectors aligned to the embedding dimension `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticResourceSet {
    k: usize,
    num_concepts: usize,
    classes: BTreeMap<SemanticClass, ClassVectors>,
}

impl SemanticResourceSet {
    pub fn new(k: usize, num_concepts: usize) -> Self {
        SemanticResourceSet {
            k,
            num_concepts,
            classes: BTreeMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_concepts(&self) -> usize {
        self.num_concepts
    }

    pub fn insert(&mut self, class: SemanticClass, vectors: ClassVectors) -> Result<()> {
        if vectors.vectors.cols() != self.k {
            return Err(Error::Dimension {
                expected: self.k,
                found: vectors.vectors.cols(),
            });
        }
        if vectors.vectors.rows() != self.num_concepts {
            return Err(Error::Dimension {
                expected: self.num_concepts,
                found: vectors.vectors.rows(),
            });
        }
        self.classes.insert(class, vectors);
        Ok(())
    }

    /// Looks up every concept of `graph` in `table` (already at dimension `k`).
    pub fn insert_table(
        &mut self,
        class: SemanticClass,
        graph: &KnowledgeGraph,
        table: &VectorTable,
        mode: KeyMatch,
    ) -> Result<usize> {
        if table.dim() != self.k {
            return Err(Error::Dimension {
                expected: self.k,
                found: table.dim(),
            });
        }
        let n = graph.num_concepts();
        let mut vectors = Matrix::zeros(n, self.k);
        let mut covered = vec![false; n];
        for (c, label) in graph.concepts().labels().iter().enumerate() {
            if let Some(v) = concept_vector(label, table, mode) {
                vectors.row_mut(c).copy_from_slice(&v);
                covered[c] = true;
            }
        }
        let cv = ClassVectors::new(vectors, covered)?;
        let count = cv.coverage();
        self.insert(class, cv)?;
        Ok(count)
    }

    pub fn class(&self, class: SemanticClass) -> Option<&ClassVectors> {
        self.classes.get(&class)
    }

    pub fn class_mut(&mut self, class: SemanticClass) -> Option<&mut ClassVectors> {
        self.classes.get_mut(&class)
    }

    pub fn classes(&self) -> impl Iterator<Item = SemanticClass> + '_ {
        self.classes.keys().copied()
    }

    pub fn get(&self, class: SemanticClass, c: ConceptId) -> Option<&[f64]> {
        self.classes.get(&class).and_then(|cv| cv.get(c))
    }

    pub fn covered_by_all(&self, c: ConceptId) -> bool {
        self.classes.values().all(|cv| cv.get(c).is_some())
    }

    pub fn coverage_counts(&self) -> Vec<(String, usize)> {
        self.classes
            .iter()
            .map(|(class, cv)| (class.to_string(), cv.coverage()))
            .collect()
    }

    /// Keeps the rows named by `old_ids`, in that order.
    pub fn reindex(&self, old_ids: &[ConceptId]) -> Self {
        let mut out = SemanticResourceSet::new(self.k, old_ids.len());
        for (&class, cv) in &self.classes {
            let mut vectors = Matrix::zeros(old_ids.len(), self.k);
            let mut covered = vec![false; old_ids.len()];
            for (new, old) in old_ids.iter().enumerate() {
                vectors.row_mut(new).copy_from_slice(cv.vectors.row(old.0));
                covered[new] = cv.covered[old.0];
            }
            out.classes.insert(class, ClassVectors { vectors, covered });
        }
        out
    }

    /// Covered vectors of one class keyed by concept label.
    pub fn to_table(&self, class: SemanticClass, graph: &KnowledgeGraph) -> Result<VectorTable> {
        let cv = self
            .class(class)
            .ok_or_else(|| Error::Config(format!("no {class} vectors loaded")))?;
        let entries: Vec<_> = (0..self.num_concepts)
            .filter(|&c| cv.covered[c])
            .map(|c| (graph.concepts().label(c).to_string(), cv.vectors.row(c).to_vec()))
            .collect();
        if entries.is_empty() {
            return Ok(VectorTable::empty(self.k));
        }
        VectorTable::from_entries(entries)
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}
