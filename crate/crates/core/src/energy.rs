//! Triple energies (lower is more plausible) and their gradients.
//!
//! The knowledge energy is the translation distance `|h_k + r - t_k|`. Each
//! active semantic class adds three compatibility terms that mix semantic
//! and knowledge concept vectors around the same shared relation vector:
//! `|h_s + r - t_s| + |h_s + r - t_k| + |h_k + r - t_s|`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ConceptId, Triple};
use crate::matrix::Matrix;
use crate::resources::{SemanticClass, SemanticResourceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormOrder {
    L1,
    #[default]
    L2,
}

impl FromStr for NormOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(NormOrder::L1),
            "l2" => Ok(NormOrder::L2),
            _ => Err(Error::Config(format!("unknown norm {s:?} (expected l1 or l2)"))),
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::L1 => "l1",
            NormOrder::L2 => "l2",
        })
    }
}

impl NormOrder {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => v.iter().map(|x| x.abs()).sum(),
            NormOrder::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    /// A (sub)gradient of the norm at `v`; zero at the origin and, for L1,
    /// zero on coordinates that are exactly zero.
    pub fn gradient(self, v: &[f64]) -> Vec<f64> {
        match self {
            NormOrder::L1 => v
                .iter()
                .map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
                .collect(),
            NormOrder::L2 => {
                let n = self.norm(v);
                if n == 0.0 {
                    vec![0.0; v.len()]
                } else {
                    v.iter().map(|x| x / n).collect()
                }
            }
        }
    }
}

/// Which energy ranks candidates at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    #[default]
    Total,
    Knowledge,
}

impl FromStr for ScoreMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "total" => Ok(ScoreMode::Total),
            "knowledge" | "knowledge_only" => Ok(ScoreMode::Knowledge),
            _ => Err(Error::Config(format!(
                "unknown score mode {s:?} (expected total or knowledge)"
            ))),
        }
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::Total => "total",
            ScoreMode::Knowledge => "knowledge",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub norm: NormOrder,
    /// Sorted, without duplicates.
    pub active: Vec<SemanticClass>,
    pub score_mode: ScoreMode,
}

impl EnergyConfig {
    pub fn new(norm: NormOrder, active: impl IntoIterator<Item = SemanticClass>, score_mode: ScoreMode) -> Self {
        let mut active: Vec<_> = active.into_iter().collect();
        active.sort();
        active.dedup();
        EnergyConfig {
            norm,
            active,
            score_mode,
        }
    }

    pub fn knowledge_only(norm: NormOrder) -> Self {
        EnergyConfig::new(norm, [], ScoreMode::Total)
    }

    pub fn with_score_mode(&self, score_mode: ScoreMode) -> Self {
        EnergyConfig {
            score_mode,
            ..self.clone()
        }
    }
}

pub fn dissimilarity(a: &[f64], b: &[f64], norm: NormOrder) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(norm.norm(&diff))
}

/// Knowledge vectors for concepts and the shared relation vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpace {
    pub concept: Matrix,
    pub relation: Matrix,
}

impl EmbeddingSpace {
    pub fn new(concept: Matrix, relation: Matrix) -> Result<Self> {
        if concept.cols() != relation.cols() {
            return Err(Error::Dimension {
                expected: concept.cols(),
                found: relation.cols(),
            });
        }
        if !concept.is_finite() || !relation.is_finite() {
            return Err(Error::Domain("embedding entries must be finite".into()));
        }
        Ok(EmbeddingSpace { concept, relation })
    }

    pub fn k(&self) -> usize {
        self.concept.cols()
    }

    pub fn num_concepts(&self) -> usize {
        self.concept.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation.rows()
    }

    pub fn check(&self, t: &Triple) -> Result<()> {
        let nc = self.num_concepts();
        if t.head.0 >= nc || t.tail.0 >= nc || t.rel.0 >= self.num_relations() {
            return Err(Error::Domain(format!(
                "triple {t} outside {nc} concepts / {} relations",
                self.num_relations()
            )));
        }
        Ok(())
    }
}

/// TransR baseline parameters: relation vectors in a `d`-dimensional relation
/// space and one `k x d` projection per relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransRParams {
    pub relation: Matrix,
    pub projection: Vec<Matrix>,
}

impl TransRParams {
    pub fn new(relation: Matrix, projection: Vec<Matrix>) -> Result<Self> {
        if projection.len() != relation.rows() {
            return Err(Error::Dimension {
                expected: relation.rows(),
                found: projection.len(),
            });
        }
        for m in &projection {
            if m.cols() != relation.cols() {
                return Err(Error::Dimension {
                    expected: relation.cols(),
                    found: m.cols(),
                });
            }
            if !m.is_finite() {
                return Err(Error::Domain("projection entries must be finite".into()));
            }
        }
        Ok(TransRParams { relation, projection })
    }

    pub fn d(&self) -> usize {
        self.relation.cols()
    }
}

/// Identifies one trainable vector (a matrix row, or a flattened projection).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Concept(usize),
    Relation(usize),
    Semantic(SemanticClass, usize),
    /// TransR relation vector in relation space.
    RelationSpace(usize),
    /// TransR projection matrix, row-major.
    Projection(usize),
}

/// Sparse gradient keyed by parameter row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    rows: BTreeMap<Param, Vec<f64>>,
}

impl Gradient {
    pub fn new() -> Self {
        Self::default()
    }

    /// `self[p] += scale * v`
    pub fn add(&mut self, p: Param, scale: f64, v: &[f64]) {
        let row = self.rows.entry(p).or_insert_with(|| vec![0.0; v.len()]);
        for (r, x) in row.iter_mut().zip(v) {
            *r += scale * x;
        }
    }

    pub fn get(&self, p: &Param) -> Option<&[f64]> {
        self.rows.get(p).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Param, &Vec<f64>)> {
        self.rows.iter()
    }

    pub fn merge(&mut self, other: &Gradient) {
        for (p, v) in &other.rows {
            self.add(*p, 1.0, v);
        }
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&Param) -> bool) {
        self.rows.retain(|p, _| keep(p));
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().flatten().all(|x| x.is_finite())
    }
}

/// A concept-side vector in a translation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Knowledge(ConceptId),
    Semantic(SemanticClass, ConceptId),
}

impl Side {
    fn vector<'a>(self, space: &'a EmbeddingSpace, res: &'a SemanticResourceSet) -> &'a [f64] {
        match self {
            Side::Knowledge(c) => space.concept.row(c.0),
            Side::Semantic(class, c) => res
                .get(class, c)
                .expect("semantic side is only built for covered concepts"),
        }
    }

    fn param(self) -> Param {
        match self {
            Side::Knowledge(c) => Param::Concept(c.0),
            Side::Semantic(class, c) => Param::Semantic(class, c.0),
        }
    }
}

/// `(head side, tail side)` pairs whose translation distances sum to the
/// energy. A concept without a vector for a class stands in with its
/// knowledge vector for that class's terms.
fn terms(t: &Triple, res: &SemanticResourceSet, config: &EnergyConfig) -> Vec<(Side, Side)> {
    let hk = Side::Knowledge(t.head);
    let tk = Side::Knowledge(t.tail);
    let mut out = vec![(hk, tk)];
    if config.score_mode == ScoreMode::Knowledge {
        return out;
    }
    for &class in &config.active {
        let hs = if res.get(class, t.head).is_some() {
            Side::Semantic(class, t.head)
        } else {
            hk
        };
        let ts = if res.get(class, t.tail).is_some() {
            Side::Semantic(class, t.tail)
        } else {
            tk
        };
        out.extend([(hs, ts), (hs, tk), (hk, ts)]);
    }
    out
}

fn translation(h: &[f64], r: &[f64], t: &[f64]) -> Vec<f64> {
    h.iter().zip(r).zip(t).map(|((h, r), t)| h + r - t).collect()
}

/// `|h_k + r - t_k|`.
pub fn energy_k(t: &Triple, space: &EmbeddingSpace, norm: NormOrder) -> Result<f64> {
    space.check(t)?;
    Ok(norm.norm(&translation(
        space.concept.row(t.head.0),
        space.relation.row(t.rel.0),
        space.concept.row(t.tail.0),
    )))
}

/// Compatibility energy of one semantic class. Fails with a coverage error
/// when either concept lacks a vector for `class`.
pub fn energy_s(
    class: SemanticClass,
    t: &Triple,
    space: &EmbeddingSpace,
    res: &SemanticResourceSet,
    norm: NormOrder,
) -> Result<f64> {
    space.check(t)?;
    let missing = |c: ConceptId| Error::Coverage {
        class: class.to_string(),
        concept: c.0,
    };
    let hs = res.get(class, t.head).ok_or_else(|| missing(t.head))?;
    let ts = res.get(class, t.tail).ok_or_else(|| missing(t.tail))?;
    let hk = space.concept.row(t.head.0);
    let tk = space.concept.row(t.tail.0);
    let r = space.relation.row(t.rel.0);
    Ok(norm.norm(&translation(hs, r, ts))
        + norm.norm(&translation(hs, r, tk))
        + norm.norm(&translation(hk, r, ts)))
}

/// Overall energy: knowledge energy plus every active class's compatibility
/// energy, or the knowledge energy alone in knowledge score mode.
pub fn energy_total(
    t: &Triple,
    space: &EmbeddingSpace,
    res: &SemanticResourceSet,
    config: &EnergyConfig,
) -> Result<f64> {
    space.check(t)?;
    for class in &config.active {
        if res.class(*class).is_none() && config.score_mode == ScoreMode::Total {
            return Err(Error::Config(format!("active class {class} has no vectors")));
        }
    }
    Ok(total_unchecked(t, space, res, config))
}

pub(crate) fn total_unchecked(
    t: &Triple,
    space: &EmbeddingSpace,
    res: &SemanticResourceSet,
    config: &EnergyConfig,
) -> f64 {
    let r = space.relation.row(t.rel.0);
    terms(t, res, config)
        .into_iter()
        .map(|(h, tl)| config.norm.norm(&translation(h.vector(space, res), r, tl.vector(space, res))))
        .sum()
}

/// Adds `sign * dE/dθ` of the overall energy into `grad` and returns `E`.
pub fn energy_total_grad(
    t: &Triple,
    sign: f64,
    space: &EmbeddingSpace,
    res: &SemanticResourceSet,
    config: &EnergyConfig,
    grad: &mut Gradient,
) -> f64 {
    let r = space.relation.row(t.rel.0);
    let mut energy = 0.0;
    for (h, tl) in terms(t, res, config) {
        let e = translation(h.vector(space, res), r, tl.vector(space, res));
        energy += config.norm.norm(&e);
        let g = config.norm.gradient(&e);
        grad.add(h.param(), sign, &g);
        grad.add(Param::Relation(t.rel.0), sign, &g);
        grad.add(tl.param(), -sign, &g);
    }
    energy
}

fn transr_residual(t: &Triple, params: &TransRParams, entities: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let diff: Vec<f64> = entities
        .row(t.head.0)
        .iter()
        .zip(entities.row(t.tail.0))
        .map(|(h, t)| h - t)
        .collect();
    let m = &params.projection[t.rel.0];
    let mut e = m.left_mul(&diff);
    for (x, r) in e.iter_mut().zip(params.relation.row(t.rel.0)) {
        *x += r;
    }
    (diff, e)
}

/// `|h M_r + r - t M_r|` with entity vectors from `entities`.
pub fn energy_transr(
    t: &Triple,
    params: &TransRParams,
    entities: &Matrix,
    norm: NormOrder,
) -> Result<f64> {
    let nc = entities.rows();
    if t.head.0 >= nc || t.tail.0 >= nc || t.rel.0 >= params.projection.len() {
        return Err(Error::Domain(format!("triple {t} out of range")));
    }
    if params.projection[t.rel.0].rows() != entities.cols() {
        return Err(Error::Dimension {
            expected: entities.cols(),
            found: params.projection[t.rel.0].rows(),
        });
    }
    Ok(norm.norm(&transr_residual(t, params, entities).1))
}

pub(crate) fn transr_unchecked(t: &Triple, params: &TransRParams, entities: &Matrix, norm: NormOrder) -> f64 {
    norm.norm(&transr_residual(t, params, entities).1)
}

/// Adds `sign * dE/dθ` of the TransR energy into `grad` and returns `E`.
pub fn energy_transr_grad(
    t: &Triple,
    sign: f64,
    params: &TransRParams,
    entities: &Matrix,
    norm: NormOrder,
    grad: &mut Gradient,
) -> f64 {
    let (diff, e) = transr_residual(t, params, entities);
    let g = norm.gradient(&e);
    let m = &params.projection[t.rel.0];
    let dh = m.mul_vec(&g);
    grad.add(Param::Concept(t.head.0), sign, &dh);
    grad.add(Param::Concept(t.tail.0), -sign, &dh);
    grad.add(Param::RelationSpace(t.rel.0), sign, &g);
    let outer: Vec<f64> = diff.iter().flat_map(|&a| g.iter().map(move |&b| a * b)).collect();
    grad.add(Param::Projection(t.rel.0), sign, &outer);
    norm.norm(&e)
}
