//! The experiment pipeline: split, prepare, train, eval and retrofit. Each
//! command reads and writes files under the configured output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use sha2::{Digest, Sha256};

use semkge::checkpoint::Checkpoint;
use semkge::eval::{eval_classification, eval_link_prediction, fit_thresholds, gen_classification_negatives, Task};
use semkge::graph::{load_triples, split_paths, KnowledgeGraph, Triple};
use semkge::report::{classification_report, dataset_provenance, link_prediction_report, Report};
use semkge::resources::{
    align_dimension, build_common_knowledge, load_instance_lists, load_vector_file, retrofit, KeyMatch,
    RetrofitGraph, RetrofitWeights, SemanticClass, SemanticResourceSet, VectorTable,
};
use semkge::train::train;
use semkge::{Error, Result};

use crate::config::ExperimentConfig;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// TXT labels may be phrases resolved by averaging word vectors; the other
/// classes are keyed by concept.
fn key_match(class: SemanticClass) -> KeyMatch {
    match class {
        SemanticClass::Txt => KeyMatch::Phrase,
        SemanticClass::Aff | SemanticClass::Ck => KeyMatch::Exact,
    }
}

fn class_seed(seed: u64, class: SemanticClass) -> u64 {
    let offset = SemanticClass::ALL.iter().position(|&c| c == class).unwrap_or(0) as u64;
    seed.wrapping_add(offset)
}

fn missing(key: &str) -> Error {
    Error::Config(format!("{key} is not set"))
}

/// Reads a class's raw vectors and aligns them to the model dimension.
fn load_source(config: &ExperimentConfig, class: SemanticClass) -> Result<VectorTable> {
    let raw = match class {
        SemanticClass::Txt => load_vector_file(config.txt_vectors.as_deref().ok_or_else(|| missing("txt_vectors"))?)?,
        SemanticClass::Aff => load_vector_file(config.aff_vectors.as_deref().ok_or_else(|| missing("aff_vectors"))?)?,
        SemanticClass::Ck => {
            let lists = load_instance_lists(config.instance_lists.as_deref().ok_or_else(|| missing("instance_lists"))?)?;
            let words = load_vector_file(
                config
                    .instance_vectors
                    .as_deref()
                    .ok_or_else(|| missing("instance_vectors"))?,
            )?;
            build_common_knowledge(&lists, &words)?
        }
    };
    align_dimension(&raw, config.train.dim, config.align_method, class_seed(config.seed, class))
}

/// Looks up every concept of `graph` in each table; a class matching no
/// concept is an error naming it.
fn attach(
    graph: &KnowledgeGraph,
    k: usize,
    tables: &[(SemanticClass, VectorTable, KeyMatch)],
) -> Result<SemanticResourceSet> {
    let mut set = SemanticResourceSet::new(k, graph.num_concepts());
    for (class, table, mode) in tables {
        set.insert_table(*class, graph, table, *mode)?;
    }
    if set.coverage_counts().iter().any(|(_, n)| *n == 0) {
        return Err(Error::EmptyCoverage {
            coverage: set.coverage_counts(),
        });
    }
    Ok(set)
}

pub fn load_splits(config: &ExperimentConfig) -> Result<KnowledgeGraph> {
    let [train, valid, test] = split_paths(&config.splits_dir(), &config.stem);
    KnowledgeGraph::load_split_files(train, valid, test)
}

fn load_prepared(config: &ExperimentConfig, graph: &KnowledgeGraph) -> Result<SemanticResourceSet> {
    let mut tables = Vec::new();
    for class in config.model.active() {
        let path = config.resource_path(class);
        if !path.is_file() {
            return Err(Error::Config(format!(
                "{} is missing; run `prepare` for model {}",
                path.display(),
                config.model
            )));
        }
        tables.push((class, load_vector_file(&path)?, KeyMatch::Exact));
    }
    attach(graph, config.train.dim, &tables)
}

fn coverage_line(set: &SemanticResourceSet, n: usize) -> String {
    set.coverage_counts()
        .iter()
        .map(|(class, c)| format!("{class} {c}/{n}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone)]
pub struct SplitOutput {
    pub files: [PathBuf; 3],
    pub manifest: PathBuf,
    pub counts: (usize, usize, usize),
}

/// Splits the triple file per relation, optionally after dropping concepts
/// not covered by every resource of the selected model.
pub fn cmd_split(config: &ExperimentConfig) -> Result<SplitOutput> {
    let triples = config.triples.as_deref().ok_or_else(|| missing("triples"))?;
    if config.restrict_to_covered {
        config.require_sources()?;
    }
    let mut pool = load_triples(triples)?;
    let loaded = pool.len();
    if config.restrict_to_covered && !config.model.active().is_empty() {
        let tables = config
            .model
            .active()
            .into_iter()
            .map(|c| Ok((c, load_source(config, c)?, key_match(c))))
            .collect::<Result<Vec<_>>>()?;
        let set = attach(&pool, config.train.dim, &tables)?;
        println!("coverage before restriction: {}", coverage_line(&set, pool.num_concepts()));
        pool = pool.restrict_to_covered(&set)?.0;
        println!(
            "kept {} of {loaded} triples over {} concepts covered by every class",
            pool.len(),
            pool.num_concepts()
        );
    }
    let (graph, summary) = pool.split_per_relation(config.ratios, config.split_seed)?;
    let dir = config.splits_dir();
    let files = graph.write_splits(&dir, &config.stem)?;

    let mut m = String::new();
    let name = triples.file_name().map_or_else(|| triples.display().to_string(), |n| n.to_string_lossy().into());
    let bytes = fs::read(triples).map_err(|e| Error::io(triples, e))?;
    let _ = writeln!(m, "# source\t{name}");
    let _ = writeln!(m, "# source_sha256\t{}", hex::encode(Sha256::digest(&bytes)));
    let _ = writeln!(m, "# seed\t{}", summary.seed);
    let _ = writeln!(
        m,
        "# ratios\t{} {} {}",
        config.ratios.train, config.ratios.valid, config.ratios.test
    );
    let _ = writeln!(m, "# restrict_to_covered\t{}", config.restrict_to_covered);
    for (name, part) in ["train", "valid", "test"].iter().zip([graph.train(), graph.valid(), graph.test()]) {
        let _ = writeln!(m, "# {name}_sha256\t{}", graph.checksum(part));
    }
    let _ = writeln!(m, "relation\ttrain\tvalid\ttest");
    for (rel, a, b, c) in &summary.per_relation {
        let _ = writeln!(m, "{rel}\t{a}\t{b}\t{c}");
    }
    let counts = summary.totals();
    let _ = writeln!(m, "TOTAL\t{}\t{}\t{}", counts.0, counts.1, counts.2);
    let manifest = dir.join(format!("{}.manifest.tsv", config.stem));
    write_file(&manifest, &m)?;
    if !summary.undersized.is_empty() {
        println!(
            "relations with fewer than 3 triples kept in train: {}",
            summary.undersized.join(", ")
        );
    }
    println!(
        "split {} triples into {}/{}/{} (seed {})",
        counts.0 + counts.1 + counts.2,
        counts.0,
        counts.1,
        counts.2,
        summary.seed
    );
    Ok(SplitOutput { files, manifest, counts })
}

#[derive(Debug, Clone)]
pub struct PrepareOutput {
    pub files: Vec<PathBuf>,
    pub coverage: Vec<(String, usize)>,
}

/// Builds, aligns and coverage-filters the vectors of each class the model
/// uses, writing one table per class keyed by concept label.
pub fn cmd_prepare(config: &ExperimentConfig) -> Result<PrepareOutput> {
    config.require_sources()?;
    let graph = load_splits(config)?;
    let tables = config
        .model
        .active()
        .into_iter()
        .map(|c| Ok((c, load_source(config, c)?, key_match(c))))
        .collect::<Result<Vec<_>>>()?;
    let set = attach(&graph, config.train.dim, &tables)?;
    let dir = config.resources_dir();
    create_dir(&dir)?;
    let mut files = Vec::new();
    for class in set.classes() {
        let path = config.resource_path(class);
        set.to_table(class, &graph)?.save(&path)?;
        files.push(path);
    }
    let both = (0..graph.num_concepts())
        .filter(|&c| set.covered_by_all(semkge::graph::ConceptId(c)))
        .count();
    if files.is_empty() {
        println!("model {} uses no semantic vectors; nothing to prepare", config.model);
    } else {
        println!(
            "coverage: {}; covered by every class: {both}/{}",
            coverage_line(&set, graph.num_concepts()),
            graph.num_concepts()
        );
    }
    Ok(PrepareOutput {
        files,
        coverage: set.coverage_counts(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub best_epoch: Option<usize>,
}

fn log_header(config: &ExperimentConfig, graph: &KnowledgeGraph, resources: &SemanticResourceSet) -> String {
    let t = &config.train;
    let mut h = String::new();
    let _ = writeln!(
        h,
        "# model={} setting={} alpha={} gamma={} k={} batch={} epochs={} norm={} seed={}",
        config.model, t.setting, t.learning_rate, t.margin, t.dim, t.batch_size, t.epochs, t.norm, t.seed
    );
    let _ = writeln!(
        h,
        "# corruption={},{},{} patience={} valid_sample={} score_mode={}",
        t.corruption.head, t.corruption.tail, t.corruption.relation, t.patience, t.valid_sample, t.score_mode
    );
    let _ = writeln!(
        h,
        "# concepts={} relations={} train={} valid={} vocab_hash={}",
        graph.num_concepts(),
        graph.num_relations(),
        graph.train().len(),
        graph.valid().len(),
        graph.vocab_hash()
    );
    if resources.classes().next().is_some() {
        let _ = writeln!(h, "# coverage {}", coverage_line(resources, graph.num_concepts()));
    }
    h
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainOutput> {
    let graph = load_splits(config)?;
    let resources = load_prepared(config, &graph)?;
    let header = log_header(config, &graph, &resources);
    print!("{header}");
    let (state, log) = train(&graph, &config.train, &resources)?;

    let dir = config.checkpoints_dir();
    create_dir(&dir)?;
    let checkpoint = config.checkpoint_path();
    Checkpoint::from_state(&state, &graph, &config.train).save(&checkpoint)?;

    let mut text = header;
    for record in &log.epochs {
        let _ = writeln!(text, "{record}");
    }
    let _ = writeln!(
        text,
        "# best_epoch={} stopped_early={}",
        log.best_epoch.map_or("NA".into(), |e| e.to_string()),
        log.stopped_early
    );
    let log_path = dir.join(format!("{}.log", config.run_name()));
    write_file(&log_path, &text)?;
    println!(
        "trained {} epochs; best epoch {}; checkpoint {}",
        log.epochs.len(),
        log.best_epoch.map_or("NA".into(), |e| e.to_string()),
        checkpoint.display()
    );
    Ok(TrainOutput {
        checkpoint,
        log: log_path,
        best_epoch: log.best_epoch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTask {
    Concept,
    Relation,
    Classify,
}

impl std::str::FromStr for EvalTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concept" => Ok(EvalTask::Concept),
            "relation" => Ok(EvalTask::Relation),
            "classify" => Ok(EvalTask::Classify),
            _ => Err(Error::Config(format!(
                "unknown task {s:?}; expected concept, relation or classify"
            ))),
        }
    }
}

impl EvalTask {
    fn name(self) -> &'static str {
        match self {
            EvalTask::Concept => "concept",
            EvalTask::Relation => "relation",
            EvalTask::Classify => "classify",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: Report,
    pub files: [PathBuf; 2],
}

/// Evaluates the run's checkpoint on the test split. Classification fits
/// per-relation thresholds on the validation split only.
pub fn cmd_eval(config: &ExperimentConfig, task: EvalTask, checkpoint: Option<&Path>) -> Result<EvalOutput> {
    let graph = load_splits(config)?;
    let path = checkpoint.map_or_else(|| config.checkpoint_path(), Path::to_path_buf);
    let ckpt = Checkpoint::load(&path)?;
    ckpt.check_compatible(&graph)?;
    let state = ckpt.to_state();
    let energy = ckpt.config.energy().with_score_mode(config.train.score_mode);
    let scorer = |t: &Triple| state.score(t, &energy);

    let model = config.model.name();
    let setting = ckpt.config.setting.to_string();
    let score_mode = config.train.score_mode.to_string();
    let mut provenance = config.echo();
    provenance.push(("checkpoint.epoch".into(), ckpt.epoch.to_string()));
    provenance.push(("checkpoint.vocab_hash".into(), ckpt.vocab_hash.clone()));
    provenance.extend(dataset_provenance(&graph));

    let report = match task {
        EvalTask::Concept | EvalTask::Relation => {
            let t = if task == EvalTask::Concept {
                Task::Concept
            } else {
                Task::Relation
            };
            let eval = eval_link_prediction(graph.test(), &graph, &scorer, t)?;
            link_prediction_report(model, &setting, &score_mode, &eval, &provenance)
        }
        EvalTask::Classify => {
            let valid = gen_classification_negatives(graph.valid(), &graph, config.seed)?;
            let classifier = fit_thresholds(&valid, &scorer)?;
            let test = gen_classification_negatives(graph.test(), &graph, config.seed.wrapping_add(1))?;
            let result = eval_classification(&test, &classifier, &scorer)?;
            classification_report(model, &setting, &score_mode, &graph, &classifier, &result, &provenance)
        }
    };
    let dir = config.reports_dir();
    create_dir(&dir)?;
    let files = report.write(&dir, &format!("{}.{}", config.run_name(), task.name()))?;
    print!("{}", report.display);
    info!("report written to {}", files[0].display());
    Ok(EvalOutput { report, files })
}

#[derive(Debug, Clone)]
pub struct RetrofitOutput {
    pub file: PathBuf,
    pub objective: Vec<f64>,
}

/// Retrofits the prepared TXT vectors to the training graph with
/// degree-normalized weights.
pub fn cmd_retrofit(config: &ExperimentConfig) -> Result<RetrofitOutput> {
    let graph = load_splits(config)?;
    let input = config.resource_path(SemanticClass::Txt);
    if !input.is_file() {
        return Err(Error::Config(format!(
            "{} is missing; run `prepare` with a model that uses TXT vectors",
            input.display()
        )));
    }
    let table = load_vector_file(&input)?;
    let rgraph = RetrofitGraph::from_triples(&table, &graph, graph.train(), RetrofitWeights::DegreeNormalized)?;
    let out = retrofit(&table, &rgraph, config.retrofit_iterations)?;
    let file = config.resources_dir().join("TXT.retrofit.vec");
    out.table.save(&file)?;
    for (i, value) in out.objective.iter().enumerate() {
        println!("sweep {i}\tobjective {value:.6}");
    }
    println!("retrofitted {} vectors to {}", out.table.len(), file.display());
    Ok(RetrofitOutput {
        file,
        objective: out.objective,
    })
}
