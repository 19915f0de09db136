use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semkge::checkpoint::Checkpoint;
use semkge::energy::EmbeddingSpace;
use semkge::graph::load_triples;
use semkge::matrix::Matrix;
use semkge::resources::{align_dimension, load_vector_file, AlignMethod, SemanticClass, SemanticResourceSet, VectorTable};
use semkge::synthetic::{planted_graph, PlantedConfig};
use semkge::train::{init_embeddings, TrainConfig};
use semkge_cli::config::{ExperimentConfig, Overrides};

fn semkge(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semkge"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(config: &Path, args: &[&str]) -> String {
    let out = semkge(config, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(config: &Path, args: &[&str]) -> i32 {
    semkge(config, args).status.code().expect("exit code")
}

/// Deterministic pseudo-random vector for a key.
fn key_vector(key: &str, dim: usize, salt: u64) -> Vec<f64> {
    let mut x = key.bytes().fold(salt ^ 0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    (0..dim)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x % 2000) as f64 / 1000.0 - 1.0
        })
        .collect()
}

fn write_vectors(path: &Path, keys: &[String], dim: usize, salt: u64) {
    let mut text = format!("{} {dim}\n", keys.len());
    for k in keys {
        let v: Vec<String> = key_vector(k, dim, salt).iter().map(f64::to_string).collect();
        text.push_str(&format!("{k} {}\n", v.join(" ")));
    }
    fs::write(path, text).unwrap();
}

/// Writes a small planted dataset with TXT, AFF and instance resources and a
/// config selecting `model`. Returns the config path.
fn toy_experiment(dir: &Path, model: &str, extra: &str) -> PathBuf {
    let planted = planted_graph(&PlantedConfig {
        concepts: 30,
        relations: 3,
        triples: 180,
        latent_dim: 4,
        seed: 11,
        ..PlantedConfig::default()
    })
    .unwrap();
    let g = &planted.graph;
    fs::write(dir.join("triples.tsv"), g.format_triples(&g.pool())).unwrap();

    let labels: Vec<String> = g.concepts().labels().to_vec();
    // words cover every concept; affect covers all but the last few
    write_vectors(&dir.join("words.vec"), &labels, 12, 1);
    write_vectors(&dir.join("affect.vec"), &labels[..labels.len() - 3], 8, 2);
    let lists: String = labels
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{c}\t{}|{}\n", labels[(i + 1) % labels.len()], labels[(i + 2) % labels.len()]))
        .collect();
    fs::write(dir.join("instances.tsv"), lists).unwrap();

    let config = format!(
        "model = \"{model}\"\nseed = 3\ntriples = \"triples.tsv\"\nstem = \"toy\"\noutput_dir = \"out\"\n\
         txt_vectors = \"words.vec\"\naff_vectors = \"affect.vec\"\ninstance_lists = \"instances.tsv\"\n\
         dim = 8\nepochs = 5\nbatch_size = 64\nvalid_sample = 20\npatience = 0\n{extra}"
    );
    let path = dir.join("experiment.toml");
    fs::write(&path, config).unwrap();
    path
}

fn read_kv(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn run_pipeline(config: &Path) {
    ok(config, &["split"]);
    ok(config, &["prepare"]);
    ok(config, &["train"]);
    for task in ["concept", "relation", "classify"] {
        ok(config, &["eval", "--task", task]);
    }
    ok(config, &["retrofit"]);
}

fn artifact_digests(root: &Path) -> BTreeMap<String, String> {
    use sha2::{Digest, Sha256};
    let mut out = BTreeMap::new();
    for sub in ["splits", "resources", "checkpoints", "reports"] {
        let mut entries: Vec<_> = fs::read_dir(root.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            let name = format!("{sub}/{}", p.file_name().unwrap().to_string_lossy());
            out.insert(name, hex::encode(Sha256::digest(fs::read(&p).unwrap())));
        }
    }
    out
}

#[test]
fn toy_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_experiment(dir.path(), "TransE+ALL", "");
    let out = dir.path().join("out");

    ok(&config, &["split"]);
    let manifest = fs::read_to_string(out.join("splits/toy.manifest.tsv")).unwrap();
    assert!(manifest.contains("# seed\t3"));
    let rows: Vec<Vec<usize>> = manifest
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("relation") && !l.starts_with("TOTAL"))
        .map(|l| l.split('\t').skip(1).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let total: usize = rows.iter().flatten().sum();
    assert_eq!(total, load_triples(dir.path().join("triples.tsv")).unwrap().len());

    let prepared = ok(&config, &["prepare"]);
    assert!(prepared.contains("TXT 30/30") && prepared.contains("AFF 27/30"), "{prepared}");
    for class in ["TXT", "AFF", "CK"] {
        assert!(out.join(format!("resources/{class}.vec")).is_file());
    }

    let trained = ok(&config, &["train"]);
    assert!(trained.contains("alpha=0.01 gamma=1 k=8 batch=64"), "{trained}");
    let log = fs::read_to_string(out.join("checkpoints/transe_all-fixed.log")).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch=")).count(), 5);

    // Fixed training leaves the prepared semantic vectors as they were
    let ckpt = Checkpoint::load(out.join("checkpoints/transe_all-fixed.json")).unwrap();
    let exp = ExperimentConfig::load(&config, &Overrides::default()).unwrap();
    let graph = semkge_cli::commands::load_splits(&exp).unwrap();
    for class in SemanticClass::ALL {
        let table = load_vector_file(out.join(format!("resources/{class}.vec"))).unwrap();
        let cv = ckpt.resources.class(class).unwrap();
        for (c, label) in graph.concepts().labels().iter().enumerate() {
            assert_eq!(table.get(label), cv.get(semkge::graph::ConceptId(c)));
        }
    }

    // CK for c0 is the hand mean of its instances' word vectors, then aligned
    // with the same seeded projection as the pipeline uses for CK
    let words = load_vector_file(dir.path().join("words.vec")).unwrap();
    let hand: Vec<f64> = (0..12)
        .map(|d| (words.get("c1").unwrap()[d] + words.get("c2").unwrap()[d]) / 2.0)
        .collect();
    let expected = align_dimension(
        &VectorTable::from_entries([("c0", hand)]).unwrap(),
        8,
        AlignMethod::RandomProjection,
        3 + 2,
    )
    .unwrap();
    let ck = load_vector_file(out.join("resources/CK.vec")).unwrap();
    let (got, want) = (ck.get("c0").unwrap(), expected.get("c0").unwrap());
    assert!(got.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-12), "{got:?} vs {want:?}");

    for task in ["concept", "relation"] {
        ok(&config, &["eval", "--task", task]);
        let kv = read_kv(&out.join(format!("reports/transe_all-fixed.{task}.txt")));
        assert_eq!(kv["task"], task);
        assert_eq!(kv["score_mode"], "total");
        assert_eq!(kv["dataset.vocab_hash"], graph.vocab_hash());
        let (raw, filt): (f64, f64) = (kv["mean_rank_raw"].parse().unwrap(), kv["mean_rank_filtered"].parse().unwrap());
        assert!(filt <= raw);
    }

    let shown = ok(&config, &["eval", "--task", "classify"]);
    assert!(shown.contains("Accuracy"));
    let kv = read_kv(&out.join("reports/transe_all-fixed.classify.txt"));
    for rel in graph.relations().labels() {
        assert!(kv.contains_key(&format!("delta.{rel}")), "{kv:?}");
    }
    let tsv = fs::read_to_string(out.join("reports/transe_all-fixed.classify.tsv")).unwrap();
    assert!(tsv.starts_with("relation\tdelta\t"));

    let retro = ok(&config, &["retrofit"]);
    assert!(retro.contains("sweep 0"));
    assert!(out.join("resources/TXT.retrofit.vec").is_file());
}

#[test]
fn classify_thresholds_match_module_level_fit() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_experiment(dir.path(), "TransE", "");
    ok(&config, &["split"]);
    ok(&config, &["train"]);
    ok(&config, &["eval", "--task", "classify"]);
    let kv = read_kv(&dir.path().join("out/reports/transe-fixed.classify.txt"));

    let exp = ExperimentConfig::load(&config, &Overrides::default()).unwrap();
    let graph = semkge_cli::commands::load_splits(&exp).unwrap();
    let state = Checkpoint::load(exp.checkpoint_path()).unwrap().to_state();
    let energy = exp.train.energy();
    let scorer = |t: &semkge::graph::Triple| state.score(t, &energy);
    let valid = semkge::eval::gen_classification_negatives(graph.valid(), &graph, exp.seed).unwrap();
    let model = semkge::eval::fit_thresholds(&valid, &scorer).unwrap();
    for (rel, th) in &model.thresholds {
        let label = graph.relations().label(rel.0);
        assert_eq!(kv[&format!("delta.{label}")], th.delta.to_string());
    }
}

#[test]
fn reruns_produce_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = toy_experiment(a.path(), "TransE+TXT", "setting = \"variable\"\n");
    let cb = toy_experiment(b.path(), "TransE+TXT", "setting = \"variable\"\n");
    run_pipeline(&ca);
    run_pipeline(&cb);
    let da = artifact_digests(&a.path().join("out"));
    assert!(da.keys().any(|k| k.ends_with("transe_txt-variable.json")));
    assert!(da.keys().any(|k| k.ends_with("classify.tsv")));
    assert_eq!(da, artifact_digests(&b.path().join("out")));

    // a rerun in place reproduces the same files
    ok(&ca, &["split"]);
    ok(&ca, &["eval", "--task", "concept"]);
    assert_eq!(da, artifact_digests(&a.path().join("out")));
}

#[test]
fn perfect_scorer_ranks_every_target_first() {
    let dir = tempfile::tempdir().unwrap();
    // one relation linking each concept to its successor along a line
    let chain: String = (0..20).map(|i| format!("n{i}\tnext\tn{}\n", i + 1)).collect();
    fs::write(dir.path().join("chain.tsv"), chain).unwrap();
    let config = dir.path().join("experiment.toml");
    fs::write(&config, "triples = \"chain.tsv\"\nstem = \"chain\"\ndim = 2\nepochs = 1\n").unwrap();
    ok(&config, &["split"]);

    let exp = ExperimentConfig::load(&config, &Overrides::default()).unwrap();
    let graph = semkge_cli::commands::load_splits(&exp).unwrap();
    let tc = TrainConfig { dim: 2, ..TrainConfig::default() };
    let mut state = init_embeddings(&graph, &tc, &SemanticResourceSet::new(2, graph.num_concepts())).unwrap();
    let mut concept = Matrix::zeros(graph.num_concepts(), 2);
    for (c, label) in graph.concepts().labels().iter().enumerate() {
        concept.row_mut(c)[0] = label[1..].parse::<f64>().unwrap();
    }
    state.space = EmbeddingSpace::new(concept, Matrix::from_vec(1, 2, vec![1.0, 0.0])).unwrap();
    fs::create_dir_all(exp.checkpoints_dir()).unwrap();
    Checkpoint::from_state(&state, &graph, &tc).save(exp.checkpoint_path()).unwrap();

    for task in ["concept", "relation"] {
        ok(&config, &["eval", "--task", task]);
        let kv = read_kv(&exp.reports_dir().join(format!("transe-fixed.{task}.txt")));
        for key in ["mean_rank_raw", "mean_rank_filtered"] {
            assert_eq!(kv[key], "1", "{task} {key}");
        }
        for key in ["hits10_raw", "hits10_filtered"] {
            assert_eq!(kv[key], "100", "{task} {key}");
        }
    }
}

#[test]
fn default_configuration_is_echoed_in_the_log_header() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_experiment(dir.path(), "TransE", "");
    // drop the toy overrides of dimension and batch size
    let text = fs::read_to_string(&config)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("dim") && !l.starts_with("batch_size") && !l.starts_with("epochs"))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&config, format!("{text}\nepochs = 1\n")).unwrap();
    ok(&config, &["split"]);
    let shown = ok(&config, &["train"]);
    assert!(shown.contains("alpha=0.01 gamma=1 k=100 batch=5000"), "{shown}");
    let log = fs::read_to_string(dir.path().join("out/checkpoints/transe-fixed.log")).unwrap();
    assert!(log.starts_with("# model=TransE setting=fixed alpha=0.01 gamma=1 k=100 batch=5000"));
}

#[test]
fn flags_override_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_experiment(dir.path(), "TransE+TXT", "");
    ok(&config, &["split"]);
    ok(&config, &["--model", "TransE", "--setting", "variable", "--norm", "l1", "train"]);
    let ckpt = Checkpoint::load(dir.path().join("out/checkpoints/transe-variable.json")).unwrap();
    assert!(ckpt.config.active.is_empty());
    assert_eq!(ckpt.config.norm, semkge::energy::NormOrder::L1);
    ok(&config, &["--model", "TransE", "--setting", "variable", "--score-mode", "knowledge", "eval", "--task", "concept"]);
    let kv = read_kv(&dir.path().join("out/reports/transe-variable.concept.txt"));
    assert_eq!(kv["score_mode"], "knowledge");
    assert_eq!(kv["config.norm"], "l2");
}

#[test]
fn errors_map_to_category_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_experiment(dir.path(), "TransE", "");

    let bad_ratios = dir.path().join("ratios.toml");
    fs::write(&bad_ratios, "triples = \"triples.tsv\"\ntrain_ratio = 0.5\nvalid_ratio = 0.5\ntest_ratio = 0.5\n").unwrap();
    assert_eq!(exit_code(&bad_ratios, &["split"]), 2);

    let no_aff = dir.path().join("no_aff.toml");
    fs::write(&no_aff, "model = \"TransE+AFF\"\ntriples = \"triples.tsv\"\n").unwrap();
    let out = semkge(&no_aff, &["prepare"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("aff_vectors"));

    assert_eq!(exit_code(&dir.path().join("absent.toml"), &["split"]), 3);
    let missing_triples = dir.path().join("missing.toml");
    fs::write(&missing_triples, "triples = \"nowhere.tsv\"\n").unwrap();
    assert_eq!(exit_code(&missing_triples, &["split"]), 3);

    let malformed = dir.path().join("malformed.toml");
    fs::write(dir.path().join("bad.tsv"), "a\tb\n").unwrap();
    fs::write(&malformed, "triples = \"bad.tsv\"\n").unwrap();
    assert_eq!(exit_code(&malformed, &["split"]), 4);

    assert_eq!(exit_code(&config, &["eval", "--task", "nothing"]), 2);
    assert_eq!(exit_code(&config, &["--norm", "l7", "split"]), 2);

    // a checkpoint trained on one vocabulary cannot score another
    ok(&config, &["split"]);
    ok(&config, &["train"]);
    fs::write(dir.path().join("other.tsv"), "x\tr\ty\ny\tr\tz\nz\tr\tx\nx\tr\tz\n").unwrap();
    let other = dir.path().join("other.toml");
    fs::write(&other, "triples = \"other.tsv\"\nstem = \"toy\"\noutput_dir = \"other_out\"\ndim = 8\n").unwrap();
    ok(&other, &["split"]);
    let ckpt = dir.path().join("out/checkpoints/transe-fixed.json");
    let out = semkge(&other, &["eval", "--task", "concept", "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(8));
    assert!(String::from_utf8_lossy(&out.stderr).contains("incompatible"));

    // an AFF table matching no concept is an empty-coverage error naming the class
    let nomatch = dir.path().join("nomatch.toml");
    fs::write(dir.path().join("foreign.vec"), "zzz 1 2 3\nyyy 4 5 6\n").unwrap();
    fs::write(
        &nomatch,
        "model = \"TransE+AFF\"\ntriples = \"triples.tsv\"\nstem = \"toy\"\naff_vectors = \"foreign.vec\"\ndim = 3\n",
    )
    .unwrap();
    ok(&nomatch, &["split"]);
    let out = semkge(&nomatch, &["prepare"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("AFF: 0"));
}
