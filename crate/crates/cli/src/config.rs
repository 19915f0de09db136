//! Experiment configuration: a flat TOML document plus command-line overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use semkge::energy::{NormOrder, ScoreMode};
use semkge::graph::SplitRatios;
use semkge::resources::{AlignMethod, SemanticClass};
use semkge::train::{Architecture, CorruptionWeights, Setting, TrainConfig};
use semkge::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TransE,
    TransR,
    TransETxt,
    TransEAff,
    TransECk,
    TransEAll,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::TransE,
        ModelKind::TransR,
        ModelKind::TransETxt,
        ModelKind::TransEAff,
        ModelKind::TransECk,
        ModelKind::TransEAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE => "TransE",
            ModelKind::TransR => "TransR",
            ModelKind::TransETxt => "TransE+TXT",
            ModelKind::TransEAff => "TransE+AFF",
            ModelKind::TransECk => "TransE+CK",
            ModelKind::TransEAll => "TransE+ALL",
        }
    }

    /// File-name friendly form, e.g. `transe_txt`.
    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase().replace('+', "_")
    }

    pub fn active(self) -> Vec<SemanticClass> {
        match self {
            ModelKind::TransE | ModelKind::TransR => Vec::new(),
            ModelKind::TransETxt => vec![SemanticClass::Txt],
            ModelKind::TransEAff => vec![SemanticClass::Aff],
            ModelKind::TransECk => vec![SemanticClass::Ck],
            ModelKind::TransEAll => SemanticClass::ALL.to_vec(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase().replace('_', "+");
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == wanted)
            .ok_or_else(|| {
                let names: Vec<_> = ModelKind::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown model {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Values given on the command line; each replaces its config key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub model: Option<String>,
    pub setting: Option<String>,
    pub norm: Option<String>,
    pub score_mode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    model: String,
    setting: String,
    seed: u64,
    split_seed: Option<u64>,

    triples: Option<PathBuf>,
    stem: String,
    output_dir: PathBuf,
    txt_vectors: Option<PathBuf>,
    aff_vectors: Option<PathBuf>,
    instance_lists: Option<PathBuf>,
    instance_vectors: Option<PathBuf>,

    train_ratio: f64,
    valid_ratio: f64,
    test_ratio: f64,
    restrict_to_covered: bool,
    align_method: String,
    retrofit_iterations: usize,

    learning_rate: f64,
    margin: f64,
    dim: usize,
    batch_size: usize,
    epochs: usize,
    norm: String,
    score_mode: String,
    corrupt_head: f64,
    corrupt_tail: f64,
    corrupt_relation: f64,
    patience: usize,
    valid_sample: usize,
    transr_dim: Option<usize>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let t = TrainConfig::default();
        let r = SplitRatios::DEFAULT;
        ConfigFile {
            model: "TransE".into(),
            setting: t.setting.to_string(),
            seed: 0,
            split_seed: None,
            triples: None,
            stem: "triples".into(),
            output_dir: "out".into(),
            txt_vectors: None,
            aff_vectors: None,
            instance_lists: None,
            instance_vectors: None,
            train_ratio: r.train,
            valid_ratio: r.valid,
            test_ratio: r.test,
            restrict_to_covered: false,
            align_method: "random_projection".into(),
            retrofit_iterations: 10,
            learning_rate: t.learning_rate,
            margin: t.margin,
            dim: t.dim,
            batch_size: t.batch_size,
            epochs: t.epochs,
            norm: t.norm.to_string(),
            score_mode: t.score_mode.to_string(),
            corrupt_head: t.corruption.head,
            corrupt_tail: t.corruption.tail,
            corrupt_relation: t.corruption.relation,
            patience: t.patience,
            valid_sample: t.valid_sample,
            transr_dim: None,
        }
    }
}

/// A validated experiment. Paths are absolute or relative to the working
/// directory; relative paths in the file are resolved against its directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub split_seed: u64,
    pub triples: Option<PathBuf>,
    pub stem: String,
    pub output_dir: PathBuf,
    pub txt_vectors: Option<PathBuf>,
    pub aff_vectors: Option<PathBuf>,
    pub instance_lists: Option<PathBuf>,
    pub instance_vectors: Option<PathBuf>,
    pub ratios: SplitRatios,
    pub restrict_to_covered: bool,
    pub align_method: AlignMethod,
    pub retrofit_iterations: usize,
    pub train: TrainConfig,
}

fn parse<T: FromStr<Err = Error>>(value: &str) -> Result<T> {
    value.parse()
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base, overrides)
    }

    pub fn from_toml(text: &str, base: &Path, overrides: &Overrides) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Self::from_file(file, base, overrides)
    }

    fn from_file(mut f: ConfigFile, base: &Path, o: &Overrides) -> Result<Self> {
        if let Some(seed) = o.seed {
            f.seed = seed;
        }
        for (slot, value) in [
            (&mut f.model, &o.model),
            (&mut f.setting, &o.setting),
            (&mut f.norm, &o.norm),
            (&mut f.score_mode, &o.score_mode),
        ] {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_absolute() { p } else { base.join(p) });

        let model: ModelKind = parse(&f.model)?;
        let setting: Setting = parse(&f.setting)?;
        let architecture = match model {
            ModelKind::TransR => Architecture::TransR {
                relation_dim: f.transr_dim.unwrap_or(f.dim),
            },
            _ => Architecture::TransE,
        };
        let train = TrainConfig {
            learning_rate: f.learning_rate,
            margin: f.margin,
            dim: f.dim,
            batch_size: f.batch_size,
            epochs: f.epochs,
            setting,
            corruption: CorruptionWeights::new(f.corrupt_head, f.corrupt_tail, f.corrupt_relation)?,
            seed: f.seed,
            norm: parse::<NormOrder>(&f.norm)?,
            active: model.active(),
            score_mode: parse::<ScoreMode>(&f.score_mode)?,
            architecture,
            patience: f.patience,
            valid_sample: f.valid_sample,
        };
        train.validate()?;
        if f.stem.is_empty() || f.stem.contains(['/', '\\']) {
            return Err(Error::Config(format!("stem must be a plain file name, got {:?}", f.stem)));
        }

        let config = ExperimentConfig {
            model,
            seed: f.seed,
            split_seed: f.split_seed.unwrap_or(f.seed),
            triples: resolve(f.triples),
            stem: f.stem,
            output_dir: resolve(Some(f.output_dir)).unwrap_or_default(),
            instance_vectors: resolve(f.instance_vectors.or_else(|| f.txt_vectors.clone())),
            txt_vectors: resolve(f.txt_vectors),
            aff_vectors: resolve(f.aff_vectors),
            instance_lists: resolve(f.instance_lists),
            ratios: SplitRatios::new(f.train_ratio, f.valid_ratio, f.test_ratio)?,
            restrict_to_covered: f.restrict_to_covered,
            align_method: parse(&f.align_method)?,
            retrofit_iterations: f.retrofit_iterations,
            train,
        };
        Ok(config)
    }

    /// Raw input files needed to build `class`, by config key.
    pub fn sources(&self, class: SemanticClass) -> Vec<(&'static str, Option<&Path>)> {
        match class {
            SemanticClass::Txt => vec![("txt_vectors", self.txt_vectors.as_deref())],
            SemanticClass::Aff => vec![("aff_vectors", self.aff_vectors.as_deref())],
            SemanticClass::Ck => vec![
                ("instance_lists", self.instance_lists.as_deref()),
                ("instance_vectors", self.instance_vectors.as_deref()),
            ],
        }
    }

    /// Checks that every raw resource file of the selected model is configured
    /// and present.
    pub fn require_sources(&self) -> Result<()> {
        for class in self.model.active() {
            for (key, path) in self.sources(class) {
                match path {
                    None => {
                        return Err(Error::Config(format!(
                            "model {} needs {class} vectors but {key} is not set",
                            self.model
                        )))
                    }
                    Some(p) if !p.is_file() => {
                        return Err(Error::Config(format!(
                            "model {} needs {class} vectors but {key} = {} does not exist",
                            self.model,
                            p.display()
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    pub fn splits_dir(&self) -> PathBuf {
        self.output_dir.join("splits")
    }

    pub fn resources_dir(&self) -> PathBuf {
        self.output_dir.join("resources")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.output_dir.join("checkpoints")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.output_dir.join("reports")
    }

    pub fn resource_path(&self, class: SemanticClass) -> PathBuf {
        self.resources_dir().join(format!("{class}.vec"))
    }

    /// Stem shared by the checkpoint, log and reports of one run.
    pub fn run_name(&self) -> String {
        format!("{}-{}", self.model.slug(), self.train.setting)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoints_dir().join(format!("{}.json", self.run_name()))
    }

    /// Flat `key=value` echo of the settings that shape results.
    pub fn echo(&self) -> Vec<(String, String)> {
        let t = &self.train;
        let mut out = vec![
            ("config.model", self.model.to_string()),
            ("config.setting", t.setting.to_string()),
            ("config.seed", self.seed.to_string()),
            ("config.split_seed", self.split_seed.to_string()),
            ("config.learning_rate", t.learning_rate.to_string()),
            ("config.margin", t.margin.to_string()),
            ("config.dim", t.dim.to_string()),
            ("config.batch_size", t.batch_size.to_string()),
            ("config.epochs", t.epochs.to_string()),
            ("config.norm", t.norm.to_string()),
            ("config.score_mode", t.score_mode.to_string()),
            (
                "config.corruption",
                format!("{},{},{}", t.corruption.head, t.corruption.tail, t.corruption.relation),
            ),
            ("config.patience", t.patience.to_string()),
            ("config.valid_sample", t.valid_sample.to_string()),
        ];
        if let Architecture::TransR { relation_dim } = t.architecture {
            out.push(("config.transr_dim", relation_dim.to_string()));
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
