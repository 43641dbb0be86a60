use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{FeatureSet, FitConfig};
use crate::corr::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::Matcher;

/// Pipeline configuration, read from TOML. Relative paths are resolved
/// against the directory holding the config file.
///
/// ```toml
/// language = "python"
///
/// [paths]
/// dump = "Posts.xml"
/// annotations = "annotations.jsonl"
/// work_dir = "work"
///
/// [corr]
/// embed_dim = 256
/// hidden_dim = 512
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub language: String,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub howto: HowToConfig,
    #[serde(default)]
    pub validator: ValidatorConfig,
    #[serde(default)]
    pub corr: TrainConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub mine: MineConfig,
    #[serde(default)]
    pub transfer: TransferConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dump: PathBuf,
    /// Annotation JSON-lines, as exported by the annotation service.
    pub annotations: PathBuf,
    /// Default parent of every artifact below.
    pub work_dir: PathBuf,
    pub threads: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    /// Directory for feature, label and prediction files.
    pub features: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            dump: "Posts.xml".into(),
            annotations: "annotations.jsonl".into(),
            work_dir: "work".into(),
            threads: None,
            corpus: None,
            candidates: None,
            features: None,
            models: None,
            reports: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub cv: u64,
    pub classifier: u64,
    pub baseline: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            cv: 1,
            classifier: 1,
            baseline: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HowToKind {
    Keyword,
    All,
    /// Question ids listed one per line in `ids_path`.
    IdList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HowToConfig {
    pub kind: HowToKind,
    pub ids_path: Option<PathBuf>,
}

impl Default for HowToConfig {
    fn default() -> Self {
        HowToConfig {
            kind: HowToKind::Keyword,
            ids_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidatorKind {
    Structural,
    AcceptAll,
    /// External command; `{file}` in the template is replaced by a temp file path.
    Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidatorConfig {
    pub kind: ValidatorKind,
    pub command: Option<String>,
    /// Keep candidates the validator cannot decide on.
    pub permissive: bool,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        ValidatorConfig {
            kind: ValidatorKind::Structural,
            command: None,
            permissive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub lambda: f64,
    pub class_weighting: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub folds: usize,
    /// Drop language-specific features so the model can be transferred.
    pub cross_lingual: bool,
    /// Systems trained and evaluated; `full` is the one used by `mine`.
    pub feature_sets: Vec<FeatureSet>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        ClassifierConfig {
            lambda: fit.lambda,
            class_weighting: fit.class_weighting,
            max_iter: fit.max_iter,
            tol: fit.tol,
            folds: 5,
            cross_lingual: false,
            feature_sets: vec![FeatureSet::Full, FeatureSet::StructuralOnly, FeatureSet::CorrespondenceOnly],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub matcher: Matcher,
    pub baselines: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            matcher: Matcher::Exact,
            baselines: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineConfig {
    pub top_k: Option<usize>,
    pub min_prob: f64,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            top_k: None,
            min_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    /// Classifier trained on the source language.
    pub model: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(language: &str) -> Self {
        PipelineConfig {
            language: language.to_string(),
            paths: PathsConfig::default(),
            seeds: Seeds::default(),
            howto: HowToConfig::default(),
            validator: ValidatorConfig::default(),
            corr: TrainConfig::default(),
            classifier: ClassifierConfig::default(),
            evaluate: EvaluateConfig::default(),
            mine: MineConfig::default(),
            transfer: TransferConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.language.trim().is_empty() {
            return bad("language must not be empty".into());
        }
        if self.classifier.folds < 2 {
            return bad(format!("classifier.folds must be at least 2, got {}", self.classifier.folds));
        }
        if !(0.0..=1.0).contains(&self.mine.min_prob) {
            return bad(format!("mine.min_prob must be within [0, 1], got {}", self.mine.min_prob));
        }
        if self.validator.kind == ValidatorKind::Command && self.validator.command.is_none() {
            return bad("validator.kind = \"command\" needs validator.command".into());
        }
        if self.howto.kind == HowToKind::IdList && self.howto.ids_path.is_none() {
            return bad("howto.kind = \"id-list\" needs howto.ids_path".into());
        }
        if self.corr.embed_dim == 0 || self.corr.hidden_dim == 0 || self.corr.batch_size == 0 {
            return bad("corr dimensions and batch size must be positive".into());
        }
        for p in [self.corr.dropout, self.corr.recurrent_dropout] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("dropout rates must be within [0, 1), got {p}"));
            }
        }
        Ok(())
    }

    /// Truncated hex SHA-256 of the configuration. The worker count, the
    /// mining thresholds and the transfer source are left out, since none of
    /// them changes an artifact another stage reads.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.corr.jobs = 0;
        c.mine = MineConfig::default();
        c.transfer = TransferConfig::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect::<String>()[..16].to_string()
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            lambda: self.classifier.lambda,
            class_weighting: self.classifier.class_weighting,
            max_iter: self.classifier.max_iter,
            tol: self.classifier.tol,
            seed: self.seeds.classifier,
        }
    }

    /// Sets every seed to `seed`.
    pub fn set_seed(&mut self, seed: u64) {
        self.corr.seed = seed;
        self.seeds = Seeds {
            cv: seed,
            classifier: seed,
            baseline: seed,
        };
    }
}

/// Every file location, resolved before any stage runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedPaths {
    pub dump: PathBuf,
    pub annotations: PathBuf,
    pub howto_ids: Option<PathBuf>,
    pub threads: PathBuf,
    pub corpus: PathBuf,
    pub candidates: PathBuf,
    pub features_dir: PathBuf,
    pub models_dir: PathBuf,
    pub reports_dir: PathBuf,
    pub transfer_model: Option<PathBuf>,
}

impl ResolvedPaths {
    pub fn resolve(cfg: &PipelineConfig, base: &Path) -> Self {
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let p = &cfg.paths;
        let work = abs(&p.work_dir);
        let or_work = |o: &Option<PathBuf>, default: &str| o.as_deref().map(abs).unwrap_or_else(|| work.join(default));
        ResolvedPaths {
            dump: abs(&p.dump),
            annotations: abs(&p.annotations),
            howto_ids: cfg.howto.ids_path.as_deref().map(abs),
            threads: or_work(&p.threads, "threads.jsonl"),
            corpus: or_work(&p.corpus, "corpus.jsonl"),
            candidates: or_work(&p.candidates, "candidates.jsonl"),
            features_dir: or_work(&p.features, "features"),
            models_dir: or_work(&p.models, "models"),
            reports_dir: or_work(&p.reports, "reports"),
            transfer_model: cfg.transfer.model.as_deref().map(abs),
        }
    }
}
