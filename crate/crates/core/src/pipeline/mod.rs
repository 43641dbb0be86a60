//! Stage orchestration over on-disk artifacts.
//!
//! Each stage reads the artifacts of earlier stages, checks that they were
//! produced under the same configuration hash and writes its own outputs.
//! Stages are deterministic: rerunning one with unchanged inputs rewrites
//! byte-identical files.

pub mod artifact;
mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotation::{self, Annotation};
use crate::candidates::{generate_candidates, AcceptAll, CandidateSnippet, ExternalCommand, SnippetValidator, Structural};
use crate::classifier::{
    assemble_features, attach_labels, cross_validate, fit, transfer_apply, AssembleOptions, ClassifierModel,
    FeatureSet, Prediction, CORRESPONDENCE_FEATURES,
};
use crate::corr::{checkpoint, prepare_pairs, score_page, train, CorrRecord, Direction, EncDecModel, TrainReport};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_scores, curves_csv, label_candidates, rank, svg_chart, Baseline, EvalReport, SystemResult,
};
use crate::features::{extract_structural, StructuralRecord, STRUCTURAL_FEATURES};
use crate::ingest::{
    assemble_threads, build_corr_corpus, AcceptAllHowTo, AssemblyStats, CorpusPair, DumpReader, HowToFilter,
    IdListHowTo, KeywordHowTo, QuestionThread,
};
use crate::types::{CandidateKey, Label, Language};

use artifact::{check_hash, read_jsonl, read_text, text_header, text_header_hash, write_atomic, write_jsonl};
pub use config::{
    ClassifierConfig, EvaluateConfig, HowToConfig, HowToKind, MineConfig, PathsConfig, PipelineConfig, ResolvedPaths,
    Seeds, TransferConfig, ValidatorConfig, ValidatorKind,
};

pub const INGEST: &str = "ingest";
pub const CORPUS: &str = "corpus";
pub const CANDIDATES: &str = "candidates";
pub const TRAIN_CORR: &str = "train-corr";
pub const SCORE_CORR: &str = "score-corr";
pub const FEATURIZE: &str = "featurize";
pub const TRAIN: &str = "train";
pub const MINE: &str = "mine";
pub const EVALUATE: &str = "evaluate";
pub const TRANSFER: &str = "transfer";
/// Produces the annotation export consumed by `train`.
pub const ANNOTATE: &str = "serve-annotation";

/// One line of `gold.jsonl`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    #[serde(flatten)]
    pub key: CandidateKey,
    pub label: Label,
}

/// One line of `mined.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedPair {
    pub rank: usize,
    #[serde(flatten)]
    pub key: CandidateKey,
    pub probability: f64,
    pub intent: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub tool_version: String,
    pub config_hash: String,
    pub source_model: String,
    pub source_config_hash: Option<String>,
    pub features: Vec<String>,
    pub predictions: usize,
    /// Present when annotations for the target language exist.
    pub evaluation: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub paths: ResolvedPaths,
    pub hash: String,
    /// Accept artifacts produced under a different configuration hash.
    pub force: bool,
    pub jobs: usize,
}

fn json_err(context: &Path) -> impl FnOnce(serde_json::Error) -> Error + '_ {
    move |source| Error::Json {
        context: context.display().to_string(),
        source,
    }
}

impl Pipeline {
    /// Relative paths in `config` resolve against `base_dir`.
    pub fn new(config: PipelineConfig, base_dir: &Path) -> Self {
        let paths = ResolvedPaths::resolve(&config, base_dir);
        let hash = config.hash();
        let jobs = config.corr.jobs.max(1);
        Pipeline {
            config,
            paths,
            hash,
            force: false,
            jobs,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let config = PipelineConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(Pipeline::new(config, base))
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self.config.corr.jobs = self.jobs;
        self
    }

    pub fn language(&self) -> Language {
        Language::new(&self.config.language)
    }

    pub fn corr_model_path(&self, direction: Direction) -> PathBuf {
        self.paths.models_dir.join(format!("corr-{}.ckpt", direction.as_str()))
    }

    pub fn classifier_path(&self, set: FeatureSet) -> PathBuf {
        self.paths.models_dir.join(format!("classifier-{}.txt", set.as_str()))
    }

    pub fn predictions_path(&self, set: FeatureSet) -> PathBuf {
        self.paths.features_dir.join(format!("predictions-{}.jsonl", set.as_str()))
    }

    pub fn structural_path(&self) -> PathBuf {
        self.paths.features_dir.join("features-structural.jsonl")
    }

    pub fn corr_features_path(&self) -> PathBuf {
        self.paths.features_dir.join("features-corr.jsonl")
    }

    pub fn gold_path(&self) -> PathBuf {
        self.paths.features_dir.join("gold.jsonl")
    }

    pub fn mined_path(&self) -> PathBuf {
        self.paths.reports_dir.join("mined.jsonl")
    }

    pub fn report_path(&self) -> PathBuf {
        self.paths.reports_dir.join("report.json")
    }

    pub fn transfer_predictions_path(&self) -> PathBuf {
        self.paths.features_dir.join("transfer-predictions.jsonl")
    }

    pub fn transfer_report_path(&self) -> PathBuf {
        self.paths.reports_dir.join("transfer-report.json")
    }

    fn read<T: serde::de::DeserializeOwned>(&self, path: &Path, producer: &'static str) -> Result<Vec<T>> {
        read_jsonl(path, producer, &self.hash, self.force)
    }

    fn threads(&self) -> Result<Vec<QuestionThread>> {
        self.read(&self.paths.threads, INGEST)
    }

    fn candidates(&self) -> Result<Vec<CandidateSnippet>> {
        self.read(&self.paths.candidates, CANDIDATES)
    }

    /// Parses the dump into question threads.
    pub fn ingest(&self) -> Result<AssemblyStats> {
        let path = &self.paths.dump;
        let file = File::open(path).map_err(|source| Error::File {
            path: path.clone(),
            source,
        })?;
        let mut reader = DumpReader::new(BufReader::new(file));
        let mut failure = None;
        let posts = reader.by_ref().map_while(|r| match r {
            Ok(p) => Some(p),
            Err(e) => {
                failure = Some(e);
                None
            }
        });
        let (threads, stats) = assemble_threads(posts, &self.language());
        if let Some(e) = failure {
            return Err(e);
        }
        let dump = reader.stats();
        log::info!(
            "ingest: {} rows, {} skipped, {} threads, {} dropped without code",
            dump.rows,
            dump.skipped,
            stats.questions,
            stats.dropped_without_code
        );
        write_jsonl(&self.paths.threads, INGEST, &self.hash, &threads)?;
        Ok(stats)
    }

    /// Builds the heuristic title/code corpus for the correspondence model
    /// from how-to threads.
    pub fn corpus(&self) -> Result<usize> {
        let corpus = build_corr_corpus(&self.howto_threads()?);
        log::info!("corpus: {} pairs", corpus.len());
        write_jsonl(&self.paths.corpus, CORPUS, &self.hash, &corpus)?;
        Ok(corpus.len())
    }

    fn howto_filter(&self) -> Result<Box<dyn HowToFilter>> {
        Ok(match self.config.howto.kind {
            HowToKind::Keyword => Box::new(KeywordHowTo),
            HowToKind::All => Box::new(AcceptAllHowTo),
            HowToKind::IdList => {
                let path = self.paths.howto_ids.as_deref().expect("checked when the config was loaded");
                let text = std::fs::read_to_string(path).map_err(|source| Error::File {
                    path: path.to_path_buf(),
                    source,
                })?;
                Box::new(IdListHowTo::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?)
            }
        })
    }

    /// Ingested threads that pass the configured how-to filter.
    pub fn howto_threads(&self) -> Result<Vec<QuestionThread>> {
        let filter = self.howto_filter()?;
        Ok(self.threads()?.into_iter().filter(|t| filter.is_howto(t)).collect())
    }

    fn validator(&self) -> Box<dyn SnippetValidator> {
        let lang = self.language();
        match self.config.validator.kind {
            ValidatorKind::Structural => Box::new(Structural::new(&lang)),
            ValidatorKind::AcceptAll => Box::new(AcceptAll),
            ValidatorKind::Command => Box::new(ExternalCommand::new(
                self.config.validator.command.clone().expect("checked when the config was loaded"),
                &lang,
            )),
        }
    }

    /// Enumerates and validates candidate snippets of how-to threads.
    pub fn candidates_stage(&self) -> Result<usize> {
        let threads = self.threads()?;
        let (cands, stats) = generate_candidates(
            &threads,
            self.howto_filter()?.as_ref(),
            self.validator().as_ref(),
            self.config.validator.permissive,
        );
        log::info!(
            "candidates: {} enumerated, {} kept, {} invalid, {} undecided, {} questions filtered",
            stats.enumerated,
            cands.len(),
            stats.invalid,
            stats.unknown,
            stats.filtered_questions
        );
        write_jsonl(&self.paths.candidates, CANDIDATES, &self.hash, &cands)?;
        Ok(cands.len())
    }

    /// Trains one or both directional correspondence models.
    pub fn train_corr(&self, direction: Option<Direction>) -> Result<Vec<TrainReport>> {
        let corpus: Vec<CorpusPair> = self.read(&self.paths.corpus, CORPUS)?;
        let directions = match direction {
            Some(d) => vec![d],
            None => vec![Direction::IntentToSnippet, Direction::SnippetToIntent],
        };
        let mut reports = Vec::new();
        for d in directions {
            let pairs = prepare_pairs(&corpus, d, &self.config.corr);
            log::info!("train-corr {}: {} pairs", d.as_str(), pairs.len());
            let (model, report) = train(&pairs, d, &self.config.corr)?;
            log::info!(
                "train-corr {}: best epoch {}, validation log-likelihood {:.4} (initial {:.4})",
                d.as_str(),
                report.best_epoch,
                report.best_val_log_likelihood,
                report.initial_val_log_likelihood
            );
            let path = self.corr_model_path(d);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            checkpoint::save(&model, &self.hash, &path)?;
            let body = serde_json::json!({
                "tool_version": artifact::TOOL_VERSION,
                "config_hash": self.hash,
                "direction": d.as_str(),
                "report": report,
            });
            let json = serde_json::to_string_pretty(&body).map_err(json_err(&path))? + "\n";
            write_atomic(&path.with_extension("report.json"), json.as_bytes())?;
            reports.push(report);
        }
        Ok(reports)
    }

    fn load_corr(&self, direction: Direction) -> Result<EncDecModel> {
        let path = self.corr_model_path(direction);
        if !path.exists() {
            return Err(Error::MissingArtifact { path, producer: TRAIN_CORR });
        }
        let (model, manifest) = checkpoint::load(&path)?;
        check_hash(&path, &manifest.config_hash, &self.hash, self.force)?;
        if model.direction != direction {
            return Err(Error::Checkpoint(format!(
                "{} holds a {} model",
                path.display(),
                model.direction.as_str()
            )));
        }
        Ok(model)
    }

    /// Scores every candidate with both correspondence models.
    pub fn score_corr(&self) -> Result<usize> {
        let threads = self.threads()?;
        let cands = self.candidates()?;
        let i2s = self.load_corr(Direction::IntentToSnippet)?;
        let s2i = self.load_corr(Direction::SnippetToIntent)?;
        let titles: BTreeMap<u64, &str> = threads.iter().map(|t| (t.question_id, t.title.as_str())).collect();
        let mut pages: BTreeMap<u64, Vec<&CandidateSnippet>> = BTreeMap::new();
        for c in &cands {
            pages.entry(c.key.question_id).or_default().push(c);
        }
        let pages: Vec<(u64, Vec<&CandidateSnippet>)> = pages.into_iter().collect();
        for (q, _) in &pages {
            if !titles.contains_key(q) {
                return Err(Error::Invalid(format!("candidates reference question {q} missing from threads")));
            }
        }
        let chunk = pages.len().div_ceil(self.jobs).max(1);
        let parts: Vec<Result<Vec<CorrRecord>>> = std::thread::scope(|s| {
            let handles: Vec<_> = pages
                .chunks(chunk)
                .map(|part| {
                    let (i2s, s2i, titles) = (&i2s, &s2i, &titles);
                    s.spawn(move || {
                        let mut out = Vec::new();
                        for (q, page) in part {
                            let texts: Vec<&str> = page.iter().map(|c| c.normalized_text.as_str()).collect();
                            let scores = score_page(i2s, s2i, titles[q], &texts)?;
                            out.extend(page.iter().zip(scores).map(|(c, scores)| CorrRecord { key: c.key, scores }));
                        }
                        Ok(out)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("scoring worker panicked")).collect()
        });
        let mut records = Vec::with_capacity(cands.len());
        for p in parts {
            records.extend(p?);
        }
        log::info!("score-corr: {} candidates scored", records.len());
        write_jsonl(&self.corr_features_path(), SCORE_CORR, &self.hash, &records)?;
        Ok(records.len())
    }

    /// Computes structural features for every candidate.
    pub fn featurize(&self) -> Result<usize> {
        let threads = self.threads()?;
        let by_id: BTreeMap<u64, &QuestionThread> = threads.iter().map(|t| (t.question_id, t)).collect();
        let lang = self.language();
        let records = self
            .candidates()?
            .iter()
            .map(|c| {
                let thread = by_id.get(&c.key.question_id).ok_or_else(|| Error::ThreadMismatch {
                    key: c.key.to_string(),
                    question_id: c.key.question_id,
                })?;
                Ok(StructuralRecord {
                    key: c.key,
                    features: extract_structural(c, thread, &lang)?.named(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        log::info!("featurize: {} candidates", records.len());
        write_jsonl(&self.structural_path(), FEATURIZE, &self.hash, &records)?;
        Ok(records.len())
    }

    fn annotations(&self, threads: &[QuestionThread]) -> Result<Vec<Annotation>> {
        let text = read_text(&self.paths.annotations, ANNOTATE)?;
        let anns = annotation::parse_jsonl(&text)?;
        let by_id: BTreeMap<u64, &QuestionThread> = threads.iter().map(|t| (t.question_id, t)).collect();
        for a in &anns {
            let thread = by_id.get(&a.question_id).ok_or_else(|| {
                Error::Invalid(format!("annotation references question {} missing from threads", a.question_id))
            })?;
            if let Err(errors) = a.validate(thread) {
                let detail: Vec<String> = errors.iter().map(|e| format!("{}: {}", e.field, e.message)).collect();
                return Err(Error::Invalid(format!(
                    "annotation of question {} by {}: {}",
                    a.question_id,
                    a.annotator,
                    detail.join("; ")
                )));
            }
        }
        Ok(annotation::export_gold(&anns))
    }

    fn assemble(&self, feature_set: FeatureSet) -> Result<(Vec<String>, Vec<crate::classifier::PairFeatureVector>)> {
        let opts = AssembleOptions {
            feature_set,
            cross_lingual: self.config.classifier.cross_lingual,
        };
        self.assemble_with(&opts)
    }

    fn assemble_with(&self, opts: &AssembleOptions) -> Result<(Vec<String>, Vec<crate::classifier::PairFeatureVector>)> {
        let structural: Vec<StructuralRecord> = if opts.feature_set.uses_structural() {
            self.read(&self.structural_path(), FEATURIZE)?
        } else {
            Vec::new()
        };
        let corr: Vec<CorrRecord> = if opts.feature_set.uses_correspondence() {
            self.read(&self.corr_features_path(), SCORE_CORR)?
        } else {
            Vec::new()
        };
        assemble_features(&structural, &corr, opts)
    }

    fn gold_labels(&self, threads: &[QuestionThread], cands: &[CandidateSnippet]) -> Result<BTreeMap<CandidateKey, Label>> {
        let anns = self.annotations(threads)?;
        let keys: Vec<CandidateKey> = cands.iter().map(|c| c.key).collect();
        label_candidates(&keys, &anns, threads, self.config.evaluate.matcher)
    }

    /// Labels candidates from the annotations, cross-validates every
    /// configured feature set and fits final models on all labeled data.
    pub fn train(&self) -> Result<()> {
        let threads = self.threads()?;
        let cands = self.candidates()?;
        let labels = self.gold_labels(&threads, &cands)?;
        let positives = labels.values().filter(|l| l.is_positive()).count();
        log::info!("train: {} labeled candidates, {} positive", labels.len(), positives);
        let gold: Vec<GoldRecord> = labels.iter().map(|(k, l)| GoldRecord { key: *k, label: *l }).collect();
        write_jsonl(&self.gold_path(), TRAIN, &self.hash, &gold)?;
        let fit_cfg = self.config.fit_config();
        for &set in &self.config.classifier.feature_sets {
            let (names, vectors) = self.assemble(set)?;
            let labeled = attach_labels(vectors, &labels);
            let cv = cross_validate(&names, &labeled, self.config.classifier.folds, &fit_cfg, self.config.seeds.cv)?;
            write_jsonl(&self.predictions_path(set), TRAIN, &self.hash, &cv.predictions)?;
            let (model, report) = fit(&names, &labeled, &fit_cfg)?;
            log::info!(
                "train {}: {} features, {} Newton iterations, converged {}",
                set.as_str(),
                names.len(),
                report.iterations,
                report.converged
            );
            let text = format!("{}{}", text_header(TRAIN, &self.hash), model.to_manifest());
            write_atomic(&self.classifier_path(set), text.as_bytes())?;
        }
        Ok(())
    }

    fn load_classifier(&self, path: &Path, producer: &'static str, check: bool) -> Result<(ClassifierModel, Option<String>)> {
        let text = read_text(path, producer)?;
        let hash = text_header_hash(&text).map(str::to_string);
        if check {
            check_hash(path, hash.as_deref().unwrap_or(""), &self.hash, self.force)?;
        }
        Ok((ClassifierModel::from_manifest(&text)?, hash))
    }

    fn mining_set(&self) -> FeatureSet {
        let sets = &self.config.classifier.feature_sets;
        if sets.contains(&FeatureSet::Full) {
            FeatureSet::Full
        } else {
            *sets.first().unwrap_or(&FeatureSet::Full)
        }
    }

    /// Ranks every candidate with the final classifier and keeps those above
    /// the probability threshold, at most `top_k`.
    pub fn mine(&self) -> Result<Vec<MinedPair>> {
        let set = self.mining_set();
        let (model, _) = self.load_classifier(&self.classifier_path(set), TRAIN, true)?;
        let (names, vectors) = self.assemble(set)?;
        if names != model.features {
            return Err(Error::IncompatibleRegistry(format!(
                "{} was trained on different features",
                self.classifier_path(set).display()
            )));
        }
        let threads = self.threads()?;
        let titles: BTreeMap<u64, &str> = threads.iter().map(|t| (t.question_id, t.title.as_str())).collect();
        let cands = self.candidates()?;
        let text: BTreeMap<CandidateKey, &str> = cands.iter().map(|c| (c.key, c.text.as_str())).collect();
        let scored = rank(vectors.iter().map(|v| (v.key, model.predict_values(&v.values))).collect());
        let mc = &self.config.mine;
        let mined: Vec<MinedPair> = scored
            .into_iter()
            .filter(|(_, p)| *p >= mc.min_prob)
            .take(mc.top_k.unwrap_or(usize::MAX))
            .enumerate()
            .map(|(i, (key, probability))| MinedPair {
                rank: i + 1,
                key,
                probability,
                intent: titles.get(&key.question_id).copied().unwrap_or_default().to_string(),
                snippet: text.get(&key).copied().unwrap_or_default().to_string(),
            })
            .collect();
        log::info!("mine: {} pairs at probability >= {}", mined.len(), mc.min_prob);
        write_jsonl(&self.mined_path(), MINE, &self.hash, &mined)?;
        Ok(mined)
    }

    fn baseline_rankings(
        &self,
        cands: &[CandidateSnippet],
        gold: &BTreeMap<CandidateKey, Label>,
    ) -> Vec<(String, Vec<(CandidateKey, f64)>)> {
        let labeled: Vec<CandidateSnippet> = cands.iter().filter(|c| gold.contains_key(&c.key)).cloned().collect();
        [Baseline::AcceptOnly, Baseline::All, Baseline::Random]
            .into_iter()
            .map(|b| {
                (
                    b.as_str().to_string(),
                    rank(baseline_scores(&labeled, b, self.config.seeds.baseline)),
                )
            })
            .collect()
    }

    /// Compares every trained system and the baselines against gold labels.
    pub fn evaluate(&self) -> Result<EvalReport> {
        let gold: BTreeMap<CandidateKey, Label> = self
            .read::<GoldRecord>(&self.gold_path(), TRAIN)?
            .into_iter()
            .map(|g| (g.key, g.label))
            .collect();
        let mut rankings = Vec::new();
        for &set in &self.config.classifier.feature_sets {
            let preds: Vec<Prediction> = self.read(&self.predictions_path(set), TRAIN)?;
            rankings.push((set.as_str().to_string(), rank(preds.into_iter().map(|p| (p.key, p.probability)).collect())));
        }
        if self.config.evaluate.baselines {
            rankings.extend(self.baseline_rankings(&self.candidates()?, &gold));
        }
        let report = evaluate_rankings(&self.hash, &gold, &rankings)?;
        self.write_report(&report)?;
        for (name, r) in &report.systems {
            log::info!("evaluate {name}: AUC {:.4}", r.auc);
        }
        Ok(report)
    }

    fn write_report(&self, report: &EvalReport) -> Result<()> {
        let dir = &self.paths.reports_dir;
        let path = self.report_path();
        let json = serde_json::to_string_pretty(report).map_err(json_err(&path))? + "\n";
        write_atomic(&path, json.as_bytes())?;
        let csv = format!("{}{}", text_header(EVALUATE, &self.hash), curves_csv(report));
        write_atomic(&dir.join("curves.csv"), csv.as_bytes())?;
        let comment = format!(
            "<!-- tool_version {} config_hash {} -->\n",
            artifact::TOOL_VERSION,
            self.hash
        );
        let pr: Vec<(String, Vec<(f64, f64)>)> = report
            .systems
            .iter()
            .map(|(n, r)| (n.clone(), r.pr.iter().map(|p| (p.recall, p.precision)).collect()))
            .collect();
        let roc: Vec<(String, Vec<(f64, f64)>)> = report
            .systems
            .iter()
            .map(|(n, r)| (n.clone(), r.roc.iter().map(|p| (p.fpr, p.tpr)).collect()))
            .collect();
        let pr_svg = comment.clone() + &svg_chart("Precision / recall", "recall", "precision", &pr);
        let roc_svg = comment + &svg_chart("ROC", "false positive rate", "true positive rate", &roc);
        write_atomic(&dir.join("pr.svg"), pr_svg.as_bytes())?;
        write_atomic(&dir.join("roc.svg"), roc_svg.as_bytes())
    }

    /// Applies a classifier trained on another language to this
    /// configuration's candidates, with standardization recomputed here.
    pub fn transfer(&self, model_path: Option<&Path>) -> Result<TransferReport> {
        let path = model_path
            .map(Path::to_path_buf)
            .or_else(|| self.paths.transfer_model.clone())
            .ok_or_else(|| Error::Config("transfer needs a source model (--model or transfer.model)".into()))?;
        let (model, source_hash) = self.load_classifier(&path, TRAIN, false)?;
        let uses_s = model.features.iter().any(|f| STRUCTURAL_FEATURES.contains(&f.as_str()));
        let uses_c = model.features.iter().any(|f| CORRESPONDENCE_FEATURES.contains(&f.as_str()));
        let feature_set = match (uses_s, uses_c) {
            (true, false) => FeatureSet::StructuralOnly,
            (false, true) => FeatureSet::CorrespondenceOnly,
            _ => FeatureSet::Full,
        };
        let (names, vectors) = self.assemble_with(&AssembleOptions {
            feature_set,
            cross_lingual: false,
        })?;
        let preds = transfer_apply(&model, &names, &vectors)?;
        write_jsonl(&self.transfer_predictions_path(), TRANSFER, &self.hash, &preds)?;
        let evaluation = if self.paths.annotations.exists() {
            let threads = self.threads()?;
            let cands = self.candidates()?;
            let gold = self.gold_labels(&threads, &cands)?;
            let mut rankings = vec![(
                "transfer".to_string(),
                rank(preds.iter().filter(|p| gold.contains_key(&p.key)).map(|p| (p.key, p.probability)).collect()),
            )];
            rankings.extend(self.baseline_rankings(&cands, &gold));
            let report = evaluate_rankings(&self.hash, &gold, &rankings)?;
            for (name, r) in &report.systems {
                log::info!("transfer {name}: AUC {:.4}", r.auc);
            }
            Some(report)
        } else {
            log::info!("transfer: no annotations at {}; skipping evaluation", self.paths.annotations.display());
            None
        };
        let report = TransferReport {
            tool_version: artifact::TOOL_VERSION.to_string(),
            config_hash: self.hash.clone(),
            source_model: path.display().to_string(),
            source_config_hash: source_hash,
            features: model.features.clone(),
            predictions: preds.len(),
            evaluation,
        };
        let out = self.transfer_report_path();
        let json = serde_json::to_string_pretty(&report).map_err(json_err(&out))? + "\n";
        write_atomic(&out, json.as_bytes())?;
        Ok(report)
    }

    /// Every stage from ingest through evaluate.
    pub fn run_all(&self) -> Result<EvalReport> {
        self.ingest()?;
        self.corpus()?;
        self.candidates_stage()?;
        if self.config.classifier.feature_sets.iter().any(|s| s.uses_correspondence()) {
            self.train_corr(None)?;
            self.score_corr()?;
        }
        self.featurize()?;
        self.train()?;
        self.mine()?;
        self.evaluate()
    }
}

/// Computes every system's curves in parallel.
fn evaluate_rankings(
    hash: &str,
    gold: &BTreeMap<CandidateKey, Label>,
    rankings: &[(String, Vec<(CandidateKey, f64)>)],
) -> Result<EvalReport> {
    let evaluated: BTreeSet<CandidateKey> = rankings
        .first()
        .map(|(_, r)| r.iter().map(|(k, _)| *k).collect())
        .unwrap_or_default();
    for (name, r) in rankings {
        let keys: BTreeSet<CandidateKey> = r.iter().map(|(k, _)| *k).collect();
        if keys != evaluated {
            log::warn!("system {name} ranks a different candidate set than {}", rankings[0].0);
        }
    }
    let results: Vec<Result<SystemResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = rankings
            .iter()
            .map(|(_, r)| s.spawn(move || SystemResult::compute(r, gold)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut report = EvalReport::new(hash, gold);
    for ((name, _), r) in rankings.iter().zip(results) {
        report.systems.insert(name.clone(), r?);
    }
    Ok(report)
}
