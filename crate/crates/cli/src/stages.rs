//! Pipeline stages. Each reads the previous stage's artifact from the
//! output directory and writes its own.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, ErrorKind};
use std::path::{Path, PathBuf};
use std::time::Instant;

use fishbone_core::classifier::{
    evaluate, grid_search, read_annotations, read_model, stratified_split, train_ovr_linear_svm, write_annotations,
    write_model, Dataset, EvalReport, GridSearchResult, IssueLabel, LabeledSentence, Split, SvmModel, TrainOptions,
};
use fishbone_core::corpus::{extract_introduction, filter_by_topic, read_corpus, write_corpus, TopicFilter};
use fishbone_core::embedding::{CachedEmbedder, EmbeddingProvider, HashingEmbedder, HASHING_PROVIDER_ID};
use fishbone_core::fishbone::{assemble, cluster_plan, validate, ClassifiedPaper, ClusterPlan, SentenceRef};
use fishbone_core::render::{self, RenderFormat};
use fishbone_core::segment::{apply_overrides, segment_paper, SegmentationOverride, SegmentedPaper};
use fishbone_core::summarizer::Summarizer;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::fsutil::{sha256_hex, write_atomic};
use crate::manifest::{ProviderCalls, RunManifest, StageRecord, StageStatus};

pub const PAPERS: &str = "papers.jsonl";
pub const SENTENCES: &str = "sentences.jsonl";
pub const MODEL: &str = "model.bin";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const EVAL_REPORT: &str = "eval_report.json";
pub const CLASSIFIED: &str = "classified.json";
pub const PREDICTIONS: &str = "predictions.tsv";
pub const CLUSTER_PLAN: &str = "cluster_plan.json";
pub const DIAGRAM: &str = "diagram.json";
pub const RENDER_STEM: &str = "fishbone";

/// Configuration plus the providers shared by all stages of one run.
pub struct Context {
    pub cfg: PipelineConfig,
    pub config_hash: String,
    pub embedder: Box<dyn EmbeddingProvider>,
    pub summarizer: Summarizer,
}

impl Context {
    pub fn new(cfg: PipelineConfig) -> Result<Self, CliError> {
        let config_hash = cfg.config_hash()?;
        let base = cfg.embedding.build()?;
        let embedder: Box<dyn EmbeddingProvider> = match &cfg.cache_dir {
            Some(dir) => Box::new(CachedEmbedder::new(base, dir.join("embeddings"))?),
            None => base,
        };
        let summaries = cfg.cache_dir.as_ref().map(|d| d.join("summaries"));
        let summarizer = Summarizer::from_config(&cfg.summarizer, summaries.as_deref())?;
        Ok(Self {
            cfg,
            config_hash,
            embedder,
            summarizer,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn calls(&self) -> ProviderCalls {
        ProviderCalls {
            embedding: self.embedder.stats(),
            summarizer: self.summarizer.stats(),
        }
    }

    fn provider_warning_count(&self) -> usize {
        self.embedder.warnings().len() + self.summarizer.warnings().len()
    }

    fn provider_warnings_from(&self, n: usize) -> Vec<String> {
        let mut all = self.embedder.warnings();
        all.extend(self.summarizer.warnings());
        all.split_off(n.min(all.len()))
    }

    /// Model for `classify`: the configured one, else the one `train` wrote.
    pub fn model_path(&self) -> PathBuf {
        self.cfg
            .classifier
            .model
            .clone()
            .unwrap_or_else(|| self.out_dir().join(MODEL))
    }
}

/// Warnings and written artifacts of one stage.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub warnings: Vec<String>,
    pub outputs: BTreeMap<String, String>,
}

impl StageOutput {
    fn warn(&mut self, w: String) {
        log::warn!("{w}");
        self.warnings.push(w);
    }

    /// Writes an artifact and records its digest under `key`.
    fn emit(&mut self, path: &Path, key: String, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes)?;
        self.outputs.insert(key, sha256_hex(bytes));
        Ok(())
    }

    fn emit_in(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.emit(&dir.join(name), name.to_string(), bytes)
    }
}

/// Runs one stage and records it in the manifest, whether it succeeds or not.
pub fn run_stage(
    ctx: &Context,
    manifest: &mut RunManifest,
    name: &str,
    stage: impl FnOnce(&Context) -> Result<StageOutput, CliError>,
) -> Result<(), CliError> {
    log::info!("stage {name}");
    let calls0 = ctx.calls();
    let warnings0 = ctx.provider_warning_count();
    let t0 = Instant::now();
    let result = stage(ctx);
    let millis = t0.elapsed().as_millis() as u64;
    let provider_calls = ctx.calls().since(&calls0);
    let provider_warnings = ctx.provider_warnings_from(warnings0);
    let (status, error, mut out, result) = match result {
        Ok(o) => (StageStatus::Ok, None, o, Ok(())),
        Err(e) => (StageStatus::Failed, Some(e.to_string()), StageOutput::default(), Err(e)),
    };
    out.warnings.extend(provider_warnings);
    manifest.record(StageRecord {
        name: name.to_string(),
        status,
        millis,
        error,
        warnings: out.warnings,
        provider_calls,
        outputs: out.outputs,
    });
    result
}

fn read_artifact(dir: &Path, name: &str, producer: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::missing_artifact(&path, producer),
        _ => CliError::io(&path, e),
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

fn as_strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn embed_all(e: &dyn EmbeddingProvider, texts: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(e.embed_batch(texts)?.iter().map(|v| v.to_scalars::<f64>()).collect())
}

pub fn ingest(ctx: &Context) -> Result<StageOutput, CliError> {
    let mut out = StageOutput::default();
    let loaded = read_corpus(&ctx.cfg.corpus)?;
    loaded.warnings.into_iter().for_each(|w| out.warn(w));
    let filter = TopicFilter::new(ctx.cfg.topic.clone())?.case_sensitive(ctx.cfg.case_sensitive);
    let total = loaded.records.len();
    let kept: Vec<_> = filter_by_topic(loaded.records, &filter).collect();
    if kept.is_empty() {
        return Err(CliError::Data(format!(
            "none of the {total} papers in {} mention {:?}",
            ctx.cfg.corpus.display(),
            ctx.cfg.topic
        )));
    }
    log::info!("{} of {total} papers match {:?}", kept.len(), ctx.cfg.topic);
    let mut bytes = Vec::new();
    write_corpus(&mut bytes, &kept).map_err(|e| CliError::Data(e.to_string()))?;
    out.emit_in(ctx.out_dir(), PAPERS, &bytes)?;
    Ok(out)
}

pub fn read_sentences(dir: &Path) -> Result<Vec<SegmentedPaper>, CliError> {
    let text = read_artifact(dir, SENTENCES, "segment")?;
    let path = dir.join(SENTENCES);
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_json(l, &path))
        .collect()
}

pub fn segment(ctx: &Context) -> Result<StageOutput, CliError> {
    let mut out = StageOutput::default();
    let dir = ctx.out_dir();
    let papers_path = dir.join(PAPERS);
    if !papers_path.is_file() {
        return Err(CliError::missing_artifact(&papers_path, "ingest"));
    }
    let loaded = read_corpus(&papers_path)?;
    loaded.warnings.into_iter().for_each(|w| out.warn(w));

    let mut papers = Vec::new();
    for r in &loaded.records {
        match extract_introduction(r) {
            Some(text) => papers.push(segment_paper(&r.paper_id, text)),
            None => out.warn(format!("paper {:?} has no introduction section; skipped", r.paper_id)),
        }
    }
    if let Some(path) = &ctx.cfg.segmentation_overrides {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let overrides: Vec<SegmentationOverride> = parse_json(&text, path)?;
        let (updated, warnings) = apply_overrides(papers, &overrides)?;
        papers = updated;
        out.warnings.extend(warnings);
    }
    papers.retain(|p| {
        let keep = !p.sentences.is_empty();
        if !keep {
            log::warn!("paper {:?} has an empty introduction; skipped", p.paper_id);
        }
        keep
    });
    let mut bytes = Vec::new();
    for p in &papers {
        bytes.extend(serde_json::to_string(p).expect("paper serializes").bytes());
        bytes.push(b'\n');
    }
    out.emit_in(dir, SENTENCES, &bytes)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub items: usize,
    /// Class order of the per-class arrays and the confusion matrix rows
    /// (gold) and columns (predicted).
    pub labels: Vec<IssueLabel>,
    pub report: EvalReport<f64>,
}

impl LabeledReport {
    pub fn new(pred: &[IssueLabel], gold: &[IssueLabel]) -> Result<Self, CliError> {
        Ok(Self {
            items: gold.len(),
            labels: IssueLabel::ALL.to_vec(),
            report: evaluate(pred, gold)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub provider_id: String,
    pub dimension: usize,
    /// Per-class item counts, in label order.
    pub train_counts: [usize; 3],
    pub test_counts: [usize; 3],
    pub grid: GridSearchResult,
    pub train: LabeledReport,
    pub test: Option<LabeledReport>,
}

fn load_dataset(ctx: &Context, path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let items = read_annotations(BufReader::new(file))?;
    if items.is_empty() {
        return Err(CliError::Data(format!("{} has no annotated sentences", path.display())));
    }
    let tagged = items.iter().any(|i| i.split == Split::Test);
    Ok(match ctx.cfg.classifier.test_fraction {
        Some(f) if !tagged => stratified_split(items, f, ctx.cfg.seed)?,
        _ => Dataset { items },
    })
}

pub fn train(ctx: &Context) -> Result<StageOutput, CliError> {
    let mut out = StageOutput::default();
    let cls = &ctx.cfg.classifier;
    let path = cls
        .annotations
        .as_ref()
        .ok_or_else(|| CliError::Config("`train` needs classifier.annotations".into()))?;
    let data = load_dataset(ctx, path)?;
    let train_items: Vec<&LabeledSentence> = data.split(Split::Train).collect();
    let test_items: Vec<&LabeledSentence> = data.split(Split::Test).collect();
    let texts = |items: &[&LabeledSentence]| -> Vec<String> { items.iter().map(|i| i.sentence.text.clone()).collect() };
    let (train_texts, test_texts) = (texts(&train_items), texts(&test_items));
    let xs = embed_all(ctx.embedder.as_ref(), &as_strs(&train_texts))?;
    let ys: Vec<IssueLabel> = train_items.iter().map(|i| i.label).collect();

    let base = TrainOptions {
        class_weighting: cls.class_weighting,
        ..TrainOptions::new(1.0).seed(ctx.cfg.seed)
    };
    let grid = grid_search(&xs, &ys, &cls.grid, cls.folds, &base)?;
    log::info!("grid search picked C = {}", grid.best_c);
    let opts = TrainOptions { c: grid.best_c, ..base };
    let (model, _) = train_ovr_linear_svm(&xs, &ys, &opts, ctx.embedder.provider_id())?;

    let train_report = LabeledReport::new(&model.predict_labels(&xs)?, &ys)?;
    let test = if test_items.is_empty() {
        None
    } else {
        let xt = embed_all(ctx.embedder.as_ref(), &as_strs(&test_texts))?;
        let yt: Vec<IssueLabel> = test_items.iter().map(|i| i.label).collect();
        Some(LabeledReport::new(&model.predict_labels(&xt)?, &yt)?)
    };
    if train_report.report.accuracy < 1.0 {
        out.warn(format!(
            "classifier reproduces {:.1}% of its training labels",
            100.0 * train_report.report.accuracy
        ));
    }
    let report = TrainReport {
        provider_id: model.provider_id().to_string(),
        dimension: model.dimension(),
        train_counts: data.class_counts(Split::Train),
        test_counts: data.class_counts(Split::Test),
        grid,
        train: train_report,
        test,
    };
    let mut bytes = Vec::new();
    write_model(&mut bytes, &model)?;
    out.emit_in(ctx.out_dir(), MODEL, &bytes)?;
    out.emit_in(ctx.out_dir(), TRAIN_REPORT, &pretty(&report))?;
    Ok(out)
}

pub fn load_model(path: &Path) -> Result<SvmModel<f64>, CliError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::missing_artifact(path, "train"),
        _ => CliError::io(path, e),
    })?;
    Ok(read_model(BufReader::new(file))?)
}

fn check_model(model: &SvmModel<f64>, embedder: &dyn EmbeddingProvider) -> Result<(), CliError> {
    if model.provider_id() != embedder.provider_id() || model.dimension() != embedder.dimension() {
        return Err(CliError::Config(format!(
            "model expects {} vectors of dimension {}, but the embedder is {} with dimension {}; retrain with `fishbone train`",
            model.provider_id(),
            model.dimension(),
            embedder.provider_id(),
            embedder.dimension()
        )));
    }
    Ok(())
}

/// Embedder matching a model without a config; only offline models qualify.
pub fn embedder_for_model(model: &SvmModel<f64>) -> Result<HashingEmbedder, CliError> {
    if model.provider_id() != HASHING_PROVIDER_ID {
        return Err(CliError::Usage(format!(
            "model uses embedding provider {}; pass --config so it can be reached",
            model.provider_id()
        )));
    }
    Ok(HashingEmbedder::new(model.dimension())?)
}

pub fn read_gold(path: &Path) -> Result<Vec<LabeledSentence>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let items = read_annotations(BufReader::new(file))?;
    if items.is_empty() {
        return Err(CliError::Data(format!("{} has no annotated sentences", path.display())));
    }
    Ok(items)
}

/// Scores predicted labels against gold labels, matched by paper and index.
pub fn eval_predictions(pred: &[LabeledSentence], gold: &[LabeledSentence]) -> Result<LabeledReport, CliError> {
    let by_key: BTreeMap<(&str, usize), IssueLabel> = pred
        .iter()
        .map(|p| ((p.sentence.paper_id.as_str(), p.sentence.index), p.label))
        .collect();
    let mut p = Vec::with_capacity(gold.len());
    for g in gold {
        let key = (g.sentence.paper_id.as_str(), g.sentence.index);
        match by_key.get(&key) {
            Some(l) => p.push(*l),
            None => {
                return Err(CliError::Data(format!(
                    "no prediction for sentence {} of paper {:?}",
                    g.sentence.index, g.sentence.paper_id
                )))
            }
        }
    }
    let y: Vec<IssueLabel> = gold.iter().map(|g| g.label).collect();
    LabeledReport::new(&p, &y)
}

pub fn eval_model(
    model: &SvmModel<f64>,
    embedder: &dyn EmbeddingProvider,
    gold: &[LabeledSentence],
) -> Result<LabeledReport, CliError> {
    check_model(model, embedder)?;
    let texts: Vec<&str> = gold.iter().map(|g| g.sentence.text.as_str()).collect();
    let pred = model.predict_labels(&embed_all(embedder, &texts)?)?;
    let y: Vec<IssueLabel> = gold.iter().map(|g| g.label).collect();
    LabeledReport::new(&pred, &y)
}

pub fn classify(ctx: &Context) -> Result<StageOutput, CliError> {
    let mut out = StageOutput::default();
    let dir = ctx.out_dir();
    let papers = read_sentences(dir)?;
    let model = load_model(&ctx.model_path())?;
    check_model(&model, ctx.embedder.as_ref())?;

    let texts: Vec<&str> = papers
        .iter()
        .flat_map(|p| p.sentences.iter().map(|s| s.text.as_str()))
        .collect();
    let labels = model.predict_labels(&embed_all(ctx.embedder.as_ref(), &texts)?)?;
    let mut labels = labels.into_iter();
    let mut classified = Vec::with_capacity(papers.len());
    let mut predictions = Vec::with_capacity(texts.len());
    for p in &papers {
        let sentences: Vec<SentenceRef> = p
            .sentences
            .iter()
            .map(|s| SentenceRef {
                paper_id: s.paper_id.clone(),
                index: s.index,
                label: labels.next().expect("one label per sentence"),
                text: s.text.clone(),
            })
            .collect();
        predictions.extend(p.sentences.iter().zip(&sentences).map(|(s, r)| LabeledSentence {
            sentence: s.clone(),
            label: r.label,
            split: Split::Train,
        }));
        classified.push(ClassifiedPaper {
            paper_id: p.paper_id.clone(),
            sentences,
        });
    }
    if !predictions.iter().any(|p| p.label != IssueLabel::Others) {
        out.warn("no sentence was classified as an issue".into());
    }
    let mut tsv = Vec::new();
    write_annotations(&mut tsv, &predictions, false)?;
    out.emit_in(dir, CLASSIFIED, &pretty(&classified))?;
    out.emit_in(dir, PREDICTIONS, &tsv)?;
    Ok(out)
}

pub fn cluster(ctx: &Context) -> Result<StageOutput, CliError> {
    let mut out = StageOutput::default();
    let dir = ctx.out_dir();
    let text = read_artifact(dir, CLASSIFIED, "classify")?;
    let papers: Vec<ClassifiedPaper> = parse_json(&text, &dir.join(CLASSIFIED))?;
    let plan = cluster_plan(&papers, ctx.embedder.as_ref(), &ctx.cfg.build_config())?;
    out.warnings.extend(plan.warnings.iter().cloned());
    out.emit_in(dir, CLUSTER_PLAN, &pretty(&plan))?;
    Ok(out)
}

pub fn build(ctx: &Context) -> Result<StageOutput, CliError> {
    let mut out = StageOutput::default();
    let dir = ctx.out_dir();
    let text = read_artifact(dir, CLUSTER_PLAN, "cluster")?;
    let plan: ClusterPlan = parse_json(&text, &dir.join(CLUSTER_PLAN))?;
    if plan.config != ctx.cfg.build_config() || plan.embedding_provider != ctx.embedder.provider_id() {
        return Err(CliError::Usage(format!(
            "{} was made with different clustering settings; rerun `fishbone cluster`",
            dir.join(CLUSTER_PLAN).display()
        )));
    }
    let mut d = assemble(&ctx.cfg.topic, &plan, &ctx.summarizer, ctx.embedder.as_ref())?;
    d.provenance.config_hash = ctx.config_hash.clone();
    let violations = validate(&d);
    if !violations.is_empty() {
        let list: Vec<String> = violations
            .iter()
            .map(|v| format!("{}: {}", v.element, v.message))
            .collect();
        return Err(CliError::Data(format!(
            "built diagram is inconsistent: {}",
            list.join("; ")
        )));
    }
    out.emit_in(dir, DIAGRAM, render::to_json(&d).as_bytes())?;
    Ok(out)
}

/// Where `render` writes and which formats.
#[derive(Debug, Clone, Default)]
pub struct RenderTarget {
    pub diagram: Option<PathBuf>,
    pub format: Option<RenderFormat>,
    pub out: Option<PathBuf>,
}

pub fn render_stage(ctx: &Context, target: &RenderTarget) -> Result<StageOutput, CliError> {
    let mut out = StageOutput::default();
    let dir = ctx.out_dir();
    let (text, src) = match &target.diagram {
        Some(p) => (fs::read_to_string(p).map_err(|e| CliError::io(p, e))?, p.clone()),
        None => (read_artifact(dir, DIAGRAM, "build")?, dir.join(DIAGRAM)),
    };
    let d = render::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", src.display())))?;
    let formats = match target.format {
        Some(f) => vec![f],
        None => ctx.cfg.render.formats.clone(),
    };
    for f in formats {
        let body = render::render(&d, f, &ctx.cfg.render.options)?;
        match &target.out {
            Some(p) => {
                let key = p
                    .strip_prefix(dir)
                    .map(|r| r.display().to_string())
                    .unwrap_or_else(|_| p.display().to_string());
                out.emit(p, key, body.as_bytes())?;
            }
            None => out.emit_in(dir, &format!("{RENDER_STEM}.{}", f.extension()), body.as_bytes())?,
        }
    }
    Ok(out)
}

pub fn render(ctx: &Context) -> Result<StageOutput, CliError> {
    render_stage(ctx, &RenderTarget::default())
}

type StageFn = fn(&Context) -> Result<StageOutput, CliError>;

/// The full chain in one locked run. Trains first unless a model is
/// configured. The manifest is written even when a stage fails.
pub fn pipeline(ctx: &Context) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new(ctx.config_hash.clone());
    let mut steps: Vec<(&str, StageFn)> = vec![("ingest", ingest), ("segment", segment)];
    if ctx.cfg.classifier.model.is_none() {
        steps.push(("train", train));
    }
    steps.extend([
        ("classify", classify as fn(&Context) -> _),
        ("cluster", cluster),
        ("build", build),
        ("render", render),
    ]);
    let mut result = Ok(());
    for (name, f) in steps {
        result = run_stage(ctx, &mut manifest, name, f);
        if result.is_err() {
            break;
        }
    }
    manifest.write(ctx.out_dir())?;
    result.map(|_| manifest)
}
