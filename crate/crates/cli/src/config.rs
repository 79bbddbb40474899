//! Pipeline configuration read from one TOML document.
//!
//! Relative paths resolve against the directory holding the config file.
//! Tokens for remote providers are never stored here; the provider sections
//! only name the environment variable that holds them.

use std::fs;
use std::path::{Path, PathBuf};

use fishbone_core::classifier::{ClassWeighting, DEFAULT_FOLDS, DEFAULT_GRID};
use fishbone_core::embedding::EmbeddingProviderConfig;
use fishbone_core::fishbone::{BuildConfig, TaskK};
use fishbone_core::render::{RenderFormat, RenderOptions};
use fishbone_core::summarizer::SummarizerProviderConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;
use crate::fsutil::sha256_hex;

fn default_prelude_k() -> usize {
    2
}
fn default_fine_bone_n() -> usize {
    1
}
fn default_grid() -> Vec<f64> {
    DEFAULT_GRID.to_vec()
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_weighting() -> ClassWeighting {
    ClassWeighting::None
}
fn default_formats() -> Vec<RenderFormat> {
    RenderFormat::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    /// Labeled sentences for `train`; rows tagged `test` are held out.
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    /// Pre-trained model. When set, `classify` uses it and `train` is skipped.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Hold out this fraction per class when the annotations carry no split.
    #[serde(default)]
    pub test_fraction: Option<f64>,
    #[serde(default = "default_weighting")]
    pub class_weighting: ClassWeighting,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            annotations: None,
            model: None,
            grid: default_grid(),
            folds: default_folds(),
            test_fraction: None,
            class_weighting: default_weighting(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSection {
    #[serde(default = "default_formats")]
    pub formats: Vec<RenderFormat>,
    #[serde(flatten)]
    pub options: RenderOptions,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            formats: default_formats(),
            options: RenderOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds every randomized step. Required; there is no clock-based default.
    pub seed: u64,
    pub topic: String,
    #[serde(default)]
    pub case_sensitive: bool,
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// JSON list of `{paper_id, sentences}` replacing automatic segmentation.
    #[serde(default)]
    pub segmentation_overrides: Option<PathBuf>,
    #[serde(default = "default_prelude_k")]
    pub prelude_k: usize,
    pub task_k: TaskK,
    #[serde(default = "default_fine_bone_n")]
    pub fine_bone_n: usize,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub embedding: EmbeddingProviderConfig,
    #[serde(default)]
    pub summarizer: SummarizerProviderConfig,
    #[serde(default)]
    pub render: RenderSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parses, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output_dir);
        self.cache_dir.iter_mut().for_each(fix);
        self.segmentation_overrides.iter_mut().for_each(fix);
        self.classifier.annotations.iter_mut().for_each(fix);
        self.classifier.model.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.topic.trim().is_empty() {
            return bad("topic must not be empty".into());
        }
        let must_exist = [
            Some(("corpus", &self.corpus)),
            self.segmentation_overrides
                .as_ref()
                .map(|p| ("segmentation_overrides", p)),
            self.classifier
                .annotations
                .as_ref()
                .map(|p| ("classifier.annotations", p)),
            self.classifier.model.as_ref().map(|p| ("classifier.model", p)),
        ];
        for (name, p) in must_exist.into_iter().flatten() {
            if !p.is_file() {
                return bad(format!("{name} {} does not exist", p.display()));
            }
        }
        if self.classifier.annotations.is_none() && self.classifier.model.is_none() {
            return bad("classifier needs either `annotations` or `model`".into());
        }
        if self.prelude_k == 0 {
            return bad("prelude_k must be at least 1".into());
        }
        if self.fine_bone_n == 0 {
            return bad("fine_bone_n must be at least 1".into());
        }
        match self.task_k {
            TaskK::Fixed(0) => return bad("task_k must be at least 1".into()),
            TaskK::Range { min, max } if min < 2 || max < min => {
                return bad(format!("task_k range {min}..={max} needs 2 <= min <= max"))
            }
            _ => {}
        }
        let c = &self.classifier;
        if c.grid.is_empty() || c.grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("classifier.grid must be a non-empty list of positive values".into());
        }
        if c.folds < 2 {
            return bad(format!("classifier.folds must be at least 2, got {}", c.folds));
        }
        if let Some(f) = c.test_fraction {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!(
                    "classifier.test_fraction {f} must lie strictly between 0 and 1"
                ));
            }
        }
        if self.render.formats.is_empty() {
            return bad("render.formats must name at least one format".into());
        }
        self.embedding.validate()?;
        self.summarizer.validate()?;
        self.render.options.validate()?;
        Ok(())
    }

    pub fn build_config(&self) -> BuildConfig {
        BuildConfig {
            prelude_k: self.prelude_k,
            ..BuildConfig::new(self.task_k, self.fine_bone_n, self.seed)
        }
    }

    /// SHA-256 over every setting that affects results. Output and cache
    /// locations are left out and input files count by content, not path.
    pub fn config_hash(&self) -> Result<String, CliError> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        obj.remove("output_dir");
        obj.remove("cache_dir");
        let digest = |p: &Path| -> Result<Value, CliError> {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            Ok(Value::String(sha256_hex(&bytes)))
        };
        obj.insert("corpus".into(), digest(&self.corpus)?);
        if let Some(p) = &self.segmentation_overrides {
            obj.insert("segmentation_overrides".into(), digest(p)?);
        }
        let cls = obj["classifier"].as_object_mut().expect("classifier is an object");
        if let Some(p) = &self.classifier.annotations {
            cls.insert("annotations".into(), digest(p)?);
        }
        if let Some(p) = &self.classifier.model {
            cls.insert("model".into(), digest(p)?);
        }
        // serde_json maps are sorted, so this text is canonical.
        Ok(sha256_hex(v.to_string().as_bytes()))
    }
}
