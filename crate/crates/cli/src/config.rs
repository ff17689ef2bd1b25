//! TOML configuration shared by all subcommands. Flags override these values.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use singsub::annotator::AnnotatorConfig;
use singsub::embed::{Embedder, HashingEmbedder, HttpEmbedder, HttpEmbedderConfig};
use singsub::metrics::DEFAULT_SIGMA;
use singsub::singcot::ValidationConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub paths: Paths,
    pub annotator: AnnotatorConfig,
    pub validation: ValidationConfig,
    pub retrieval: Retrieval,
    pub singcot: SingCot,
    pub metrics: Metrics,
    pub embedder: EmbedderSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub frames: Option<PathBuf>,
    pub neutral: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub lines: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub llm_config: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub beats: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Retrieval {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
}

impl Default for Retrieval {
    fn default() -> Self {
        Self { alpha: 0.7, beta: 0.3, k: 3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingCot {
    pub max_rounds: usize,
    pub refine: bool,
    pub rerun_emotion: bool,
}

impl Default for SingCot {
    fn default() -> Self {
        Self { max_rounds: 3, refine: true, rerun_emotion: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Metrics {
    pub sigma: f64,
}

impl Default for Metrics {
    fn default() -> Self {
        Self { sigma: DEFAULT_SIGMA }
    }
}

/// `provider = "hash"` (offline, default) or `"http"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedderSection {
    pub provider: String,
    pub dim: usize,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EmbedderSection {
    fn default() -> Self {
        Self { provider: "hash".into(), dim: 256, endpoint: None, model: None, api_key_env: None, timeout_secs: 30 }
    }
}

impl EmbedderSection {
    pub fn build(&self) -> Result<Box<dyn Embedder>> {
        match self.provider.as_str() {
            "hash" => Ok(Box::new(HashingEmbedder::new(self.dim))),
            "http" => {
                let cfg = HttpEmbedderConfig {
                    endpoint: self.endpoint.clone().context("embedder.endpoint is required for the http provider")?,
                    model: self.model.clone().context("embedder.model is required for the http provider")?,
                    dim: self.dim,
                    api_key_env: self.api_key_env.clone(),
                    timeout_secs: self.timeout_secs,
                };
                Ok(Box::new(HttpEmbedder::new(cfg)?))
            }
            other => bail!("unknown embedder provider '{other}'"),
        }
    }
}

impl Config {
    /// Reads `path`; relative paths inside are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config = toml::from_str(&text).map_err(|e| anyhow::anyhow!("config {}: {}", path.display(), e.message()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.frames,
            &mut p.neutral,
            &mut p.vocab,
            &mut p.regions,
            &mut p.lines,
            &mut p.thresholds,
            &mut p.corpus,
            &mut p.index,
            &mut p.llm_config,
            &mut p.templates,
            &mut p.beats,
        ] {
            if let Some(rel) = slot.as_mut().filter(|p| p.is_relative()) {
                *rel = base.join(&*rel);
            }
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// Range checks on every numeric field.
    pub fn check(&self) -> Result<()> {
        let a = &self.annotator;
        if !(a.tau > 0.0 && a.tau < 1.0) {
            bail!("annotator.tau must lie in (0, 1), got {}", a.tau);
        }
        if !(0.0 <= a.eye_close_mm && a.eye_close_mm <= a.eye_squint_max_mm && a.eye_squint_max_mm <= a.eye_widen_mm) {
            bail!("annotator eye thresholds must satisfy 0 <= close <= squint_max <= widen");
        }
        for (name, v) in [("neck_min_deg", a.neck_min_deg), ("min_duration_s", a.min_duration_s), ("sway_window_s", a.sway_window_s)] {
            if !(v.is_finite() && v >= 0.0) {
                bail!("annotator.{name} must be a non-negative number, got {v}");
            }
        }
        let v = &self.validation;
        for (name, x) in [
            ("pass_threshold", v.pass_threshold),
            ("format_pass_threshold", v.format_pass_threshold),
            ("diversity_floor", v.diversity_floor),
        ] {
            if !(0.0..=1.0).contains(&x) {
                bail!("validation.{name} must lie in [0, 1], got {x}");
            }
        }
        if v.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || v.weights.iter().sum::<f64>() <= 0.0 {
            bail!("validation.weights must be non-negative with a positive sum");
        }
        if !(v.min_duration_s.is_finite() && v.min_duration_s >= 0.0) {
            bail!("validation.min_duration_s must be non-negative");
        }
        let r = &self.retrieval;
        if !(r.alpha >= 0.0 && r.beta >= 0.0 && r.alpha + r.beta > 0.0) {
            bail!("retrieval.alpha and retrieval.beta must be non-negative and not both zero");
        }
        if r.k == 0 {
            bail!("retrieval.k must be at least 1");
        }
        if self.singcot.max_rounds == 0 {
            bail!("singcot.max_rounds must be at least 1");
        }
        if !(self.metrics.sigma.is_finite() && self.metrics.sigma > 0.0) {
            bail!("metrics.sigma must be positive, got {}", self.metrics.sigma);
        }
        if self.embedder.dim == 0 {
            bail!("embedder.dim must be positive");
        }
        Ok(())
    }
}
