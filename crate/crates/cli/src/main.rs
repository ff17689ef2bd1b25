//! `singsub`: motion subtitle annotation, retrieval, generation and evaluation.
//!
//! Exit codes: 0 on success, 1 on a domain error (one line on stderr),
//! 2 on a usage error.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use singsub::acoustic::{describe_lines, load_lines, LevelThresholds, LineFeatures, Provenance};
use singsub::agra::{build_index, corpus_from_annotations, load_corpus, retrieve, CorpusEntry, Query, RetrievalWeights, SubtitleIndex};
use singsub::annotator::annotate_clip;
use singsub::genmath::{self, CheckRow, ModulationWeights, TimelineFeatures};
use singsub::intensity::{default_selection, intensity_series};
use singsub::llm::LlmConfig;
use singsub::metrics::evaluate;
use singsub::model::{load_frames, FrameFormat, FrameSequence, LyricLine, NeutralFace};
use singsub::singcot::{run_pipeline, validate, Draft, PipelineConfig, PromptTemplates, SessionState};
use singsub::srt::{emit_subtitles, parse_subtitles, SubtitleDocument};
use singsub::vocab::{RegionConfig, Vocabulary};

use config::Config;

#[derive(Parser, Debug)]
#[command(name = "singsub", version, about = "Motion subtitles for singing 3D heads")]
struct Cli {
    /// TOML configuration; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Annotate frame sequences with motion subtitles
    Annotate(AnnotateArgs),
    /// Normalized per-landmark motion intensity
    Intensity(IntensityArgs),
    /// Per-line acoustic levels
    #[command(subcommand)]
    Acoustics(AcousticsCommand),
    /// Reference corpus and retrieval
    #[command(subcommand)]
    Agra(AgraCommand),
    /// LLM subtitle generation loop
    #[command(subcommand)]
    Singcot(SingcotCommand),
    /// Compare generated motion against ground truth
    Evaluate(EvaluateArgs),
    /// Generator kernel checks
    #[command(subcommand)]
    Genmath(GenmathCommand),
    /// Check a subtitle file for plausibility, format and diversity
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    /// Frame files (.jsonl or .csv); several files need --out to be a directory
    #[arg(long, num_args = 1..)]
    frames: Vec<PathBuf>,
    /// Neutral face JSON
    #[arg(long)]
    neutral: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    regions: Option<PathBuf>,
    /// AU change threshold for brow and mouth intervals
    #[arg(long)]
    tau: Option<f64>,
    /// Output subtitle file (single input) or directory (several inputs); stdout if absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for several inputs
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// JSON summary of the produced documents
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IntensityArgs {
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long)]
    neutral: Option<PathBuf>,
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Comma-separated landmark ids (default: eyebrows, eyes and mouth)
    #[arg(long, value_delimiter = ',')]
    landmarks: Vec<usize>,
    /// CSV output; stdout if absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum AcousticsCommand {
    /// Fit interquartile thresholds on a lyric features file
    FitThresholds {
        #[arg(long)]
        lines: Option<PathBuf>,
        /// Mark the thresholds as fitted on a single singer
        #[arg(long)]
        per_singer: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Volume, pitch and rate levels for every line
    Describe {
        #[arg(long)]
        lines: Option<PathBuf>,
        /// Fixed thresholds; without them every singer is fitted separately
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// jsonl output; stdout if absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum AgraCommand {
    /// Pair lyric lines with the subtitles of an annotated clip
    Corpus {
        #[arg(long)]
        lines: Option<PathBuf>,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Subtitle file of the same clip
        #[arg(long)]
        subs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed a corpus into a searchable index
    Build {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Dimension of the hashing embedder
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Top-k references for every lyric line
    Query {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        lines: Option<PathBuf>,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum SingcotCommand {
    /// Generate subtitles for one clip
    Run(SingcotRunArgs),
}

#[derive(Args, Debug)]
struct SingcotRunArgs {
    /// Lyric features (jsonl)
    #[arg(long)]
    lines: Option<PathBuf>,
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    /// LLM client TOML
    #[arg(long)]
    llm_config: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Directory overriding the bundled prompt templates
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    pass_threshold: Option<f64>,
    #[arg(long)]
    diversity_floor: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Song duration in seconds (default: end of the last lyric line)
    #[arg(long)]
    duration: Option<f64>,
    /// Skip the phrasing and format refinement prompt
    #[arg(long)]
    no_refine: bool,
    #[arg(long)]
    clip_id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// jsonl record of every stage
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Generated frames
    #[arg(long)]
    gen: PathBuf,
    /// Ground-truth frames
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Music beat times in seconds (whitespace/comma separated or a JSON array)
    #[arg(long)]
    beats: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum GenmathCommand {
    /// Run the kernel invariants on seeded random instances
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check a weight file
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Subtitle file
    file: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Song duration in seconds
    #[arg(long)]
    duration: f64,
    #[arg(long)]
    pass_threshold: Option<f64>,
    #[arg(long)]
    diversity_floor: Option<f64>,
    /// Exit 1 when the file does not pass
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load_opt(cli.config.as_deref())?;
    match cli.command {
        Command::Annotate(a) => annotate(a, cfg),
        Command::Intensity(a) => intensity(a, cfg),
        Command::Acoustics(c) => acoustics(c, cfg),
        Command::Agra(c) => agra(c, cfg),
        Command::Singcot(SingcotCommand::Run(a)) => singcot_run(a, cfg),
        Command::Evaluate(a) => evaluate_cmd(a, cfg),
        Command::Genmath(GenmathCommand::Check { seed, weights, report }) => genmath_check(seed, weights, report),
        Command::Validate(a) => validate_cmd(a, cfg),
    }
}

fn require(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone()).with_context(|| format!("--{name} is required (or set paths.{} in the config)", name.replace('-', "_")))
}

fn load_vocab(path: Option<&Path>) -> Result<Vocabulary> {
    Ok(match path {
        Some(p) => Vocabulary::load(p).with_context(|| format!("vocabulary {}", p.display()))?,
        None => Vocabulary::builtin(),
    })
}

fn load_regions(path: Option<&Path>) -> Result<RegionConfig> {
    Ok(match path {
        Some(p) => RegionConfig::load(p).with_context(|| format!("regions {}", p.display()))?,
        None => RegionConfig::default(),
    })
}

fn read_frames(path: &Path) -> Result<FrameSequence> {
    load_frames(path, FrameFormat::from_path(path)).with_context(|| format!("frames {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn annotate(a: AnnotateArgs, mut cfg: Config) -> Result<()> {
    if let Some(tau) = a.tau {
        cfg.annotator.tau = tau;
    }
    cfg.check()?;
    let frames = if a.frames.is_empty() { vec![require(None, &cfg.paths.frames, "frames")?] } else { a.frames };
    let neutral_path = require(a.neutral, &cfg.paths.neutral, "neutral")?;
    let neutral = NeutralFace::load(&neutral_path).with_context(|| format!("neutral face {}", neutral_path.display()))?;
    let vocab = load_vocab(a.vocab.as_deref().or(cfg.paths.vocab.as_deref()))?;
    let regions = load_regions(a.regions.as_deref().or(cfg.paths.regions.as_deref()))?;

    let one = |path: &PathBuf| -> Result<SubtitleDocument> {
        let seq = read_frames(path)?;
        annotate_clip(&seq, &neutral, &vocab, &regions, &cfg.annotator).with_context(|| format!("annotating {}", path.display()))
    };
    let docs: Vec<SubtitleDocument> = if frames.len() == 1 {
        vec![one(&frames[0])?]
    } else {
        let out = a.out.as_ref().context("--out must name a directory when several frame files are given")?;
        fs::create_dir_all(out)?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.max(1)).build()?;
        pool.install(|| frames.par_iter().map(one).collect::<Result<Vec<_>>>())?
    };

    if frames.len() == 1 {
        write_output(a.out.as_deref(), &emit_subtitles(&docs[0]))?;
    } else {
        let dir = a.out.as_ref().expect("checked above");
        for (doc, path) in docs.iter().zip(&frames) {
            let stem = if doc.clip_id.is_empty() { path.file_stem().unwrap_or_default().to_string_lossy().into_owned() } else { doc.clip_id.clone() };
            fs::write(dir.join(format!("{stem}.srt")), emit_subtitles(doc))?;
        }
        for doc in &docs {
            println!("{}: {} subtitles", doc.clip_id, doc.len());
        }
    }
    if let Some(report) = a.report {
        let clips: Vec<_> = docs
            .iter()
            .map(|d| {
                let per_region: serde_json::Map<String, serde_json::Value> = singsub::model::Region::ALL
                    .iter()
                    .map(|r| (r.to_string(), json!(d.by_region(*r).count())))
                    .collect();
                json!({ "clip_id": d.clip_id, "subtitles": d.len(), "per_region": per_region })
            })
            .collect();
        write_json(&report, &json!({ "clips": clips }))?;
    }
    Ok(())
}

fn intensity(a: IntensityArgs, cfg: Config) -> Result<()> {
    let frames = require(a.frames, &cfg.paths.frames, "frames")?;
    let neutral_path = require(a.neutral, &cfg.paths.neutral, "neutral")?;
    let neutral = NeutralFace::load(&neutral_path).with_context(|| format!("neutral face {}", neutral_path.display()))?;
    let seq = read_frames(&frames)?;
    let selection = if a.landmarks.is_empty() {
        default_selection(&load_regions(a.regions.as_deref().or(cfg.paths.regions.as_deref()))?)?
    } else {
        a.landmarks
    };
    let series = intensity_series(&seq, &neutral, &selection)?;
    write_output(a.out.as_deref(), &series.to_csv())
}

fn read_lines(flag: Option<PathBuf>, cfg: &Config) -> Result<Vec<LineFeatures>> {
    let path = require(flag, &cfg.paths.lines, "lines")?;
    load_lines(&path).with_context(|| format!("lyric features {}", path.display()))
}

fn read_thresholds(flag: Option<PathBuf>, cfg: &Config) -> Result<Option<LevelThresholds>> {
    match flag.or_else(|| cfg.paths.thresholds.clone()) {
        Some(p) => Ok(Some(LevelThresholds::load(&p).with_context(|| format!("thresholds {}", p.display()))?)),
        None => Ok(None),
    }
}

fn described(lines_flag: Option<PathBuf>, thresholds_flag: Option<PathBuf>, cfg: &Config) -> Result<Vec<(LyricLine, singsub::acoustic::AcousticDescriptor)>> {
    let lines = read_lines(lines_flag, cfg)?;
    let thresholds = read_thresholds(thresholds_flag, cfg)?;
    let descriptors = describe_lines(&lines, thresholds.as_ref())?;
    Ok(lines.into_iter().map(|l| l.line).zip(descriptors).collect())
}

fn acoustics(c: AcousticsCommand, cfg: Config) -> Result<()> {
    match c {
        AcousticsCommand::FitThresholds { lines, per_singer, out } => {
            let lines = read_lines(lines, &cfg)?;
            let provenance = if per_singer { Provenance::PerSinger } else { Provenance::GlobalTraining };
            let t = LevelThresholds::fit(&lines, provenance)?;
            let text = serde_json::to_string_pretty(&t)? + "\n";
            write_output(out.as_deref(), &text)
        }
        AcousticsCommand::Describe { lines, thresholds, out } => {
            let pairs = described(lines, thresholds, &cfg)?;
            let mut text = String::new();
            for (line, d) in &pairs {
                let rec = json!({
                    "start": line.start(),
                    "end": line.end(),
                    "text": line.text(),
                    "volume": d.volume,
                    "pitch": d.pitch,
                    "rate": d.rate,
                    "unvoiced": d.unvoiced,
                });
                text.push_str(&rec.to_string());
                text.push('\n');
            }
            write_output(out.as_deref(), &text)
        }
    }
}

fn open_index(path: &Path, cfg: &Config) -> Result<(SubtitleIndex, Box<dyn singsub::embed::Embedder>)> {
    let index = SubtitleIndex::load(path).with_context(|| format!("index {}", path.display()))?;
    let mut section = cfg.embedder.clone();
    if section.provider == "hash" {
        section.dim = index.dim();
    }
    let embedder = section.build()?;
    if embedder.id() != index.embedder_id() {
        bail!("index was built with embedder '{}' but the configured embedder is '{}'", index.embedder_id(), embedder.id());
    }
    Ok((index, embedder))
}

fn agra(c: AgraCommand, mut cfg: Config) -> Result<()> {
    match c {
        AgraCommand::Corpus { lines, thresholds, subs, out } => {
            let pairs = described(lines, thresholds, &cfg)?;
            let text = fs::read_to_string(&subs).with_context(|| format!("reading {}", subs.display()))?;
            let doc = parse_subtitles(&text).with_context(|| format!("subtitles {}", subs.display()))?;
            let corpus = corpus_from_annotations(&pairs, &doc);
            let mut body = String::new();
            for entry in &corpus {
                body.push_str(&serde_json::to_string(entry)?);
                body.push('\n');
            }
            fs::write(&out, body).with_context(|| format!("writing {}", out.display()))?;
            println!("{} corpus entries", corpus.len());
            Ok(())
        }
        AgraCommand::Build { corpus, out, dim } => {
            if let Some(d) = dim {
                cfg.embedder.dim = d;
            }
            cfg.check()?;
            let path = require(corpus, &cfg.paths.corpus, "corpus")?;
            let corpus: Vec<CorpusEntry> = load_corpus(&path).with_context(|| format!("corpus {}", path.display()))?;
            let embedder = cfg.embedder.build()?;
            let index = build_index(&corpus, embedder.as_ref())?;
            index.save(&out)?;
            println!("indexed {} units ({}, dim {})", index.len(), index.embedder_id(), index.dim());
            Ok(())
        }
        AgraCommand::Query { index, lines, thresholds, k, alpha, beta, report } => {
            let r = &mut cfg.retrieval;
            r.k = k.unwrap_or(r.k);
            r.alpha = alpha.unwrap_or(r.alpha);
            r.beta = beta.unwrap_or(r.beta);
            cfg.check()?;
            let path = require(index, &cfg.paths.index, "index")?;
            let (index, embedder) = open_index(&path, &cfg)?;
            let pairs = described(lines, thresholds, &cfg)?;
            let query = Query::embed(&pairs, embedder.as_ref())?;
            let weights = RetrievalWeights::new(cfg.retrieval.alpha, cfg.retrieval.beta)?;
            let hits = retrieve(&index, &query, cfg.retrieval.k, weights)?;
            let mut records = Vec::new();
            for ((line, _), line_hits) in pairs.iter().zip(&hits) {
                println!("{}", line.text());
                for (rank, h) in line_hits.iter().enumerate() {
                    println!("  {}. [{}] {:.6} {}", rank + 1, h.index, h.score, index.unit(h.index).lyric);
                }
                records.push(json!({
                    "lyric": line.text(),
                    "hits": line_hits.iter().map(|h| json!({ "index": h.index, "score": h.score, "lyric": index.unit(h.index).lyric })).collect::<Vec<_>>(),
                }));
            }
            if let Some(p) = report {
                write_json(&p, &json!({ "k": cfg.retrieval.k, "alpha": cfg.retrieval.alpha, "beta": cfg.retrieval.beta, "lines": records }))?;
            }
            Ok(())
        }
    }
}

fn singcot_run(a: SingcotRunArgs, mut cfg: Config) -> Result<()> {
    cfg.singcot.max_rounds = a.max_rounds.unwrap_or(cfg.singcot.max_rounds);
    cfg.validation.pass_threshold = a.pass_threshold.unwrap_or(cfg.validation.pass_threshold);
    cfg.validation.diversity_floor = a.diversity_floor.unwrap_or(cfg.validation.diversity_floor);
    cfg.retrieval.k = a.k.unwrap_or(cfg.retrieval.k);
    if a.no_refine {
        cfg.singcot.refine = false;
    }
    cfg.check()?;

    let llm_path = require(a.llm_config, &cfg.paths.llm_config, "llm-config")?;
    let llm_cfg: LlmConfig = toml::from_str(&fs::read_to_string(&llm_path).with_context(|| format!("reading {}", llm_path.display()))?)
        .map_err(|e| anyhow::anyhow!("llm config {}: {}", llm_path.display(), e.message()))?;
    let llm = llm_cfg.build()?;
    let index_path = require(a.index, &cfg.paths.index, "index")?;
    let (index, embedder) = open_index(&index_path, &cfg)?;
    let lines_path = a.lines.clone().or_else(|| cfg.paths.lines.clone());
    let pairs = described(a.lines, a.thresholds, &cfg)?;
    let vocab = load_vocab(a.vocab.as_deref().or(cfg.paths.vocab.as_deref()))?;
    let templates = match a.templates.or_else(|| cfg.paths.templates.clone()) {
        Some(dir) => PromptTemplates::load_dir(&dir)?,
        None => PromptTemplates::default(),
    };
    let clip_id = a.clip_id.unwrap_or_else(|| {
        lines_path.and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned())).unwrap_or_default()
    });
    let (lyrics, descriptors): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let session = SessionState::new(clip_id, lyrics, descriptors, a.duration)?;
    let pipeline = PipelineConfig {
        max_rounds: cfg.singcot.max_rounds,
        validation: cfg.validation.clone(),
        k: cfg.retrieval.k,
        alpha: cfg.retrieval.alpha,
        beta: cfg.retrieval.beta,
        refine: cfg.singcot.refine,
        rerun_emotion: cfg.singcot.rerun_emotion,
        llm_retries: llm_cfg.retries,
    };
    let outcome = run_pipeline(session, llm.as_ref(), &index, embedder.as_ref(), &vocab, &templates, &pipeline)?;

    write_output(a.out.as_deref(), &emit_subtitles(&outcome.document))?;
    if let Some(path) = a.trace {
        let mut text = String::new();
        for rec in &outcome.trace {
            text.push_str(&serde_json::to_string(rec)?);
            text.push('\n');
        }
        let result = json!({
            "stage": "result",
            "passed": outcome.passed,
            "rounds": outcome.rounds,
            "best_round": outcome.best_round,
            "best_score": outcome.best_score,
            "generation_calls": outcome.generation_calls,
        });
        text.push_str(&result.to_string());
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!(
        "passed: {}, rounds: {}, best round: {}, score: {:.3}",
        outcome.passed, outcome.rounds, outcome.best_round, outcome.best_score
    );
    Ok(())
}

fn parse_beats(text: &str) -> Result<Vec<f64>> {
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).context("beats JSON array");
    }
    trimmed
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad beat time '{t}'")))
        .collect()
}

fn evaluate_cmd(a: EvaluateArgs, mut cfg: Config) -> Result<()> {
    cfg.metrics.sigma = a.sigma.unwrap_or(cfg.metrics.sigma);
    cfg.check()?;
    let gen = read_frames(&a.gen)?;
    let gt = read_frames(&a.gt)?;
    let regions = load_regions(a.regions.as_deref().or(cfg.paths.regions.as_deref()))?;
    let beats = match a.beats.or_else(|| cfg.paths.beats.clone()) {
        Some(p) => Some(parse_beats(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?),
        None => None,
    };
    let report = evaluate(&gen, &gt, &regions, beats.as_deref(), cfg.metrics.sigma)?;
    println!("LVE          {:.6} mm", report.lve_mm);
    println!("FVE          {:.6} mm", report.fve_mm);
    println!("Freeze rate  {:.2} %", report.freeze_rate_fraction * 100.0);
    println!("FID_fm       {:.6}", report.fid_fm);
    println!("FID_dfm      {:.6}", report.fid_dfm);
    println!("SND          {:.6}", report.snd);
    println!("FDD          {:.6} x1e-2 mm", report.fdd_centi_mm);
    if let Some(ba) = report.ba {
        println!("BA           {ba:.6}");
    }
    if let Some(p) = a.report {
        write_json(&p, &report)?;
    }
    Ok(())
}

fn genmath_check(seed: u64, weights: Option<PathBuf>, report: Option<PathBuf>) -> Result<()> {
    let mut rows = genmath::check(seed);
    if let Some(path) = weights {
        let w = ModulationWeights::load(&path).with_context(|| format!("weights {}", path.display()))?;
        let l = w.pe.nrows().max(1);
        let z = genmath::seeded_latent(seed, l, w.dim());
        let out = genmath::modulation_forward(&z, &TimelineFeatures::zeros(l, w.dim()), &w)?;
        rows.push(CheckRow {
            name: "loaded weights zero-subtitle identity".into(),
            passed: out == z,
            detail: format!("L={l}, D={}", w.dim()),
        });
    }
    for r in &rows {
        println!("{}  {:<40} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if let Some(p) = report {
        write_json(&p, &json!({ "seed": seed, "checks": rows }))?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        bail!("{failed} of {} kernel checks failed", rows.len());
    }
    Ok(())
}

fn validate_cmd(a: ValidateArgs, mut cfg: Config) -> Result<()> {
    cfg.validation.pass_threshold = a.pass_threshold.unwrap_or(cfg.validation.pass_threshold);
    cfg.validation.diversity_floor = a.diversity_floor.unwrap_or(cfg.validation.diversity_floor);
    cfg.check()?;
    if !(a.duration.is_finite() && a.duration >= 0.0) {
        bail!("--duration must be a non-negative number of seconds");
    }
    let vocab = load_vocab(a.vocab.as_deref().or(cfg.paths.vocab.as_deref()))?;
    let text = fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let report = validate(&Draft::from_lines(&text), &vocab, a.duration, &cfg.validation);
    println!(
        "score {:.3} (plausibility {:.3}, format {:.3}, diversity {:.3}) {}",
        report.score,
        report.plausibility,
        report.format,
        report.diversity,
        if report.passed { "passed" } else { "failed" }
    );
    for issue in &report.issues {
        println!("[{}] {}: {}", issue.criterion, issue.location, issue.message);
    }
    if let Some(p) = a.report {
        write_json(&p, &report)?;
    }
    if a.strict && !report.passed {
        bail!("{} did not pass validation (score {:.3})", a.file.display(), report.score);
    }
    Ok(())
}
