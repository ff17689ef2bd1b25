//! Subtitle reasoning loop: emotion extraction, retrieval-conditioned
//! generation, deterministic validation and feedback-driven regeneration.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acoustic::AcousticDescriptor;
use crate::agra::{merge_hits, retrieve, Query, RetrievalWeights, SubtitleIndex};
use crate::embed::Embedder;
use crate::error::{FormatError, LlmError, SingCotError};
use crate::llm::LlmClient;
use crate::model::{LyricLine, Region};
use crate::srt::{parse_line, scan_subtitles, MotionSubtitle, SubtitleDocument, Timestamp};
use crate::vocab::Vocabulary;

// ---------------------------------------------------------------------------
// Prompt templates

/// Editable prompt templates with `{{placeholder}}` tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub emotion: String,
    pub generation: String,
    pub refine: String,
    pub negatives: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            emotion: include_str!("../templates/lyrics2emo.txt").to_string(),
            generation: include_str!("../templates/emo2subs.txt").to_string(),
            refine: include_str!("../templates/refine.txt").to_string(),
            negatives: include_str!("../templates/negative_examples.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads `lyrics2emo.txt`, `emo2subs.txt`, `refine.txt` and
    /// `negative_examples.txt` from `dir`; missing files fall back to the bundled ones.
    pub fn load_dir(dir: &Path) -> Result<Self, SingCotError> {
        let mut t = Self::default();
        let slots: [(&str, &mut String); 4] = [
            ("lyrics2emo.txt", &mut t.emotion),
            ("emo2subs.txt", &mut t.generation),
            ("refine.txt", &mut t.refine),
            ("negative_examples.txt", &mut t.negatives),
        ];
        for (name, slot) in slots {
            let path = dir.join(name);
            if path.exists() {
                *slot = fs::read_to_string(path)?;
            }
        }
        Ok(t)
    }
}

fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

const FEEDBACK_OPEN: &str = "### REVISION FEEDBACK\n";
const FEEDBACK_CLOSE: &str = "### END FEEDBACK\n";

fn feedback_block(feedback: Option<&str>) -> String {
    match feedback {
        Some(f) if !f.is_empty() => format!("\n{FEEDBACK_OPEN}{f}\n{FEEDBACK_CLOSE}"),
        _ => String::new(),
    }
}

/// The feedback text embedded in a prompt, if any.
pub fn feedback_section(prompt: &str) -> Option<&str> {
    let start = prompt.find(FEEDBACK_OPEN)? + FEEDBACK_OPEN.len();
    let end = prompt[start..].find(FEEDBACK_CLOSE)? + start;
    Some(prompt[start..end].strip_suffix('\n').unwrap_or(&prompt[start..end]))
}

fn span(line: &LyricLine) -> String {
    let s = Timestamp::from_secs(line.start()).unwrap_or_default();
    let e = Timestamp::from_secs(line.end()).unwrap_or_default();
    format!("{s} --> {e}")
}

fn lyrics_block(lyrics: &[LyricLine]) -> String {
    lyrics.iter().map(|l| format!("{}: {}", span(l), l.text())).collect::<Vec<_>>().join("\n")
}

fn acoustics_block(lyrics: &[LyricLine], descriptors: &[AcousticDescriptor]) -> String {
    lyrics
        .iter()
        .zip(descriptors)
        .map(|(l, d)| format!("{}: {}", span(l), d))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A retrieved reference rendered for the generation prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedReference {
    pub lyric: String,
    pub acoustic: AcousticDescriptor,
    pub subtitles: Vec<String>,
}

fn references_block(refs: &[RenderedReference]) -> String {
    if refs.is_empty() {
        return "(none)".into();
    }
    refs.iter()
        .enumerate()
        .map(|(i, r)| {
            let mut s = format!("[{}] lyric: {} | {}", i + 1, r.lyric, r.acoustic);
            for line in &r.subtitles {
                s.push('\n');
                s.push_str(line);
            }
            s
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_emotion_prompt(
    templates: &PromptTemplates,
    lyrics: &[LyricLine],
    descriptors: &[AcousticDescriptor],
    prior_feedback: Option<&str>,
) -> String {
    render(
        &templates.emotion,
        &[
            ("lyrics", &lyrics_block(lyrics)),
            ("acoustics", &acoustics_block(lyrics, descriptors)),
            ("feedback", &feedback_block(prior_feedback)),
        ],
    )
}

pub fn build_generation_prompt(
    templates: &PromptTemplates,
    emotion: &str,
    references: &[RenderedReference],
    lyrics: &[LyricLine],
    descriptors: &[AcousticDescriptor],
    prior_feedback: Option<&str>,
) -> String {
    render(
        &templates.generation,
        &[
            ("emotion", emotion),
            ("references", &references_block(references)),
            ("lyrics", &lyrics_block(lyrics)),
            ("acoustics", &acoustics_block(lyrics, descriptors)),
            ("feedback", &feedback_block(prior_feedback)),
        ],
    )
}

fn vocabulary_block(vocab: &Vocabulary) -> String {
    let mut out = Vec::new();
    for region in Region::ALL {
        let items = vocab.listing(region);
        let heading = match region {
            Region::Neck => "neck (descriptors joined as \"The head <des_x>, <des_y>, <des_z>\")",
            Region::Eyes => "eyes",
            Region::Eyebrows => "eyebrows",
            Region::Mouth => "mouth",
        };
        out.push(format!("{heading}: {}", items.join(" | ")));
    }
    out.join("\n")
}

pub fn build_refine_prompt(
    templates: &PromptTemplates,
    vocab: &Vocabulary,
    draft: &str,
    prior_feedback: Option<&str>,
) -> String {
    render(
        &templates.refine,
        &[
            ("vocabulary", &vocabulary_block(vocab)),
            ("negatives", templates.negatives.trim_end()),
            ("feedback", &feedback_block(prior_feedback)),
            ("draft", draft.trim_end_matches('\n')),
        ],
    )
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Plausibility,
    Format,
    Diversity,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Plausibility => "plausibility",
            Criterion::Format => "format",
            Criterion::Diversity => "diversity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub criterion: Criterion,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub score: f64,
    pub passed: bool,
    pub plausibility: f64,
    pub format: f64,
    pub diversity: f64,
    pub issues: Vec<Issue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    /// Minimum weighted score for a draft to pass.
    pub pass_threshold: f64,
    /// Minimum fraction of well-formed entries for a draft to pass.
    pub format_pass_threshold: f64,
    /// Minimum distinct/total description ratio per region.
    pub diversity_floor: f64,
    /// Weights of plausibility, format and diversity in the score.
    pub weights: [f64; 3],
    /// Eye and neck entries shorter than this are implausible.
    pub min_duration_s: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            pass_threshold: 0.9,
            format_pass_threshold: 1.0,
            diversity_floor: 0.3,
            weights: [1.0, 1.0, 1.0],
            min_duration_s: 0.5,
        }
    }
}

/// Subtitle lines recovered from free text, including the ones that failed to parse.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Draft {
    pub entries: Vec<(usize, MotionSubtitle)>,
    pub rejected: Vec<(usize, String, FormatError)>,
}

impl Draft {
    pub fn from_text(text: &str) -> Self {
        let scanned = scan_subtitles(text);
        Self { entries: scanned.entries, rejected: scanned.rejected }
    }

    /// Strict variant for subtitle files: every non-blank line that is not a
    /// `#` comment must be a subtitle, and those that fail are rejected.
    pub fn from_lines(text: &str) -> Self {
        let mut draft = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match parse_line(line, idx + 1) {
                Ok(sub) => draft.entries.push((idx + 1, sub)),
                Err(e) => draft.rejected.push((idx + 1, line.to_string(), e)),
            }
        }
        draft
    }

    pub fn from_document(doc: &SubtitleDocument) -> Self {
        Self { entries: doc.entries().iter().cloned().enumerate().map(|(i, e)| (i + 1, e)).collect(), rejected: Vec::new() }
    }

    pub fn from_entries(entries: Vec<MotionSubtitle>) -> Self {
        Self { entries: entries.into_iter().enumerate().map(|(i, e)| (i + 1, e)).collect(), rejected: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.rejected.is_empty()
    }
}

fn location(pos: usize, line: usize, entry: &MotionSubtitle) -> String {
    format!("entry {} (line {line}, {} --> {} {})", pos + 1, entry.start(), entry.end(), entry.region())
}

/// Indices of entries that break a format rule.
fn format_violations(draft: &Draft, clip_duration: f64, issues: &mut Vec<Issue>) -> BTreeSet<usize> {
    let limit_ms = (clip_duration * 1000.0 + 1e-6).floor();
    let mut bad = BTreeSet::new();
    for (pos, (line, e)) in draft.entries.iter().enumerate() {
        if e.end().millis() as f64 > limit_ms {
            bad.insert(pos);
            issues.push(Issue {
                criterion: Criterion::Format,
                location: location(pos, *line, e),
                message: format!("ends at {} after the clip ends at {}", e.end(), Timestamp::from_secs(clip_duration).unwrap_or_default()),
            });
        }
    }
    for region in Region::ALL {
        let mut order: Vec<usize> = (0..draft.entries.len()).filter(|&i| draft.entries[i].1.region() == region).collect();
        order.sort_by_key(|&i| (draft.entries[i].1.start(), draft.entries[i].1.end(), i));
        let mut reach: Option<(usize, Timestamp)> = None;
        for i in order {
            let e = &draft.entries[i].1;
            if let Some((prev, end)) = reach {
                if e.start() < end {
                    bad.insert(i);
                    issues.push(Issue {
                        criterion: Criterion::Format,
                        location: location(i, draft.entries[i].0, e),
                        message: format!("overlaps entry {} of the same region", prev + 1),
                    });
                }
            }
            if reach.is_none_or(|(_, end)| e.end() > end) {
                reach = Some((i, e.end()));
            }
        }
    }
    bad
}

pub fn validate(draft: &Draft, vocab: &Vocabulary, clip_duration: f64, config: &ValidationConfig) -> ValidationReport {
    let mut format_issues = Vec::new();
    for (line, text, err) in &draft.rejected {
        format_issues.push(Issue {
            criterion: Criterion::Format,
            location: format!("line {line}"),
            message: format!("'{text}' does not match the subtitle template: {}", err.reason),
        });
    }
    let bad = format_violations(draft, clip_duration, &mut format_issues);
    let attempted = draft.entries.len() + draft.rejected.len();
    let format = if attempted == 0 { 1.0 } else { (draft.entries.len() - bad.len()) as f64 / attempted as f64 };

    let min_ms = (config.min_duration_s * 1000.0).round() as u64;
    let mut plaus_issues = Vec::new();
    let mut plausible = 0usize;
    for (pos, (line, e)) in draft.entries.iter().enumerate() {
        let mut ok = true;
        if !vocab.is_expansion(e.region(), e.description()) {
            ok = false;
            plaus_issues.push(Issue {
                criterion: Criterion::Plausibility,
                location: location(pos, *line, e),
                message: format!("\"{}\" is not a vocabulary expansion for {}", e.description(), e.region()),
            });
        }
        if matches!(e.region(), Region::Eyes | Region::Neck) && e.duration_ms() < min_ms {
            ok = false;
            plaus_issues.push(Issue {
                criterion: Criterion::Plausibility,
                location: location(pos, *line, e),
                message: format!("lasts {} ms; {} motions need at least {} ms", e.duration_ms(), e.region(), min_ms),
            });
        }
        plausible += ok as usize;
    }
    let plausibility = if draft.entries.is_empty() { 1.0 } else { plausible as f64 / draft.entries.len() as f64 };

    let mut per_region: BTreeMap<Region, (usize, HashSet<&str>)> = BTreeMap::new();
    for (_, e) in &draft.entries {
        let slot = per_region.entry(e.region()).or_default();
        slot.0 += 1;
        slot.1.insert(e.description());
    }
    let mut div_issues = Vec::new();
    let mut diverse = 0usize;
    for (region, (total, distinct)) in &per_region {
        let ratio = distinct.len() as f64 / *total as f64;
        if ratio + 1e-12 >= config.diversity_floor {
            diverse += 1;
        } else {
            div_issues.push(Issue {
                criterion: Criterion::Diversity,
                location: format!("region {region}"),
                message: format!(
                    "{} distinct descriptions over {} entries (ratio {:.2}, floor {:.2})",
                    distinct.len(),
                    total,
                    ratio,
                    config.diversity_floor
                ),
            });
        }
    }
    let diversity = if per_region.is_empty() { 1.0 } else { diverse as f64 / per_region.len() as f64 };

    let [wp, wf, wd] = config.weights;
    let total_w = wp + wf + wd;
    let score = if total_w > 0.0 { (wp * plausibility + wf * format + wd * diversity) / total_w } else { 0.0 };
    let passed = score >= config.pass_threshold && format >= config.format_pass_threshold;

    let mut issues = plaus_issues;
    issues.extend(format_issues);
    issues.extend(div_issues);
    ValidationReport { score, passed, plausibility, format, diversity, issues }
}

/// One directive per issue, grouped plausibility → format → diversity.
pub fn reflect(report: &ValidationReport) -> String {
    let mut lines = Vec::new();
    for criterion in [Criterion::Plausibility, Criterion::Format, Criterion::Diversity] {
        for issue in report.issues.iter().filter(|i| i.criterion == criterion) {
            let fix = match criterion {
                Criterion::Plausibility => "rewrite it with a vocabulary phrase and a plausible duration",
                Criterion::Format => "fix the line so it matches the template, stays inside the song and does not overlap",
                Criterion::Diversity => "vary the wording of this region",
            };
            lines.push(format!("- [{criterion}] {}: {}; {fix}.", issue.location, issue.message));
        }
    }
    lines.join("\n")
}

// ---------------------------------------------------------------------------
// Pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub max_rounds: usize,
    pub validation: ValidationConfig,
    /// References retrieved per lyric line.
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Run the phrasing & format refinement prompt after each generation.
    pub refine: bool,
    /// Re-run emotion extraction with the feedback of failed rounds.
    pub rerun_emotion: bool,
    /// Extra attempts after an LLM call fails.
    pub llm_retries: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_rounds: 3,
            validation: ValidationConfig::default(),
            k: 3,
            alpha: 0.7,
            beta: 0.3,
            refine: true,
            rerun_emotion: false,
            llm_retries: 2,
        }
    }
}

/// Everything the loop reads and writes for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub clip_id: String,
    pub lyrics: Vec<LyricLine>,
    pub descriptors: Vec<AcousticDescriptor>,
    /// Song duration bounding subtitle timestamps.
    pub clip_duration: f64,
    pub emotion: String,
    pub round: usize,
    pub history: Vec<(String, ValidationReport, String)>,
}

impl SessionState {
    pub fn new(
        clip_id: impl Into<String>,
        lyrics: Vec<LyricLine>,
        descriptors: Vec<AcousticDescriptor>,
        clip_duration: Option<f64>,
    ) -> Result<Self, SingCotError> {
        if lyrics.is_empty() {
            return Err(SingCotError::EmptySession);
        }
        if lyrics.len() != descriptors.len() {
            return Err(SingCotError::Misaligned { lyrics: lyrics.len(), descriptors: descriptors.len() });
        }
        let last_end = lyrics.iter().map(LyricLine::end).fold(0.0, f64::max);
        Ok(Self {
            clip_id: clip_id.into(),
            clip_duration: clip_duration.unwrap_or(last_end),
            lyrics,
            descriptors,
            emotion: String::new(),
            round: 0,
            history: Vec::new(),
        })
    }
}

/// One stage of a run, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum TraceRecord {
    Emotion { round: usize, prompt: String, completion: String, emotion: String },
    Retrieval { references: Vec<RenderedReference> },
    Generation { round: usize, prompt: String, completion: String },
    Refine { round: usize, prompt: String, completion: String },
    Validation { round: usize, draft: Vec<String>, report: ValidationReport, feedback: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub document: SubtitleDocument,
    pub passed: bool,
    pub rounds: usize,
    pub best_round: usize,
    pub best_score: f64,
    pub generation_calls: usize,
    pub trace: Vec<TraceRecord>,
    pub session: SessionState,
}

fn call_llm(llm: &dyn LlmClient, prompt: &str, retries: usize) -> Result<String, LlmError> {
    let mut attempt = 0;
    loop {
        match llm.complete(prompt) {
            Ok(text) => return Ok(text),
            Err(e) if attempt >= retries => return Err(e),
            Err(_) => attempt += 1,
        }
    }
}

fn parse_emotion(completion: &str) -> String {
    completion
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("neutral")
        .trim_matches(|c: char| !c.is_alphanumeric() && c != ' ' && c != '-')
        .to_lowercase()
}

/// References for every lyric line, merged and rendered.
pub fn gather_references(
    session: &SessionState,
    index: &SubtitleIndex,
    embedder: &dyn Embedder,
    k: usize,
    weights: RetrievalWeights,
) -> Result<Vec<RenderedReference>, SingCotError> {
    let pairs: Vec<(LyricLine, AcousticDescriptor)> =
        session.lyrics.iter().cloned().zip(session.descriptors.iter().copied()).collect();
    let query = Query::embed(&pairs, embedder)?;
    let per_line = retrieve(index, &query, k, weights)?;
    Ok(merge_hits(&per_line, k * session.lyrics.len())
        .into_iter()
        .map(|hit| {
            let unit = index.unit(hit.index);
            RenderedReference { lyric: unit.lyric.clone(), acoustic: unit.acoustic, subtitles: unit.subtitle_lines() }
        })
        .collect())
}

/// Validates a completion. A completion without a single parseable subtitle line scores 0.
fn assess(completion: &str, vocab: &Vocabulary, session: &SessionState, cfg: &ValidationConfig) -> (Draft, ValidationReport) {
    let draft = Draft::from_text(completion);
    let mut report = validate(&draft, vocab, session.clip_duration, cfg);
    if draft.entries.is_empty() {
        report.issues.push(Issue {
            criterion: Criterion::Format,
            location: "completion".into(),
            message: "no subtitle lines could be parsed".into(),
        });
        report.score = 0.0;
        report.format = 0.0;
        report.passed = false;
    }
    (draft, report)
}

/// Keeps the entries without format violations so the result is a valid document.
fn salvage(clip_id: &str, draft: &Draft, clip_duration: f64) -> SubtitleDocument {
    let bad = format_violations(draft, clip_duration, &mut Vec::new());
    let entries = draft.entries.iter().enumerate().filter(|(i, _)| !bad.contains(i)).map(|(_, (_, e))| e.clone()).collect();
    SubtitleDocument::new(clip_id, entries).expect("violations removed")
}

/// Runs the loop: emotion once, then up to `max_rounds` of generation,
/// optional refinement, validation and reflection. Stops at the first passing
/// draft; otherwise returns the best-scoring draft (earliest on ties).
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline(
    mut session: SessionState,
    llm: &dyn LlmClient,
    index: &SubtitleIndex,
    embedder: &dyn Embedder,
    vocab: &Vocabulary,
    templates: &PromptTemplates,
    config: &PipelineConfig,
) -> Result<PipelineOutcome, SingCotError> {
    if config.max_rounds == 0 {
        return Err(SingCotError::InvalidRounds);
    }
    let weights = RetrievalWeights::new(config.alpha, config.beta)?;
    let mut trace = Vec::new();

    let prompt = build_emotion_prompt(templates, &session.lyrics, &session.descriptors, None);
    let completion = call_llm(llm, &prompt, config.llm_retries)?;
    session.emotion = parse_emotion(&completion);
    trace.push(TraceRecord::Emotion { round: 0, prompt, completion, emotion: session.emotion.clone() });

    let references = gather_references(&session, index, embedder, config.k, weights)?;
    trace.push(TraceRecord::Retrieval { references: references.clone() });

    let mut feedback: Option<String> = None;
    let mut best: Option<(usize, f64, Draft)> = None;
    let mut generation_calls = 0;

    while session.round < config.max_rounds {
        session.round += 1;
        let round = session.round;
        if config.rerun_emotion && feedback.is_some() {
            let prompt = build_emotion_prompt(templates, &session.lyrics, &session.descriptors, feedback.as_deref());
            let completion = call_llm(llm, &prompt, config.llm_retries)?;
            session.emotion = parse_emotion(&completion);
            trace.push(TraceRecord::Emotion { round, prompt, completion, emotion: session.emotion.clone() });
        }

        let prompt = build_generation_prompt(
            templates,
            &session.emotion,
            &references,
            &session.lyrics,
            &session.descriptors,
            feedback.as_deref(),
        );
        let mut completion = call_llm(llm, &prompt, config.llm_retries)?;
        generation_calls += 1;
        trace.push(TraceRecord::Generation { round, prompt, completion: completion.clone() });

        if config.refine {
            let prompt = build_refine_prompt(templates, vocab, &completion, feedback.as_deref());
            completion = call_llm(llm, &prompt, config.llm_retries)?;
            trace.push(TraceRecord::Refine { round, prompt, completion: completion.clone() });
        }

        let (draft, report) = assess(&completion, vocab, &session, &config.validation);
        let reflection = reflect(&report);
        trace.push(TraceRecord::Validation {
            round,
            draft: draft.entries.iter().map(|(_, e)| e.to_string()).collect(),
            report: report.clone(),
            feedback: reflection.clone(),
        });
        session.history.push((completion, report.clone(), reflection.clone()));

        if report.passed {
            return Ok(PipelineOutcome {
                document: salvage(&session.clip_id, &draft, session.clip_duration),
                passed: true,
                rounds: round,
                best_round: round,
                best_score: report.score,
                generation_calls,
                trace,
                session,
            });
        }
        if best.as_ref().is_none_or(|(_, s, _)| report.score > *s) {
            best = Some((round, report.score, draft));
        }
        feedback = Some(reflection);
    }

    let (best_round, best_score, draft) = best.expect("at least one round ran");
    Ok(PipelineOutcome {
        document: salvage(&session.clip_id, &draft, session.clip_duration),
        passed: false,
        rounds: session.round,
        best_round,
        best_score,
        generation_calls,
        trace,
        session,
    })
}
