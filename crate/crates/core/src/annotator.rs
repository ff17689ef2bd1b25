//! Rule-based motion subtitle annotation.
//!
//! Eyebrows and mouth are segmented from a region velocity curve and AU
//! intensity changes; eyes are labelled from eyelid distance bands; the
//! neck from per-axis rotation angles.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::AnnotateError;
use crate::extrema::{argmax_open, local_minima};
use crate::model::{distance, AuChannel, FrameSequence, NeutralFace, Region, NUM_LANDMARKS};
use crate::srt::{MotionSubtitle, SubtitleDocument, Timestamp};
use crate::vocab::{phrase_seed, Axis, EyeState, IntensityClass, RegionConfig, Vocabulary};

/// AU change above which an interval counts as a slight change.
pub const SLIGHT_THRESHOLD: f64 = 0.25;
/// AU change above which an interval counts as a strong change.
pub const STRONG_THRESHOLD: f64 = 0.5;

/// Tunable rule parameters. Defaults follow the annotation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotatorConfig {
    pub tau: f64,
    /// Eyelid distance (mm) above which the eyes are widened.
    pub eye_widen_mm: f64,
    /// Upper bound (inclusive) of the squint band, mm.
    pub eye_squint_max_mm: f64,
    /// Distance (mm) below which the eyes are closed; also the squint lower bound.
    pub eye_close_mm: f64,
    /// Rotations with |angle| below this many degrees are neutral.
    pub neck_min_deg: f64,
    /// Eye and neck events shorter than this are dropped.
    pub min_duration_s: f64,
    pub sway_window_s: f64,
    pub sway_min_changes: usize,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        Self {
            tau: SLIGHT_THRESHOLD,
            eye_widen_mm: 9.5,
            eye_squint_max_mm: 6.0,
            eye_close_mm: 4.0,
            neck_min_deg: 10.0,
            min_duration_s: 0.5,
            sway_window_s: 2.0,
            sway_min_changes: 2,
        }
    }
}

impl AnnotatorConfig {
    fn min_duration_ms(&self) -> u64 {
        (self.min_duration_s * 1000.0).round() as u64
    }
}

/// Mean per-frame displacement of a vertex set (mm per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCurve {
    pub region: Region,
    pub values: Vec<f64>,
    pub fps: f64,
}

/// An onset/offset pair found on one AU channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpressionInterval {
    pub onset_frame: usize,
    pub offset_frame: usize,
    pub au_channel: AuChannel,
    pub au_delta: f64,
}

pub fn region_velocity(
    seq: &FrameSequence,
    region: Region,
    vertices: &[usize],
) -> Result<VelocityCurve, AnnotateError> {
    if vertices.is_empty() {
        return Err(AnnotateError::EmptyRegion);
    }
    if let Some(&v) = vertices.iter().find(|&&v| v >= NUM_LANDMARKS) {
        return Err(AnnotateError::VertexOutOfRange(v));
    }
    let frames = seq.frames();
    let mut values = Vec::with_capacity(frames.len());
    values.push(0.0);
    for pair in frames.windows(2) {
        let total: f64 = vertices
            .iter()
            .map(|&v| distance(&pair[1].landmarks[v], &pair[0].landmarks[v]))
            .sum();
        values.push(total / vertices.len() as f64);
    }
    Ok(VelocityCurve { region, values, fps: seq.fps() })
}

/// Four-step interval detection over velocity minima.
///
/// 1. Candidate boundaries are the local minima of the velocity curve.
/// 2. A pair of successive minima `(i1, i2)` is kept when `|au[i2] - au[i1]| > tau`.
/// 3. The onset is the velocity argmax over the open interval `(i1, i2)`.
/// 4. The first later minimum `i3` with `|au[i3] - au[i2]| > tau` closes the
///    interval; the offset is the velocity argmax over `(i2, i3)`.
///
/// After an emitted interval the search resumes from `i3`, so intervals are
/// disjoint and ordered.
pub fn detect_intervals(
    vel: &VelocityCurve,
    au: &[f64],
    channel: AuChannel,
    tau: f64,
) -> Result<Vec<ExpressionInterval>, AnnotateError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(AnnotateError::InvalidTau(tau));
    }
    if vel.values.len() != au.len() {
        return Err(AnnotateError::LengthMismatch { velocity: vel.values.len(), au: au.len() });
    }
    if au.len() < 3 {
        return Err(AnnotateError::TooShort(au.len()));
    }
    let minima = local_minima(&vel.values);
    let mut out = Vec::new();
    let mut k = 0;
    while k + 1 < minima.len() {
        let (i1, i2) = (minima[k], minima[k + 1]);
        if (au[i2] - au[i1]).abs() > tau {
            let closing = (k + 2..minima.len()).find(|&m| (au[minima[m]] - au[i2]).abs() > tau);
            if let Some(m) = closing {
                let i3 = minima[m];
                let onset = argmax_open(&vel.values, i1, i2);
                let offset = argmax_open(&vel.values, i2, i3);
                if let (Some(onset_frame), Some(offset_frame)) = (onset, offset) {
                    out.push(ExpressionInterval {
                        onset_frame,
                        offset_frame,
                        au_channel: channel,
                        au_delta: au[i2] - au[i1],
                    });
                    k = m;
                    continue;
                }
            }
        }
        k += 1;
    }
    Ok(out)
}

pub fn intensity_class(au_delta: f64) -> Option<IntensityClass> {
    let mag = au_delta.abs();
    if mag > STRONG_THRESHOLD {
        Some(IntensityClass::Strong)
    } else if mag > SLIGHT_THRESHOLD {
        Some(IntensityClass::Slight)
    } else {
        None
    }
}

/// `"<motion> <intensity>"`, with both phrases picked from `rng_seed`.
pub fn describe_brow_mouth(
    interval: &ExpressionInterval,
    vocab: &Vocabulary,
    rng_seed: u64,
) -> Result<String, AnnotateError> {
    let class = intensity_class(interval.au_delta).ok_or(AnnotateError::BelowThreshold(interval.au_delta))?;
    let motions = vocab.motion_phrases(interval.au_channel, interval.au_delta > 0.0);
    let intensities = vocab.intensity_phrases(class);
    let m = motions.len() as u64;
    let motion = &motions[(rng_seed % m) as usize];
    let intensity = &intensities[((rng_seed / m) % intensities.len() as u64) as usize];
    Ok(format!("{motion} {intensity}"))
}

/// Mean upper/lower eyelid distance per frame over all configured pairs.
pub fn eyelid_distances(seq: &FrameSequence, neutral: &NeutralFace) -> Vec<f64> {
    let pairs = neutral.eyelid_pairs();
    seq.frames()
        .iter()
        .map(|f| pairs.iter().map(|&(u, l)| distance(&f.landmarks[u], &f.landmarks[l])).sum::<f64>() / pairs.len() as f64)
        .collect()
}

pub fn eye_state(d_mm: f64, cfg: &AnnotatorConfig) -> Option<EyeState> {
    if d_mm > cfg.eye_widen_mm {
        Some(EyeState::Widen)
    } else if d_mm < cfg.eye_close_mm {
        Some(EyeState::Close)
    } else if d_mm <= cfg.eye_squint_max_mm {
        Some(EyeState::Squint)
    } else {
        None
    }
}

/// Picks phrases without repeating a description within one region of a clip
/// while unused alternatives remain.
#[derive(Default)]
struct PhrasePicker {
    used: HashSet<(Region, String)>,
}

impl PhrasePicker {
    fn pick(&mut self, region: Region, seed: u64, choices: u64, render: impl Fn(u64) -> String) -> String {
        let choice = (0..choices.max(1))
            .map(|j| render(seed.wrapping_add(j)))
            .find(|d| !self.used.contains(&(region, d.clone())))
            .unwrap_or_else(|| render(seed));
        self.used.insert((region, choice.clone()));
        choice
    }
}

/// Half-open frame run `[start, end)` with a label.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Run<T> {
    start: usize,
    end: usize,
    label: T,
}

fn runs_of<T: Copy + PartialEq>(labels: &[Option<T>]) -> Vec<Run<T>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let Some(label) = labels[i] else {
            i += 1;
            continue;
        };
        let start = i;
        while i < labels.len() && labels[i] == Some(label) {
            i += 1;
        }
        out.push(Run { start, end: i, label });
    }
    out
}

fn span_ms(start: usize, end: usize, fps: f64) -> (Timestamp, Timestamp) {
    (Timestamp::from_frame(start, fps), Timestamp::from_frame(end, fps))
}

pub fn annotate_eyes(
    seq: &FrameSequence,
    neutral: &NeutralFace,
    vocab: &Vocabulary,
    cfg: &AnnotatorConfig,
) -> Vec<MotionSubtitle> {
    annotate_eyes_with(seq, neutral, vocab, cfg, &mut PhrasePicker::default())
}

fn annotate_eyes_with(
    seq: &FrameSequence,
    neutral: &NeutralFace,
    vocab: &Vocabulary,
    cfg: &AnnotatorConfig,
    picker: &mut PhrasePicker,
) -> Vec<MotionSubtitle> {
    let states: Vec<Option<EyeState>> = eyelid_distances(seq, neutral).iter().map(|&d| eye_state(d, cfg)).collect();
    let mut out = Vec::new();
    for run in runs_of(&states) {
        let (start, end) = span_ms(run.start, run.end, seq.fps());
        if end.millis() - start.millis() < cfg.min_duration_ms() {
            continue;
        }
        let phrases = vocab.eye_phrases(run.label);
        let seed = phrase_seed(seq.clip_id(), Region::Eyes, run.start);
        let description = picker.pick(Region::Eyes, seed, phrases.len() as u64, |s| {
            Vocabulary::eye_description(&phrases[(s % phrases.len() as u64) as usize])
        });
        out.push(MotionSubtitle::new(start, end, Region::Eyes, description).expect("valid eye subtitle"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NeckLabel {
    Turn(bool),
    Sway,
}

#[derive(Debug, Clone, Copy)]
struct NeckAction {
    axis: Axis,
    start: usize,
    end: usize,
    label: NeckLabel,
}

/// Replaces chains of alternating horizontal turns by sway actions.
fn merge_sway(turns: Vec<Run<bool>>, fps: f64, cfg: &AnnotatorConfig) -> Vec<NeckAction> {
    let window = cfg.sway_window_s * fps;
    let mut out = Vec::new();
    let flush = |chain: &mut Vec<Run<bool>>, out: &mut Vec<NeckAction>| {
        if chain.len() > cfg.sway_min_changes {
            out.push(NeckAction {
                axis: Axis::Y,
                start: chain[0].start,
                end: chain[chain.len() - 1].end,
                label: NeckLabel::Sway,
            });
        } else {
            out.extend(chain.iter().map(|r| NeckAction { axis: Axis::Y, start: r.start, end: r.end, label: NeckLabel::Turn(r.label) }));
        }
        chain.clear();
    };
    let mut chain: Vec<Run<bool>> = Vec::new();
    for run in turns {
        let links = match chain.last() {
            None => false,
            Some(last) => {
                let opposite = last.label != run.label;
                let gap_ok = (run.start - last.end) as f64 <= window;
                // consecutive sign changes must fall within the window of each other
                let pace_ok = chain.len() < 2 || (run.start - chain[chain.len() - 1].start) as f64 <= window;
                opposite && gap_ok && pace_ok
            }
        };
        if !links && !chain.is_empty() {
            flush(&mut chain, &mut out);
        }
        chain.push(run);
    }
    flush(&mut chain, &mut out);
    out
}

pub fn annotate_neck(seq: &FrameSequence, vocab: &Vocabulary, cfg: &AnnotatorConfig) -> Vec<MotionSubtitle> {
    annotate_neck_with(seq, vocab, cfg, &mut PhrasePicker::default())
}

fn annotate_neck_with(
    seq: &FrameSequence,
    vocab: &Vocabulary,
    cfg: &AnnotatorConfig,
    picker: &mut PhrasePicker,
) -> Vec<MotionSubtitle> {
    let fps = seq.fps();
    let mut actions: Vec<NeckAction> = Vec::new();
    for axis in Axis::ALL {
        let labels: Vec<Option<bool>> = seq
            .frames()
            .iter()
            .map(|f| {
                let angle = f.neck[axis.index()];
                (angle.abs() >= cfg.neck_min_deg).then_some(angle > 0.0)
            })
            .collect();
        let runs = runs_of(&labels);
        if axis == Axis::Y {
            actions.extend(merge_sway(runs, fps, cfg));
        } else {
            actions.extend(runs.into_iter().map(|r| NeckAction { axis, start: r.start, end: r.end, label: NeckLabel::Turn(r.label) }));
        }
    }
    let min_ms = cfg.min_duration_ms();
    actions.retain(|a| {
        let (s, e) = span_ms(a.start, a.end, fps);
        e.millis() - s.millis() >= min_ms
    });
    actions.sort_by_key(|a| (a.start, a.end, a.axis));

    // overlapping actions on different axes become one subtitle
    let mut groups: Vec<Vec<NeckAction>> = Vec::new();
    let mut group_end = 0;
    for action in actions {
        match groups.last_mut() {
            Some(group) if action.start < group_end => {
                group_end = group_end.max(action.end);
                group.push(action);
            }
            _ => {
                group_end = action.end;
                groups.push(vec![action]);
            }
        }
    }

    let mut out = Vec::new();
    for group in groups {
        let start = group.iter().map(|a| a.start).min().expect("non-empty group");
        let end = group.iter().map(|a| a.end).max().expect("non-empty group");
        // per axis, the label covering the most frames
        let mut present: Vec<(Axis, NeckLabel)> = Vec::new();
        for axis in Axis::ALL {
            let mut best: Option<(usize, NeckLabel)> = None;
            for a in group.iter().filter(|a| a.axis == axis) {
                let covered: usize = group.iter().filter(|b| b.axis == axis && b.label == a.label).map(|b| b.end - b.start).sum();
                if best.is_none_or(|(c, _)| covered > c) {
                    best = Some((covered, a.label));
                }
            }
            if let Some((_, label)) = best {
                present.push((axis, label));
            }
        }
        let seed = phrase_seed(seq.clip_id(), Region::Neck, start);
        let choices = present
            .iter()
            .map(|&(axis, label)| match label {
                NeckLabel::Turn(pos) => vocab.neck_phrases(axis, pos).len() as u64,
                NeckLabel::Sway => 1,
            })
            .max()
            .unwrap_or(1);
        let description = picker.pick(Region::Neck, seed, choices, |s| {
            let parts: Vec<&str> = present
                .iter()
                .map(|&(axis, label)| match label {
                    NeckLabel::Turn(pos) => {
                        let phrases = vocab.neck_phrases(axis, pos);
                        phrases[(s % phrases.len() as u64) as usize].as_str()
                    }
                    NeckLabel::Sway => vocab.sway_phrase(),
                })
                .collect();
            Vocabulary::neck_description(&parts)
        });
        let (s, e) = span_ms(start, end, fps);
        out.push(MotionSubtitle::new(s, e, Region::Neck, description).expect("valid neck subtitle"));
    }
    out
}

fn annotate_expression_region(
    seq: &FrameSequence,
    region: Region,
    vertices: &[usize],
    vocab: &Vocabulary,
    cfg: &AnnotatorConfig,
    picker: &mut PhrasePicker,
) -> Result<Vec<MotionSubtitle>, AnnotateError> {
    if seq.len() < 3 || vertices.is_empty() {
        return Ok(Vec::new());
    }
    let vel = region_velocity(seq, region, vertices)?;
    let mut intervals = Vec::new();
    for channel in AuChannel::ALL.into_iter().filter(|c| c.region() == region) {
        intervals.extend(detect_intervals(&vel, &seq.au_series(channel), channel, cfg.tau)?);
    }
    // AU1/AU4 (or AU12/AU15) intervals may collide; keep the earlier one,
    // and the larger change when onsets coincide
    intervals.sort_by(|a, b| {
        a.onset_frame
            .cmp(&b.onset_frame)
            .then(b.au_delta.abs().total_cmp(&a.au_delta.abs()))
            .then(a.au_channel.cmp(&b.au_channel))
    });
    let mut out: Vec<MotionSubtitle> = Vec::new();
    for interval in intervals {
        if intensity_class(interval.au_delta).is_none() {
            continue;
        }
        let (start, end) = span_ms(interval.onset_frame, interval.offset_frame, seq.fps());
        if end <= start || out.last().is_some_and(|prev| start < prev.end()) {
            continue;
        }
        let seed = phrase_seed(seq.clip_id(), region, interval.onset_frame);
        let motions = vocab.motion_phrases(interval.au_channel, interval.au_delta > 0.0).len() as u64;
        let class = intensity_class(interval.au_delta).expect("checked above");
        let choices = motions * vocab.intensity_phrases(class).len() as u64;
        let description = picker.pick(region, seed, choices, |s| {
            describe_brow_mouth(&interval, vocab, s).expect("above threshold")
        });
        out.push(MotionSubtitle::new(start, end, region, description).expect("valid subtitle"));
    }
    Ok(out)
}

/// Runs all four regional annotators and assembles the clip's document.
pub fn annotate_clip(
    seq: &FrameSequence,
    neutral: &NeutralFace,
    vocab: &Vocabulary,
    regions: &RegionConfig,
    cfg: &AnnotatorConfig,
) -> Result<SubtitleDocument, AnnotateError> {
    if !(cfg.tau > 0.0 && cfg.tau < 1.0) {
        return Err(AnnotateError::InvalidTau(cfg.tau));
    }
    regions.validate()?;
    let mut picker = PhrasePicker::default();
    let mut entries = Vec::new();
    entries.extend(annotate_expression_region(seq, Region::Eyebrows, &regions.eyebrows, vocab, cfg, &mut picker)?);
    entries.extend(annotate_expression_region(seq, Region::Mouth, &regions.mouth, vocab, cfg, &mut picker)?);
    entries.extend(annotate_eyes_with(seq, neutral, vocab, cfg, &mut picker));
    entries.extend(annotate_neck_with(seq, vocab, cfg, &mut picker));
    Ok(SubtitleDocument::new(seq.clip_id(), entries).expect("regional annotators never overlap"))
}
