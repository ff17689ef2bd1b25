//! Single-line motion subtitle files.
//!
//! Each entry occupies one line:
//!
//! ```text
//! 00:00:01,000 --> 00:00:02,500: eyebrows raise slightly
//! ```
//!
//! Timestamps are emitted as `HH:MM:SS,mmm`. Bare seconds (`1.25`) are
//! accepted on input. Times are held at millisecond resolution; finer input
//! is truncated toward zero.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::model::Region;

/// A point in time with millisecond resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Timestamp(u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn from_millis(ms: u64) -> Self {
        Timestamp(ms)
    }

    /// Truncates toward zero. Negative or non-finite input is rejected.
    pub fn from_secs(secs: f64) -> Option<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        // the small bias absorbs binary representation error, e.g. 0.3 * 1000 = 299.99999999999994
        let ms = (secs * 1000.0 + 1e-6).floor();
        if ms > u64::MAX as f64 {
            return None;
        }
        Some(Timestamp(ms as u64))
    }

    /// Frame index to timestamp, truncated to milliseconds.
    pub fn from_frame(frame: usize, fps: f64) -> Self {
        Timestamp::from_secs(frame as f64 / fps).unwrap_or(Timestamp::ZERO)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn secs(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 % 1000;
        let total_secs = self.0 / 1000;
        let s = total_secs % 60;
        let m = (total_secs / 60) % 60;
        let h = total_secs / 3600;
        write!(f, "{h:02}:{m:02}:{s:02},{ms:03}")
    }
}

/// Parses `HH:MM:SS,mmm` (`.` also accepted as the millisecond separator) or bare seconds.
pub fn parse_timestamp(text: &str) -> Result<Timestamp, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty timestamp".into());
    }
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("bad timestamp '{text}'"));
        }
        let hours = parse_digits(parts[0]).ok_or_else(|| format!("bad hours in '{text}'"))?;
        let minutes = parse_digits(parts[1]).ok_or_else(|| format!("bad minutes in '{text}'"))?;
        let (sec_part, ms_part) = match parts[2].split_once([',', '.']) {
            Some((s, ms)) => (s, Some(ms)),
            None => (parts[2], None),
        };
        let seconds = parse_digits(sec_part).ok_or_else(|| format!("bad seconds in '{text}'"))?;
        if minutes >= 60 || seconds >= 60 {
            return Err(format!("minutes/seconds out of range in '{text}'"));
        }
        let millis = match ms_part {
            None => 0,
            Some(frac) => {
                if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(format!("bad milliseconds in '{text}'"));
                }
                // keep the first three digits: truncation toward zero
                let padded = format!("{frac:0<3}");
                padded[..3].parse::<u64>().map_err(|_| format!("bad milliseconds in '{text}'"))?
            }
        };
        let total = hours
            .checked_mul(3600)
            .and_then(|h| h.checked_add(minutes * 60 + seconds))
            .and_then(|s| s.checked_mul(1000))
            .and_then(|ms| ms.checked_add(millis))
            .ok_or_else(|| format!("timestamp overflow in '{text}'"))?;
        Ok(Timestamp(total))
    } else {
        if !text.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
            return Err(format!("bad timestamp '{text}'"));
        }
        let secs: f64 = text.parse().map_err(|_| format!("bad timestamp '{text}'"))?;
        Timestamp::from_secs(secs).ok_or_else(|| format!("bad timestamp '{text}'"))
    }
}

fn parse_digits(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// One timestamped, region-tagged motion description.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionSubtitle {
    start: Timestamp,
    end: Timestamp,
    region: Region,
    description: String,
}

impl MotionSubtitle {
    /// The description is trimmed; it must be non-empty and single-line, and `end > start`.
    pub fn new(start: Timestamp, end: Timestamp, region: Region, description: impl Into<String>) -> Result<Self, String> {
        if end <= start {
            return Err("end before start".into());
        }
        let description = description.into();
        let description = description.trim();
        if description.is_empty() {
            return Err("empty description".into());
        }
        if description.contains(['\n', '\r']) {
            return Err("description spans several lines".into());
        }
        Ok(Self { start, end, region, description: description.to_string() })
    }

    pub fn from_secs(start: f64, end: f64, region: Region, description: impl Into<String>) -> Result<Self, String> {
        let s = Timestamp::from_secs(start).ok_or("bad start time")?;
        let e = Timestamp::from_secs(end).ok_or("bad end time")?;
        Self::new(s, e, region, description)
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn duration_ms(&self) -> u64 {
        self.end.0 - self.start.0
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        (self.start, self.region, self.end, &self.description).cmp(&(other.start, other.region, other.end, &other.description))
    }
}

impl fmt::Display for MotionSubtitle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} --> {}: {} {}", self.start, self.end, self.region, self.description)
    }
}

/// Parses one template line. `line_no` is only used for error reporting.
pub fn parse_line(line: &str, line_no: usize) -> Result<MotionSubtitle, FormatError> {
    let line = line.trim();
    let (start_text, rest) = line
        .split_once("-->")
        .ok_or_else(|| FormatError::new(line_no, "missing '-->' separator"))?;
    let (end_text, body) = rest
        .split_once(": ")
        .or_else(|| rest.trim_end().strip_suffix(':').map(|e| (e, "")))
        .ok_or_else(|| FormatError::new(line_no, "missing ': ' after end timestamp"))?;
    let start = parse_timestamp(start_text).map_err(|r| FormatError::new(line_no, r))?;
    let end = parse_timestamp(end_text).map_err(|r| FormatError::new(line_no, r))?;
    let body = body.trim();
    let (region_text, description) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
    if region_text.is_empty() {
        return Err(FormatError::new(line_no, "missing region"));
    }
    let region: Region = region_text.parse().map_err(|r: String| FormatError::new(line_no, r))?;
    if end <= start {
        return Err(FormatError::new(line_no, "end before start"));
    }
    MotionSubtitle::new(start, end, region, description).map_err(|r| FormatError::new(line_no, r))
}

/// All subtitles of one clip, sorted by `(start, region)`, non-overlapping within a region.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubtitleDocument {
    pub clip_id: String,
    entries: Vec<MotionSubtitle>,
}

impl SubtitleDocument {
    /// Sorts the entries into canonical order and rejects same-region overlaps.
    pub fn new(clip_id: impl Into<String>, mut entries: Vec<MotionSubtitle>) -> Result<Self, String> {
        entries.sort_by(MotionSubtitle::canonical_cmp);
        if let Some((a, b)) = find_overlap(&entries) {
            return Err(format!("overlapping {} entries: '{}' and '{}'", a.region, a, b));
        }
        Ok(Self { clip_id: clip_id.into(), entries })
    }

    pub fn empty(clip_id: impl Into<String>) -> Self {
        Self { clip_id: clip_id.into(), entries: Vec::new() }
    }

    pub fn entries(&self) -> &[MotionSubtitle] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_region(&self, region: Region) -> impl Iterator<Item = &MotionSubtitle> {
        self.entries.iter().filter(move |e| e.region == region)
    }
}

/// First pair of same-region entries whose time spans intersect (touching is allowed).
pub fn find_overlap(entries: &[MotionSubtitle]) -> Option<(&MotionSubtitle, &MotionSubtitle)> {
    for region in Region::ALL {
        let mut spans: Vec<&MotionSubtitle> = entries.iter().filter(|e| e.region == region).collect();
        spans.sort_by_key(|e| (e.start, e.end));
        for pair in spans.windows(2) {
            if pair[1].start < pair[0].end {
                return Some((pair[0], pair[1]));
            }
        }
    }
    None
}

/// Strict parse: blank lines and `#` comments are skipped, every other line must match.
pub fn parse_subtitles(text: &str) -> Result<SubtitleDocument, FormatError> {
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        entries.push(parse_line(trimmed, idx + 1)?);
        lines.push(idx + 1);
    }
    let doc_entries = entries.clone();
    SubtitleDocument::new(String::new(), doc_entries).map_err(|_| {
        // report the later line of the first offending pair
        let (_, b) = find_overlap(&entries).expect("overlap reported");
        let pos = entries.iter().position(|e| e == b).unwrap_or(0);
        FormatError::new(lines[pos], format!("overlaps an earlier {} entry", b.region))
    })
}

/// Parses and tags the document with a clip id.
pub fn parse_subtitles_for(clip_id: &str, text: &str) -> Result<SubtitleDocument, FormatError> {
    let mut doc = parse_subtitles(text)?;
    doc.clip_id = clip_id.to_string();
    Ok(doc)
}

/// Canonical rendering: one entry per line, each terminated by `\n`.
pub fn emit_subtitles(doc: &SubtitleDocument) -> String {
    let mut out = String::new();
    for entry in &doc.entries {
        out.push_str(&entry.to_string());
        out.push('\n');
    }
    out
}

/// Result of scanning free text for subtitle lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScannedLines {
    pub entries: Vec<(usize, MotionSubtitle)>,
    pub rejected: Vec<(usize, String, FormatError)>,
}

/// Lenient scan used on model completions: lines without `-->` are treated
/// as prose and ignored; lines with it must parse or are reported as rejected.
pub fn scan_subtitles(text: &str) -> ScannedLines {
    let mut out = ScannedLines::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_start_matches(['-', '*', '`']).trim();
        if !line.contains("-->") {
            continue;
        }
        match parse_line(line, idx + 1) {
            Ok(sub) => out.entries.push((idx + 1, sub)),
            Err(e) => out.rejected.push((idx + 1, line.to_string(), e)),
        }
    }
    out
}
