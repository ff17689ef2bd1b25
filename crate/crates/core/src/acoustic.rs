//! Per-line acoustic levels: volume, pitch and singing rate bucketed into
//! low / moderate / high by interquartile thresholds.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::AcousticError;
use crate::model::LyricLine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Moderate,
    High,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Moderate => "moderate",
            Level::High => "high",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Precomputed features of one lyric line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFeatures {
    pub line: LyricLine,
    /// Mean level in dB.
    pub volume: f64,
    /// Mean F0 in Hz; `None` for unvoiced lines.
    pub pitch: Option<f64>,
    /// Non-whitespace characters per second.
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singer: Option<String>,
}

impl LineFeatures {
    pub fn new(line: LyricLine, volume: f64, pitch: Option<f64>) -> Result<Self, AcousticError> {
        if let Some(p) = pitch {
            if !(p.is_finite() && p > 0.0) {
                return Err(AcousticError::InvalidPitch(p));
            }
        }
        let rate = compute_rate(&line)?;
        Ok(Self { line, volume, pitch, rate, singer: None })
    }
}

/// One record of the lyric-features jsonl file.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub start: f64,
    pub end: f64,
    pub text: String,
    pub volume_db: f64,
    #[serde(default)]
    pub pitch_hz: Option<f64>,
    #[serde(default)]
    pub singer: Option<String>,
}

/// Reads `{start, end, text, volume_db, pitch_hz}` records, one per line.
pub fn load_lines(path: &Path) -> Result<Vec<LineFeatures>, AcousticError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |message: String| AcousticError::Parse { line: idx + 1, message };
        let rec: LineRecord = serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?;
        let lyric = LyricLine::new(rec.start, rec.end, rec.text).map_err(|e| perr(e.to_string()))?;
        let mut features = LineFeatures::new(lyric, rec.volume_db, rec.pitch_hz).map_err(|e| perr(e.to_string()))?;
        features.singer = rec.singer;
        out.push(features);
    }
    Ok(out)
}

/// Interquartile bounds of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureThresholds {
    pub p25: f64,
    pub p75: f64,
}

impl FeatureThresholds {
    pub fn new(p25: f64, p75: f64) -> Result<Self, AcousticError> {
        if !(p25 <= p75) {
            return Err(AcousticError::InvalidThresholds { p25, p75 });
        }
        Ok(Self { p25, p75 })
    }

    pub fn fit(values: &[f64]) -> Result<Self, AcousticError> {
        let (p25, p75) = percentile_thresholds(values)?;
        Ok(Self { p25, p75 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PerSinger,
    GlobalTraining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelThresholds {
    pub volume: FeatureThresholds,
    pub pitch: FeatureThresholds,
    pub rate: FeatureThresholds,
    pub provenance: Provenance,
}

impl LevelThresholds {
    /// Fits all three features; pitch uses voiced lines only.
    pub fn fit(lines: &[LineFeatures], provenance: Provenance) -> Result<Self, AcousticError> {
        let volumes: Vec<f64> = lines.iter().map(|l| l.volume).collect();
        let pitches: Vec<f64> = lines.iter().filter_map(|l| l.pitch).collect();
        let rates: Vec<f64> = lines.iter().map(|l| l.rate).collect();
        Ok(Self {
            volume: FeatureThresholds::fit(&volumes)?,
            pitch: FeatureThresholds::fit(&pitches)?,
            rate: FeatureThresholds::fit(&rates)?,
            provenance,
        })
    }

    pub fn load(path: &Path) -> Result<Self, AcousticError> {
        let text = std::fs::read_to_string(path)?;
        let t: LevelThresholds =
            serde_json::from_str(&text).map_err(|e| AcousticError::Parse { line: e.line(), message: e.to_string() })?;
        for f in [t.volume, t.pitch, t.rate] {
            FeatureThresholds::new(f.p25, f.p75)?;
        }
        Ok(t)
    }
}

/// Levels of one line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AcousticDescriptor {
    pub volume: Level,
    pub pitch: Level,
    pub rate: Level,
    #[serde(default)]
    pub unvoiced: bool,
}

impl AcousticDescriptor {
    pub fn new(volume: Level, pitch: Level, rate: Level) -> Self {
        Self { volume, pitch, rate, unvoiced: false }
    }

    pub fn levels(&self) -> [Level; 3] {
        [self.volume, self.pitch, self.rate]
    }

    /// Count of the three levels that agree with `other`.
    pub fn matches(&self, other: &AcousticDescriptor) -> usize {
        self.levels().iter().zip(other.levels()).filter(|(a, b)| **a == *b).count()
    }
}

impl fmt::Display for AcousticDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "volume={}, pitch={}, rate={}", self.volume, self.pitch, self.rate)?;
        if self.unvoiced {
            f.write_str(" (unvoiced)")?;
        }
        Ok(())
    }
}

/// 25th and 75th percentiles with linear interpolation between closest ranks.
pub fn percentile_thresholds(values: &[f64]) -> Result<(f64, f64), AcousticError> {
    if values.is_empty() {
        return Err(AcousticError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((percentile_sorted(&sorted, 0.25), percentile_sorted(&sorted, 0.75)))
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Values on either threshold are moderate.
pub fn classify_level(value: f64, t: &FeatureThresholds) -> Level {
    if value < t.p25 {
        Level::Low
    } else if value > t.p75 {
        Level::High
    } else {
        Level::Moderate
    }
}

pub fn describe_line(f: &LineFeatures, t: &LevelThresholds) -> AcousticDescriptor {
    let (pitch, unvoiced) = match f.pitch {
        Some(p) => (classify_level(p, &t.pitch), false),
        None => (Level::Moderate, true),
    };
    AcousticDescriptor {
        volume: classify_level(f.volume, &t.volume),
        pitch,
        rate: classify_level(f.rate, &t.rate),
        unvoiced,
    }
}

/// Descriptors for every line. Without `thresholds`, each singer's lines are
/// classified against thresholds fitted on that singer alone.
pub fn describe_lines(
    lines: &[LineFeatures],
    thresholds: Option<&LevelThresholds>,
) -> Result<Vec<AcousticDescriptor>, AcousticError> {
    if let Some(t) = thresholds {
        return Ok(lines.iter().map(|l| describe_line(l, t)).collect());
    }
    let mut groups: BTreeMap<Option<&str>, Vec<&LineFeatures>> = BTreeMap::new();
    for l in lines {
        groups.entry(l.singer.as_deref()).or_default().push(l);
    }
    let mut fitted = BTreeMap::new();
    for (singer, group) in &groups {
        let volumes: Vec<f64> = group.iter().map(|l| l.volume).collect();
        let pitches: Vec<f64> = group.iter().filter_map(|l| l.pitch).collect();
        let rates: Vec<f64> = group.iter().map(|l| l.rate).collect();
        let t = LevelThresholds {
            volume: FeatureThresholds::fit(&volumes)?,
            // a fully unvoiced singer never reads its pitch thresholds
            pitch: if pitches.is_empty() { FeatureThresholds { p25: 0.0, p75: 0.0 } } else { FeatureThresholds::fit(&pitches)? },
            rate: FeatureThresholds::fit(&rates)?,
            provenance: Provenance::PerSinger,
        };
        fitted.insert(*singer, t);
    }
    Ok(lines.iter().map(|l| describe_line(l, &fitted[&l.singer.as_deref()])).collect())
}

/// Non-whitespace characters per second of the raw span.
pub fn char_rate(text: &str, start: f64, end: f64) -> Result<f64, AcousticError> {
    let duration = end - start;
    if !(duration > 0.0) {
        return Err(AcousticError::DivisionByZero);
    }
    Ok(text.chars().filter(|c| !c.is_whitespace()).count() as f64 / duration)
}

pub fn compute_rate(line: &LyricLine) -> Result<f64, AcousticError> {
    char_rate(line.text(), line.start(), line.end())
}
