//! Clip-level domain types: per-frame facial measurements, the neutral face,
//! regions and lyric lines, plus frame-file ingestion.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ModelError;

/// Landmarks per frame (68-point convention).
pub const NUM_LANDMARKS: usize = 68;
/// Expression coefficients per frame.
pub const NUM_EXPRESSION: usize = 50;
/// Length of a per-frame parameter vector: expression ⊕ jaw ⊕ neck.
pub const PARAM_DIM: usize = NUM_EXPRESSION + 3 + 3;

pub type Point3 = [f64; 3];

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Facial action unit channels tracked by the annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuChannel {
    #[serde(rename = "AU1")]
    Au1,
    #[serde(rename = "AU4")]
    Au4,
    #[serde(rename = "AU12")]
    Au12,
    #[serde(rename = "AU15")]
    Au15,
}

impl AuChannel {
    pub const ALL: [AuChannel; 4] = [AuChannel::Au1, AuChannel::Au4, AuChannel::Au12, AuChannel::Au15];

    pub fn as_str(self) -> &'static str {
        match self {
            AuChannel::Au1 => "AU1",
            AuChannel::Au4 => "AU4",
            AuChannel::Au12 => "AU12",
            AuChannel::Au15 => "AU15",
        }
    }

    /// Region whose motion this channel describes.
    pub fn region(self) -> Region {
        match self {
            AuChannel::Au1 | AuChannel::Au4 => Region::Eyebrows,
            AuChannel::Au12 | AuChannel::Au15 => Region::Mouth,
        }
    }
}

impl fmt::Display for AuChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Normalized AU intensities for one frame, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuIntensities {
    #[serde(rename = "AU1")]
    pub au1: f64,
    #[serde(rename = "AU4")]
    pub au4: f64,
    #[serde(rename = "AU12")]
    pub au12: f64,
    #[serde(rename = "AU15")]
    pub au15: f64,
}

impl AuIntensities {
    pub fn get(&self, channel: AuChannel) -> f64 {
        match channel {
            AuChannel::Au1 => self.au1,
            AuChannel::Au4 => self.au4,
            AuChannel::Au12 => self.au12,
            AuChannel::Au15 => self.au15,
        }
    }

    pub fn set(&mut self, channel: AuChannel, value: f64) {
        match channel {
            AuChannel::Au1 => self.au1 = value,
            AuChannel::Au4 => self.au4 = value,
            AuChannel::Au12 => self.au12 = value,
            AuChannel::Au15 => self.au15 = value,
        }
    }
}

/// The four functional face regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Eyebrows,
    Eyes,
    Mouth,
    Neck,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::Eyebrows, Region::Eyes, Region::Mouth, Region::Neck];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Eyebrows => "eyebrows",
            Region::Eyes => "eyes",
            Region::Mouth => "mouth",
            Region::Neck => "neck",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eyebrows" => Ok(Region::Eyebrows),
            "eyes" => Ok(Region::Eyes),
            "mouth" => Ok(Region::Mouth),
            "neck" => Ok(Region::Neck),
            other => Err(format!("unknown region '{other}'")),
        }
    }
}

/// One frame of measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub landmarks: Vec<Point3>,
    pub au: AuIntensities,
    /// Degrees; x = vertical nod, y = horizontal turn, z = lateral tilt.
    pub neck: [f64; 3],
    pub jaw: [f64; 3],
    pub expression: Vec<f64>,
}

impl Frame {
    /// Parameter vector `expression ⊕ jaw ⊕ neck`.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PARAM_DIM);
        v.extend_from_slice(&self.expression);
        v.extend_from_slice(&self.jaw);
        v.extend_from_slice(&self.neck);
        v
    }
}

/// A validated clip of per-frame measurements at a fixed frame rate.
///
/// Instances can only be obtained through [`FrameSequence::new`] or
/// [`FrameSequence::from_parts`], both of which enforce the invariants:
/// at least two frames, positive fps, 68 finite landmarks per frame,
/// AU intensities in `[0, 1]` and 50 expression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    clip_id: String,
    fps: f64,
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(clip_id: impl Into<String>, fps: f64, frames: Vec<Frame>) -> Result<Self, ModelError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(ModelError::invariant(None, format!("fps must be positive, got {fps}")));
        }
        if frames.len() < 2 {
            return Err(ModelError::invariant(
                None,
                format!("a clip needs at least 2 frames, got {}", frames.len()),
            ));
        }
        for (i, frame) in frames.iter().enumerate() {
            validate_frame(frame).map_err(|msg| ModelError::invariant(Some(i + 1), msg))?;
        }
        Ok(Self { clip_id: clip_id.into(), fps, frames })
    }

    /// Builds a clip from per-channel columns, checking they have equal length.
    pub fn from_parts(
        clip_id: impl Into<String>,
        fps: f64,
        landmarks: Vec<Vec<Point3>>,
        au: Vec<AuIntensities>,
        neck: Vec<[f64; 3]>,
        jaw: Vec<[f64; 3]>,
        expression: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let n = landmarks.len();
        let lens = [
            ("au", au.len()),
            ("neck", neck.len()),
            ("jaw", jaw.len()),
            ("expr", expression.len()),
        ];
        if let Some((name, len)) = lens.iter().find(|(_, len)| *len != n) {
            return Err(ModelError::invariant(
                None,
                format!("length mismatch: landmarks has {n} rows, {name} has {len}"),
            ));
        }
        let frames = landmarks
            .into_iter()
            .zip(au)
            .zip(neck)
            .zip(jaw)
            .zip(expression)
            .map(|((((landmarks, au), neck), jaw), expression)| Frame { landmarks, au, neck, jaw, expression })
            .collect();
        Self::new(clip_id, fps, frames)
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Timestamp of frame `i` in seconds.
    pub fn time_of(&self, i: usize) -> f64 {
        i as f64 / self.fps
    }

    /// Clip duration in seconds (`len / fps`).
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    /// AU intensity series of one channel.
    pub fn au_series(&self, channel: AuChannel) -> Vec<f64> {
        self.frames.iter().map(|f| f.au.get(channel)).collect()
    }

    /// Per-frame parameter vectors (expression ⊕ jaw ⊕ neck).
    pub fn params(&self) -> Vec<Vec<f64>> {
        self.frames.iter().map(Frame::params).collect()
    }
}

fn validate_frame(frame: &Frame) -> Result<(), String> {
    if frame.landmarks.len() != NUM_LANDMARKS {
        return Err(format!("expected {NUM_LANDMARKS} landmarks, got {}", frame.landmarks.len()));
    }
    if frame.landmarks.iter().flatten().any(|c| !c.is_finite()) {
        return Err("landmark coordinates must be finite".into());
    }
    for ch in AuChannel::ALL {
        let v = frame.au.get(ch);
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("{ch} = {v} is outside [0, 1]"));
        }
    }
    if frame.expression.len() != NUM_EXPRESSION {
        return Err(format!("expected {NUM_EXPRESSION} expression coefficients, got {}", frame.expression.len()));
    }
    if frame.neck.iter().chain(&frame.jaw).chain(&frame.expression).any(|c| !c.is_finite()) {
        return Err("pose and expression values must be finite".into());
    }
    Ok(())
}

/// Standard 68-landmark eyelid pairs (upper, lower): two per eye.
pub const DEFAULT_EYELID_PAIRS: [(usize, usize); 4] = [(37, 41), (38, 40), (43, 47), (44, 46)];

/// Landmarks of the neutral pose plus the eyelid pairing used for eye openness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NeutralFaceRaw")]
pub struct NeutralFace {
    landmarks: Vec<Point3>,
    eyelid_pairs: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct NeutralFaceRaw {
    landmarks: Vec<Point3>,
    #[serde(default)]
    eyelid_pairs: Option<Vec<(usize, usize)>>,
}

impl TryFrom<NeutralFaceRaw> for NeutralFace {
    type Error = ModelError;

    fn try_from(raw: NeutralFaceRaw) -> Result<Self, Self::Error> {
        NeutralFace::new(raw.landmarks, raw.eyelid_pairs.unwrap_or_else(|| DEFAULT_EYELID_PAIRS.to_vec()))
    }
}

impl NeutralFace {
    pub fn new(landmarks: Vec<Point3>, eyelid_pairs: Vec<(usize, usize)>) -> Result<Self, ModelError> {
        if landmarks.len() != NUM_LANDMARKS {
            return Err(ModelError::invariant(
                None,
                format!("neutral face needs {NUM_LANDMARKS} landmarks, got {}", landmarks.len()),
            ));
        }
        if landmarks.iter().flatten().any(|c| !c.is_finite()) {
            return Err(ModelError::invariant(None, "neutral landmarks must be finite"));
        }
        if eyelid_pairs.is_empty() {
            return Err(ModelError::invariant(None, "at least one eyelid pair is required"));
        }
        if let Some(&(a, b)) = eyelid_pairs.iter().find(|(a, b)| *a >= NUM_LANDMARKS || *b >= NUM_LANDMARKS) {
            return Err(ModelError::invariant(None, format!("eyelid pair ({a}, {b}) out of range")));
        }
        Ok(Self { landmarks, eyelid_pairs })
    }

    /// Neutral face using the default eyelid pairing.
    pub fn with_default_pairs(landmarks: Vec<Point3>) -> Result<Self, ModelError> {
        Self::new(landmarks, DEFAULT_EYELID_PAIRS.to_vec())
    }

    pub fn landmarks(&self) -> &[Point3] {
        &self.landmarks
    }

    pub fn eyelid_pairs(&self) -> &[(usize, usize)] {
        &self.eyelid_pairs
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let file = File::open(path)?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| ModelError::parse(e.line(), e.to_string()))
    }
}

/// A lyric line with its time span in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LyricLineRaw")]
pub struct LyricLine {
    start: f64,
    end: f64,
    text: String,
}

#[derive(Deserialize)]
struct LyricLineRaw {
    start: f64,
    end: f64,
    text: String,
}

impl TryFrom<LyricLineRaw> for LyricLine {
    type Error = ModelError;

    fn try_from(raw: LyricLineRaw) -> Result<Self, Self::Error> {
        LyricLine::new(raw.start, raw.end, raw.text)
    }
}

impl LyricLine {
    pub fn new(start: f64, end: f64, text: impl Into<String>) -> Result<Self, ModelError> {
        if !(start.is_finite() && end.is_finite() && start >= 0.0 && end > start) {
            return Err(ModelError::invariant(None, format!("lyric line needs 0 <= start < end, got {start}..{end}")));
        }
        Ok(Self { start, end, text: text.into() })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

// ---------------------------------------------------------------------------
// Frame files

/// On-disk layout of a frame file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameFormat {
    Jsonl,
    Csv,
}

impl FrameFormat {
    /// Guesses the format from the file extension, defaulting to jsonl.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FrameFormat::Csv,
            _ => FrameFormat::Jsonl,
        }
    }
}

impl FromStr for FrameFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(FrameFormat::Jsonl),
            "csv" => Ok(FrameFormat::Csv),
            other => Err(format!("unknown frame format '{other}'")),
        }
    }
}

/// Loads and validates a frame file.
///
/// Row numbers in errors count frame records from 1 (the jsonl header and the
/// csv header row are not counted); parse errors additionally carry the file
/// line number.
pub fn load_frames(path: &Path, format: FrameFormat) -> Result<FrameSequence, ModelError> {
    let file = File::open(path)?;
    match format {
        FrameFormat::Jsonl => read_jsonl(BufReader::new(file)),
        FrameFormat::Csv => read_csv(BufReader::new(file)),
    }
}

/// Writes a clip in the given format with 6 decimal digits per value.
pub fn save_frames(seq: &FrameSequence, path: &Path, format: FrameFormat) -> Result<(), ModelError> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        FrameFormat::Jsonl => write_jsonl(seq, &mut out)?,
        FrameFormat::Csv => write_csv(seq, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Default)]
struct Columns {
    landmarks: Vec<Vec<Point3>>,
    au: Vec<AuIntensities>,
    neck: Vec<[f64; 3]>,
    jaw: Vec<[f64; 3]>,
    expression: Vec<Vec<f64>>,
}

impl Columns {
    fn finish(self, clip_id: String, fps: f64) -> Result<FrameSequence, ModelError> {
        FrameSequence::from_parts(clip_id, fps, self.landmarks, self.au, self.neck, self.jaw, self.expression)
    }
}

fn read_jsonl(reader: impl BufRead) -> Result<FrameSequence, ModelError> {
    let mut header: Option<(String, f64)> = None;
    let mut cols = Columns::default();
    let mut row = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| ModelError::parse(line_no, format!("invalid json: {e}")))?;
        let obj = value.as_object().ok_or_else(|| ModelError::parse(line_no, "record is not an object"))?;
        if header.is_none() {
            let clip_id = obj
                .get("clip_id")
                .and_then(Value::as_str)
                .ok_or_else(|| ModelError::parse(line_no, "header record needs a string `clip_id`"))?;
            let fps = obj
                .get("fps")
                .and_then(Value::as_f64)
                .ok_or_else(|| ModelError::parse(line_no, "header record needs a numeric `fps`"))?;
            header = Some((clip_id.to_string(), fps));
            continue;
        }
        row += 1;
        let perr = |msg: String| ModelError::parse(line_no, format!("row {row}: {msg}"));
        if let Some(v) = obj.get("landmarks") {
            let pts: Vec<Point3> = serde_json::from_value(v.clone()).map_err(|e| perr(format!("landmarks: {e}")))?;
            cols.landmarks.push(pts);
        }
        if let Some(v) = obj.get("au") {
            let au: AuIntensities = serde_json::from_value(v.clone()).map_err(|e| perr(format!("au: {e}")))?;
            check_au(&au, row)?;
            cols.au.push(au);
        }
        if let Some(v) = obj.get("neck") {
            cols.neck.push(serde_json::from_value(v.clone()).map_err(|e| perr(format!("neck: {e}")))?);
        }
        if let Some(v) = obj.get("jaw") {
            cols.jaw.push(serde_json::from_value(v.clone()).map_err(|e| perr(format!("jaw: {e}")))?);
        }
        if let Some(v) = obj.get("expr") {
            cols.expression.push(serde_json::from_value(v.clone()).map_err(|e| perr(format!("expr: {e}")))?);
        }
    }
    let (clip_id, fps) = header.ok_or_else(|| ModelError::parse(1, "missing header record"))?;
    cols.finish(clip_id, fps)
}

fn check_au(au: &AuIntensities, row: usize) -> Result<(), ModelError> {
    for ch in AuChannel::ALL {
        let v = au.get(ch);
        if !(0.0..=1.0).contains(&v) {
            return Err(ModelError::invariant(Some(row), format!("{ch} = {v} is outside [0, 1]")));
        }
    }
    Ok(())
}

fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn write_jsonl(seq: &FrameSequence, out: &mut impl Write) -> Result<(), ModelError> {
    let header = serde_json::json!({ "clip_id": seq.clip_id, "fps": seq.fps });
    writeln!(out, "{header}")?;
    for frame in &seq.frames {
        let r3 = |p: &[f64; 3]| [round6(p[0]), round6(p[1]), round6(p[2])];
        let rec = serde_json::json!({
            "landmarks": frame.landmarks.iter().map(r3).collect::<Vec<_>>(),
            "au": {
                "AU1": round6(frame.au.au1),
                "AU4": round6(frame.au.au4),
                "AU12": round6(frame.au.au12),
                "AU15": round6(frame.au.au15),
            },
            "neck": r3(&frame.neck),
            "jaw": r3(&frame.jaw),
            "expr": frame.expression.iter().map(|&v| round6(v)).collect::<Vec<_>>(),
        });
        writeln!(out, "{rec}")?;
    }
    Ok(())
}

/// Column names of the csv layout, in order.
pub fn csv_header() -> Vec<String> {
    let mut cols = vec!["clip_id".to_string(), "fps".to_string()];
    for i in 0..NUM_LANDMARKS {
        for axis in ["x", "y", "z"] {
            cols.push(format!("lm{i}_{axis}"));
        }
    }
    cols.extend(AuChannel::ALL.iter().map(|c| c.as_str().to_string()));
    for group in ["neck", "jaw"] {
        for axis in ["x", "y", "z"] {
            cols.push(format!("{group}_{axis}"));
        }
    }
    cols.extend((0..NUM_EXPRESSION).map(|i| format!("expr{i}")));
    cols
}

fn read_csv(reader: impl std::io::Read) -> Result<FrameSequence, ModelError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let expected = csv_header();
    let headers = rdr.headers().map_err(|e| ModelError::parse(1, e.to_string()))?.clone();
    if headers.len() != expected.len() || headers.iter().zip(&expected).any(|(a, b)| a.trim() != b) {
        return Err(ModelError::parse(1, "csv header does not match the documented column order"));
    }
    let mut meta: Option<(String, f64)> = None;
    let mut cols = Columns::default();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let line_no = row + 1;
        let record = record.map_err(|e| ModelError::parse(line_no, e.to_string()))?;
        if record.len() != expected.len() {
            return Err(ModelError::parse(line_no, format!("row {row}: expected {} fields", expected.len())));
        }
        let num = |i: usize| -> Result<f64, ModelError> {
            let field = record[i].trim();
            field
                .parse::<f64>()
                .map_err(|_| ModelError::parse(line_no, format!("row {row}: column `{}` is not a number: '{field}'", expected[i])))
        };
        let clip_id = record[0].trim().to_string();
        let fps = num(1)?;
        match &meta {
            None => meta = Some((clip_id, fps)),
            Some((c, f)) if *c != clip_id || *f != fps => {
                return Err(ModelError::parse(line_no, format!("row {row}: clip_id/fps differ from the first row")));
            }
            Some(_) => {}
        }
        let mut col = 2;
        let mut landmarks = Vec::with_capacity(NUM_LANDMARKS);
        for _ in 0..NUM_LANDMARKS {
            landmarks.push([num(col)?, num(col + 1)?, num(col + 2)?]);
            col += 3;
        }
        let mut au = AuIntensities::default();
        for ch in AuChannel::ALL {
            au.set(ch, num(col)?);
            col += 1;
        }
        check_au(&au, row)?;
        let neck = [num(col)?, num(col + 1)?, num(col + 2)?];
        let jaw = [num(col + 3)?, num(col + 4)?, num(col + 5)?];
        col += 6;
        let expression = (col..col + NUM_EXPRESSION).map(num).collect::<Result<Vec<_>, _>>()?;
        cols.landmarks.push(landmarks);
        cols.au.push(au);
        cols.neck.push(neck);
        cols.jaw.push(jaw);
        cols.expression.push(expression);
    }
    let (clip_id, fps) = meta.ok_or_else(|| ModelError::invariant(None, "a clip needs at least 2 frames, got 0"))?;
    cols.finish(clip_id, fps)
}

fn write_csv(seq: &FrameSequence, out: &mut impl Write) -> Result<(), ModelError> {
    let mut wtr = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| ModelError::Io(std::io::Error::other(e));
    wtr.write_record(csv_header()).map_err(to_err)?;
    for frame in &seq.frames {
        let mut rec = vec![seq.clip_id.clone(), seq.fps.to_string()];
        rec.extend(frame.landmarks.iter().flatten().map(|&v| round6(v).to_string()));
        rec.extend(AuChannel::ALL.iter().map(|&c| round6(frame.au.get(c)).to_string()));
        rec.extend(frame.neck.iter().chain(&frame.jaw).map(|&v| round6(v).to_string()));
        rec.extend(frame.expression.iter().map(|&v| round6(v).to_string()));
        wtr.write_record(&rec).map_err(to_err)?;
    }
    wtr.flush()?;
    Ok(())
}
