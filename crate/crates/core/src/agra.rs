//! Acoustic-guided retrieval of reference subtitle units.
//!
//! A query unit is a lyric line with its acoustic levels and text embedding.
//! References are scored by
//!
//! ```text
//! score = alpha * cos(e_query, e_ref) + beta * (matching levels / 3)
//! ```
//!
//! and returned best first; equal scores keep corpus order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustic::AcousticDescriptor;
use crate::embed::{normalize, Embedder};
use crate::error::{AgraError, EmbedError};
use crate::model::{LyricLine, Region};
use crate::srt::{MotionSubtitle, SubtitleDocument, Timestamp};

const INDEX_FORMAT: &str = "agra-index";
const INDEX_VERSION: u32 = 1;

/// One corpus entry before embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub start: f64,
    pub end: f64,
    pub lyric: String,
    pub acoustic: AcousticDescriptor,
    pub motions: BTreeMap<Region, String>,
}

/// An indexed reference: a corpus entry plus its unit-norm text embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceUnit {
    pub start: f64,
    pub end: f64,
    pub lyric: String,
    pub acoustic: AcousticDescriptor,
    pub motions: BTreeMap<Region, String>,
    pub text_embedding: Vec<f64>,
}

impl ReferenceUnit {
    /// The unit's motions as template lines, in region order.
    pub fn subtitle_lines(&self) -> Vec<String> {
        let start = Timestamp::from_secs(self.start).unwrap_or_default();
        let end = Timestamp::from_secs(self.end).unwrap_or_default();
        self.motions
            .iter()
            .filter_map(|(&region, d)| MotionSubtitle::new(start, end, region, d.as_str()).ok())
            .map(|s| s.to_string())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: u32,
    embedder_id: String,
    dim: usize,
    count: usize,
}

/// Immutable, searchable reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtitleIndex {
    units: Vec<ReferenceUnit>,
    embedder_id: String,
    dim: usize,
}

impl SubtitleIndex {
    pub fn units(&self) -> &[ReferenceUnit] {
        &self.units
    }

    pub fn unit(&self, i: usize) -> &ReferenceUnit {
        &self.units[i]
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes a jsonl file: a header record `{format, version, embedder_id, dim, count}`
    /// followed by one unit per line.
    pub fn save(&self, path: &Path) -> Result<(), AgraError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<(), AgraError> {
        let header = IndexHeader {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            embedder_id: self.embedder_id.clone(),
            dim: self.dim,
            count: self.units.len(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        for unit in &self.units {
            writeln!(out, "{}", serde_json::to_string(unit).expect("unit serializes"))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgraError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self, AgraError> {
        let mut lines = reader.lines().enumerate();
        let ferr = |line: usize, message: String| AgraError::Format { line, message };
        let (_, first) = lines.next().ok_or_else(|| ferr(1, "missing header".into()))?;
        let header: IndexHeader = serde_json::from_str(&first?).map_err(|e| ferr(1, e.to_string()))?;
        if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
            return Err(ferr(1, format!("unsupported index format {} v{}", header.format, header.version)));
        }
        let mut units = Vec::with_capacity(header.count);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let unit: ReferenceUnit = serde_json::from_str(&line).map_err(|e| ferr(idx + 1, e.to_string()))?;
            if unit.text_embedding.len() != header.dim {
                return Err(ferr(idx + 1, format!("embedding has dimension {}, header says {}", unit.text_embedding.len(), header.dim)));
            }
            units.push(unit);
        }
        if units.len() != header.count {
            return Err(ferr(1, format!("header announces {} units, file has {}", header.count, units.len())));
        }
        Ok(Self { units, embedder_id: header.embedder_id, dim: header.dim })
    }
}

/// Embeds every corpus entry's lyric and assembles the index.
pub fn build_index(corpus: &[CorpusEntry], embedder: &dyn Embedder) -> Result<SubtitleIndex, AgraError> {
    if corpus.is_empty() {
        return Err(AgraError::EmptyCorpus);
    }
    let dim = embedder.dim();
    let embeddings: Vec<Vec<f64>> = corpus
        .par_iter()
        .enumerate()
        .map(|(entry, c)| {
            let v = embedder.embed(&c.lyric).map_err(|source| AgraError::Embedder { entry, source })?;
            if v.len() != dim {
                return Err(AgraError::Embedder { entry, source: EmbedError::Dimension { expected: dim, got: v.len() } });
            }
            normalize(v).map_err(|source| AgraError::Embedder { entry, source })
        })
        .collect::<Result<_, _>>()?;
    let units = corpus
        .iter()
        .zip(embeddings)
        .map(|(c, text_embedding)| ReferenceUnit {
            start: c.start,
            end: c.end,
            lyric: c.lyric.clone(),
            acoustic: c.acoustic,
            motions: c.motions.clone(),
            text_embedding,
        })
        .collect();
    Ok(SubtitleIndex { units, embedder_id: embedder.id(), dim })
}

/// One line of a multimodal query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryUnit {
    pub line: LyricLine,
    pub acoustic: AcousticDescriptor,
    pub text_embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    units: Vec<QueryUnit>,
}

impl Query {
    pub fn new(units: Vec<QueryUnit>) -> Result<Self, AgraError> {
        if units.is_empty() {
            return Err(AgraError::EmptyQuery);
        }
        let units = units
            .into_iter()
            .enumerate()
            .map(|(entry, mut u)| {
                u.text_embedding = normalize(u.text_embedding).map_err(|source| AgraError::Embedder { entry, source })?;
                Ok(u)
            })
            .collect::<Result<_, AgraError>>()?;
        Ok(Self { units })
    }

    /// Embeds each lyric line with `embedder`.
    pub fn embed(
        lines: &[(LyricLine, AcousticDescriptor)],
        embedder: &dyn Embedder,
    ) -> Result<Self, AgraError> {
        let units = lines
            .iter()
            .enumerate()
            .map(|(entry, (line, acoustic))| {
                let text_embedding = embedder.embed(line.text()).map_err(|source| AgraError::Embedder { entry, source })?;
                Ok(QueryUnit { line: line.clone(), acoustic: *acoustic, text_embedding })
            })
            .collect::<Result<Vec<_>, AgraError>>()?;
        Self::new(units)
    }

    pub fn units(&self) -> &[QueryUnit] {
        &self.units
    }
}

/// Convex weights of text similarity (`alpha`) and acoustic agreement (`beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalWeights {
    alpha: f64,
    beta: f64,
}

impl Default for RetrievalWeights {
    fn default() -> Self {
        Self { alpha: 0.7, beta: 0.3 }
    }
}

impl RetrievalWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, AgraError> {
        if !(alpha >= 0.0 && beta >= 0.0 && ((alpha + beta) - 1.0).abs() <= 1e-9) {
            return Err(AgraError::InvalidWeights { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// A scored reference, identified by its position in the index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub score: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Score of one reference for one query unit.
pub fn score(unit: &QueryUnit, reference: &ReferenceUnit, weights: RetrievalWeights) -> f64 {
    let text = cosine(&unit.text_embedding, &reference.text_embedding);
    let acoustic = unit.acoustic.matches(&reference.acoustic) as f64 / 3.0;
    weights.alpha * text + weights.beta * acoustic
}

/// Top-`k` references per query unit.
pub fn retrieve(
    index: &SubtitleIndex,
    query: &Query,
    k: usize,
    weights: RetrievalWeights,
) -> Result<Vec<Vec<Hit>>, AgraError> {
    if index.is_empty() {
        return Err(AgraError::EmptyIndex);
    }
    if k == 0 {
        return Err(AgraError::InvalidK);
    }
    query
        .units
        .iter()
        .map(|unit| {
            if unit.text_embedding.len() != index.dim {
                return Err(AgraError::DimensionMismatch { expected: index.dim, got: unit.text_embedding.len() });
            }
            let mut hits: Vec<Hit> = index
                .units
                .iter()
                .enumerate()
                .map(|(i, r)| Hit { index: i, score: score(unit, r, weights) })
                .collect();
            hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
            hits.truncate(k);
            Ok(hits)
        })
        .collect()
}

/// Merges per-line hits into one list: each reference once with its best score,
/// ordered like [`retrieve`].
pub fn merge_hits(per_line: &[Vec<Hit>], k: usize) -> Vec<Hit> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for hit in per_line.iter().flatten() {
        let e = best.entry(hit.index).or_insert(hit.score);
        if hit.score > *e {
            *e = hit.score;
        }
    }
    let mut hits: Vec<Hit> = best.into_iter().map(|(index, score)| Hit { index, score }).collect();
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    hits.truncate(k);
    hits
}

/// Builds corpus entries from annotated clips: each lyric line collects, per
/// region, the first subtitle overlapping its span.
pub fn corpus_from_annotations(
    lines: &[(LyricLine, AcousticDescriptor)],
    doc: &SubtitleDocument,
) -> Vec<CorpusEntry> {
    lines
        .iter()
        .map(|(line, acoustic)| {
            let mut motions = BTreeMap::new();
            for e in doc.entries() {
                if e.start().secs() < line.end() && e.end().secs() > line.start() {
                    motions.entry(e.region()).or_insert_with(|| e.description().to_string());
                }
            }
            CorpusEntry {
                start: line.start(),
                end: line.end(),
                lyric: line.text().to_string(),
                acoustic: *acoustic,
                motions,
            }
        })
        .collect()
}

/// Reads corpus entries, one JSON object per line.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusEntry>, AgraError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AgraError::Format { line: idx + 1, message: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::Level;
    use crate::embed::HashingEmbedder;

    fn entry(lyric: &str, acoustic: AcousticDescriptor) -> CorpusEntry {
        let mut motions = BTreeMap::new();
        motions.insert(Region::Mouth, "smile slightly".to_string());
        CorpusEntry { start: 0.0, end: 1.0, lyric: lyric.into(), acoustic, motions }
    }

    fn mid() -> AcousticDescriptor {
        AcousticDescriptor::new(Level::Moderate, Level::Moderate, Level::Moderate)
    }

    struct FixedDim(usize);

    impl Embedder for FixedDim {
        fn id(&self) -> String {
            "fixed".into()
        }
        fn dim(&self) -> usize {
            4
        }
        fn embed(&self, _: &str) -> Result<Vec<f64>, EmbedError> {
            Ok(vec![1.0; self.0])
        }
    }

    #[test]
    fn single_entry_index() {
        let idx = build_index(&[entry("hello", mid())], &HashingEmbedder::new(16)).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.dim(), 16);
        assert!(matches!(build_index(&[], &HashingEmbedder::new(16)), Err(AgraError::EmptyCorpus)));
    }

    #[test]
    fn mismatched_provider_dims() {
        let err = build_index(&[entry("a", mid())], &FixedDim(3)).unwrap_err();
        assert!(matches!(err, AgraError::Embedder { entry: 0, source: EmbedError::Dimension { expected: 4, got: 3 } }));
    }

    #[test]
    fn identical_query_scores_one() {
        let e = HashingEmbedder::new(32);
        let corpus = vec![entry("moon river", mid()), entry("stars fall", AcousticDescriptor::new(Level::High, Level::Low, Level::Low))];
        let idx = build_index(&corpus, &e).unwrap();
        let q = Query::embed(&[(LyricLine::new(0.0, 1.0, "stars fall").unwrap(), corpus[1].acoustic)], &e).unwrap();
        let hits = retrieve(&idx, &q, 2, RetrievalWeights::default()).unwrap();
        assert_eq!(hits[0][0].index, 1);
        assert!((hits[0][0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retrieval_errors() {
        let e = HashingEmbedder::new(8);
        let idx = build_index(&[entry("x", mid())], &e).unwrap();
        let q = Query::embed(&[(LyricLine::new(0.0, 1.0, "x").unwrap(), mid())], &e).unwrap();
        assert!(matches!(retrieve(&idx, &q, 0, RetrievalWeights::default()), Err(AgraError::InvalidK)));
        let other = Query::embed(&[(LyricLine::new(0.0, 1.0, "x").unwrap(), mid())], &HashingEmbedder::new(9)).unwrap();
        assert!(matches!(retrieve(&idx, &other, 1, RetrievalWeights::default()), Err(AgraError::DimensionMismatch { .. })));
        assert!(RetrievalWeights::new(0.5, 0.6).is_err());
        assert!(RetrievalWeights::new(-0.1, 1.1).is_err());
        assert!(matches!(Query::new(vec![]), Err(AgraError::EmptyQuery)));
    }

    #[test]
    fn merge_keeps_best_score() {
        let per_line = vec![
            vec![Hit { index: 2, score: 0.5 }, Hit { index: 0, score: 0.4 }],
            vec![Hit { index: 0, score: 0.9 }],
        ];
        let merged = merge_hits(&per_line, 5);
        assert_eq!(merged, vec![Hit { index: 0, score: 0.9 }, Hit { index: 2, score: 0.5 }]);
    }

    #[test]
    fn reference_renders_subtitle_lines() {
        let idx = build_index(&[entry("a", mid())], &HashingEmbedder::new(8)).unwrap();
        assert_eq!(idx.unit(0).subtitle_lines(), vec!["00:00:00,000 --> 00:00:01,000: mouth smile slightly"]);
    }
}
