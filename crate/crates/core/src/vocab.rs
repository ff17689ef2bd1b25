//! Closed description vocabulary and region-landmark configuration.
//!
//! Both ship as JSON data files (`data/vocabulary.json`, `data/regions.json`)
//! and can be replaced at runtime without code changes. The bundled
//! vocabulary is a stand-in with the same shape as the annotation tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::AnnotateError;
use crate::model::{AuChannel, Region, NUM_LANDMARKS};

const DEFAULT_VOCABULARY: &str = include_str!("../data/vocabulary.json");
const DEFAULT_REGIONS: &str = include_str!("../data/regions.json");

/// Intensity class of an AU change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityClass {
    Slight,
    Strong,
}

/// Eye openness states that produce a subtitle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeState {
    Widen,
    Squint,
    Close,
}

impl EyeState {
    pub fn as_str(self) -> &'static str {
        match self {
            EyeState::Widen => "widen",
            EyeState::Squint => "squint",
            EyeState::Close => "close",
        }
    }
}

/// Rotation axis of the neck pose: x = nod, y = turn, z = tilt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    fn key(self, positive: bool) -> String {
        let a = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        format!("{a}{}", if positive { '+' } else { '-' })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    #[serde(default)]
    stand_in: bool,
    motion: BTreeMap<String, Vec<String>>,
    intensity: BTreeMap<IntensityClass, Vec<String>>,
    eye_state: BTreeMap<EyeState, Vec<String>>,
    neck: BTreeMap<String, Vec<String>>,
    sway: String,
}

/// Phrase tables for all four regions.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub stand_in: bool,
    motion: BTreeMap<(AuChannel, bool), Vec<String>>,
    intensity: BTreeMap<IntensityClass, Vec<String>>,
    eye_state: BTreeMap<EyeState, Vec<String>>,
    neck: BTreeMap<(Axis, bool), Vec<String>>,
    sway: String,
}

fn check_phrases(what: &str, phrases: &[String], forbid_comma: bool) -> Result<(), AnnotateError> {
    if phrases.is_empty() {
        return Err(AnnotateError::Vocabulary(format!("{what}: phrase list is empty")));
    }
    for p in phrases {
        if p.trim().is_empty() || p.trim() != p {
            return Err(AnnotateError::Vocabulary(format!("{what}: phrase '{p}' is blank or padded")));
        }
        if p.contains(['\n', '\r']) {
            return Err(AnnotateError::Vocabulary(format!("{what}: phrase contains a newline")));
        }
        if forbid_comma && p.contains(',') {
            return Err(AnnotateError::Vocabulary(format!("{what}: neck phrase '{p}' contains a comma")));
        }
    }
    Ok(())
}

impl Vocabulary {
    /// The bundled stand-in vocabulary.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_VOCABULARY).expect("bundled vocabulary is valid")
    }

    pub fn load(path: &Path) -> Result<Self, AnnotateError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, AnnotateError> {
        let file: VocabularyFile =
            serde_json::from_str(text).map_err(|e| AnnotateError::Vocabulary(e.to_string()))?;
        let mut motion = BTreeMap::new();
        for ch in AuChannel::ALL {
            for positive in [true, false] {
                let key = format!("{}{}", ch.as_str(), if positive { '+' } else { '-' });
                let phrases = file
                    .motion
                    .get(&key)
                    .ok_or_else(|| AnnotateError::Vocabulary(format!("motion table lacks '{key}'")))?;
                check_phrases(&key, phrases, false)?;
                motion.insert((ch, positive), phrases.clone());
            }
        }
        for class in [IntensityClass::Slight, IntensityClass::Strong] {
            let phrases = file
                .intensity
                .get(&class)
                .ok_or_else(|| AnnotateError::Vocabulary(format!("intensity table lacks {class:?}")))?;
            check_phrases("intensity", phrases, false)?;
        }
        for state in [EyeState::Widen, EyeState::Squint, EyeState::Close] {
            let phrases = file
                .eye_state
                .get(&state)
                .ok_or_else(|| AnnotateError::Vocabulary(format!("eye table lacks '{}'", state.as_str())))?;
            check_phrases(state.as_str(), phrases, false)?;
        }
        let mut neck = BTreeMap::new();
        for axis in Axis::ALL {
            for positive in [true, false] {
                let key = axis.key(positive);
                let phrases = file
                    .neck
                    .get(&key)
                    .ok_or_else(|| AnnotateError::Vocabulary(format!("neck table lacks '{key}'")))?;
                check_phrases(&key, phrases, true)?;
                neck.insert((axis, positive), phrases.clone());
            }
        }
        check_phrases("sway", std::slice::from_ref(&file.sway), true)?;
        Ok(Self {
            stand_in: file.stand_in,
            motion,
            intensity: file.intensity,
            eye_state: file.eye_state,
            neck,
            sway: file.sway,
        })
    }

    pub fn motion_phrases(&self, channel: AuChannel, positive: bool) -> &[String] {
        &self.motion[&(channel, positive)]
    }

    pub fn intensity_phrases(&self, class: IntensityClass) -> &[String] {
        &self.intensity[&class]
    }

    pub fn eye_phrases(&self, state: EyeState) -> &[String] {
        &self.eye_state[&state]
    }

    pub fn neck_phrases(&self, axis: Axis, positive: bool) -> &[String] {
        &self.neck[&(axis, positive)]
    }

    pub fn sway_phrase(&self) -> &str {
        &self.sway
    }

    /// Renders an eye description from a state phrase.
    pub fn eye_description(phrase: &str) -> String {
        format!("The eyes {phrase}.")
    }

    /// Renders a neck description from the per-axis descriptors present, in x, y, z order.
    pub fn neck_description(parts: &[&str]) -> String {
        format!("The head {}", parts.join(", "))
    }

    /// Whether `description` is a template expansion of this vocabulary for `region`.
    pub fn is_expansion(&self, region: Region, description: &str) -> bool {
        match region {
            Region::Eyebrows | Region::Mouth => self.is_brow_mouth_expansion(region, description),
            Region::Eyes => description
                .strip_prefix("The eyes ")
                .and_then(|rest| rest.strip_suffix('.'))
                .is_some_and(|phrase| self.eye_state.values().flatten().any(|p| p == phrase)),
            Region::Neck => self.is_neck_expansion(description),
        }
    }

    fn is_brow_mouth_expansion(&self, region: Region, description: &str) -> bool {
        self.intensity.values().flatten().any(|intensity| {
            description
                .strip_suffix(intensity.as_str())
                .and_then(|head| head.strip_suffix(' '))
                .is_some_and(|motion| {
                    self.motion
                        .iter()
                        .filter(|((ch, _), _)| ch.region() == region)
                        .any(|(_, phrases)| phrases.iter().any(|p| p == motion))
                })
        })
    }

    fn is_neck_expansion(&self, description: &str) -> bool {
        let Some(rest) = description.strip_prefix("The head ") else {
            return false;
        };
        let mut next_axis = 0;
        for part in rest.split(", ") {
            let axis = Axis::ALL.iter().enumerate().skip(next_axis).find(|(_, &axis)| {
                [true, false].iter().any(|&pos| self.neck[&(axis, pos)].iter().any(|p| p == part))
                    || (axis == Axis::Y && part == self.sway)
            });
            match axis {
                Some((i, _)) => next_axis = i + 1,
                None => return false,
            }
        }
        true
    }

    /// Every description this vocabulary can produce for brow/mouth regions and eyes.
    /// Neck combinations are checked structurally by [`Vocabulary::is_expansion`].
    pub fn listing(&self, region: Region) -> Vec<String> {
        match region {
            Region::Eyebrows | Region::Mouth => {
                let mut out = BTreeSet::new();
                for ((ch, _), phrases) in &self.motion {
                    if ch.region() != region {
                        continue;
                    }
                    for p in phrases {
                        for i in self.intensity.values().flatten() {
                            out.insert(format!("{p} {i}"));
                        }
                    }
                }
                out.into_iter().collect()
            }
            Region::Eyes => self.eye_state.values().flatten().map(|p| Self::eye_description(p)).collect(),
            Region::Neck => {
                let mut out: Vec<String> = self.neck.values().flatten().cloned().collect();
                out.push(self.sway.clone());
                out
            }
        }
    }
}

/// Deterministic 64-bit seed for phrase selection.
pub fn phrase_seed(clip_id: &str, region: Region, onset: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(clip_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(region.as_str().as_bytes());
    hasher.update([0u8]);
    hasher.update((onset as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Landmark index sets per region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default)]
    pub eyebrows: Vec<usize>,
    #[serde(default)]
    pub eyes: Vec<usize>,
    #[serde(default)]
    pub mouth: Vec<usize>,
}

impl Default for RegionConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_REGIONS).expect("bundled region config is valid")
    }
}

impl RegionConfig {
    pub fn load(path: &Path) -> Result<Self, AnnotateError> {
        let cfg: RegionConfig = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| AnnotateError::RegionConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AnnotateError> {
        if let Some(&i) = self.eyebrows.iter().chain(&self.eyes).chain(&self.mouth).find(|&&i| i >= NUM_LANDMARKS) {
            return Err(AnnotateError::VertexOutOfRange(i));
        }
        Ok(())
    }

    pub fn vertices(&self, region: Region) -> &[usize] {
        match region {
            Region::Eyebrows => &self.eyebrows,
            Region::Eyes => &self.eyes,
            Region::Mouth => &self.mouth,
            Region::Neck => &[],
        }
    }
}
