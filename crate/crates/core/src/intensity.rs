//! Motion-intensity proxy: per-landmark distance from the neutral face,
//! rescaled to `[-1, 1]` over the clip.

use serde::{Deserialize, Serialize};

use crate::error::IntensityError;
use crate::model::{distance, FrameSequence, NeutralFace, NUM_LANDMARKS};
use crate::vocab::RegionConfig;

/// Frames × landmarks matrix of normalized intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySeries {
    pub landmark_ids: Vec<usize>,
    /// `values[frame][column]`, columns ordered as `landmark_ids`.
    pub values: Vec<Vec<f64>>,
}

impl IntensitySeries {
    pub fn frames(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[c]).collect()
    }

    /// CSV with a header row of landmark ids.
    pub fn to_csv(&self) -> String {
        let mut out = self.landmark_ids.iter().map(|id| format!("l{id}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.values {
            out.push_str(&row.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// Amplitude `‖L_{l,i} − L_l^neutral‖` for every frame and selected landmark.
pub fn motion_amplitude(
    seq: &FrameSequence,
    neutral: &NeutralFace,
    selection: &[usize],
) -> Result<Vec<Vec<f64>>, IntensityError> {
    if let Some(&l) = selection.iter().find(|&&l| l >= NUM_LANDMARKS) {
        return Err(IntensityError::OutOfRange(l));
    }
    let rest = neutral.landmarks();
    Ok(seq
        .frames()
        .iter()
        .map(|f| selection.iter().map(|&l| distance(&f.landmarks[l], &rest[l])).collect())
        .collect())
}

/// Per-column affine map of `[min, max]` onto `[-1, 1]`; constant columns map to 0.
pub fn normalize_intensity(amplitudes: &[Vec<f64>], landmark_ids: &[usize]) -> Result<IntensitySeries, IntensityError> {
    let frames = amplitudes.len();
    if frames < 2 {
        return Err(IntensityError::TooFewFrames(frames));
    }
    let cols = landmark_ids.len();
    for (row, r) in amplitudes.iter().enumerate() {
        if r.len() != cols {
            return Err(IntensityError::Ragged { row, got: r.len(), expected: cols });
        }
    }
    let mut values = vec![vec![0.0; cols]; frames];
    for c in 0..cols {
        let (lo, hi) = amplitudes
            .iter()
            .map(|r| r[c])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for (out, row) in values.iter_mut().zip(amplitudes) {
            let v = 2.0 * ((row[c] - lo) / range) - 1.0;
            out[c] = v.clamp(-1.0, 1.0);
        }
    }
    Ok(IntensitySeries { landmark_ids: landmark_ids.to_vec(), values })
}

/// Union of the eyebrow, eye and mouth landmark sets, sorted and deduplicated.
pub fn default_selection(config: &RegionConfig) -> Result<Vec<usize>, IntensityError> {
    let mut ids: Vec<usize> = config.eyebrows.iter().chain(&config.eyes).chain(&config.mouth).copied().collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(IntensityError::EmptySelection);
    }
    if let Some(&l) = ids.iter().find(|&&l| l >= NUM_LANDMARKS) {
        return Err(IntensityError::OutOfRange(l));
    }
    Ok(ids)
}

/// Amplitudes followed by normalization, over `selection`.
pub fn intensity_series(
    seq: &FrameSequence,
    neutral: &NeutralFace,
    selection: &[usize],
) -> Result<IntensitySeries, IntensityError> {
    if selection.is_empty() {
        return Err(IntensityError::EmptySelection);
    }
    normalize_intensity(&motion_amplitude(seq, neutral, selection)?, selection)
}
