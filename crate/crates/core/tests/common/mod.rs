//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use singsub::acoustic::{AcousticDescriptor, Level};
use singsub::agra::{Query, ReferenceUnit, SubtitleIndex};
use singsub::model::{AuIntensities, Frame, FrameSequence, NeutralFace, Point3, NUM_EXPRESSION, NUM_LANDMARKS};

pub const FPS: f64 = 30.0;
const EYEBROWS: std::ops::Range<usize> = 17..27;
const MOUTH: std::ops::Range<usize> = 48..68;
const UPPER_LIDS: [usize; 4] = [37, 38, 43, 44];
const LOWER_LIDS: [usize; 4] = [41, 40, 47, 46];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rest layout: landmarks on a loose grid, eyelids 7 mm apart.
pub fn neutral_landmarks() -> Vec<Point3> {
    let mut pts: Vec<Point3> = (0..NUM_LANDMARKS).map(|i| [(i % 10) as f64 * 4.0, (i / 10) as f64 * 4.0, 0.0]).collect();
    for (k, (&u, &l)) in UPPER_LIDS.iter().zip(&LOWER_LIDS).enumerate() {
        let x = 100.0 + k as f64 * 5.0;
        pts[u] = [x, 3.5, 0.0];
        pts[l] = [x, -3.5, 0.0];
    }
    pts
}

pub fn neutral() -> NeutralFace {
    NeutralFace::with_default_pairs(neutral_landmarks()).unwrap()
}

pub fn frame_with(landmarks: Vec<Point3>, au: AuIntensities, neck: [f64; 3]) -> Frame {
    Frame { landmarks, au, neck, jaw: [0.0; 3], expression: vec![0.0; NUM_EXPRESSION] }
}

/// Piecewise-constant levels joined by smooth ramps: `(position, level index)` per frame.
fn hold_ramp_track(r: &mut ChaCha8Rng, len: usize, levels: &[f64]) -> Vec<(f64, usize)> {
    let mut out = Vec::with_capacity(len);
    let mut cur = r.gen_range(0..levels.len());
    while out.len() < len {
        for _ in 0..r.gen_range(3..16) {
            out.push((levels[cur], cur));
        }
        let next = r.gen_range(0..levels.len());
        let steps = r.gen_range(3..9);
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            let w = t * t * (3.0 - 2.0 * t);
            out.push((levels[cur] + (levels[next] - levels[cur]) * w, if s == steps { next } else { cur }));
        }
        cur = next;
    }
    out.truncate(len);
    out
}

/// Segments of random length holding one value each.
fn segment_track(r: &mut ChaCha8Rng, len: usize, values: &[f64], min_len: usize, max_len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let v = values[r.gen_range(0..values.len())];
        for _ in 0..r.gen_range(min_len..=max_len) {
            out.push(v);
        }
    }
    out.truncate(len);
    out
}

/// A clip exercising every annotator: brow and mouth ramps with matching AU
/// steps, eye openness across all bands, and neck holds above and below threshold.
pub fn synthetic_clip(seed: u64, len: usize) -> FrameSequence {
    let mut r = rng(seed);
    let brow_au = [0.0, 0.2, 0.45, 0.7, 0.95];
    let brow = hold_ramp_track(&mut r, len, &[0.0, 1.0, 2.0, 3.0, 4.0]);
    let brow_au2 = [0.9, 0.6, 0.35, 0.1, 0.0];
    let mouth_au = [0.05, 0.3, 0.6, 0.9];
    let mouth = hold_ramp_track(&mut r, len, &[0.0, 1.5, 3.0, 4.5]);
    let eyes = segment_track(&mut r, len, &[3.0, 5.0, 7.0, 8.0, 11.0], 5, 40);
    let neck: Vec<Vec<f64>> = (0..3).map(|_| segment_track(&mut r, len, &[0.0, 5.0, -5.0, 15.0, -15.0, 25.0, -30.0], 4, 45)).collect();
    let rest = neutral_landmarks();
    let frames = (0..len)
        .map(|i| {
            let mut lm = rest.clone();
            for v in EYEBROWS {
                lm[v][1] += brow[i].0;
            }
            for v in MOUTH {
                lm[v][0] += mouth[i].0 * 0.5;
                lm[v][1] -= mouth[i].0;
            }
            for (&u, &l) in UPPER_LIDS.iter().zip(&LOWER_LIDS) {
                lm[u][1] = eyes[i] / 2.0;
                lm[l][1] = -eyes[i] / 2.0;
            }
            let au = AuIntensities {
                au1: brow_au[brow[i].1],
                au4: brow_au2[brow[i].1],
                au12: mouth_au[mouth[i].1],
                au15: 1.0 - mouth_au[mouth[i].1],
            };
            frame_with(lm, au, [neck[0][i], neck[1][i], neck[2][i]])
        })
        .collect();
    FrameSequence::new(format!("clip{seed:04}"), FPS, frames).unwrap()
}

/// Local minima by scanning outward from every index.
pub fn naive_minima(v: &[f64]) -> Vec<usize> {
    let n = v.len();
    let mut out = Vec::new();
    for i in 0..n {
        if i > 0 && v[i - 1] == v[i] {
            continue;
        }
        let mut j = i;
        while j + 1 < n && v[j + 1] == v[i] {
            j += 1;
        }
        if i == 0 && j == n - 1 {
            continue;
        }
        let left = i == 0 || v[i - 1] > v[i];
        let right = j == n - 1 || v[j + 1] > v[i];
        if left && right {
            out.push(i);
        }
    }
    out
}

fn naive_argmax(v: &[f64], lo: usize, hi: usize) -> Option<usize> {
    let candidates: Vec<usize> = (lo + 1..hi).collect();
    let best = candidates.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
    candidates.into_iter().find(|&i| v[i] == best)
}

/// Onset/offset/delta triples by direct enumeration of the segmentation rules.
pub fn naive_intervals(vel: &[f64], au: &[f64], tau: f64) -> Vec<(usize, usize, f64)> {
    let minima = naive_minima(vel);
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        if k + 1 >= minima.len() {
            break;
        }
        let i1 = minima[k];
        let i2 = minima[k + 1];
        let mut advanced = false;
        if (au[i2] - au[i1]).abs() > tau {
            let mut m = k + 2;
            while m < minima.len() {
                if (au[minima[m]] - au[i2]).abs() > tau {
                    break;
                }
                m += 1;
            }
            if m < minima.len() {
                let i3 = minima[m];
                if let (Some(on), Some(off)) = (naive_argmax(vel, i1, i2), naive_argmax(vel, i2, i3)) {
                    out.push((on, off, au[i2] - au[i1]));
                    k = m;
                    advanced = true;
                }
            }
        }
        if !advanced {
            k += 1;
        }
    }
    out
}

pub fn random_level(r: &mut ChaCha8Rng) -> Level {
    [Level::Low, Level::Moderate, Level::High][r.gen_range(0..3)]
}

pub fn random_descriptor(r: &mut ChaCha8Rng) -> AcousticDescriptor {
    AcousticDescriptor::new(random_level(r), random_level(r), random_level(r))
}

/// Exhaustive scorer: every reference scored, then a full sort.
pub fn brute_retrieve(units: &[ReferenceUnit], query: &Query, k: usize, alpha: f64, beta: f64) -> Vec<Vec<(usize, f64)>> {
    query
        .units()
        .iter()
        .map(|q| {
            let mut all: Vec<(usize, f64)> = units
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let mut dot = 0.0;
                    for (a, b) in q.text_embedding.iter().zip(&u.text_embedding) {
                        dot += a * b;
                    }
                    let matches = [
                        q.acoustic.volume == u.acoustic.volume,
                        q.acoustic.pitch == u.acoustic.pitch,
                        q.acoustic.rate == u.acoustic.rate,
                    ]
                    .iter()
                    .filter(|m| **m)
                    .count();
                    (i, alpha * dot + beta * (matches as f64 / 3.0))
                })
                .collect();
            // stable sort on score keeps ascending index among ties
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            all.truncate(k);
            all
        })
        .collect()
}

pub fn index_units(index: &SubtitleIndex) -> Vec<ReferenceUnit> {
    index.units().to_vec()
}
