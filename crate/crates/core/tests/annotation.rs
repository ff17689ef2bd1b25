mod common;

use std::collections::BTreeMap;
use std::fs;

use rand::Rng;

use common::*;
use singsub::agra::{build_index, retrieve, CorpusEntry, Query, RetrievalWeights, SubtitleIndex};
use singsub::annotator::{annotate_clip, annotate_eyes, annotate_neck, describe_brow_mouth, AnnotatorConfig, ExpressionInterval};
use singsub::embed::HashingEmbedder;
use singsub::error::{AnnotateError, ModelError};
use singsub::intensity::{default_selection, motion_amplitude};
use singsub::model::{load_frames, save_frames, AuChannel, AuIntensities, FrameFormat, FrameSequence, LyricLine, Region};
use singsub::srt::emit_subtitles;
use singsub::vocab::{Axis, EyeState, IntensityClass, RegionConfig, Vocabulary};

fn clip_with_neck(neck: impl Fn(usize) -> [f64; 3], frames: usize) -> FrameSequence {
    let fr = (0..frames).map(|i| frame_with(neutral_landmarks(), AuIntensities::default(), neck(i))).collect();
    FrameSequence::new("neck", FPS, fr).unwrap()
}

fn clip_with_eyes(d: impl Fn(usize) -> f64, frames: usize) -> FrameSequence {
    let fr = (0..frames)
        .map(|i| {
            let mut lm = neutral_landmarks();
            for (u, l) in [(37, 41), (38, 40), (43, 47), (44, 46)] {
                lm[u][1] = d(i) / 2.0;
                lm[l][1] = -d(i) / 2.0;
            }
            frame_with(lm, AuIntensities::default(), [0.0; 3])
        })
        .collect();
    FrameSequence::new("eyes", FPS, fr).unwrap()
}

#[test]
fn frame_files_round_trip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synthetic_clip(7, 20);
    for (name, fmt) in [("c.jsonl", FrameFormat::Jsonl), ("c.csv", FrameFormat::Csv)] {
        let path = dir.path().join(name);
        save_frames(&seq, &path, fmt).unwrap();
        assert_eq!(FrameFormat::from_path(&path), fmt);
        let back = load_frames(&path, fmt).unwrap();
        assert_eq!(back.len(), 20);
        assert_eq!(back.clip_id(), "clip0007");
        let again = dir.path().join(format!("again-{name}"));
        save_frames(&back, &again, fmt).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }
}

fn jsonl_lines(seq: &FrameSequence) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.jsonl");
    save_frames(seq, &path, FrameFormat::Jsonl).unwrap();
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn frame_file_errors_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synthetic_clip(8, 6);
    let lines = jsonl_lines(&seq);

    let two = dir.path().join("two.jsonl");
    fs::write(&two, lines[..3].join("\n")).unwrap();
    assert_eq!(load_frames(&two, FrameFormat::Jsonl).unwrap().len(), 2);

    let mut bad = lines.clone();
    let mut rec: serde_json::Value = serde_json::from_str(&bad[5]).unwrap();
    rec["au"]["AU4"] = serde_json::json!(1.3);
    bad[5] = rec.to_string();
    let path = dir.path().join("bad.jsonl");
    fs::write(&path, bad.join("\n")).unwrap();
    match load_frames(&path, FrameFormat::Jsonl) {
        Err(ModelError::Invariant { row: Some(5), message }) => assert!(message.contains("AU4"), "{message}"),
        other => panic!("unexpected {other:?}"),
    }

    let mut short = lines[..4].to_vec();
    let mut rec: serde_json::Value = serde_json::from_str(&short[3]).unwrap();
    rec.as_object_mut().unwrap().remove("au");
    short[3] = rec.to_string();
    let path = dir.path().join("short.jsonl");
    fs::write(&path, short.join("\n")).unwrap();
    let err = load_frames(&path, FrameFormat::Jsonl).unwrap_err();
    assert!(err.to_string().contains("length mismatch"), "{err}");
}

#[test]
fn eye_examples() {
    let vocab = Vocabulary::builtin();
    let cfg = AnnotatorConfig::default();
    let wide = annotate_eyes(&clip_with_eyes(|i| if (15..45).contains(&i) { 10.0 } else { 7.0 }, 60), &neutral(), &vocab, &cfg);
    assert_eq!(wide.len(), 1);
    assert_eq!(wide[0].duration_ms(), 1000);
    assert!(vocab.eye_phrases(EyeState::Widen).iter().any(|p| Vocabulary::eye_description(p) == wide[0].description()));

    let blink = clip_with_eyes(|i| if (10..19).contains(&i) { 3.0 } else { 7.0 }, 60);
    assert!(annotate_eyes(&blink, &neutral(), &vocab, &cfg).is_empty());
    assert!(annotate_eyes(&clip_with_eyes(|_| 7.5, 60), &neutral(), &vocab, &cfg).is_empty());
}

#[test]
fn neck_examples() {
    let vocab = Vocabulary::builtin();
    let cfg = AnnotatorConfig::default();
    assert!(annotate_neck(&clip_with_neck(|_| [9.0, -9.9, 5.0], 90), &vocab, &cfg).is_empty());

    let turn = annotate_neck(&clip_with_neck(|i| [0.0, if (15..45).contains(&i) { 15.0 } else { 0.0 }, 0.0], 60), &vocab, &cfg);
    assert_eq!(turn.len(), 1);
    assert_eq!(turn[0].duration_ms(), 1000);
    assert!(vocab.neck_phrases(Axis::Y, true).iter().any(|p| Vocabulary::neck_description(&[p]) == turn[0].description()));

    // sign flips every 12 frames (0.4 s) for 3 s
    let sway = annotate_neck(&clip_with_neck(|i| [0.0, if (i / 12) % 2 == 0 { 15.0 } else { -15.0 }, 0.0], 90), &vocab, &cfg);
    assert_eq!(sway.len(), 1);
    assert_eq!(sway[0].description(), Vocabulary::neck_description(&[vocab.sway_phrase()]));
}

#[test]
fn brow_mouth_descriptions() {
    let vocab = Vocabulary::builtin();
    let interval = |channel, delta| ExpressionInterval { au_channel: channel, onset_frame: 1, offset_frame: 9, au_delta: delta };
    let strong = describe_brow_mouth(&interval(AuChannel::Au12, 0.6), &vocab, 0).unwrap();
    let want = format!("{} {}", vocab.motion_phrases(AuChannel::Au12, true)[0], vocab.intensity_phrases(IntensityClass::Strong)[0]);
    assert_eq!(strong, want);
    let slight = describe_brow_mouth(&interval(AuChannel::Au4, 0.3), &vocab, 0).unwrap();
    assert!(vocab.intensity_phrases(IntensityClass::Slight).iter().any(|p| slight.ends_with(p.as_str())));
    assert!(matches!(describe_brow_mouth(&interval(AuChannel::Au4, 0.25), &vocab, 0), Err(AnnotateError::BelowThreshold(_))));
}

#[test]
fn clip_level_examples() {
    let vocab = Vocabulary::builtin();
    let regions = RegionConfig::default();
    let cfg = AnnotatorConfig::default();
    let still = clip_with_neck(|_| [0.0; 3], 60);
    assert!(annotate_clip(&still, &neutral(), &vocab, &regions, &cfg).unwrap().is_empty());
    let blink = clip_with_eyes(|i| if (10..19).contains(&i) { 3.0 } else { 7.0 }, 60);
    assert!(annotate_clip(&blink, &neutral(), &vocab, &regions, &cfg).unwrap().is_empty());

    for seed in 0..20 {
        let seq = synthetic_clip(seed, 200);
        let doc = annotate_clip(&seq, &neutral(), &vocab, &regions, &cfg).unwrap();
        let again = annotate_clip(&seq, &neutral(), &vocab, &regions, &cfg).unwrap();
        assert_eq!(emit_subtitles(&doc), emit_subtitles(&again));
        let eyes: Vec<_> = doc.by_region(Region::Eyes).map(|e| (e.start(), e.end())).collect();
        let alone: Vec<_> = annotate_eyes(&seq, &neutral(), &vocab, &cfg).iter().map(|e| (e.start(), e.end())).collect();
        assert_eq!(eyes, alone);
    }
    assert!(matches!(
        annotate_clip(&still, &neutral(), &vocab, &regions, &AnnotatorConfig { tau: 1.5, ..cfg }),
        Err(AnnotateError::InvalidTau(_))
    ));
}

#[test]
fn amplitudes_match_elementwise_norms() {
    let mut r = rng(30);
    let selection = default_selection(&RegionConfig::default()).unwrap();
    assert_eq!(selection.len(), 42);
    let rest = neutral_landmarks();
    let frames: Vec<_> = (0..5)
        .map(|_| {
            let lm: Vec<_> = rest.iter().map(|p| [p[0] + r.gen_range(-2.0..2.0), p[1] + r.gen_range(-2.0..2.0), p[2]]).collect();
            frame_with(lm, AuIntensities::default(), [0.0; 3])
        })
        .collect();
    let seq = FrameSequence::new("amp", FPS, frames).unwrap();
    let amp = motion_amplitude(&seq, &neutral(), &selection).unwrap();
    for (t, row) in amp.iter().enumerate() {
        for (c, &l) in selection.iter().enumerate() {
            let p = seq.frames()[t].landmarks[l];
            let want = ((p[0] - rest[l][0]).powi(2) + (p[1] - rest[l][1]).powi(2) + (p[2] - rest[l][2]).powi(2)).sqrt();
            assert_eq!(row[c], want);
        }
    }
    let mut lm = rest.clone();
    lm[20] = [lm[20][0] + 1.0, lm[20][1] + 2.0, lm[20][2] + 2.0];
    let seq = FrameSequence::new("one", FPS, vec![frame_with(rest.clone(), AuIntensities::default(), [0.0; 3]), frame_with(lm, AuIntensities::default(), [0.0; 3])]).unwrap();
    let amp = motion_amplitude(&seq, &neutral(), &[20]).unwrap();
    assert_eq!(amp, vec![vec![0.0], vec![3.0]]);
}

fn corpus(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<CorpusEntry> {
    let words = ["moon", "fire", "dance", "heart", "rain", "light", "road", "sea"];
    (0..n)
        .map(|i| CorpusEntry {
            start: i as f64,
            end: i as f64 + 1.5,
            lyric: (0..3).map(|_| words[r.gen_range(0..words.len())]).collect::<Vec<_>>().join(" "),
            acoustic: random_descriptor(r),
            motions: BTreeMap::from([(Region::Mouth, "smile slightly".to_string())]),
        })
        .collect()
}

#[test]
fn index_persistence_is_deterministic() {
    let mut r = rng(31);
    let entries = corpus(&mut r, 100);
    let embedder = HashingEmbedder::new(48);
    let a = build_index(&entries, &embedder).unwrap();
    let b = build_index(&entries, &embedder).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    a.save(&pa).unwrap();
    b.save(&pb).unwrap();
    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    let back = SubtitleIndex::load(&pa).unwrap();
    assert_eq!(back.units(), a.units());
    assert_eq!(back.embedder_id(), a.embedder_id());
}

#[test]
fn beta_zero_ranks_by_text_alone() {
    let mut r = rng(32);
    let embedder = HashingEmbedder::new(48);
    let index = build_index(&corpus(&mut r, 30), &embedder).unwrap();
    for _ in 0..50 {
        let pair = (LyricLine::new(0.0, 1.0, "moon fire heart").unwrap(), random_descriptor(&mut r));
        let query = Query::embed(&[pair], &embedder).unwrap();
        let hits = retrieve(&index, &query, 30, RetrievalWeights::new(1.0, 0.0).unwrap()).unwrap();
        let want = brute_retrieve(index.units(), &query, 30, 1.0, 0.0);
        let got: Vec<usize> = hits[0].iter().map(|h| h.index).collect();
        let want: Vec<usize> = want[0].iter().map(|h| h.0).collect();
        assert_eq!(got, want);
    }
}
