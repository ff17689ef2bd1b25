mod common;

use nalgebra::DMatrix;
use rand::Rng;

use common::rng;
use singsub::error::GenMathError;
use singsub::genmath::{
    adaptive_weights, check, forward_noise, losses, modulation_forward, modulation_trace, temporal_mask, timeline_features, total_loss,
    ModulationWeights, TimelineEntry, TimelineFeatures,
};

type Grid = Vec<Vec<f64>>;

fn grid(m: &DMatrix<f64>) -> Grid {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn matmul(a: &Grid, b: &Grid) -> Grid {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            for t in 0..k {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

fn transpose(a: &Grid) -> Grid {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn softmax_rows(logits: &Grid, allowed: impl Fn(usize, usize) -> bool) -> Grid {
    logits
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let live: Vec<usize> = (0..row.len()).filter(|&j| allowed(i, j)).collect();
            let mut out = vec![0.0; row.len()];
            if live.is_empty() {
                return out;
            }
            let max = live.iter().map(|&j| row[j]).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = live.iter().map(|&j| (row[j] - max).exp()).sum();
            for &j in &live {
                out[j] = (row[j] - max).exp() / total;
            }
            out
        })
        .collect()
}

/// The modulation block evaluated with plain loops, one formula at a time.
fn reference(z: &Grid, f: &Grid, covered: &[bool], w: &ModulationWeights) -> Grid {
    let (l, d) = (z.len(), z[0].len());
    let q_t = matmul(f, &grid(&w.w_tq));
    let k_t = matmul(z, &grid(&w.w_tk));
    let mut logits = vec![vec![0.0; l]; l];
    for i in 0..l {
        for j in 0..l {
            logits[i][j] = (0..d).map(|c| q_t[i][c] * k_t[j][c]).sum::<f64>() / (d as f64).sqrt();
        }
    }
    let a_t = softmax_rows(&logits, |i, j| covered[i] && covered[j]);

    let q_c = matmul(f, &grid(&w.w_cq));
    let k_c = matmul(z, &grid(&w.w_ck));
    let mut clog = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            clog[a][b] = (0..l).map(|i| q_c[i][a] * k_c[i][b]).sum::<f64>() / (l as f64).sqrt();
        }
    }
    let a_c = softmax_rows(&clog, |_, _| true);

    let left = matmul(&a_t, &matmul(z, &grid(&w.w_vt)));
    let right = matmul(&matmul(z, &grid(&w.w_vc)), &transpose(&a_c));
    let gamma = matmul(f, &grid(&w.gamma));
    let beta = matmul(f, &grid(&w.beta));
    let mut out = z.clone();
    for i in 0..l {
        let fused: Vec<f64> = (0..d).map(|c| left[i][c] + right[i][c]).collect();
        let mean = fused.iter().sum::<f64>() / d as f64;
        let var = fused.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
        for c in 0..d {
            let normed = (fused[c] - mean) / (var + 1e-5).sqrt();
            out[i][c] += gamma[i][c] * normed + beta[i][c];
        }
    }
    out
}

fn random_grid(r: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> Grid {
    (0..rows).map(|_| (0..cols).map(|_| r.gen_range(-1.5..1.5)).collect()).collect()
}

#[test]
fn four_by_three_matches_reference() {
    let mut r = rng(40);
    for seed in 0..50 {
        let (l, d) = (4, 3);
        let w = ModulationWeights::random(seed, l, d);
        let zg = random_grid(&mut r, l, d);
        let z = DMatrix::from_fn(l, d, |i, j| zg[i][j]);
        let entries = [
            TimelineEntry { start: 0, end: 2, embedding: vec![0.3, -0.7, 1.1] },
            TimelineEntry { start: 3, end: 4, embedding: vec![-0.2, 0.5, 0.9] },
        ];
        let f = timeline_features(&entries, &w.pe, l).unwrap();
        assert_eq!(f.coverage, vec![true, true, false, true]);
        let got = grid(&modulation_forward(&z, &f, &w).unwrap());
        let want = reference(&zg, &grid(&f.values), &f.coverage, &w);
        for (g, e) in got.iter().flatten().zip(want.iter().flatten()) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
    }
}

#[test]
fn random_shapes_match_reference() {
    let mut r = rng(41);
    for seed in 0..100 {
        let l = r.gen_range(1..9);
        let d = r.gen_range(1..6);
        let w = ModulationWeights::random(seed, l, d);
        let zg = random_grid(&mut r, l, d);
        let z = DMatrix::from_fn(l, d, |i, j| zg[i][j]);
        let start = r.gen_range(0..l);
        let end = r.gen_range(start + 1..=l);
        let emb: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let f = timeline_features(&[TimelineEntry { start, end, embedding: emb }], &w.pe, l).unwrap();
        let got = grid(&modulation_forward(&z, &f, &w).unwrap());
        let want = reference(&zg, &grid(&f.values), &f.coverage, &w);
        for (g, e) in got.iter().flatten().zip(want.iter().flatten()) {
            assert!((g - e).abs() < 1e-12);
        }
    }
}

#[test]
fn features_follow_the_positional_table() {
    let w = ModulationWeights::random(3, 5, 2);
    let emb = vec![1.0, -2.0];
    let f = timeline_features(&[TimelineEntry { start: 1, end: 4, embedding: emb.clone() }], &w.pe, 6).unwrap();
    for i in 0..6 {
        for c in 0..2 {
            let want = if (1..4).contains(&i) { emb[c] + w.pe[(i - 1, c)] } else { 0.0 };
            assert_eq!(f.values[(i, c)], want);
        }
    }
    let none = timeline_features(&[], &w.pe, 6).unwrap();
    assert_eq!(none, TimelineFeatures::zeros(6, 2));

    let zero_pe = DMatrix::zeros(5, 2);
    let f = timeline_features(&[TimelineEntry { start: 2, end: 4, embedding: emb.clone() }], &zero_pe, 6).unwrap();
    assert_eq!(f.values.row(2).iter().copied().collect::<Vec<_>>(), emb);
    assert_eq!(f.values.row(3).iter().copied().collect::<Vec<_>>(), emb);
}

#[test]
fn later_entries_overwrite_earlier_ones() {
    let pe = DMatrix::zeros(4, 1);
    let f = timeline_features(
        &[TimelineEntry { start: 0, end: 3, embedding: vec![1.0] }, TimelineEntry { start: 2, end: 4, embedding: vec![5.0] }],
        &pe,
        4,
    )
    .unwrap();
    assert_eq!(f.values.column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 5.0, 5.0]);
}

#[test]
fn feature_errors() {
    let pe = DMatrix::zeros(2, 1);
    let e = |start, end| TimelineEntry { start, end, embedding: vec![0.0] };
    assert!(matches!(timeline_features(&[e(2, 2)], &pe, 4), Err(GenMathError::BadInterval { .. })));
    assert!(matches!(timeline_features(&[e(1, 5)], &pe, 4), Err(GenMathError::BadInterval { .. })));
    assert!(matches!(timeline_features(&[e(0, 3)], &pe, 4), Err(GenMathError::OffsetTooLarge { .. })));
    let wrong = TimelineEntry { start: 0, end: 1, embedding: vec![0.0, 1.0] };
    assert!(matches!(timeline_features(&[wrong], &pe, 4), Err(GenMathError::ShapeMismatch(_))));
}

#[test]
fn mask_enumeration() {
    let m = temporal_mask(&[true, false, true]);
    for i in 0..3 {
        for j in 0..3 {
            let open = [(0, 0), (0, 2), (2, 0), (2, 2)].contains(&(i, j));
            assert_eq!(m[(i, j)] == 0.0, open);
            assert_eq!(m[(i, j)] == f64::NEG_INFINITY, !open);
        }
    }
    assert!(temporal_mask(&[true; 4]).iter().all(|v| *v == 0.0));
    assert!(temporal_mask(&[false; 4]).iter().all(|v| *v == f64::NEG_INFINITY));
}

#[test]
fn single_frame_attention_is_one() {
    let w = ModulationWeights::random(9, 1, 3);
    let f = timeline_features(&[TimelineEntry { start: 0, end: 1, embedding: vec![0.5, 0.1, -0.4] }], &w.pe, 1).unwrap();
    let tr = modulation_trace(&DMatrix::from_element(1, 3, 0.2), &f, &w).unwrap();
    assert_eq!(tr.temporal_attention, DMatrix::from_element(1, 1, 1.0));
}

#[test]
fn modulation_shape_errors() {
    let w = ModulationWeights::random(1, 4, 3);
    let z = DMatrix::zeros(4, 2);
    assert!(matches!(modulation_forward(&z, &TimelineFeatures::zeros(4, 2), &w), Err(GenMathError::ShapeMismatch(_))));
    assert!(matches!(modulation_forward(&DMatrix::zeros(4, 3), &TimelineFeatures::zeros(3, 3), &w), Err(GenMathError::ShapeMismatch(_))));
}

#[test]
fn weight_text_round_trip() {
    let w = ModulationWeights::random(17, 6, 4);
    let back = ModulationWeights::parse(&w.to_text()).unwrap();
    assert_eq!(back, w);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.txt");
    w.save(&path).unwrap();
    assert_eq!(ModulationWeights::load(&path).unwrap(), w);
    assert!(matches!(ModulationWeights::parse("2 2\n1 2 3"), Err(GenMathError::WeightFile(_))));
}

#[test]
fn noise_endpoints_and_errors() {
    let x = [1.0, -2.0, 3.5];
    let n = [0.25, 0.5, -1.0];
    assert_eq!(forward_noise(&x, 0.0, &n).unwrap(), x.to_vec());
    assert_eq!(forward_noise(&x, 1.0, &n).unwrap(), n.to_vec());
    let mid = forward_noise(&x, 0.36, &n).unwrap();
    for i in 0..3 {
        assert!((mid[i] - (0.8 * x[i] + 0.6 * n[i])).abs() < 1e-15);
    }
    assert!(matches!(forward_noise(&x, 1.5, &n), Err(GenMathError::InvalidBeta(_))));
    assert!(forward_noise(&x, 0.5, &n[..2]).is_err());
}

#[test]
fn losses_match_naive_loops() {
    let mut r = rng(42);
    for _ in 0..200 {
        let t = r.gen_range(3..20);
        let d = r.gen_range(1..5);
        let pred = random_grid(&mut r, t, d);
        let target = random_grid(&mut r, t, d);
        let mut recon = 0.0;
        let mut vel = 0.0;
        let mut acc = 0.0;
        for i in 0..t {
            for c in 0..d {
                recon += (pred[i][c] - target[i][c]).powi(2);
                if i + 1 < t {
                    vel += (pred[i + 1][c] - pred[i][c]).powi(2);
                }
                if i + 2 < t {
                    acc += (pred[i + 2][c] - 2.0 * pred[i + 1][c] + pred[i][c]).powi(2);
                }
            }
        }
        let l = losses(&pred, &target).unwrap();
        assert!((l.recon - recon / t as f64).abs() < 1e-12);
        assert!((l.vel - vel / (t - 1) as f64).abs() < 1e-12);
        assert!((l.acc - acc / (t - 2) as f64).abs() < 1e-12);
    }
}

#[test]
fn losses_on_simple_sequences() {
    let still = vec![vec![2.0, -1.0]; 5];
    let l = losses(&still, &still).unwrap();
    assert_eq!((l.recon, l.vel, l.acc), (0.0, 0.0, 0.0));
    let line: Vec<Vec<f64>> = (0..6).map(|t| vec![0.5 * t as f64, 3.0 - 0.25 * t as f64]).collect();
    assert_eq!(losses(&line, &line).unwrap().acc, 0.0);
    assert!(matches!(losses(&still[..2], &still[..2]), Err(GenMathError::TooShort { .. })));
    assert!(matches!(losses(&still, &still[..4]), Err(GenMathError::ShapeMismatch(_))));
}

#[test]
fn adaptive_weight_cases() {
    let eq = adaptive_weights([2.0; 3]).unwrap();
    for w in eq {
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
    }
    let w = adaptive_weights([1.0, 2.0, 4.0]).unwrap();
    for (got, want) in w.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
        assert!((got - want).abs() < 1e-15);
    }
    let w = adaptive_weights([0.0, 1.0, 1.0]).unwrap();
    assert!(w[0] > 0.999_999 && (w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(adaptive_weights([1.0, f64::NAN, 1.0]).is_err());
    assert!(adaptive_weights([-1.0, 1.0, 1.0]).is_err());

    let l = losses(&[vec![0.0], vec![1.0], vec![3.0]], &vec![vec![0.0]; 3]).unwrap();
    assert!((total_loss(&l, [1.0, 0.0, 0.0]) - l.recon).abs() < 1e-15);
}

#[test]
fn self_check_passes_for_several_seeds() {
    for seed in [0, 1, 42] {
        for row in check(seed) {
            assert!(row.passed, "seed {seed}: {} failed: {}", row.name, row.detail);
        }
    }
}
