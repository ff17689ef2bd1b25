//! Numeric kernels of the subtitle-conditioned motion generator: timeline
//! features, temporal masking, dual-attention modulation, forward noising,
//! and the training losses with their adaptive weights.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::GenMathError;

/// Layer norm epsilon.
pub const LN_EPS: f64 = 1e-5;
/// Floor applied to gradient magnitudes before inversion.
pub const G_MIN: f64 = 1e-8;

/// Per-frame subtitle features with the frames they cover.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineFeatures {
    pub values: DMatrix<f64>,
    pub coverage: Vec<bool>,
}

impl TimelineFeatures {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self { values: DMatrix::zeros(len, dim), coverage: vec![false; len] }
    }

    pub fn len(&self) -> usize {
        self.coverage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coverage.is_empty()
    }
}

/// One subtitle placed on the timeline: frames `[start, end)` and its text embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub start: usize,
    pub end: usize,
    pub embedding: Vec<f64>,
}

/// Replicates each embedding over its interval, adding the positional row for
/// the offset from the interval start. Later entries overwrite earlier ones.
pub fn timeline_features(entries: &[TimelineEntry], pe: &DMatrix<f64>, len: usize) -> Result<TimelineFeatures, GenMathError> {
    let dim = pe.ncols();
    let mut out = TimelineFeatures::zeros(len, dim);
    for e in entries {
        if e.start >= e.end || e.end > len {
            return Err(GenMathError::BadInterval { start: e.start, end: e.end, len });
        }
        if e.embedding.len() != dim {
            return Err(GenMathError::ShapeMismatch(format!("embedding has {} values, positional table has {dim} columns", e.embedding.len())));
        }
        if e.end - e.start > pe.nrows() {
            return Err(GenMathError::OffsetTooLarge { offset: e.end - e.start - 1, max: pe.nrows() });
        }
        for i in e.start..e.end {
            for c in 0..dim {
                out.values[(i, c)] = e.embedding[c] + pe[(i - e.start, c)];
            }
            out.coverage[i] = true;
        }
    }
    Ok(out)
}

/// `0` where both frames are covered, `-inf` elsewhere.
pub fn temporal_mask(coverage: &[bool]) -> DMatrix<f64> {
    let n = coverage.len();
    DMatrix::from_fn(n, n, |i, j| if coverage[i] && coverage[j] { 0.0 } else { f64::NEG_INFINITY })
}

/// Row softmax; rows without a finite logit become all zeros.
pub fn row_softmax(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(logits.nrows(), logits.ncols());
    for r in 0..logits.nrows() {
        let row = logits.row(r);
        let max = row.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            continue;
        }
        let exps: Vec<f64> = row.iter().map(|&x| if x.is_finite() { (x - max).exp() } else { 0.0 }).collect();
        let sum: f64 = exps.iter().sum();
        for (c, e) in exps.into_iter().enumerate() {
            out[(r, c)] = e / sum;
        }
    }
    out
}

/// Normalizes every row to zero mean and unit variance.
pub fn layer_norm(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    let d = x.ncols() as f64;
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
        let scale = 1.0 / (var + LN_EPS).sqrt();
        row.apply(|v| *v = (*v - mean) * scale);
    }
    out
}

/// Projection matrices of the modulation block. `gamma` and `beta` are
/// linear maps without bias, applied as `f · G` and `f · B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationWeights {
    pub w_tq: DMatrix<f64>,
    pub w_tk: DMatrix<f64>,
    pub w_cq: DMatrix<f64>,
    pub w_ck: DMatrix<f64>,
    pub w_vt: DMatrix<f64>,
    pub w_vc: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub pe: DMatrix<f64>,
}

impl ModulationWeights {
    /// Gaussian weights scaled by `1/sqrt(dim)`.
    pub fn random(seed: u64, max_offset: usize, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim.max(1) as f64).sqrt();
        let mut m = |rows: usize| DMatrix::from_fn(rows, dim, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
        Self {
            w_tq: m(dim),
            w_tk: m(dim),
            w_cq: m(dim),
            w_ck: m(dim),
            w_vt: m(dim),
            w_vc: m(dim),
            gamma: m(dim),
            beta: m(dim),
            pe: m(max_offset),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_tq.ncols()
    }

    fn square(&self) -> [(&'static str, &DMatrix<f64>); 8] {
        [
            ("W_TQ", &self.w_tq),
            ("W_TK", &self.w_tk),
            ("W_CQ", &self.w_cq),
            ("W_CK", &self.w_ck),
            ("W_VT", &self.w_vt),
            ("W_VC", &self.w_vc),
            ("G", &self.gamma),
            ("B", &self.beta),
        ]
    }

    /// Text layout: a `L_max D` header line, then `W_TQ W_TK W_CQ W_CK W_VT W_VC G B`
    /// (each D×D) and the positional table (L_max×D), all row-major and whitespace-separated.
    pub fn parse(text: &str) -> Result<Self, GenMathError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header = lines.next().ok_or_else(|| GenMathError::WeightFile("empty file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| GenMathError::WeightFile(format!("bad header '{header}'"))))
            .collect::<Result<_, _>>()?;
        let [l_max, d] = dims[..] else {
            return Err(GenMathError::WeightFile(format!("header must be 'L_max D', got '{header}'")));
        };
        if d == 0 {
            return Err(GenMathError::WeightFile("dimension must be positive".into()));
        }
        let values: Vec<f64> = lines
            .flat_map(str::split_whitespace)
            .map(|t| t.parse::<f64>().map_err(|_| GenMathError::WeightFile(format!("bad number '{t}'"))))
            .collect::<Result<_, _>>()?;
        let expected = 8 * d * d + l_max * d;
        if values.len() != expected {
            return Err(GenMathError::WeightFile(format!("expected {expected} values, found {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(GenMathError::WeightFile(format!("non-finite weight {v}")));
        }
        let mut rest = &values[..];
        let mut take = |rows: usize| {
            let (head, tail) = rest.split_at(rows * d);
            rest = tail;
            DMatrix::from_row_slice(rows, d, head)
        };
        Ok(Self {
            w_tq: take(d),
            w_tk: take(d),
            w_cq: take(d),
            w_ck: take(d),
            w_vt: take(d),
            w_vc: take(d),
            gamma: take(d),
            beta: take(d),
            pe: take(l_max),
        })
    }

    pub fn load(path: &Path) -> Result<Self, GenMathError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.pe.nrows(), self.dim());
        let mut put = |name: &str, m: &DMatrix<f64>| {
            let _ = writeln!(out, "# {name}");
            for r in m.row_iter() {
                let row: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        };
        for (name, m) in self.square() {
            put(name, m);
        }
        put("PE", &self.pe);
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), GenMathError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Intermediate results of one modulation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationTrace {
    pub temporal_attention: DMatrix<f64>,
    pub channel_attention: DMatrix<f64>,
    pub fused: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub output: DMatrix<f64>,
}

pub fn modulation_trace(z: &DMatrix<f64>, f: &TimelineFeatures, w: &ModulationWeights) -> Result<ModulationTrace, GenMathError> {
    let (l, d) = z.shape();
    if f.values.shape() != (l, d) || f.coverage.len() != l {
        return Err(GenMathError::ShapeMismatch(format!("latent is {l}x{d}, features are {}x{}", f.values.nrows(), f.values.ncols())));
    }
    for (name, m) in w.square() {
        if m.shape() != (d, d) {
            return Err(GenMathError::ShapeMismatch(format!("{name} is {}x{}, expected {d}x{d}", m.nrows(), m.ncols())));
        }
    }
    let fv = &f.values;
    let temporal_logits = (fv * &w.w_tq) * (z * &w.w_tk).transpose() / (d as f64).sqrt() + temporal_mask(&f.coverage);
    let temporal_attention = row_softmax(&temporal_logits);
    let channel_logits = (fv * &w.w_cq).transpose() * (z * &w.w_ck) / (l as f64).sqrt();
    let channel_attention = row_softmax(&channel_logits);
    let fused = &temporal_attention * (z * &w.w_vt) + (z * &w.w_vc) * channel_attention.transpose();
    let delta = (fv * &w.gamma).component_mul(&layer_norm(&fused)) + fv * &w.beta;
    let output = z + &delta;
    Ok(ModulationTrace { temporal_attention, channel_attention, fused, delta, output })
}

/// `z + Δz` for the subtitle features `f`.
pub fn modulation_forward(z: &DMatrix<f64>, f: &TimelineFeatures, w: &ModulationWeights) -> Result<DMatrix<f64>, GenMathError> {
    Ok(modulation_trace(z, f, w)?.output)
}

/// One forward diffusion step `sqrt(1-β)·x + sqrt(β)·ε`.
pub fn forward_noise(x_prev: &[f64], beta: f64, noise: &[f64]) -> Result<Vec<f64>, GenMathError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(GenMathError::InvalidBeta(beta));
    }
    if x_prev.len() != noise.len() {
        return Err(GenMathError::ShapeMismatch(format!("{} values vs {} noise values", x_prev.len(), noise.len())));
    }
    let (a, b) = ((1.0 - beta).sqrt(), beta.sqrt());
    Ok(x_prev.iter().zip(noise).map(|(x, e)| a * x + b * e).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Losses {
    pub recon: f64,
    pub vel: f64,
    pub acc: f64,
}

fn sq_norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum()
}

/// Reconstruction, velocity and acceleration losses; the last two read the prediction only.
pub fn losses(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Losses, GenMathError> {
    if pred.len() != target.len() {
        return Err(GenMathError::ShapeMismatch(format!("{} predicted steps vs {} target steps", pred.len(), target.len())));
    }
    if pred.len() < 3 {
        return Err(GenMathError::TooShort { needed: 3, got: pred.len() });
    }
    let dim = pred[0].len();
    if let Some(bad) = pred.iter().chain(target).find(|v| v.len() != dim) {
        return Err(GenMathError::ShapeMismatch(format!("step of dimension {} in a sequence of dimension {dim}", bad.len())));
    }
    let t = pred.len() as f64;
    let recon = pred.iter().zip(target).map(|(p, y)| sq_norm(p.iter().zip(y).map(|(a, b)| a - b))).sum::<f64>() / t;
    let vel = pred.windows(2).map(|w| sq_norm(w[1].iter().zip(&w[0]).map(|(b, a)| b - a))).sum::<f64>() / (t - 1.0);
    let acc = pred
        .windows(3)
        .map(|w| sq_norm((0..dim).map(|c| w[2][c] - 2.0 * w[1][c] + w[0][c])))
        .sum::<f64>()
        / (t - 2.0);
    Ok(Losses { recon, vel, acc })
}

/// Inverse-magnitude weights `(1/g_k) / Σ 1/g_j`, with magnitudes floored at [`G_MIN`].
pub fn adaptive_weights(grads: [f64; 3]) -> Result<[f64; 3], GenMathError> {
    if let Some(&g) = grads.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(GenMathError::InvalidGradient(g));
    }
    let inv = grads.map(|g| 1.0 / g.max(G_MIN));
    let sum: f64 = inv.iter().sum();
    Ok(inv.map(|x| x / sum))
}

/// `λ·L` summed over the three terms.
pub fn total_loss(l: &Losses, weights: [f64; 3]) -> f64 {
    weights[0] * l.recon + weights[1] * l.vel + weights[2] * l.acc
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn row(name: &str, passed: bool, detail: String) -> CheckRow {
    CheckRow { name: name.into(), passed, detail }
}

/// Standard normal `rows × cols` matrix drawn from `seed`.
pub fn seeded_latent(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    random_matrix(&mut ChaCha8Rng::seed_from_u64(seed), rows, cols)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Runs the kernel invariants on random instances drawn from `seed`.
pub fn check(seed: u64) -> Vec<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    let mut identity_ok = true;
    let mut softmax_err: f64 = 0.0;
    for k in 0..100 {
        let l = rng.gen_range(1..12);
        let d = rng.gen_range(1..8);
        let w = ModulationWeights::random(seed.wrapping_add(k), l, d);
        let z = random_matrix(&mut rng, l, d);
        let out = modulation_forward(&z, &TimelineFeatures::zeros(l, d), &w).expect("shapes agree");
        identity_ok &= out == z;

        let start = rng.gen_range(0..l);
        let end = rng.gen_range(start + 1..=l);
        let emb: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let f = timeline_features(&[TimelineEntry { start, end, embedding: emb }], &w.pe, l).expect("entry fits");
        let tr = modulation_trace(&z, &f, &w).expect("shapes agree");
        for (r, covered) in f.coverage.iter().enumerate() {
            if *covered {
                softmax_err = softmax_err.max((tr.temporal_attention.row(r).sum() - 1.0).abs());
            }
        }
        for r in 0..d {
            softmax_err = softmax_err.max((tr.channel_attention.row(r).sum() - 1.0).abs());
        }
    }
    rows.push(row("zero-subtitle identity", identity_ok, "100 random (z, weights) pairs".into()));
    rows.push(row("attention rows sum to 1", softmax_err <= 1e-6, format!("max deviation {softmax_err:.2e}")));

    let w = ModulationWeights::random(seed, 1, 3);
    let z = random_matrix(&mut rng, 1, 3);
    let f = timeline_features(&[TimelineEntry { start: 0, end: 1, embedding: vec![0.5, -0.25, 1.0] }], &w.pe, 1).expect("entry fits");
    let a = modulation_trace(&z, &f, &w).expect("shapes agree").temporal_attention;
    rows.push(row("single-frame attention", a == DMatrix::from_element(1, 1, 1.0), format!("A_T = {:?}", a[(0, 0)])));

    let m = temporal_mask(&[true, false, true]);
    let zeros: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|&(i, j)| m[(i, j)] == 0.0).collect();
    rows.push(row("temporal mask", zeros == [(0, 0), (0, 2), (2, 0), (2, 2)], format!("zeros at {zeros:?}")));

    const SAMPLES: usize = 100_000;
    for beta in [0.01, 0.5, 0.99] {
        let x: Vec<f64> = (0..SAMPLES).map(|_| rng.sample(StandardNormal)).collect();
        let e: Vec<f64> = (0..SAMPLES).map(|_| rng.sample(StandardNormal)).collect();
        let out = forward_noise(&x, beta, &e).expect("valid beta");
        let mean = out.iter().sum::<f64>() / SAMPLES as f64;
        let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / SAMPLES as f64;
        rows.push(row(&format!("noise variance beta={beta}"), (var - 1.0).abs() <= 0.02, format!("variance {var:.4}")));
    }

    let pred: Vec<Vec<f64>> = (0..10).map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let target: Vec<Vec<f64>> = (0..10).map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let l = losses(&pred, &target).expect("equal shapes");
    let self_l = losses(&pred, &pred).expect("equal shapes");
    rows.push(row(
        "losses non-negative",
        l.recon >= 0.0 && l.vel >= 0.0 && l.acc >= 0.0 && self_l.recon == 0.0,
        format!("recon {:.4}, vel {:.4}, acc {:.4}", l.recon, l.vel, l.acc),
    ));
    let line: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64, 2.0 * t as f64 - 1.0]).collect();
    let acc = losses(&line, &line).expect("equal shapes").acc;
    rows.push(row("linear motion has zero acceleration", acc == 0.0, format!("acc {acc}")));

    let g = [rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0)];
    let wts = adaptive_weights(g).expect("positive");
    let perm = adaptive_weights([g[2], g[0], g[1]]).expect("positive");
    let sum: f64 = wts.iter().sum();
    rows.push(row(
        "adaptive weights",
        (sum - 1.0).abs() < 1e-12 && perm == [wts[2], wts[0], wts[1]],
        format!("{:.4} {:.4} {:.4}", wts[0], wts[1], wts[2]),
    ));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timeline_construction() {
        let pe = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.5, 1.0, 2.0, 3.0]);
        let f = timeline_features(&[], &pe, 5).unwrap();
        assert!(f.values.iter().all(|v| *v == 0.0));
        assert!(f.coverage.iter().all(|c| !c));
        let f = timeline_features(&[TimelineEntry { start: 2, end: 4, embedding: vec![1.0, -1.0] }], &pe, 5).unwrap();
        assert_eq!(f.coverage, vec![false, false, true, true, false]);
        assert_eq!(f.values.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0]);
        assert_eq!(f.values.row(3).iter().copied().collect::<Vec<_>>(), vec![1.5, 0.0]);
        assert!(matches!(
            timeline_features(&[TimelineEntry { start: 3, end: 6, embedding: vec![0.0; 2] }], &pe, 5),
            Err(GenMathError::BadInterval { .. })
        ));
        assert!(matches!(
            timeline_features(&[TimelineEntry { start: 0, end: 4, embedding: vec![0.0; 2] }], &pe, 5),
            Err(GenMathError::OffsetTooLarge { .. })
        ));
    }

    #[test]
    fn later_entry_wins() {
        let pe = DMatrix::zeros(4, 1);
        let f = timeline_features(
            &[TimelineEntry { start: 0, end: 3, embedding: vec![1.0] }, TimelineEntry { start: 2, end: 4, embedding: vec![7.0] }],
            &pe,
            4,
        )
        .unwrap();
        assert_eq!(f.values.column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 7.0, 7.0]);
    }

    #[test]
    fn masks() {
        assert!(temporal_mask(&[true; 3]).iter().all(|v| *v == 0.0));
        assert!(temporal_mask(&[false; 3]).iter().all(|v| *v == f64::NEG_INFINITY));
    }

    #[test]
    fn masked_softmax_rows_are_zero() {
        let m = DMatrix::from_row_slice(2, 2, &[f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY]);
        let s = row_softmax(&m);
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn noise_endpoints() {
        let x = [1.0, -2.0];
        let e = [0.3, 0.4];
        assert_eq!(forward_noise(&x, 0.0, &e).unwrap(), x.to_vec());
        assert_eq!(forward_noise(&x, 1.0, &e).unwrap(), e.to_vec());
        assert!(matches!(forward_noise(&x, 1.5, &e), Err(GenMathError::InvalidBeta(_))));
    }

    #[test]
    fn adaptive_weight_arithmetic() {
        let w = adaptive_weights([1.0, 2.0, 4.0]).unwrap();
        for (a, b) in w.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(adaptive_weights([2.0; 3]).unwrap(), [1.0 / 3.0; 3]);
        let w = adaptive_weights([0.0, 1.0, 1.0]).unwrap();
        assert!(w[0] > 0.999_999);
        assert!(adaptive_weights([-1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn loss_errors() {
        assert!(matches!(losses(&vec![vec![0.0]; 2], &vec![vec![0.0]; 2]), Err(GenMathError::TooShort { .. })));
        assert!(matches!(losses(&vec![vec![0.0]; 3], &vec![vec![0.0]; 4]), Err(GenMathError::ShapeMismatch(_))));
    }

    #[test]
    fn weight_file_round_trip() {
        let w = ModulationWeights::random(9, 4, 3);
        let back = ModulationWeights::parse(&w.to_text()).unwrap();
        assert_eq!(back, w);
        assert!(ModulationWeights::parse("2 2\n1 2 3").is_err());
    }

    #[test]
    fn check_table_passes() {
        let rows = check(7);
        assert!(rows.iter().all(|r| r.passed), "{rows:?}");
    }
}
