//! Evaluation metrics for generated head motion.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::extrema::local_minima;
use crate::model::{distance, FrameSequence, Point3};
use crate::vocab::RegionConfig;

/// Default Gaussian width of the beat alignment score, seconds.
pub const DEFAULT_SIGMA: f64 = 0.1;

/// Per-frame vertex positions (mm) with the vertex subsets the metrics read.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSequence {
    positions: Vec<Vec<Point3>>,
    lip_ids: Vec<usize>,
    face_ids: Vec<usize>,
    upper_face_ids: Vec<usize>,
}

impl VertexSequence {
    pub fn new(
        positions: Vec<Vec<Point3>>,
        lip_ids: Vec<usize>,
        face_ids: Vec<usize>,
        upper_face_ids: Vec<usize>,
    ) -> Result<Self, MetricsError> {
        if positions.len() < 2 {
            return Err(MetricsError::TooFewFrames(positions.len()));
        }
        let nv = positions[0].len();
        if let Some(i) = positions.iter().position(|f| f.len() != nv) {
            return Err(MetricsError::ShapeMismatch(format!(
                "frame {i} has {} vertices, frame 0 has {nv}",
                positions[i].len()
            )));
        }
        for &id in lip_ids.iter().chain(&face_ids).chain(&upper_face_ids) {
            if id >= nv {
                return Err(MetricsError::IndexOutOfRange(id));
            }
        }
        Ok(Self { positions, lip_ids, face_ids, upper_face_ids })
    }

    /// Uses landmarks as vertices: lips = mouth, upper face = eyebrows + eyes, face = every landmark.
    pub fn from_frames(seq: &FrameSequence, regions: &RegionConfig) -> Result<Self, MetricsError> {
        let positions: Vec<Vec<Point3>> = seq.frames().iter().map(|f| f.landmarks.clone()).collect();
        let nv = positions.first().map_or(0, Vec::len);
        let mut upper = regions.eyebrows.clone();
        upper.extend(&regions.eyes);
        Self::new(positions, regions.mouth.clone(), (0..nv).collect(), upper)
    }

    pub fn frames(&self) -> usize {
        self.positions.len()
    }

    pub fn vertices(&self) -> usize {
        self.positions[0].len()
    }

    pub fn positions(&self) -> &[Vec<Point3>] {
        &self.positions
    }

    pub fn lip_ids(&self) -> &[usize] {
        &self.lip_ids
    }

    pub fn face_ids(&self) -> &[usize] {
        &self.face_ids
    }

    pub fn upper_face_ids(&self) -> &[usize] {
        &self.upper_face_ids
    }

    /// Mean displacement of all vertices from the previous frame, for frames 1..n.
    pub fn movement(&self) -> Vec<f64> {
        self.positions
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| distance(a, b)).sum::<f64>() / w[0].len().max(1) as f64)
            .collect()
    }
}

fn check_pair(gen: &VertexSequence, gt: &VertexSequence) -> Result<(), MetricsError> {
    if gen.frames() != gt.frames() {
        return Err(MetricsError::ShapeMismatch(format!("{} generated frames vs {} ground-truth frames", gen.frames(), gt.frames())));
    }
    if gen.vertices() != gt.vertices() {
        return Err(MetricsError::ShapeMismatch(format!("{} generated vertices vs {} ground-truth vertices", gen.vertices(), gt.vertices())));
    }
    if gen.lip_ids != gt.lip_ids || gen.face_ids != gt.face_ids || gen.upper_face_ids != gt.upper_face_ids {
        return Err(MetricsError::ShapeMismatch("vertex subsets differ".into()));
    }
    Ok(())
}

/// Lip vertex error: mean over frames of the largest lip vertex distance.
pub fn lve(gen: &VertexSequence, gt: &VertexSequence) -> Result<f64, MetricsError> {
    check_pair(gen, gt)?;
    if gen.lip_ids.is_empty() {
        return Err(MetricsError::DegenerateInput("no lip vertices".into()));
    }
    let total: f64 = gen
        .positions
        .iter()
        .zip(&gt.positions)
        .map(|(a, b)| gen.lip_ids.iter().map(|&v| distance(&a[v], &b[v])).fold(0.0, f64::max))
        .sum();
    Ok(total / gen.frames() as f64)
}

/// Face vertex error: mean distance over frames and face vertices.
pub fn fve(gen: &VertexSequence, gt: &VertexSequence) -> Result<f64, MetricsError> {
    check_pair(gen, gt)?;
    if gen.face_ids.is_empty() {
        return Err(MetricsError::DegenerateInput("no face vertices".into()));
    }
    let total: f64 = gen
        .positions
        .iter()
        .zip(&gt.positions)
        .map(|(a, b)| gen.face_ids.iter().map(|&v| distance(&a[v], &b[v])).sum::<f64>())
        .sum();
    Ok(total / (gen.frames() * gen.face_ids.len()) as f64)
}

/// Fraction of generated frames moving less than the ground truth's mean movement.
pub fn freeze_rate(gen: &VertexSequence, gt: &VertexSequence) -> Result<f64, MetricsError> {
    check_pair(gen, gt)?;
    let gt_move = gt.movement();
    let threshold = gt_move.iter().sum::<f64>() / gt_move.len() as f64;
    let gen_move = gen.movement();
    Ok(gen_move.iter().filter(|&&m| m < threshold).count() as f64 / gen_move.len() as f64)
}

/// Upper-face dynamics deviation in 1e-2 mm; positive when the generated face moves less.
pub fn fdd(gen: &VertexSequence, gt: &VertexSequence) -> Result<f64, MetricsError> {
    check_pair(gen, gt)?;
    if gen.upper_face_ids.is_empty() {
        return Err(MetricsError::DegenerateInput("no upper-face vertices".into()));
    }
    let dynamics = |s: &VertexSequence, v: usize| {
        let d: Vec<f64> = s.positions.iter().map(|f| distance(&f[v], &s.positions[0][v])).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt()
    };
    let ids = &gen.upper_face_ids;
    let total: f64 = ids.iter().map(|&v| dynamics(gt, v) - dynamics(gen, v)).sum();
    Ok(total / ids.len() as f64 * 100.0)
}

fn gaussian_fit(samples: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = samples.len();
    let d = samples[0].len();
    let mut mu = DVector::zeros(d);
    for s in samples {
        mu += DVector::from_column_slice(s);
    }
    mu /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let c = DVector::from_column_slice(s) - &mu;
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    (mu, cov)
}

/// Eigenvalues at round-off level are zeroed: taking their square root would
/// turn 1e-16 noise into 1e-8 noise on rank-deficient covariances.
fn clamped_roots(eigenvalues: &DVector<f64>) -> DVector<f64> {
    let scale = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let cutoff = scale * eigenvalues.len() as f64 * f64::EPSILON * 16.0;
    eigenvalues.map(|l| if l > cutoff { l.sqrt() } else { 0.0 })
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = clamped_roots(&eig.eigenvalues);
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussians fitted to two sample sets.
///
/// `Tr((Σa Σb)^½)` is taken as the trace of the square root of the symmetric
/// matrix `Σa^½ Σb Σa^½`, which has the same eigenvalues.
pub fn frechet_gaussian(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::DegenerateInput(format!("need at least 2 samples per set, got {} and {}", a.len(), b.len())));
    }
    let d = a[0].len();
    if d == 0 {
        return Err(MetricsError::DegenerateInput("dimension 0".into()));
    }
    if let Some(bad) = a.iter().chain(b).find(|s| s.len() != d) {
        return Err(MetricsError::ShapeMismatch(format!("sample of dimension {} in a set of dimension {d}", bad.len())));
    }
    let (mu_a, cov_a) = gaussian_fit(a);
    let (mu_b, cov_b) = gaussian_fit(b);
    let root_a = symmetric_sqrt(&cov_a);
    let inner = &root_a * &cov_b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_root: f64 = clamped_roots(&SymmetricEigen::new(inner).eigenvalues).sum();
    let value = (&mu_a - &mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * tr_root;
    Ok(value.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidPair {
    pub fid_fm: f64,
    pub fid_dfm: f64,
    pub snd: f64,
}

fn diffs(params: &[Vec<f64>]) -> Vec<Vec<f64>> {
    params.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect()).collect()
}

/// Fréchet distances over per-frame parameters and their frame-to-frame differences.
pub fn fid_pair(gen: &[Vec<f64>], gt: &[Vec<f64>]) -> Result<FidPair, MetricsError> {
    let fid_fm = frechet_gaussian(gen, gt)?;
    let fid_dfm = frechet_gaussian(&diffs(gen), &diffs(gt))?;
    Ok(FidPair { fid_fm, fid_dfm, snd: fid_fm + fid_dfm })
}

/// Alignment of motion beats to music beats (seconds).
pub fn beat_alignment_score(motion_beats: &[f64], music_beats: &[f64], sigma: f64) -> Result<f64, MetricsError> {
    if music_beats.is_empty() {
        return Err(MetricsError::NoBeats);
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(MetricsError::DegenerateInput(format!("sigma must be positive, got {sigma}")));
    }
    if motion_beats.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = music_beats
        .iter()
        .map(|&tm| {
            let nearest = motion_beats.iter().map(|&tk| (tk - tm).powi(2)).fold(f64::INFINITY, f64::min);
            (-nearest / (2.0 * sigma * sigma)).exp()
        })
        .sum();
    Ok(total / music_beats.len() as f64)
}

/// Times (seconds) of the local minima of the mean vertex velocity, frame 0 excluded.
pub fn motion_beats(motion: &VertexSequence, fps: f64) -> Vec<f64> {
    let velocity: Vec<f64> = motion.movement().into_iter().map(|m| m * fps).collect();
    local_minima(&velocity).into_iter().map(|i| (i + 1) as f64 / fps).collect()
}

/// Beat alignment of a motion sequence against the music beats that fall inside the clip.
pub fn beat_alignment(motion: &VertexSequence, music_beats: &[f64], fps: f64, sigma: f64) -> Result<f64, MetricsError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(MetricsError::DegenerateInput(format!("fps must be positive, got {fps}")));
    }
    let duration = motion.frames() as f64 / fps;
    let inside: Vec<f64> = music_beats.iter().copied().filter(|&t| (0.0..=duration).contains(&t)).collect();
    beat_alignment_score(&motion_beats(motion, fps), &inside, sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub lve_mm: f64,
    pub fve_mm: f64,
    pub freeze_rate_fraction: f64,
    pub fid_fm: f64,
    pub fid_dfm: f64,
    pub snd: f64,
    #[serde(rename = "fdd_1e-2mm")]
    pub fdd_centi_mm: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ba: Option<f64>,
}

/// Every metric for one generated/ground-truth pair; BA only when beats are given.
pub fn evaluate(
    gen: &FrameSequence,
    gt: &FrameSequence,
    regions: &RegionConfig,
    beats: Option<&[f64]>,
    sigma: f64,
) -> Result<MetricsReport, MetricsError> {
    if gen.len() != gt.len() {
        return Err(MetricsError::ShapeMismatch(format!("{} generated frames vs {} ground-truth frames", gen.len(), gt.len())));
    }
    let gv = VertexSequence::from_frames(gen, regions)?;
    let tv = VertexSequence::from_frames(gt, regions)?;
    let fid = fid_pair(&gen.params(), &gt.params())?;
    let ba = match beats {
        Some(b) => Some(beat_alignment(&gv, b, gen.fps(), sigma)?),
        None => None,
    };
    Ok(MetricsReport {
        lve_mm: lve(&gv, &tv)?,
        fve_mm: fve(&gv, &tv)?,
        freeze_rate_fraction: freeze_rate(&gv, &tv)?,
        fid_fm: fid.fid_fm,
        fid_dfm: fid.fid_dfm,
        snd: fid.snd,
        fdd_centi_mm: fdd(&gv, &tv)?,
        ba,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(positions: Vec<Vec<Point3>>) -> VertexSequence {
        let nv = positions[0].len();
        VertexSequence::new(positions, (0..nv).collect(), (0..nv).collect(), (0..nv).collect()).unwrap()
    }

    fn random_seq(rng: &mut ChaCha8Rng, frames: usize, nv: usize) -> VertexSequence {
        seq((0..frames).map(|_| (0..nv).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()).collect())
    }

    fn d(a: &Point3, b: &Point3) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    #[test]
    fn lve_hand_case() {
        let gt = seq(vec![vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![[0.0; 3], [1.0, 0.0, 0.0]]]);
        let gen = seq(vec![vec![[0.0, 2.0, 0.0], [1.0, 0.0, 0.0]], vec![[0.0; 3], [1.0, 0.0, 0.0]]]);
        assert_eq!(lve(&gt, &gt).unwrap(), 0.0);
        assert!((lve(&gen, &gt).unwrap() - 1.0).abs() < 1e-12);
        // one vertex off by 2 in one of 2 frames over 2 vertices
        assert!((fve(&gen, &gt).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lve_fve_match_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_seq(&mut rng, 5, 6);
            let b = random_seq(&mut rng, 5, 6);
            let mut lmax = 0.0;
            let mut fsum = 0.0;
            for f in 0..5 {
                let mut m: f64 = 0.0;
                for v in 0..6 {
                    let e = d(&a.positions[f][v], &b.positions[f][v]);
                    m = m.max(e);
                    fsum += e;
                }
                lmax += m;
            }
            assert!((lve(&a, &b).unwrap() - lmax / 5.0).abs() < 1e-12);
            assert!((fve(&a, &b).unwrap() - fsum / 30.0).abs() < 1e-12);
            assert!(lve(&a, &b).unwrap() >= fve(&a, &b).unwrap());
        }
    }

    #[test]
    fn freeze_rate_cases() {
        let gt = seq(vec![vec![[0.0; 3]], vec![[1.0, 0.0, 0.0]], vec![[3.0, 0.0, 0.0]], vec![[6.0, 0.0, 0.0]]]);
        let still = seq(vec![vec![[5.0; 3]]; 4]);
        assert_eq!(freeze_rate(&still, &gt).unwrap(), 1.0);
        // movements 1,2,3; mean 2; only 1 is below
        assert!((freeze_rate(&gt, &gt).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fdd_static_gen_is_mean_gt_dynamics() {
        let gt = seq(vec![vec![[0.0; 3]], vec![[2.0, 0.0, 0.0]]]);
        let still = seq(vec![vec![[0.0; 3]]; 2]);
        // distances {0, 2}: std 1
        assert!((fdd(&still, &gt).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(fdd(&gt, &gt).unwrap(), 0.0);
    }

    #[test]
    fn frechet_one_dimensional() {
        let a: Vec<Vec<f64>> = vec![vec![-1.0], vec![1.0]];
        let b: Vec<Vec<f64>> = vec![vec![1.0], vec![5.0]];
        // means 0 and 3, sample std sqrt(2) and sqrt(8)
        let expected = 9.0 + (2f64.sqrt() - 8f64.sqrt()).powi(2);
        assert!((frechet_gaussian(&a, &b).unwrap() - expected).abs() < 1e-9);
        assert!(frechet_gaussian(&a, &a).unwrap() < 1e-8);
    }

    #[test]
    fn errors() {
        assert!(matches!(frechet_gaussian(&[vec![1.0]], &[vec![1.0], vec![2.0]]), Err(MetricsError::DegenerateInput(_))));
        assert!(matches!(frechet_gaussian(&[vec![], vec![]], &[vec![], vec![]]), Err(MetricsError::DegenerateInput(_))));
        let a = seq(vec![vec![[0.0; 3]]; 2]);
        let b = seq(vec![vec![[0.0; 3]]; 3]);
        let err = lve(&a, &b).unwrap_err();
        assert!(err.to_string().starts_with("ShapeMismatch"));
        assert!(matches!(beat_alignment_score(&[1.0], &[], 0.1), Err(MetricsError::NoBeats)));
        assert!(matches!(VertexSequence::new(vec![vec![[0.0; 3]]; 2], vec![1], vec![], vec![]), Err(MetricsError::IndexOutOfRange(1))));
    }

    #[test]
    fn beat_alignment_formula() {
        assert_eq!(beat_alignment_score(&[0.5, 1.0], &[0.5, 1.0], 0.1).unwrap(), 1.0);
        assert_eq!(beat_alignment_score(&[], &[0.5], 0.1).unwrap(), 0.0);
        let v = beat_alignment_score(&[1.1], &[1.0], 0.1).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn motion_beats_from_velocity() {
        // movement 2,1,2,1,2 → minima at curve indices 1 and 3 → frames 2 and 4
        let xs = [0.0, 2.0, 3.0, 5.0, 6.0, 8.0];
        let s = seq(xs.iter().map(|&x| vec![[x, 0.0, 0.0]]).collect());
        assert_eq!(motion_beats(&s, 10.0), vec![0.2, 0.4]);
        assert_eq!(beat_alignment(&s, &[0.2, 0.4, 9.0], 10.0, 0.1).unwrap(), 1.0);
        assert!(matches!(beat_alignment(&s, &[9.0], 10.0, 0.1), Err(MetricsError::NoBeats)));
    }
}
