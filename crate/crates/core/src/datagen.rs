//! Synthetic sparse-recovery instances and natural-signal patches.
//!
//! Randomness comes from ChaCha8 with one stream per purpose, so e.g. the
//! noise level can change without perturbing the dictionary or the support.

use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{HcdError, Result};
use crate::linalg::{dot, norm2, DenseMatrix, DenseVector};
use crate::pgm::GrayImage;
use crate::problem::{Dictionary, Problem};
use crate::scalar::Scalar;

/// Name of the generator recorded in output metadata.
pub const PRNG_NAME: &str = "ChaCha8Rng";

#[derive(Debug, Clone, Copy)]
enum Stream {
    Dictionary = 0,
    Support = 1,
    Truth = 2,
    Noise = 3,
    Patches = 4,
}

fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Dictionary N(0, 1), noise N(0, sigma^2).
    Normal,
    /// Dictionary U[-1, 1], noise U[-sigma, sigma].
    Uniform,
}

impl FromStr for Distribution {
    type Err = HcdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "uniform" => Ok(Self::Uniform),
            other => Err(HcdError::InvalidParameter(format!(
                "unknown distribution {other:?} (expected normal or uniform)"
            ))),
        }
    }
}

impl Distribution {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Uniform => "uniform",
        }
    }

    fn sample(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Normal => StandardNormal.sample(rng),
            Self::Uniform => Uniform::new_inclusive(-1.0, 1.0)
                .expect("valid range")
                .sample(rng),
        }
    }
}

/// Parameters of a synthetic instance `x = D a* + z`. Missing fields
/// deserialize to the noise-free `300 x 2000`, 20-sparse default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSpec {
    pub dist: Distribution,
    pub d: usize,
    pub k: usize,
    /// Nonzeros in the generating code.
    pub s: usize,
    /// Noise magnitude.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            dist: Distribution::Normal,
            d: 300,
            k: 2000,
            s: 20,
            sigma: 0.0,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(HcdError::InvalidParameter("d must be at least 1".into()));
        }
        if self.s == 0 || self.s > self.k {
            return Err(HcdError::InvalidParameter(format!(
                "need 0 < s <= K, got s = {}, K = {}",
                self.s, self.k
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(HcdError::InvalidParameter("sigma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated<T> {
    pub problem: Problem<T>,
    /// Column norms before normalization; the truth was scaled by these.
    pub column_pre_norms: Vec<T>,
}

/// Draws a `d x k` matrix and normalizes its columns.
pub fn random_dictionary<T: Scalar>(
    dist: Distribution,
    d: usize,
    k: usize,
    seed: u64,
) -> Result<(DenseMatrix<T>, DenseVector<T>)> {
    let mut rng = stream(seed, Stream::Dictionary);
    let data = (0..d * k).map(|_| T::lit(dist.sample(&mut rng))).collect();
    normalize_columns(&DenseMatrix::from_column_major(d, k, data)?)
}

/// Generates a problem: dictionary entries from `dist`, a uniformly random
/// support of size `s` carrying N(0, 1) values, and additive noise.
///
/// Columns are normalized after sampling and the truth is multiplied by the
/// pre-normalization norms so that `x = D a* + z` holds for the normalized
/// dictionary.
pub fn generate<T: Scalar>(spec: &GenSpec) -> Result<Generated<T>> {
    spec.validate()?;
    let (dict, pre_norms) = random_dictionary::<T>(spec.dist, spec.d, spec.k, spec.seed)?;

    let mut support = sample(&mut stream(spec.seed, Stream::Support), spec.k, spec.s).into_vec();
    support.sort_unstable();
    let mut truth_rng = stream(spec.seed, Stream::Truth);
    let mut truth = DenseVector::zeros(spec.k);
    for &j in &support {
        let v: f64 = StandardNormal.sample(&mut truth_rng);
        truth[j] = T::lit(v) * pre_norms[j];
    }

    let mut x = vec![T::zero(); spec.d];
    for &j in &support {
        for (xi, &dij) in x.iter_mut().zip(dict.column(j)) {
            *xi += dij * truth[j];
        }
    }
    if spec.sigma > 0.0 {
        let mut noise = stream(spec.seed, Stream::Noise);
        for xi in &mut x {
            *xi += T::lit(spec.sigma * spec.dist.sample(&mut noise));
        }
    }

    let problem = Problem::new(
        Dictionary::new(dict),
        DenseVector::from_vec(x)?,
        Some(truth),
    )?;
    Ok(Generated {
        problem,
        column_pre_norms: pre_norms.into_vec(),
    })
}

/// Scales every column to unit Euclidean norm; returns the original norms.
pub fn normalize_columns<T: Scalar>(m: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseVector<T>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let n = norm2(m.column(j));
        if n == T::zero() {
            return Err(HcdError::ZeroColumn(j));
        }
        if n != T::one() {
            for v in out.column_mut(j) {
                *v /= n;
            }
        }
        norms.push(n);
    }
    Ok((out, DenseVector::from_vec(norms)?))
}

/// Random `n x n` matrix with orthonormal columns (Gram-Schmidt applied
/// twice to a Gaussian draw).
pub fn orthonormal_dictionary<T: Scalar>(n: usize, seed: u64) -> Result<DenseMatrix<T>> {
    let mut rng = stream(seed, Stream::Dictionary);
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<T> = (0..n)
            .map(|_| T::lit(StandardNormal.sample(&mut rng)))
            .collect();
        for _ in 0..2 {
            for q in &cols {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * *qi;
                }
            }
        }
        let nv = norm2(&v);
        if nv > T::lit(1e-6) {
            cols.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    DenseMatrix::from_columns(&cols)
}

/// Samples `count` square patches at uniformly random offsets and flattens
/// each row by row.
pub fn extract_patches<T: Scalar>(
    image: &GrayImage,
    patch: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<DenseVector<T>>> {
    if patch == 0 || count == 0 {
        return Err(HcdError::InvalidParameter(
            "patch size and count must be positive".into(),
        ));
    }
    if patch > image.width() || patch > image.height() {
        return Err(HcdError::PatchTooLarge {
            patch,
            width: image.width(),
            height: image.height(),
        });
    }
    let mut rng = stream(seed, Stream::Patches);
    (0..count)
        .map(|_| {
            let top = rng.random_range(0..=image.height() - patch);
            let left = rng.random_range(0..=image.width() - patch);
            let mut v = Vec::with_capacity(patch * patch);
            for r in top..top + patch {
                for c in left..left + patch {
                    v.push(T::lit(image.get(r, c)));
                }
            }
            DenseVector::from_vec(v)
        })
        .collect()
}

/// Adds i.i.d. N(0, sigma^2) noise, drawn from the noise stream of `seed`.
pub fn add_gaussian_noise<T: Scalar>(v: &mut [T], sigma: f64, seed: u64) {
    if sigma == 0.0 {
        return;
    }
    let mut rng = stream(seed, Stream::Noise);
    for x in v {
        let z: f64 = StandardNormal.sample(&mut rng);
        *x += T::lit(sigma * z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matvec;

    fn spec(dist: Distribution, s: usize, sigma: f64) -> GenSpec {
        GenSpec {
            dist,
            d: 30,
            k: 50,
            s,
            sigma,
            seed: 11,
        }
    }

    #[test]
    fn noise_free_signal_matches_truth() {
        for dist in [Distribution::Normal, Distribution::Uniform] {
            let g = generate::<f64>(&spec(dist, 3, 0.0)).unwrap();
            let p = &g.problem;
            let truth = p.truth().unwrap();
            assert_eq!(truth.nnz(), 3);
            let dx = matvec(p.matrix(), truth).unwrap();
            let err: f64 = dx.iter().zip(p.signal().iter()).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(err.sqrt() <= 1e-10 * p.signal().norm2());
            p.dictionary().check_normalized().unwrap();
            for n in p.dictionary().column_norms() {
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_truth_when_s_equals_k() {
        let g = generate::<f64>(&GenSpec {
            k: 8,
            s: 8,
            ..spec(Distribution::Normal, 1, 0.0)
        })
        .unwrap();
        assert_eq!(g.problem.truth().unwrap().nnz(), 8);
    }

    #[test]
    fn deterministic_and_noise_independent_dictionary() {
        let a = generate::<f64>(&spec(Distribution::Normal, 4, 0.1)).unwrap();
        let b = generate::<f64>(&spec(Distribution::Normal, 4, 0.1)).unwrap();
        assert_eq!(a, b);
        let c = generate::<f64>(&spec(Distribution::Normal, 4, 0.0)).unwrap();
        assert_eq!(a.problem.dictionary(), c.problem.dictionary());
        assert_eq!(a.problem.truth(), c.problem.truth());
        assert_ne!(a.problem.signal(), c.problem.signal());
        let other_seed = generate::<f64>(&GenSpec {
            seed: 12,
            ..spec(Distribution::Normal, 4, 0.1)
        })
        .unwrap();
        assert_ne!(a.problem.dictionary(), other_seed.problem.dictionary());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate::<f64>(&spec(Distribution::Normal, 51, 0.0)).is_err());
        assert!(generate::<f64>(&spec(Distribution::Normal, 0, 0.0)).is_err());
        assert!(generate::<f64>(&spec(Distribution::Normal, 2, -1.0)).is_err());
        assert!(generate::<f64>(&GenSpec {
            d: 0,
            ..spec(Distribution::Normal, 2, 0.0)
        })
        .is_err());
    }

    #[test]
    fn entry_distributions() {
        let (_, _) = random_dictionary::<f64>(Distribution::Normal, 1, 1, 0).unwrap();
        let n = 100_000;
        let mut rng = stream(5, Stream::Dictionary);
        let xs: Vec<f64> = (0..n).map(|_| Distribution::Normal.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
        let us: Vec<f64> = (0..n).map(|_| Distribution::Uniform.sample(&mut rng)).collect();
        assert!(us.iter().all(|u| (-1.0..=1.0).contains(u)));
    }

    #[test]
    fn normalize_columns_cases() {
        let id = DenseMatrix::<f64>::identity(3);
        let (m, n) = normalize_columns(&id).unwrap();
        assert_eq!(m, id);
        assert_eq!(n.as_slice(), &[1.0, 1.0, 1.0]);

        let m = DenseMatrix::from_columns(&[vec![3.0, 4.0]]).unwrap();
        let (u, n) = normalize_columns(&m).unwrap();
        assert_eq!(u.column(0), &[0.6, 0.8]);
        assert_eq!(n.as_slice(), &[5.0]);

        let z = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(normalize_columns(&z), Err(HcdError::ZeroColumn(1))));
    }

    #[test]
    fn orthonormal_columns() {
        let q = orthonormal_dictionary::<f64>(16, 3).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot(q.column(a), q.column(b)) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn patches_whole_image_and_constant() {
        let px: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let img = GrayImage::new(8, 8, px.clone()).unwrap();
        let p = extract_patches::<f64>(&img, 8, 1, 0).unwrap();
        assert_eq!(p[0].as_slice(), px.as_slice());

        let img = GrayImage::new(10, 12, vec![0.25; 120]).unwrap();
        for v in extract_patches::<f64>(&img, 4, 5, 1).unwrap() {
            assert!(v.iter().all(|x| *x == 0.25));
        }
        assert!(matches!(
            extract_patches::<f64>(&img, 11, 1, 0),
            Err(HcdError::PatchTooLarge { .. })
        ));
    }

    #[test]
    fn patch_matches_direct_indexing() {
        let (w, h) = (512usize, 512usize);
        let px: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 1009) as f64 / 1008.0).collect();
        let img = GrayImage::new(w, h, px.clone()).unwrap();
        let patches = extract_patches::<f64>(&img, 16, 3, 9).unwrap();
        // recover each patch's offset from its first pixel, then compare
        for p in &patches {
            assert_eq!(p.len(), 256);
            let found = (0..=h - 16).flat_map(|t| (0..=w - 16).map(move |l| (t, l))).find(|&(t, l)| {
                (0..16).all(|r| (0..16).all(|c| px[(t + r) * w + l + c] == p[r * 16 + c]))
            });
            assert!(found.is_some());
        }
        assert_eq!(patches, extract_patches::<f64>(&img, 16, 3, 9).unwrap());
    }
}
