//! Seed-deterministic random sources.
//!
//! Every sampler takes an explicit generator created from an [`RngStream`].
//! A stream is a ChaCha8 generator keyed by the master seed and positioned on
//! one of its 2⁶⁴ independent streams, so trial `t` of experiment `e` always
//! sees the same numbers no matter which worker thread runs it.
//!
//! Haar-orthogonal matrices are produced by Householder QR of a Gaussian
//! matrix with the diagonal of `R` made positive. Because the lower-right
//! blocks of a Gaussian matrix stay i.i.d. Gaussian after each reflection,
//! the reflectors can be drawn directly from fresh Gaussian vectors of
//! decreasing length, and the orthogonal factor is kept as a product of
//! reflectors. Applying it costs `O(N²)`; [`HaarOrthogonal::to_matrix`]
//! densifies it.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::geometry::Vector;

/// Generator type handed to samplers.
pub type SimRng = ChaCha8Rng;

/// `(master_seed, stream_index)` pair that fully determines a random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// A named experiment under a master seed; hands out one stream per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Experiment {
    pub master_seed: u64,
    pub id: u64,
}

impl Experiment {
    pub fn new(master_seed: u64, name: &str) -> Self {
        Self {
            master_seed,
            id: fnv1a(name),
        }
    }

    /// Derived experiment, e.g. one per dimension in a sweep.
    pub fn child(&self, label: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            id: splitmix64(self.id ^ splitmix64(label)),
        }
    }

    /// Stream for trial `t`: `stream_index = hash(experiment, t)`.
    pub fn stream(&self, trial: u64) -> RngStream {
        RngStream::new(self.master_seed, splitmix64(self.id.wrapping_add(splitmix64(trial))))
    }

    pub fn rng(&self, trial: u64) -> SimRng {
        self.stream(trial).rng()
    }
}

/// Runs `f` once per trial, in parallel on the current rayon pool, each trial
/// with its own stream. Results come back in trial order.
pub fn par_trials<T, F>(exp: &Experiment, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> T + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = exp.rng(t as u64);
            f(&mut rng, t)
        })
        .collect()
}

/// `N` independent standard-normal coordinates.
pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vector> {
    if n == 0 {
        return Err(invalid("N", "dimension must be at least 1"));
    }
    Ok(gaussian_unchecked(n, rng))
}

pub(crate) fn gaussian_unchecked<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform point on the unit sphere of `E^N`, as a normalized Gaussian.
pub fn uniform_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vector> {
    if n < 2 {
        return Err(invalid("N", "sphere sampling needs N >= 2"));
    }
    Ok(unit_unchecked(n, rng))
}

pub(crate) fn unit_unchecked<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    loop {
        let x = gaussian_unchecked(n, rng);
        let len = x.norm();
        if len > 1e-300 {
            return x / len;
        }
    }
}

/// Haar-distributed orthogonal matrix stored as a product of Householder
/// reflectors and a diagonal of signs: `Q = H₀ H₁ ⋯ H_{N−2} D`.
#[derive(Debug, Clone)]
pub struct HaarOrthogonal {
    dim: usize,
    /// Unit reflector for `H_k`, acting on coordinates `k..N`.
    reflectors: Vec<Vector>,
    signs: Vec<f64>,
}

impl HaarOrthogonal {
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(invalid("N", "dimension must be at least 1"));
        }
        let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
        let mut signs = Vec::with_capacity(n);
        for k in 0..n {
            let len = n - k;
            loop {
                let mut x = gaussian_unchecked(len, rng);
                let norm = x.norm();
                if norm < 1e-300 {
                    continue;
                }
                let s = if x[0] >= 0.0 { 1.0 } else { -1.0 };
                if len > 1 {
                    // H x = −s‖x‖e₁, so R_kk = −s‖x‖ and D_kk = −s.
                    x[0] += s * norm;
                    let vlen = x.norm();
                    reflectors.push(x / vlen);
                    signs.push(-s);
                } else {
                    signs.push(s);
                }
                break;
            }
        }
        Ok(Self {
            dim: n,
            reflectors,
            signs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn reflect(v: &Vector, y: &mut [f64]) {
        let dot: f64 = v.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let scale = 2.0 * dot;
        for (yi, vi) in y.iter_mut().zip(v.iter()) {
            *yi -= scale * vi;
        }
    }

    /// `Q y`.
    pub fn apply(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.dim, y.len())?;
        let mut out = y.component_mul(&Vector::from_column_slice(&self.signs));
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            Self::reflect(v, &mut out.as_mut_slice()[k..]);
        }
        Ok(out)
    }

    /// `Qᵀ y`.
    pub fn apply_transpose(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.dim, y.len())?;
        let mut out = y.clone();
        for (k, v) in self.reflectors.iter().enumerate() {
            Self::reflect(v, &mut out.as_mut_slice()[k..]);
        }
        Ok(out.component_mul(&Vector::from_column_slice(&self.signs)))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = Vector::zeros(n);
            e[j] = 1.0;
            m.set_column(j, &self.apply(&e).expect("dimension matches"));
        }
        m
    }
}

/// Haar-random `N×N` orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    Ok(HaarOrthogonal::sample(n, rng)?.to_matrix())
}

/// Nonnegative singular values (or eigenvalues of a PSD operator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("spectrum", "must be nonempty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("spectrum", "entries must be finite and nonnegative"));
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl TryFrom<Vec<f64>> for SingularSpectrum {
    type Error = crate::Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SingularSpectrum> for Vec<f64> {
    fn from(s: SingularSpectrum) -> Self {
        s.values
    }
}

/// `T = U₁ · diag(s) · U₂` with independent Haar factors, kept in factored
/// form so `T v` costs `O(N²)`.
#[derive(Debug, Clone)]
pub struct SingularValueOperator {
    left: HaarOrthogonal,
    values: Vector,
    right: HaarOrthogonal,
}

impl SingularValueOperator {
    /// Draws `U₁` then `U₂` from `rng`.
    pub fn sample<R: Rng + ?Sized>(s: &SingularSpectrum, rng: &mut R) -> Result<Self> {
        let n = s.dim();
        let left = HaarOrthogonal::sample(n, rng)?;
        let right = HaarOrthogonal::sample(n, rng)?;
        Ok(Self {
            left,
            values: Vector::from_column_slice(s.values()),
            right,
        })
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        let inner = self.right.apply(v)?.component_mul(&self.values);
        self.left.apply(&inner)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let l = self.left.to_matrix();
        let r = self.right.to_matrix();
        l * DMatrix::from_diagonal(&self.values) * r
    }
}

/// Dense `T = U₁ · diag(s) · U₂` with independent Haar `U₁`, `U₂`.
pub fn matrix_with_singular_values<R: Rng + ?Sized>(s: &SingularSpectrum, rng: &mut R) -> Result<DMatrix<f64>> {
    Ok(SingularValueOperator::sample(s, rng)?.to_matrix())
}

/// Symmetric `A = Uᵀ · diag(s) · U` with Haar `U`, kept in factored form.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    basis: HaarOrthogonal,
    values: Vector,
}

impl SymmetricOperator {
    pub fn sample<R: Rng + ?Sized>(s: &SingularSpectrum, rng: &mut R) -> Result<Self> {
        Ok(Self {
            basis: HaarOrthogonal::sample(s.dim(), rng)?,
            values: Vector::from_column_slice(s.values()),
        })
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        let rotated = self.basis.apply(v)?.component_mul(&self.values);
        self.basis.apply_transpose(&rotated)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let u = self.basis.to_matrix();
        u.transpose() * DMatrix::from_diagonal(&self.values) * u
    }
}

/// One step of the sphere Markov chain: a uniform point of the
/// `(N−2)`-sphere of points at distance `d` from `u`,
/// `(1 − d²/2)·u + d·√(1 − d²/4)·w` with `w` uniform on the unit sphere of
/// `u^⊥`.
pub fn sphere_markov_step<R: Rng + ?Sized>(u: &Vector, d: f64, rng: &mut R) -> Result<Vector> {
    if u.len() < 2 {
        return Err(invalid("u", "need N >= 2"));
    }
    if ((u.norm()) - 1.0).abs() > 1e-10 {
        return Err(invalid("u", "must be a unit vector"));
    }
    if !(0.0..=2.0).contains(&d) {
        return Err(invalid("d", format!("must lie in [0, 2], got {d}")));
    }
    Ok(markov_step_unchecked(u, d, rng))
}

pub(crate) fn markov_step_unchecked<R: Rng + ?Sized>(u: &Vector, d: f64, rng: &mut R) -> Vector {
    let w = loop {
        let g = gaussian_unchecked(u.len(), rng);
        let t = &g - u * u.dot(&g);
        let len = t.norm();
        if len > 1e-300 {
            break t / len;
        }
    };
    u * (1.0 - 0.5 * d * d) + w * (d * (1.0 - 0.25 * d * d).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::prob_lp_norm;
    use nalgebra::dvector;

    #[test]
    fn streams_are_reproducible() {
        let s = RngStream::new(7, 3);
        let a = gaussian_vector(16, &mut s.rng()).unwrap();
        let b = gaussian_vector(16, &mut s.rng()).unwrap();
        assert_eq!(a, b);
        let c = gaussian_vector(16, &mut RngStream::new(7, 4).rng()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_dimension_rejected() {
        let mut rng = RngStream::new(0, 0).rng();
        assert!(gaussian_vector(0, &mut rng).is_err());
        assert!(uniform_sphere(1, &mut rng).is_err());
        assert!(HaarOrthogonal::sample(0, &mut rng).is_err());
        assert!(SingularSpectrum::new(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn experiment_streams_differ_per_trial_and_name() {
        let e = Experiment::new(1, "alpha");
        assert_ne!(e.stream(0), e.stream(1));
        assert_ne!(e.stream(0), Experiment::new(1, "beta").stream(0));
        assert_eq!(e.stream(5), Experiment::new(1, "alpha").stream(5));
    }

    #[test]
    fn par_trials_independent_of_pool_size() {
        let e = Experiment::new(11, "pool");
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| par_trials(&e, 64, |rng, _| gaussian_vector(3, rng).unwrap()))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn sphere_points_are_unit() {
        let mut rng = RngStream::new(2, 0).rng();
        for n in [2, 3, 50, 500] {
            let u = uniform_sphere(n, &mut rng).unwrap();
            assert!((u.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_is_orthogonal_and_apply_matches_dense() {
        let mut rng = RngStream::new(3, 0).rng();
        for n in [1, 2, 5, 40] {
            let h = HaarOrthogonal::sample(n, &mut rng).unwrap();
            let q = h.to_matrix();
            let dev = (q.transpose() * &q - DMatrix::identity(n, n)).abs().max();
            assert!(dev < 1e-12, "n={n} dev={dev}");
            let y = gaussian_vector(n, &mut rng).unwrap();
            assert!((h.apply(&y).unwrap() - &q * &y).norm() < 1e-12);
            assert!((h.apply_transpose(&y).unwrap() - q.transpose() * &y).norm() < 1e-12);
        }
    }

    #[test]
    fn ones_spectrum_gives_orthogonal_matrix() {
        let mut rng = RngStream::new(4, 0).rng();
        let s = SingularSpectrum::constant(12, 1.0).unwrap();
        let t = matrix_with_singular_values(&s, &mut rng).unwrap();
        let v = gaussian_vector(12, &mut rng).unwrap();
        assert!(((&t * &v).norm() - v.norm()).abs() < 1e-10);
    }

    #[test]
    fn hilbert_schmidt_matches_l2_pi_norm() {
        let mut rng = RngStream::new(5, 0).rng();
        let s = SingularSpectrum::new(vec![2.0, 0.5, 1.0, 0.0, 3.0, 1.5]).unwrap();
        let t = matrix_with_singular_values(&s, &mut rng).unwrap();
        let hs = t.norm() / (6f64).sqrt();
        assert!((hs - prob_lp_norm(s.values(), 2.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn factored_operators_match_dense() {
        let mut rng = RngStream::new(6, 0).rng();
        let s = SingularSpectrum::new(vec![0.1, 0.7, 1.3, 2.0, 0.0]).unwrap();
        let op = SingularValueOperator::sample(&s, &mut rng).unwrap();
        let v = gaussian_vector(5, &mut rng).unwrap();
        assert!((op.apply(&v).unwrap() - op.to_matrix() * &v).norm() < 1e-12);
        let sym = SymmetricOperator::sample(&s, &mut rng).unwrap();
        let a = sym.to_matrix();
        assert!((&a - a.transpose()).abs().max() < 1e-14);
        assert!((sym.apply(&v).unwrap() - &a * &v).norm() < 1e-12);
    }

    #[test]
    fn markov_step_endpoints() {
        let mut rng = RngStream::new(8, 0).rng();
        let u = dvector![0.6, 0.8, 0.0];
        assert_eq!(sphere_markov_step(&u, 0.0, &mut rng).unwrap(), u);
        assert_eq!(sphere_markov_step(&u, 2.0, &mut rng).unwrap(), -&u);
        assert!(sphere_markov_step(&u, 2.5, &mut rng).is_err());
        assert!(sphere_markov_step(&u, -0.1, &mut rng).is_err());
        assert!(sphere_markov_step(&dvector![1.0, 1.0], 0.5, &mut rng).is_err());
    }

    #[test]
    fn markov_step_hits_exact_distance() {
        let mut rng = RngStream::new(9, 0).rng();
        for i in 0..10_000 {
            let n = 2 + i % 40;
            let u = uniform_sphere(n, &mut rng).unwrap();
            let d = 2.0 * rng.random::<f64>();
            let next = sphere_markov_step(&u, d, &mut rng).unwrap();
            assert!((next.norm() - 1.0).abs() < 1e-10);
            assert!(((&next - &u).norm() - d).abs() < 1e-10);
        }
    }
}
