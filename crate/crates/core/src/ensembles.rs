//! Seeded sampling of GOE/GUE matrices, Haar-random states and Dirichlet
//! weight vectors.
//!
//! Every sampler is a pure function of its parameters and a seed. Streams are
//! drawn from ChaCha8 keyed by `(seed, stream)`, so disjoint stream indices give
//! independent, reproducible sequences that can be consumed in parallel.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on state norms and weight sums.
pub const NORM_TOL: f64 = 1e-12;

/// Identifier of the random generator, recorded in output metadata.
pub const RNG_ID: &str = "ChaCha8Rng(seed_from_u64(seed), set_stream(stream))";

/// Random generator used by every sampler.
pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryClass {
    /// No time-reversal symmetry: complex Hermitian, Dirichlet(1) weights.
    #[serde(rename = "GUE", alias = "gue")]
    Gue,
    /// Time-reversal symmetric: real symmetric, Dirichlet(1/2) weights.
    #[serde(rename = "GOE", alias = "goe")]
    Goe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Real,
    Complex,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 2] = [SymmetryClass::Gue, SymmetryClass::Goe];

    pub fn label(self) -> &'static str {
        match self {
            SymmetryClass::Gue => "GUE",
            SymmetryClass::Goe => "GOE",
        }
    }

    /// Dirichlet concentration as the exact rational `(numerator, denominator)`.
    pub fn dirichlet_alpha_ratio(self) -> (u32, u32) {
        match self {
            SymmetryClass::Gue => (1, 1),
            SymmetryClass::Goe => (1, 2),
        }
    }

    pub fn dirichlet_alpha(self) -> f64 {
        let (num, den) = self.dirichlet_alpha_ratio();
        f64::from(num) / f64::from(den)
    }

    pub fn field_kind(self) -> FieldKind {
        match self {
            SymmetryClass::Gue => FieldKind::Complex,
            SymmetryClass::Goe => FieldKind::Real,
        }
    }

    /// Large-dimension limit of the self-overlap enhancement: 2 (GUE), 3 (GOE).
    pub fn universal_factor(self) -> f64 {
        match self {
            SymmetryClass::Gue => 2.0,
            SymmetryClass::Goe => 3.0,
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GUE" => Ok(SymmetryClass::Gue),
            "GOE" => Ok(SymmetryClass::Goe),
            _ => Err(Error::config("class", format!("unknown symmetry class `{s}`"))),
        }
    }
}

/// Dense GOE or GUE sample. GOE entries are stored with exactly zero
/// imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomMatrix {
    class: SymmetryClass,
    entries: DMatrix<Complex64>,
    seed: Option<u64>,
}

impl RandomMatrix {
    /// Wraps an explicit matrix. It must be exactly symmetric (GOE, real) or
    /// exactly Hermitian (GUE).
    pub fn from_entries(class: SymmetryClass, entries: DMatrix<Complex64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if entries.ncols() != n {
            return Err(Error::Shape {
                expected: n,
                found: entries.ncols(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (entries[(i, j)], entries[(j, i)]);
                let ok = match class {
                    SymmetryClass::Goe => x.im == 0.0 && x == y,
                    SymmetryClass::Gue => x == y.conj(),
                };
                if !ok {
                    return Err(Error::Domain(format!(
                        "matrix is not {} at ({i}, {j})",
                        match class {
                            SymmetryClass::Goe => "real symmetric",
                            SymmetryClass::Gue => "Hermitian",
                        }
                    )));
                }
            }
        }
        Ok(RandomMatrix {
            class,
            entries,
            seed: None,
        })
    }

    pub fn from_real(entries: DMatrix<f64>) -> Result<Self> {
        Self::from_entries(SymmetryClass::Goe, entries.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Seed the matrix was sampled from, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub(crate) fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn from_parts_unchecked(
        class: SymmetryClass,
        entries: DMatrix<Complex64>,
        seed: Option<u64>,
    ) -> Self {
        RandomMatrix {
            class,
            entries,
            seed,
        }
    }
}

/// Unit vector; GOE states have exactly real amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    class: SymmetryClass,
    amplitudes: DVector<Complex64>,
}

impl QuantumState {
    pub fn new(class: SymmetryClass, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if class == SymmetryClass::Goe && amplitudes.iter().any(|c| c.im != 0.0) {
            return Err(Error::Domain("GOE state must have real amplitudes".into()));
        }
        let deviation = (amplitudes.norm_squared() - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(Error::Normalization { deviation });
        }
        Ok(QuantumState { class, amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        let amps = DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&x| Complex64::new(x, 0.0)),
        );
        Self::new(SymmetryClass::Goe, amps)
    }

    /// Standard basis vector `e_index`.
    pub fn basis(class: SymmetryClass, n: usize, index: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if index >= n {
            return Err(Error::Shape {
                expected: n,
                found: index + 1,
            });
        }
        let mut amps = DVector::zeros(n);
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(QuantumState {
            class,
            amplitudes: amps,
        })
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub(crate) fn from_unit_unchecked(class: SymmetryClass, amplitudes: DVector<Complex64>) -> Self {
        QuantumState { class, amplitudes }
    }
}

/// Nonnegative weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(weights, NORM_TOL)
    }

    pub(crate) fn with_tolerance(weights: Vec<f64>, tol: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0))
        {
            return Err(Error::NegativeWeight { index, value });
        }
        let deviation = (weights.iter().sum::<f64>() - 1.0).abs();
        if deviation > tol {
            return Err(Error::Normalization { deviation });
        }
        Ok(WeightVector { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(WeightVector {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidDimension(0))
    } else {
        Ok(())
    }
}

/// Samples a GOE (`(A + Aᵀ)/2`) or GUE (`(A + A†)/2`) matrix with unit-variance
/// Gaussian `A`, scaled by `1/√n`. Draws from stream 0 of `seed`.
pub fn sample_matrix(class: SymmetryClass, n: usize, seed: u64) -> Result<RandomMatrix> {
    check_dim(n)?;
    let mut rng = stream_rng(seed, 0);
    Ok(sample_matrix_with(class, n, &mut rng).with_seed(Some(seed)))
}

pub fn sample_matrix_with<R: Rng + ?Sized>(
    class: SymmetryClass,
    n: usize,
    rng: &mut R,
) -> RandomMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    match class {
        SymmetryClass::Goe => {
            for j in 0..n {
                for i in 0..n {
                    let a: f64 = rng.sample(StandardNormal);
                    h[(i, j)].re = a;
                }
            }
            for j in 0..n {
                for i in 0..=j {
                    let v = 0.5 * (h[(i, j)].re + h[(j, i)].re) * scale;
                    h[(i, j)] = Complex64::new(v, 0.0);
                    h[(j, i)] = Complex64::new(v, 0.0);
                }
            }
        }
        SymmetryClass::Gue => {
            let half = std::f64::consts::FRAC_1_SQRT_2;
            for j in 0..n {
                for i in 0..n {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    h[(i, j)] = Complex64::new(re * half, im * half);
                }
            }
            for j in 0..n {
                for i in 0..j {
                    let v = (h[(i, j)] + h[(j, i)].conj()) * (0.5 * scale);
                    h[(i, j)] = v;
                    h[(j, i)] = v.conj();
                }
                h[(j, j)] = Complex64::new(h[(j, j)].re * scale, 0.0);
            }
        }
    }
    RandomMatrix::from_parts_unchecked(class, h, None)
}

/// Haar-random unit vector: real for GOE, complex for GUE. Stream 0 of `seed`.
pub fn sample_haar_state(class: SymmetryClass, n: usize, seed: u64) -> Result<QuantumState> {
    check_dim(n)?;
    Ok(haar_state_with(class, n, &mut stream_rng(seed, 0)))
}

pub fn haar_state_with<R: Rng + ?Sized>(
    class: SymmetryClass,
    n: usize,
    rng: &mut R,
) -> QuantumState {
    let amps = DVector::from_fn(n, |_, _| gaussian_amplitude(class, rng));
    let norm = amps.norm();
    QuantumState::from_unit_unchecked(class, amps.unscale(norm))
}

pub(crate) fn gaussian_amplitude<R: Rng + ?Sized>(class: SymmetryClass, rng: &mut R) -> Complex64 {
    match class {
        SymmetryClass::Goe => Complex64::new(rng.sample(StandardNormal), 0.0),
        SymmetryClass::Gue => {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        }
    }
}

/// Dir(α,…,α) weights with α from the class, as normalized Gamma(α, 1)
/// variates. Stream 0 of `seed`.
pub fn sample_dirichlet(class: SymmetryClass, n: usize, seed: u64) -> Result<WeightVector> {
    check_dim(n)?;
    Ok(dirichlet_with(class, n, &mut stream_rng(seed, 0)))
}

pub fn dirichlet_with<R: Rng + ?Sized>(
    class: SymmetryClass,
    n: usize,
    rng: &mut R,
) -> WeightVector {
    let mut weights = Vec::with_capacity(n);
    dirichlet_into(class, n, rng, &mut weights);
    WeightVector { weights }
}

/// Appends `n` Dirichlet weights to `out` (used for zero-padded layouts).
pub(crate) fn dirichlet_into<R: Rng + ?Sized>(
    class: SymmetryClass,
    n: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    let start = out.len();
    let mut total = 0.0;
    for _ in 0..n {
        let g = match class {
            // Gamma(1, 1)
            SymmetryClass::Gue => rng.sample::<f64, _>(Exp1),
            // Gamma(1/2, 1) = z²/2
            SymmetryClass::Goe => {
                let z: f64 = rng.sample(StandardNormal);
                0.5 * z * z
            }
        };
        total += g;
        out.push(g);
    }
    for w in &mut out[start..] {
        *w /= total;
    }
}

/// Entrywise squared modulus of a normalized state.
pub fn weights_from_state(state: &QuantumState) -> Result<WeightVector> {
    let weights: Vec<f64> = state.amplitudes().iter().map(|c| c.norm_sqr()).collect();
    WeightVector::new(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_constants() {
        assert_eq!(SymmetryClass::Gue.dirichlet_alpha(), 1.0);
        assert_eq!(SymmetryClass::Goe.dirichlet_alpha(), 0.5);
        assert_eq!(SymmetryClass::Gue.field_kind(), FieldKind::Complex);
        assert_eq!(SymmetryClass::Goe.field_kind(), FieldKind::Real);
        assert_eq!("goe".parse::<SymmetryClass>().unwrap(), SymmetryClass::Goe);
        assert!("gse".parse::<SymmetryClass>().is_err());
    }

    #[test]
    fn zero_dimension_rejected() {
        for class in SymmetryClass::ALL {
            assert!(matches!(sample_matrix(class, 0, 1), Err(Error::InvalidDimension(0))));
            assert!(matches!(sample_haar_state(class, 0, 1), Err(Error::InvalidDimension(0))));
            assert!(matches!(sample_dirichlet(class, 0, 1), Err(Error::InvalidDimension(0))));
        }
    }

    #[test]
    fn matrices_are_exactly_symmetric_or_hermitian() {
        for class in SymmetryClass::ALL {
            for n in [1, 2, 5, 16] {
                let m = sample_matrix(class, n, 99).unwrap();
                // from_entries re-checks the exact structure
                RandomMatrix::from_entries(class, m.entries().clone()).unwrap();
            }
        }
        let one = sample_matrix(SymmetryClass::Goe, 1, 3).unwrap();
        assert_eq!(one.entries()[(0, 0)].im, 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_matrix(SymmetryClass::Gue, 4, 7).unwrap();
        let b = sample_matrix(SymmetryClass::Gue, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed(), Some(7));
        let c = sample_matrix(SymmetryClass::Gue, 4, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn streams_are_distinct() {
        let mut r0 = stream_rng(5, 0);
        let mut r1 = stream_rng(5, 1);
        let x: u64 = r0.random();
        let y: u64 = r1.random();
        assert_ne!(x, y);
    }

    #[test]
    fn goe_state_in_one_dimension_is_a_sign() {
        for seed in 0..20 {
            let s = sample_haar_state(SymmetryClass::Goe, 1, seed).unwrap();
            let c = s.amplitudes()[0];
            assert_eq!(c.im, 0.0);
            assert!((c.re.abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_states_are_normalized() {
        for class in SymmetryClass::ALL {
            for seed in 0..10 {
                let s = sample_haar_state(class, 37, seed).unwrap();
                assert!((s.amplitudes().norm_squared() - 1.0).abs() < NORM_TOL);
                if class == SymmetryClass::Goe {
                    assert!(s.amplitudes().iter().all(|c| c.im == 0.0));
                }
            }
        }
    }

    #[test]
    fn gue_two_level_mean_weight_is_half() {
        let mut rng = stream_rng(11, 0);
        let trials = 20_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            sum += haar_state_with(SymmetryClass::Gue, 2, &mut rng).amplitudes()[0].norm_sqr();
        }
        // p_1 ~ Uniform(0, 1), sd 1/sqrt(12)
        let se = (1.0f64 / 12.0).sqrt() / (trials as f64).sqrt();
        assert!((sum / trials as f64 - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn dirichlet_single_coordinate_is_one() {
        for class in SymmetryClass::ALL {
            let w = sample_dirichlet(class, 1, 42).unwrap();
            assert_eq!(w.as_slice(), &[1.0]);
        }
    }

    #[test]
    fn weights_from_simple_states() {
        let e1 = QuantumState::basis(SymmetryClass::Gue, 4, 0).unwrap();
        assert_eq!(weights_from_state(&e1).unwrap().as_slice(), &[1.0, 0.0, 0.0, 0.0]);

        let n = 5;
        let u = QuantumState::from_real(&vec![1.0 / (n as f64).sqrt(); n]).unwrap();
        for w in weights_from_state(&u).unwrap().as_slice() {
            assert!((w - 0.2).abs() < 1e-15);
        }

        let s = QuantumState::from_real(&[0.25f64.sqrt(), 0.75f64.sqrt()]).unwrap();
        let w = weights_from_state(&s).unwrap();
        assert!((w.as_slice()[0] - 0.25).abs() < 1e-15);
        assert!((w.as_slice()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_state_rejected() {
        let err = QuantumState::from_real(&[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Normalization { .. }));
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(matches!(
            WeightVector::new(vec![1.5, -0.5]),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
    }
}
