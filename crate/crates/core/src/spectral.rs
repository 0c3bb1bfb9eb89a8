//! Eigendecomposition of sampled Hamiltonians and eigenbasis weights of states.
//!
//! Real symmetric matrices go straight to a symmetric QR solver. A Hermitian
//! `H = X + iY` is solved through its real embedding `[[X, -Y], [Y, X]]`, whose
//! spectrum is that of `H` with every level doubled: for an embedded eigenvector
//! `(x, y)` the complex vector `x + iy` is an eigenvector of `H` with the same
//! eigenvalue. Each doubled pair is collapsed back to one complex eigenvector.

use std::io::{Read, Write};
use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::ensembles::{QuantumState, RandomMatrix, SymmetryClass, WeightVector};
use crate::error::{Error, Result};

/// Relative gap (to the spectral range) below which adjacent levels are
/// flagged as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-10;

/// Tolerance for identifying the doubled levels of the Hermitian embedding.
pub const PAIR_TOL: f64 = 1e-9;

/// Weight sums out of the eigenbasis projection are accepted to this tolerance.
pub const EIGEN_WEIGHT_TOL: f64 = 1e-10;

const MAX_SWEEPS_PER_DIM: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpectrum {
    class: SymmetryClass,
    eigenvalues: Vec<f64>,
    /// Column `n` is the eigenvector of `eigenvalues[n]`.
    eigenvectors: DMatrix<Complex64>,
    degeneracy_clusters: Vec<Range<usize>>,
    seed: Option<u64>,
}

impl HamiltonianSpectrum {
    /// Builds a spectrum from ascending eigenvalues and orthonormal columns.
    pub fn new(
        class: SymmetryClass,
        eigenvalues: Vec<f64>,
        eigenvectors: DMatrix<Complex64>,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::Shape {
                expected: n,
                found: eigenvectors.ncols(),
            });
        }
        if eigenvalues.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Domain("eigenvalues must be nondecreasing".into()));
        }
        let degeneracy_clusters = find_clusters(&eigenvalues, DEGENERACY_RTOL);
        Ok(HamiltonianSpectrum {
            class,
            eigenvalues,
            eigenvectors,
            degeneracy_clusters,
            seed: None,
        })
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    /// Index ranges of (near-)degenerate levels; only clusters of two or more.
    pub fn degeneracy_clusters(&self) -> &[Range<usize>] {
        &self.degeneracy_clusters
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn spectral_range(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    /// Average gap between adjacent levels; zero for a single level.
    pub fn mean_level_spacing(&self) -> f64 {
        if self.dim() < 2 {
            0.0
        } else {
            self.spectral_range() / (self.dim() - 1) as f64
        }
    }

    /// Level groups: one range per cluster, singletons elsewhere.
    pub fn levels(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.dim());
        let mut next = 0;
        for c in &self.degeneracy_clusters {
            out.extend((next..c.start).map(|i| i..i + 1));
            out.push(c.clone());
            next = c.end;
        }
        out.extend((next..self.dim()).map(|i| i..i + 1));
        out
    }

    /// Eigenbasis coefficients `⟨E_n|ψ⟩`.
    pub fn coefficients(&self, state: &QuantumState) -> Result<DVector<Complex64>> {
        if state.dim() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        Ok(self.eigenvectors.ad_mul(state.amplitudes()))
    }

    /// Sums weights within each degeneracy cluster into one effective level.
    /// Returns the folded weights and the number of clusters folded.
    pub fn fold_degenerate(&self, weights: &WeightVector) -> (WeightVector, usize) {
        if self.degeneracy_clusters.is_empty() {
            return (weights.clone(), 0);
        }
        let w = weights.as_slice();
        let folded = self.levels().into_iter().map(|r| w[r].iter().sum()).collect();
        (
            WeightVector::with_tolerance(folded, EIGEN_WEIGHT_TOL)
                .expect("folding preserves the weight sum"),
            self.degeneracy_clusters.len(),
        )
    }

    /// `‖V diag(E) V† − H‖_F / ‖H‖_F`.
    pub fn reconstruction_error(&self, h: &RandomMatrix) -> f64 {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (mut col, &e) in scaled.column_iter_mut().zip(&self.eigenvalues) {
            col *= Complex64::new(e, 0.0);
        }
        let rebuilt = scaled * v.adjoint();
        let norm = h.entries().norm();
        let diff = (rebuilt - h.entries()).norm();
        if norm > 0.0 {
            diff / norm
        } else {
            diff
        }
    }

    /// Max deviation of `V†V` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.ad_mul(&self.eigenvectors);
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Writes the spectrum as a header (`BMSPEC01`, class byte, dim, seed flag
    /// and seed) followed by little-endian float64 eigenvalues and the
    /// column-major eigenvectors as interleaved (re, im) pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SPECTRUM_MAGIC)?;
        w.write_all(&[match self.class {
            SymmetryClass::Gue => 0u8,
            SymmetryClass::Goe => 1u8,
        }])?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        w.write_all(&[u8::from(self.seed.is_some())])?;
        w.write_all(&self.seed.unwrap_or(0).to_le_bytes())?;
        for e in &self.eigenvalues {
            w.write_all(&e.to_le_bytes())?;
        }
        for c in self.eigenvectors.iter() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SPECTRUM_MAGIC {
            return Err(Error::Domain("not a spectrum dump".into()));
        }
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        let class = match byte[0] {
            0 => SymmetryClass::Gue,
            1 => SymmetryClass::Goe,
            b => return Err(Error::Domain(format!("unknown class tag {b}"))),
        };
        let n = read_u64(&mut r)? as usize;
        r.read_exact(&mut byte)?;
        let has_seed = byte[0] != 0;
        let seed = read_u64(&mut r)?;
        let eigenvalues = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(Complex64::new(re, im));
        }
        let mut spec = Self::new(class, eigenvalues, DMatrix::from_vec(n, n, data))?;
        spec.seed = has_seed.then_some(seed);
        Ok(spec)
    }
}

const SPECTRUM_MAGIC: &[u8; 8] = b"BMSPEC01";

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Maximal runs of ascending values whose adjacent gaps are at most
/// `rtol · range`; runs of length one are dropped.
fn find_clusters(values: &[f64], rtol: f64) -> Vec<Range<usize>> {
    let n = values.len();
    if n < 2 {
        return Vec::new();
    }
    let tol = rtol * (values[n - 1] - values[0]);
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || values[i] - values[i - 1] > tol {
            if i - start > 1 {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Ascending eigenvalues and matching eigenvector columns of a real symmetric
/// matrix.
fn real_symmetric_eigen(m: DMatrix<f64>, seed: Option<u64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, MAX_SWEEPS_PER_DIM * n.max(1)).ok_or_else(
        || Error::Solver {
            seed,
            reason: "symmetric QR iteration did not converge".into(),
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Full spectrum of a GOE or GUE matrix with orthonormal eigenvectors.
pub fn decompose(h: &RandomMatrix) -> Result<HamiltonianSpectrum> {
    let seed = h.seed();
    let (values, vectors) = match h.class() {
        SymmetryClass::Goe => {
            let (values, v) = real_symmetric_eigen(h.entries().map(|c| c.re), seed)?;
            (values, v.map(|x| Complex64::new(x, 0.0)))
        }
        SymmetryClass::Gue => hermitian_via_embedding(h.entries(), seed)?,
    };
    let mut spec = HamiltonianSpectrum::new(h.class(), values, vectors)?;
    spec.seed = seed;
    Ok(spec)
}

fn hermitian_via_embedding(
    h: &DMatrix<Complex64>,
    seed: Option<u64>,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = h.nrows();
    let embedded = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = h[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let (values, v) = real_symmetric_eigen(embedded, seed)?;
    let range = values[2 * n - 1] - values[0];
    let tol = PAIR_TOL * range.max(1.0);

    let mut out_values = Vec::with_capacity(n);
    let mut out_vectors: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < 2 * n {
        let mut end = start + 1;
        while end < 2 * n && values[end] - values[end - 1] <= tol {
            end += 1;
        }
        let size = end - start;
        if size % 2 != 0 {
            return Err(Error::Solver {
                seed,
                reason: format!(
                    "embedded level cluster {start}..{end} has odd size {size}; pairing failed"
                ),
            });
        }
        let candidates: Vec<DVector<Complex64>> = (start..end)
            .map(|k| {
                DVector::from_fn(n, |i, _| Complex64::new(v[(i, k)], v[(i + n, k)]))
            })
            .collect();
        let kept = complex_span(candidates, size / 2).ok_or_else(|| Error::Solver {
            seed,
            reason: format!("embedded cluster {start}..{end} does not span {} levels", size / 2),
        })?;
        for (j, vec) in kept.into_iter().enumerate() {
            // within a pair both copies carry the same level
            out_values.push(values[start + 2 * j]);
            out_vectors.push(vec);
        }
        start = end;
    }
    debug_assert_eq!(out_vectors.len(), n);
    Ok((out_values, DMatrix::from_columns(&out_vectors)))
}

/// Greedy complex Gram-Schmidt: repeatedly keeps the candidate with the largest
/// component orthogonal to those already kept, until `k` are kept.
fn complex_span(mut candidates: Vec<DVector<Complex64>>, k: usize) -> Option<Vec<DVector<Complex64>>> {
    let mut kept: Vec<DVector<Complex64>> = Vec::with_capacity(k);
    for _ in 0..k {
        for c in candidates.iter_mut() {
            if let Some(last) = kept.last() {
                let proj = last.dotc(c);
                *c -= last * proj;
            }
        }
        let (best, norm) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if norm < 0.5 {
            return None;
        }
        let v = candidates.swap_remove(best).unscale(norm);
        kept.push(v);
    }
    Some(kept)
}

/// `p_n = |⟨E_n|ψ⟩|²`.
pub fn eigen_weights(state: &QuantumState, spec: &HamiltonianSpectrum) -> Result<WeightVector> {
    let coeffs = spec.coefficients(state)?;
    WeightVector::with_tolerance(coeffs.iter().map(|c| c.norm_sqr()).collect(), EIGEN_WEIGHT_TOL)
}
