//! Block-diagonal Hamiltonians and states confined to a subset of symmetry
//! sectors.
//!
//! Only the dimensions of a multiplicity-free decomposition matter: a state
//! Haar-random on an accessible subspace of dimension `d` inside `N` has
//! dilation `2/(d+1)` (GUE) or `3/(d+2)` (GOE), while its overlap with a
//! generic state stays `1/N`, amplifying the ratio to `2N/(d+1)` or
//! `3N/(d+2)`.

use std::ops::Range;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::birthmark::{
    analytic_cross_overlap, analytic_self_overlap, merge_batches, EnhancementReport, SamplingPath,
    TrialBatch,
};
use crate::ensembles::{
    dirichlet_into, dirichlet_with, gaussian_amplitude, haar_state_with, sample_matrix_with,
    stream_rng, QuantumState, RandomMatrix, SymmetryClass, WeightVector,
};
use crate::error::{Error, Result};
use crate::estimator::{run_batches, DEFAULT_BATCH_SIZE};
use crate::spectral::{decompose, eigen_weights};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout", into = "RawLayout")]
pub struct SectorLayout {
    sector_dims: Vec<usize>,
    accessible: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawLayout {
    sector_dims: Vec<usize>,
    accessible: Vec<usize>,
}

impl TryFrom<RawLayout> for SectorLayout {
    type Error = Error;

    fn try_from(raw: RawLayout) -> Result<Self> {
        SectorLayout::new(raw.sector_dims, raw.accessible)
    }
}

impl From<SectorLayout> for RawLayout {
    fn from(l: SectorLayout) -> Self {
        RawLayout {
            sector_dims: l.sector_dims,
            accessible: l.accessible,
        }
    }
}

impl SectorLayout {
    /// `accessible` is normalized to ascending order without duplicates.
    pub fn new(sector_dims: Vec<usize>, mut accessible: Vec<usize>) -> Result<Self> {
        if sector_dims.is_empty() {
            return Err(Error::config("layout", "at least one sector is required"));
        }
        if let Some(pos) = sector_dims.iter().position(|&d| d == 0) {
            return Err(Error::config("layout", format!("sector {pos} has dimension 0")));
        }
        accessible.sort_unstable();
        accessible.dedup();
        if accessible.is_empty() {
            return Err(Error::config("accessible", "the accessible sector set is empty"));
        }
        if let Some(&bad) = accessible.iter().find(|&&a| a >= sector_dims.len()) {
            return Err(Error::config(
                "accessible",
                format!("sector index {bad} out of range for {} sectors", sector_dims.len()),
            ));
        }
        Ok(SectorLayout {
            sector_dims,
            accessible,
        })
    }

    /// Every sector accessible.
    pub fn unrestricted(sector_dims: Vec<usize>) -> Result<Self> {
        let all = (0..sector_dims.len()).collect();
        Self::new(sector_dims, all)
    }

    pub fn sector_dims(&self) -> &[usize] {
        &self.sector_dims
    }

    pub fn accessible(&self) -> &[usize] {
        &self.accessible
    }

    pub fn total(&self) -> usize {
        self.sector_dims.iter().sum()
    }

    pub fn accessible_dim(&self) -> usize {
        self.accessible.iter().map(|&a| self.sector_dims[a]).sum()
    }

    /// Basis index range of sector `alpha`.
    pub fn sector_range(&self, alpha: usize) -> Range<usize> {
        let start: usize = self.sector_dims[..alpha].iter().sum();
        start..start + self.sector_dims[alpha]
    }

    fn is_accessible(&self, alpha: usize) -> bool {
        self.accessible.binary_search(&alpha).is_ok()
    }
}

/// Block-diagonal matrix; block `α` is an independent ensemble sample of
/// size `d_α` drawn from stream `α` of `seed`.
pub fn build_block_hamiltonian(
    layout: &SectorLayout,
    class: SymmetryClass,
    seed: u64,
) -> RandomMatrix {
    let blocks = layout
        .sector_dims
        .iter()
        .enumerate()
        .map(|(alpha, &d)| sample_matrix_with(class, d, &mut stream_rng(seed, alpha as u64)))
        .collect::<Vec<_>>();
    assemble_blocks(layout, class, &blocks, Some(seed))
}

fn block_hamiltonian_with<R: rand::Rng + ?Sized>(
    layout: &SectorLayout,
    class: SymmetryClass,
    rng: &mut R,
) -> RandomMatrix {
    let blocks = layout
        .sector_dims
        .iter()
        .map(|&d| sample_matrix_with(class, d, rng))
        .collect::<Vec<_>>();
    assemble_blocks(layout, class, &blocks, None)
}

fn assemble_blocks(
    layout: &SectorLayout,
    class: SymmetryClass,
    blocks: &[RandomMatrix],
    seed: Option<u64>,
) -> RandomMatrix {
    let n = layout.total();
    let mut h = nalgebra::DMatrix::zeros(n, n);
    for (alpha, block) in blocks.iter().enumerate() {
        let r = layout.sector_range(alpha);
        h.view_mut((r.start, r.start), (r.len(), r.len()))
            .copy_from(block.entries());
    }
    RandomMatrix::from_parts_unchecked(class, h, seed)
}

/// Haar-random state on the accessible subspace, exactly zero elsewhere.
pub fn sample_restricted_state(
    layout: &SectorLayout,
    class: SymmetryClass,
    seed: u64,
) -> QuantumState {
    restricted_state_with(layout, class, &mut stream_rng(seed, 0))
}

fn restricted_state_with<R: rand::Rng + ?Sized>(
    layout: &SectorLayout,
    class: SymmetryClass,
    rng: &mut R,
) -> QuantumState {
    let n = layout.total();
    let zero = Complex64::new(0.0, 0.0);
    let mut amps = DVector::from_element(n, zero);
    for &alpha in &layout.accessible {
        for i in layout.sector_range(alpha) {
            amps[i] = gaussian_amplitude(class, rng);
        }
    }
    let norm = amps.norm();
    QuantumState::from_unit_unchecked(class, amps.unscale(norm))
}

/// Dirichlet weights on the accessible coordinates, zero elsewhere.
fn restricted_weights_with<R: rand::Rng + ?Sized>(
    layout: &SectorLayout,
    class: SymmetryClass,
    rng: &mut R,
) -> WeightVector {
    let d = layout.accessible_dim();
    let mut inner = Vec::with_capacity(d);
    dirichlet_into(class, d, rng, &mut inner);
    let mut weights = vec![0.0; layout.total()];
    let mut it = inner.into_iter();
    for alpha in 0..layout.sector_dims.len() {
        if layout.is_accessible(alpha) {
            for i in layout.sector_range(alpha) {
                weights[i] = it.next().expect("accessible_dim weights");
            }
        }
    }
    WeightVector::new(weights).expect("padded Dirichlet weights are normalized")
}

/// `2n/(d+1)` (GUE), `3n/(d+2)` (GOE).
pub fn analytic_sector_ratio(class: SymmetryClass, n: usize, d: usize) -> Result<f64> {
    if d == 0 || d > n {
        return Err(Error::Domain(format!(
            "accessible dimension {d} must lie in 1..={n}"
        )));
    }
    Ok(analytic_self_overlap(class, d) / analytic_cross_overlap(n))
}

/// Monte Carlo dilation of restricted states `a` against overlaps with `b`
/// Haar-random on the full space.
///
/// On the Dirichlet path the eigenbasis is the sector-adapted standard basis,
/// so `a` has Dir(α) weights on the `d` accessible coordinates. The matrix
/// path samples a block Hamiltonian per trial and projects sampled states.
pub fn estimate_sector_ratio(
    layout: &SectorLayout,
    class: SymmetryClass,
    samples: usize,
    seed: u64,
    path: SamplingPath,
) -> Result<EnhancementReport> {
    if samples < 2 {
        return Err(Error::config("samples", "at least 2 samples are required"));
    }
    let n = layout.total();
    let d = layout.accessible_dim();
    let batches = run_batches(samples, DEFAULT_BATCH_SIZE, |stream, trials| {
        let mut rng = stream_rng(seed, stream);
        let mut batch = TrialBatch::default();
        for _ in 0..trials {
            match path {
                SamplingPath::Dirichlet => {
                    let wa = restricted_weights_with(layout, class, &mut rng);
                    let wb = dirichlet_with(class, n, &mut rng);
                    batch.record(&wa, &wb)?;
                }
                SamplingPath::Matrix => {
                    let h = block_hamiltonian_with(layout, class, &mut rng);
                    let spec = decompose(&h)?;
                    let a = restricted_state_with(layout, class, &mut rng);
                    let b = haar_state_with(class, n, &mut rng);
                    let (wa, ea) = spec.fold_degenerate(&eigen_weights(&a, &spec)?);
                    let (wb, _) = spec.fold_degenerate(&eigen_weights(&b, &spec)?);
                    batch.degenerate_events += ea as u64;
                    batch.record(&wa, &wb)?;
                }
            }
        }
        Ok(batch)
    });
    let total = merge_batches(batches)?;
    Ok(EnhancementReport {
        class,
        n,
        accessible_dim: Some(d),
        path,
        samples,
        seed,
        stats: total.stats,
        analytic_p_aa: analytic_self_overlap(class, d),
        analytic_p_ab: analytic_cross_overlap(n),
        analytic_ratio: analytic_sector_ratio(class, n, d)?,
        degenerate_events: total.degenerate_events,
    })
}
