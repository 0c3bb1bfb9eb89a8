//! Long-time averaged overlaps, the dilation, and the self-overlap enhancement
//! of Haar-random states.
//!
//! For a non-degenerate spectrum the infinite-time average of `|⟨b|a(t)⟩|²` is
//! `Σ_n p_n^a p_n^b`, with `p_n` the eigenbasis weights. Its diagonal `a = b`
//! is the dilation `Σ_n p_n²`, never below `1/N`. Averaged over Haar states
//! the dilation is `2/(N+1)` (GUE) or `3/(N+2)` (GOE), while the cross overlap
//! of independent states is `1/N`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensembles::{
    dirichlet_with, haar_state_with, sample_matrix_with, stream_rng, SymmetryClass, WeightVector,
};
use crate::error::{Error, Result};
use crate::estimator::{run_batches, EstimatorResult, PairedEstimate, DEFAULT_BATCH_SIZE};
use crate::spectral::{decompose, eigen_weights};

/// `Σ_n p_n^a p_n^b`.
pub fn long_time_overlap(wa: &WeightVector, wb: &WeightVector) -> Result<f64> {
    if wa.dim() != wb.dim() {
        return Err(Error::Shape {
            expected: wa.dim(),
            found: wb.dim(),
        });
    }
    Ok(dot(wa.as_slice(), wb.as_slice()))
}

/// `Σ_n p_n²`, the long-time return probability.
pub fn dilation(w: &WeightVector) -> f64 {
    dot(w.as_slice(), w.as_slice())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Haar average of the dilation: `2/(n+1)` (GUE), `3/(n+2)` (GOE).
pub fn analytic_self_overlap(class: SymmetryClass, n: usize) -> f64 {
    let n = n as f64;
    match class {
        SymmetryClass::Gue => 2.0 / (n + 1.0),
        SymmetryClass::Goe => 3.0 / (n + 2.0),
    }
}

/// Haar average of the overlap between independent states: `1/n`.
pub fn analytic_cross_overlap(n: usize) -> f64 {
    1.0 / n as f64
}

/// `2n/(n+1)` (GUE), `3n/(n+2)` (GOE); tends to 2 and 3.
pub fn analytic_ratio(class: SymmetryClass, n: usize) -> f64 {
    analytic_self_overlap(class, n) / analytic_cross_overlap(n)
}

/// How eigenbasis weights are produced in a Monte Carlo trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingPath {
    /// Weights drawn directly from Dir(α,…,α).
    Dirichlet,
    /// Sample a matrix, diagonalize it, and project Haar states on its
    /// eigenbasis.
    Matrix,
}

impl SamplingPath {
    pub fn label(self) -> &'static str {
        match self {
            SamplingPath::Dirichlet => "dirichlet",
            SamplingPath::Matrix => "matrix",
        }
    }
}

impl fmt::Display for SamplingPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SamplingPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(SamplingPath::Dirichlet),
            "matrix" => Ok(SamplingPath::Matrix),
            _ => Err(Error::config("path", format!("unknown sampling path `{s}`"))),
        }
    }
}

/// Monte Carlo estimate of `P̄_aa`, `P̄_ab` and their ratio, with the closed
/// forms alongside.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnhancementReport {
    pub class: SymmetryClass,
    pub n: usize,
    /// Accessible dimension when `a` is restricted to a subspace.
    pub accessible_dim: Option<usize>,
    pub path: SamplingPath,
    pub samples: usize,
    pub seed: u64,
    /// x = dilation of `a`, y = overlap of `a` with an independent `b`.
    pub stats: PairedEstimate,
    pub analytic_p_aa: f64,
    pub analytic_p_ab: f64,
    pub analytic_ratio: f64,
    /// Degeneracy clusters folded on the matrix path.
    pub degenerate_events: u64,
}

impl EnhancementReport {
    pub fn p_aa(&self) -> &EstimatorResult {
        &self.stats.x
    }

    pub fn p_ab(&self) -> &EstimatorResult {
        &self.stats.y
    }

    pub fn ratio(&self) -> f64 {
        self.stats.ratio()
    }

    pub fn ratio_stderr(&self) -> f64 {
        self.stats.ratio_stderr()
    }
}

/// Partial result of one batch of trials.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct TrialBatch {
    pub stats: PairedEstimate,
    pub degenerate_events: u64,
}

impl TrialBatch {
    pub fn record(&mut self, wa: &WeightVector, wb: &WeightVector) -> Result<()> {
        self.stats.push(dilation(wa), long_time_overlap(wa, wb)?);
        Ok(())
    }
}

pub(crate) fn merge_batches(batches: Vec<Result<TrialBatch>>) -> Result<TrialBatch> {
    let mut total = TrialBatch::default();
    for b in batches {
        let b = b?;
        total.stats.absorb(&b.stats);
        total.degenerate_events += b.degenerate_events;
    }
    Ok(total)
}

/// Monte Carlo `P̄_aa` and `P̄_ab` over independent pairs `(a, b)`.
pub fn estimate_enhancement(
    class: SymmetryClass,
    n: usize,
    samples: usize,
    seed: u64,
    path: SamplingPath,
) -> Result<EnhancementReport> {
    estimate_enhancement_batched(class, n, samples, seed, path, DEFAULT_BATCH_SIZE)
}

pub fn estimate_enhancement_batched(
    class: SymmetryClass,
    n: usize,
    samples: usize,
    seed: u64,
    path: SamplingPath,
    batch_size: usize,
) -> Result<EnhancementReport> {
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if samples < 2 {
        return Err(Error::config("samples", "at least 2 samples are required"));
    }
    let batches = run_batches(samples, batch_size, |stream, trials| {
        let mut rng = stream_rng(seed, stream);
        let mut batch = TrialBatch::default();
        for _ in 0..trials {
            match path {
                SamplingPath::Dirichlet => {
                    let wa = dirichlet_with(class, n, &mut rng);
                    let wb = dirichlet_with(class, n, &mut rng);
                    batch.record(&wa, &wb)?;
                }
                SamplingPath::Matrix => {
                    let h = sample_matrix_with(class, n, &mut rng);
                    let spec = decompose(&h)?;
                    let a = haar_state_with(class, n, &mut rng);
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
        accessible_dim: None,
        path,
        samples,
        seed,
        stats: total.stats,
        analytic_p_aa: analytic_self_overlap(class, n),
        analytic_p_ab: analytic_cross_overlap(n),
        analytic_ratio: analytic_ratio(class, n),
        degenerate_events: total.degenerate_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_dirichlet, stream_rng};

    fn basis(n: usize, i: usize) -> WeightVector {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        WeightVector::new(w).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let e1 = basis(3, 0);
        assert_eq!(long_time_overlap(&e1, &e1).unwrap(), 1.0);
        let u = WeightVector::uniform(8).unwrap();
        assert!((long_time_overlap(&u, &u).unwrap() - 0.125).abs() < 1e-16);
        let half = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(long_time_overlap(&half, &basis(2, 0)).unwrap(), 0.5);
        assert!(matches!(
            long_time_overlap(&half, &e1),
            Err(Error::Shape { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn dilation_examples() {
        let u = WeightVector::uniform(10).unwrap();
        assert!((dilation(&u) - 0.1).abs() < 1e-16);
        assert_eq!(dilation(&basis(5, 2)), 1.0);
    }

    #[test]
    fn dilation_is_self_overlap() {
        for seed in 0..20 {
            let w = sample_dirichlet(SymmetryClass::Goe, 13, seed).unwrap();
            assert_eq!(dilation(&w), long_time_overlap(&w, &w).unwrap());
        }
    }

    #[test]
    fn fixed_pair_inequality_is_not_pointwise() {
        // a fixed b can overlap a more than a overlaps itself
        let wa = WeightVector::new(vec![0.9, 0.1]).unwrap();
        let wb = basis(2, 0);
        assert!(long_time_overlap(&wa, &wb).unwrap() > dilation(&wa));
    }

    #[test]
    fn closed_forms() {
        use SymmetryClass::*;
        assert_eq!(analytic_self_overlap(Gue, 1), 1.0);
        assert!((analytic_self_overlap(Gue, 10) - 2.0 / 11.0).abs() < 1e-16);
        assert!((analytic_self_overlap(Goe, 10) - 0.25).abs() < 1e-16);
        assert_eq!(analytic_ratio(Gue, 1), 1.0);
        assert!((analytic_ratio(Gue, 10) - 20.0 / 11.0).abs() < 1e-15);
        assert!((analytic_ratio(Goe, 1000) - 3000.0 / 1002.0).abs() < 1e-12);
        assert!((analytic_ratio(Goe, 1000) - 2.994).abs() < 1e-3);
        assert!((analytic_ratio(Gue, 1 << 20) - 2.0).abs() < 1e-5);
    }

    #[test]
    fn path_parsing() {
        assert_eq!("Matrix".parse::<SamplingPath>().unwrap(), SamplingPath::Matrix);
        assert!(matches!(
            "lanczos".parse::<SamplingPath>(),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn rejects_too_few_samples() {
        assert!(estimate_enhancement(SymmetryClass::Gue, 4, 1, 0, SamplingPath::Dirichlet).is_err());
    }

    #[test]
    fn gue_ten_level_haar_mean() {
        let mut rng = stream_rng(2024, 0);
        let acc: EstimatorResult = (0..50_000)
            .map(|_| dilation(&dirichlet_with(SymmetryClass::Gue, 10, &mut rng)))
            .collect();
        assert!(acc.within_sigmas(2.0 / 11.0, 4.0), "{}", acc.z_score(2.0 / 11.0));
    }

    #[test]
    fn dirichlet_estimate_gue_16() {
        let r = estimate_enhancement(SymmetryClass::Gue, 16, 100_000, 5, SamplingPath::Dirichlet)
            .unwrap();
        assert!(r.p_aa().within_sigmas(2.0 / 17.0, 4.0));
        assert!(r.p_ab().within_sigmas(1.0 / 16.0, 4.0));
        assert!((r.analytic_ratio - 32.0 / 17.0).abs() < 1e-15);
    }

    #[test]
    fn result_independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    estimate_enhancement_batched(
                        SymmetryClass::Goe,
                        6,
                        5000,
                        3,
                        SamplingPath::Dirichlet,
                        500,
                    )
                    .unwrap()
                })
        };
        assert_eq!(run(1), run(3));
    }
}
