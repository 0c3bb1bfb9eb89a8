//! Second moments of Dirichlet weights and the fourth-moment tensor of Haar
//! amplitudes.
//!
//! Under normalization `Σ_j |c_j|² = 1`, the moments `C = E|c_j|⁴` and
//! `D = E|c_i|²|c_j|²` (i ≠ j) obey `N C + N(N−1) D = 1`. Haar invariance forces
//! the fourth-moment tensor onto index pairings: conjugate pairings
//! `A δ_αβ δ_γδ + B δ_αδ δ_βγ` for complex amplitudes of `E[c_α c̄_β c_γ c̄_δ]`,
//! all three pairings `X δ_ij δ_kl + Y δ_ik δ_jl + Z δ_il δ_jk` for real ones.
//! Matching the patterns gives `C = 2D` (GUE) and `C = 3D` (GOE).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::RngExt;
use serde::Serialize;
use serde_json::json;

use crate::ensembles::{dirichlet_with, haar_state_with, stream_rng, SymmetryClass};
use crate::error::{Error, Result};
use crate::estimator::{run_batches, EstimatorResult, DEFAULT_BATCH_SIZE};

/// Largest `n` for the dense `n⁴` tensor estimator.
pub const DENSE_TENSOR_MAX_N: usize = 12;

/// Minimum number of samples for a tensor estimate.
pub const TENSOR_MIN_SAMPLES: usize = 10_000;

const TENSOR_BATCH_SIZE: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentTable {
    pub class: SymmetryClass,
    pub n: usize,
    /// `E[p_i²]`, the `C` of the normalization identity.
    pub e_pi_sq: f64,
    /// `E[p_i p_j]` for `i ≠ j` (`D`); absent when `n = 1`.
    pub e_pi_pj: Option<f64>,
}

impl MomentTable {
    /// `n C + n(n−1) D − 1`.
    pub fn normalization_residual(&self) -> f64 {
        let n = self.n as f64;
        n * self.e_pi_sq + n * (n - 1.0) * self.e_pi_pj.unwrap_or(0.0) - 1.0
    }
}

/// `C = 2/(n(n+1))`, `D = 1/(n(n+1))` for GUE; `C = 3/(n(n+2))`,
/// `D = 1/(n(n+2))` for GOE.
pub fn analytic_moments(class: SymmetryClass, n: usize) -> Result<MomentTable> {
    if n == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let nf = n as f64;
    let (pairings, shift) = match class {
        SymmetryClass::Gue => (2.0, 1.0),
        SymmetryClass::Goe => (3.0, 2.0),
    };
    let d = 1.0 / (nf * (nf + shift));
    let (e_pi_sq, e_pi_pj) = if n == 1 { (1.0, None) } else { (pairings * d, Some(d)) };
    Ok(MomentTable {
        class,
        n,
        e_pi_sq,
        e_pi_pj,
    })
}

/// Where the weight vectors of a moment estimate come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSource {
    Dirichlet,
    /// Squared moduli of Haar-random amplitudes.
    Haar,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub class: SymmetryClass,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Per sample: mean of `p_i²` over coordinates.
    pub e_pi_sq: EstimatorResult,
    /// Per sample: mean of `p_i p_j` over ordered pairs `i ≠ j`.
    pub e_pi_pj: EstimatorResult,
}

pub fn estimate_moments(
    class: SymmetryClass,
    n: usize,
    samples: usize,
    seed: u64,
    source: WeightSource,
) -> Result<MomentEstimate> {
    if n < 2 {
        return Err(Error::config("n", "pair moments need n >= 2"));
    }
    if samples < 2 {
        return Err(Error::config("samples", "at least 2 samples are required"));
    }
    let nf = n as f64;
    let parts = run_batches(samples, DEFAULT_BATCH_SIZE, |stream, trials| {
        let mut rng = stream_rng(seed, stream);
        let mut sq = EstimatorResult::new();
        let mut pair = EstimatorResult::new();
        let mut buf: Vec<f64> = Vec::with_capacity(n);
        for _ in 0..trials {
            buf.clear();
            match source {
                WeightSource::Dirichlet => buf.extend(dirichlet_with(class, n, &mut rng).into_vec()),
                WeightSource::Haar => buf.extend(
                    haar_state_with(class, n, &mut rng)
                        .amplitudes()
                        .iter()
                        .map(|c| c.norm_sqr()),
                ),
            }
            let total: f64 = buf.iter().sum();
            let squares: f64 = buf.iter().map(|p| p * p).sum();
            sq.push(squares / nf);
            pair.push((total * total - squares) / (nf * (nf - 1.0)));
        }
        (sq, pair)
    });
    let mut e_pi_sq = EstimatorResult::new();
    let mut e_pi_pj = EstimatorResult::new();
    for (a, b) in &parts {
        e_pi_sq.absorb(a);
        e_pi_pj.absorb(b);
    }
    Ok(MomentEstimate {
        class,
        n,
        samples,
        seed,
        e_pi_sq,
        e_pi_pj,
    })
}

/// Index maps `(i, j) ↦ (α, β, γ, δ)`, `i ≠ j`, for the pairing patterns of
/// a class, in coefficient order.
fn pairing_patterns(class: SymmetryClass) -> &'static [(&'static str, fn(usize, usize) -> [usize; 4])] {
    match class {
        SymmetryClass::Gue => &[
            ("A", |i, j| [i, i, j, j]),
            ("B", |i, j| [i, j, j, i]),
        ],
        SymmetryClass::Goe => &[
            ("X", |i, j| [i, i, j, j]),
            ("Y", |i, j| [i, j, i, j]),
            ("Z", |i, j| [i, j, j, i]),
        ],
    }
}

/// Which pairing pattern (if any) an index tuple belongs to; `Some(None)` for
/// the all-equal diagonal.
fn classify(class: SymmetryClass, idx: [usize; 4]) -> Option<Option<usize>> {
    let [a, b, c, d] = idx;
    if a == b && b == c && c == d {
        return Some(None);
    }
    pairing_patterns(class)
        .iter()
        .position(|(_, f)| {
            let (i, j) = (a, if a == b { c } else { b });
            i != j && f(i, j) == idx
        })
        .map(Some)
}

/// Pairing-model fit of an estimated fourth-moment tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFit {
    pub class: SymmetryClass,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// `"dense"`, `"sliced"` or `"analytic"`.
    pub estimator: &'static str,
    pub coefficient_names: Vec<&'static str>,
    /// Least-squares coefficients over the off-diagonal pattern entries.
    pub coefficients: Vec<f64>,
    /// Per-sample pattern means, for standard errors of the coefficients.
    pub coefficient_stats: Vec<EstimatorResult>,
    /// Diagonal entry `C = E|c_i|⁴`, averaged over `i`.
    pub diagonal: EstimatorResult,
    /// Max modulus of the entries the pairing model sets to zero.
    pub residual: f64,
    /// Max |entry| / standard error over those entries and their re/im parts.
    pub max_off_pattern_z: f64,
    pub off_pattern_entries: usize,
}

impl TensorFit {
    /// Fit built from the closed-form moments (every coefficient equal to `D`).
    pub fn analytic(class: SymmetryClass, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("n", "the tensor fit needs n >= 2"));
        }
        let table = analytic_moments(class, n)?;
        let d = table.e_pi_pj.expect("n >= 2");
        let names: Vec<&'static str> = pairing_patterns(class).iter().map(|(s, _)| *s).collect();
        let k = names.len();
        Ok(TensorFit {
            class,
            n,
            samples: 0,
            seed: 0,
            estimator: "analytic",
            coefficient_names: names,
            coefficients: vec![d; k],
            coefficient_stats: vec![EstimatorResult::new(); k],
            diagonal: EstimatorResult {
                count: 1,
                sum: table.e_pi_sq,
                sum_sq: table.e_pi_sq * table.e_pi_sq,
            },
            residual: 0.0,
            max_off_pattern_z: 0.0,
            off_pattern_entries: 0,
        })
    }

    /// Mean of the fitted pairing coefficients, the estimate of `D`.
    pub fn pair_moment(&self) -> f64 {
        self.coefficients.iter().sum::<f64>() / self.coefficients.len() as f64
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coefficients: serde_json::Map<String, serde_json::Value> = self
            .coefficient_names
            .iter()
            .zip(&self.coefficients)
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        let stderr: serde_json::Map<String, serde_json::Value> = self
            .coefficient_names
            .iter()
            .zip(&self.coefficient_stats)
            .map(|(k, s)| (k.to_string(), json!(s.stderr())))
            .collect();
        json!({
            "class": self.class,
            "n": self.n,
            "samples": self.samples,
            "coefficients": coefficients,
            "coefficient_stderr": stderr,
            "diagonal_c": self.diagonal.mean(),
            "diagonal_c_stderr": self.diagonal.stderr(),
            "pairing_ratio": pairing_ratio(self).ok(),
            "residual": self.residual,
            "max_off_pattern_z": self.max_off_pattern_z,
            "off_pattern_entries": self.off_pattern_entries,
            "estimator": self.estimator,
            "seed": self.seed,
        })
    }
}

/// Estimated `C/D`; 2 for GUE, 3 for GOE.
pub fn pairing_ratio(fit: &TensorFit) -> Result<f64> {
    let d = fit.pair_moment();
    if !(d > 0.0) {
        return Err(Error::DegenerateFit(d));
    }
    Ok(fit.diagonal.mean() / d)
}

/// `M_αβ` such that the tensor entry is `M_αβ M_γδ`: `c_α c̄_β` for GUE,
/// `c_α c_β` for GOE.
fn pair_products(class: SymmetryClass, c: &DVector<Complex64>, out: &mut [Complex64]) {
    let n = c.len();
    for a in 0..n {
        for b in 0..n {
            out[a * n + b] = match class {
                SymmetryClass::Gue => c[a] * c[b].conj(),
                SymmetryClass::Goe => c[a] * c[b],
            };
        }
    }
}

fn check_tensor_args(n: usize, samples: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::config("n", "the tensor fit needs n >= 2"));
    }
    if samples < TENSOR_MIN_SAMPLES {
        return Err(Error::config(
            "samples",
            format!("tensor estimates need at least {TENSOR_MIN_SAMPLES} samples"),
        ));
    }
    Ok(())
}

/// Per-sample pattern means and diagonal mean, from the pair products.
fn pattern_sample(class: SymmetryClass, n: usize, m: &[Complex64], coeffs: &mut [EstimatorResult], diag: &mut EstimatorResult) {
    let entry = |[a, b, c, d]: [usize; 4]| (m[a * n + b] * m[c * n + d]).re;
    let pairs = (n * (n - 1)) as f64;
    for (k, (_, f)) in pairing_patterns(class).iter().enumerate() {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += entry(f(i, j));
                }
            }
        }
        coeffs[k].push(s / pairs);
    }
    diag.push((0..n).map(|i| entry([i, i, i, i])).sum::<f64>() / n as f64);
}

/// Dense accumulators for one batch; entry `(p, q)` with `p = αn+β`,
/// `q = γn+δ` is stored for `q ≥ p` only (the tensor is symmetric under the
/// swap).
struct DenseAcc {
    count: u64,
    sum_re: Vec<f64>,
    sum_im: Vec<f64>,
    sq_re: Vec<f64>,
    sq_im: Vec<f64>,
    coeffs: Vec<EstimatorResult>,
    diag: EstimatorResult,
}

impl DenseAcc {
    fn new(n: usize, k: usize) -> Self {
        let size = n * n * n * n;
        DenseAcc {
            count: 0,
            sum_re: vec![0.0; size],
            sum_im: vec![0.0; size],
            sq_re: vec![0.0; size],
            sq_im: vec![0.0; size],
            coeffs: vec![EstimatorResult::new(); k],
            diag: EstimatorResult::new(),
        }
    }

    fn absorb(&mut self, other: &DenseAcc) {
        self.count += other.count;
        for (a, b) in [
            (&mut self.sum_re, &other.sum_re),
            (&mut self.sum_im, &other.sum_im),
            (&mut self.sq_re, &other.sq_re),
            (&mut self.sq_im, &other.sq_im),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            x.absorb(y);
        }
        self.diag.absorb(&other.diag);
    }
}

fn entry_stats(count: u64, sum: f64, sq: f64) -> (f64, f64) {
    let n = count as f64;
    let m = sum / n;
    (m, ((sq / n - m * m).max(0.0) / (n - 1.0)).sqrt())
}

/// Dense Monte Carlo estimate of the fourth-moment tensor over Haar states,
/// fitted to the pairing model. Limited to `n ≤ 12`.
pub fn estimate_fourth_tensor(
    class: SymmetryClass,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<TensorFit> {
    check_tensor_args(n, samples)?;
    if n > DENSE_TENSOR_MAX_N {
        return Err(Error::Capacity {
            n,
            max: DENSE_TENSOR_MAX_N,
        });
    }
    let patterns = pairing_patterns(class);
    let k = patterns.len();
    let n2 = n * n;
    let parts = run_batches(samples, TENSOR_BATCH_SIZE, |stream, trials| {
        let mut rng = stream_rng(seed, stream);
        let mut acc = DenseAcc::new(n, k);
        let mut m = vec![Complex64::new(0.0, 0.0); n2];
        for _ in 0..trials {
            let state = haar_state_with(class, n, &mut rng);
            pair_products(class, state.amplitudes(), &mut m);
            for p in 0..n2 {
                let mp = m[p];
                let row = p * n2;
                for q in p..n2 {
                    let t = mp * m[q];
                    let idx = row + q;
                    acc.sum_re[idx] += t.re;
                    acc.sum_im[idx] += t.im;
                    acc.sq_re[idx] += t.re * t.re;
                    acc.sq_im[idx] += t.im * t.im;
                }
            }
            pattern_sample(class, n, &m, &mut acc.coeffs, &mut acc.diag);
            acc.count += 1;
        }
        acc
    });
    let mut parts = parts.into_iter();
    let mut acc = parts.next().expect("samples > 0");
    for p in parts {
        acc.absorb(&p);
    }

    // Mean tensor, expanded from the stored triangle.
    let mut mean = vec![Complex64::new(0.0, 0.0); n2 * n2];
    let mut se = vec![(0.0, 0.0); n2 * n2];
    for p in 0..n2 {
        for q in 0..n2 {
            let idx = if q >= p { p * n2 + q } else { q * n2 + p };
            let (mr, sr) = entry_stats(acc.count, acc.sum_re[idx], acc.sq_re[idx]);
            let (mi, si) = entry_stats(acc.count, acc.sum_im[idx], acc.sq_im[idx]);
            mean[p * n2 + q] = Complex64::new(mr, mi);
            se[p * n2 + q] = (sr, si);
        }
    }

    // Least squares over the off-diagonal entries: design columns are the
    // pattern indicators.
    let mut rows: Vec<(usize, f64)> = Vec::new();
    let mut residual: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut off_pattern = 0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let idx = (a * n + b) * n2 + c * n + d;
                    match classify(class, [a, b, c, d]) {
                        Some(None) => {}
                        Some(Some(col)) => rows.push((col, mean[idx].re)),
                        None => {
                            off_pattern += 1;
                            let t = mean[idx];
                            residual = residual.max(t.norm());
                            let (sr, si) = se[idx];
                            max_z = max_z.max(z_score(t.re, sr)).max(z_score(t.im, si));
                        }
                    }
                }
            }
        }
    }
    let coefficients = least_squares_indicators(k, &rows);
    Ok(TensorFit {
        class,
        n,
        samples,
        seed,
        estimator: "dense",
        coefficient_names: patterns.iter().map(|(s, _)| *s).collect(),
        coefficients,
        coefficient_stats: acc.coeffs,
        diagonal: acc.diag,
        residual,
        max_off_pattern_z: max_z,
        off_pattern_entries: off_pattern,
    })
}

fn z_score(value: f64, se: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        value.abs() / se
    }
}

/// Ordinary least squares for a design whose rows are indicator vectors of
/// column `col`.
fn least_squares_indicators(k: usize, rows: &[(usize, f64)]) -> Vec<f64> {
    let x = DMatrix::from_fn(rows.len(), k, |r, c| if rows[r].0 == c { 1.0 } else { 0.0 });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let xtx = x.tr_mul(&x);
    let xty = x.tr_mul(&y);
    xtx.lu()
        .solve(&xty)
        .expect("every pattern has at least one row for n >= 2")
        .iter()
        .copied()
        .collect()
}

/// Estimator for large `n`: each sample contributes the representative
/// entries `(iiii)`, `(iijj)`, `(ijij)`, `(ijji)` and the unpaired `(iiij)` for
/// one random pair `i ≠ j`.
pub fn estimate_fourth_tensor_sliced(
    class: SymmetryClass,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<TensorFit> {
    check_tensor_args(n, samples)?;
    let patterns = pairing_patterns(class);
    let k = patterns.len();
    let candidates: [fn(usize, usize) -> [usize; 4]; 4] = [
        |i, j| [i, i, j, j],
        |i, j| [i, j, i, j],
        |i, j| [i, j, j, i],
        |i, j| [i, i, i, j],
    ];
    let parts = run_batches(samples, DEFAULT_BATCH_SIZE, |stream, trials| {
        let mut rng = stream_rng(seed, stream);
        let mut coeffs = vec![EstimatorResult::new(); k];
        let mut diag = EstimatorResult::new();
        // re and im of each candidate entry
        let mut cand = vec![(EstimatorResult::new(), EstimatorResult::new()); candidates.len()];
        for _ in 0..trials {
            let state = haar_state_with(class, n, &mut rng);
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let c = state.amplitudes();
            let conj = |z: Complex64| match class {
                SymmetryClass::Gue => z.conj(),
                SymmetryClass::Goe => z,
            };
            let entry = |[a, b, g, d]: [usize; 4]| c[a] * conj(c[b]) * c[g] * conj(c[d]);
            diag.push(entry([i, i, i, i]).re);
            for (slot, f) in cand.iter_mut().zip(&candidates) {
                let t = entry(f(i, j));
                slot.0.push(t.re);
                slot.1.push(t.im);
            }
        }
        // pattern coefficients come from the matching candidate slots
        for (kk, (_, f)) in patterns.iter().enumerate() {
            let pos = candidates
                .iter()
                .position(|g| g(0, 1) == f(0, 1))
                .expect("pattern is a candidate");
            coeffs[kk] = cand[pos].0;
        }
        (coeffs, diag, cand)
    });
    let mut coeffs = vec![EstimatorResult::new(); k];
    let mut diag = EstimatorResult::new();
    let mut cand = vec![(EstimatorResult::new(), EstimatorResult::new()); candidates.len()];
    for (c, d, e) in &parts {
        for (x, y) in coeffs.iter_mut().zip(c) {
            x.absorb(y);
        }
        diag.absorb(d);
        for (x, y) in cand.iter_mut().zip(e) {
            x.0.absorb(&y.0);
            x.1.absorb(&y.1);
        }
    }
    let mut residual: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut off_pattern = 0;
    for (f, (re, im)) in candidates.iter().zip(&cand) {
        if classify(class, f(0, 1)).is_some() {
            continue;
        }
        off_pattern += 1;
        residual = residual.max(Complex64::new(re.mean(), im.mean()).norm());
        max_z = max_z
            .max(z_score(re.mean(), re.stderr()))
            .max(z_score(im.mean(), im.stderr()));
    }
    Ok(TensorFit {
        class,
        n,
        samples,
        seed,
        estimator: "sliced",
        coefficient_names: patterns.iter().map(|(s, _)| *s).collect(),
        coefficients: coeffs.iter().map(EstimatorResult::mean).collect(),
        coefficient_stats: coeffs,
        diagonal: diag,
        residual,
        max_off_pattern_z: max_z,
        off_pattern_entries: off_pattern,
    })
}
