//! Finite-time averages of `|⟨b|e^{−iHt}|a⟩|²` and their convergence to the
//! spectral sum `Σ_n p_n^a p_n^b`.
//!
//! With eigenbasis coefficients `a_n`, `b_n` and `z_n = b̄_n a_n`,
//!
//! ```text
//! (1/T) ∫₀ᵀ |Σ_n z_n e^{−iE_n t}|² dt = Σ_{n,m} z_n z̄_m κ((E_n − E_m) T),
//! κ(x) = (e^{−ix} − 1) / (−ix),
//! ```
//!
//! so the average is evaluated exactly from the spectrum. Levels within a
//! degeneracy cluster are treated as one level (`κ = 1` between them).

use num_complex::Complex64;
use serde::Serialize;

use crate::ensembles::QuantumState;
use crate::error::{Error, Result};
use crate::spectral::HamiltonianSpectrum;

/// Below this `|x|` the kernel uses its Taylor series.
const KERNEL_SERIES_CUTOFF: f64 = 1e-6;

/// `κ(x) = (1/T) ∫₀ᵀ e^{−iΔt} dt` with `x = ΔT`.
pub fn time_average_kernel(x: f64) -> Complex64 {
    if x.abs() < KERNEL_SERIES_CUTOFF {
        let x2 = x * x;
        Complex64::new(1.0 - x2 / 6.0, -x / 2.0 + x * x2 / 24.0)
    } else {
        let (s, c) = x.sin_cos();
        // (e^{-ix} - 1)/(-ix) = (sin x + i(cos x - 1)) / x
        Complex64::new(s / x, (c - 1.0) / x)
    }
}

/// Eigenbasis products `z_n = conj(b_n) a_n` plus level labels.
struct Amplitudes {
    z: Vec<Complex64>,
    level: Vec<usize>,
    energies: Vec<f64>,
}

fn amplitudes(spec: &HamiltonianSpectrum, a: &QuantumState, b: &QuantumState) -> Result<Amplitudes> {
    let ca = spec.coefficients(a)?;
    let cb = spec.coefficients(b)?;
    let z = ca.iter().zip(cb.iter()).map(|(x, y)| y.conj() * x).collect();
    let mut level = vec![0; spec.dim()];
    for (k, r) in spec.levels().into_iter().enumerate() {
        for i in r {
            level[i] = k;
        }
    }
    Ok(Amplitudes {
        z,
        level,
        energies: spec.eigenvalues().to_vec(),
    })
}

/// `|⟨b|e^{−iHt}|a⟩|²`.
pub fn overlap_at_time(
    spec: &HamiltonianSpectrum,
    a: &QuantumState,
    b: &QuantumState,
    t: f64,
) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("time {t} is not finite")));
    }
    let amp = amplitudes(spec, a, b)?;
    Ok(evolve(&amp, t).norm_sqr())
}

fn evolve(amp: &Amplitudes, t: f64) -> Complex64 {
    amp.z
        .iter()
        .zip(&amp.energies)
        .map(|(z, e)| z * Complex64::from_polar(1.0, -e * t))
        .sum()
}

/// `Σ_levels |Σ_{n∈level} z_n|²`, the infinite-time average. For a
/// non-degenerate spectrum this is `Σ_n p_n^a p_n^b`.
pub fn long_time_limit(spec: &HamiltonianSpectrum, a: &QuantumState, b: &QuantumState) -> Result<f64> {
    let amp = amplitudes(spec, a, b)?;
    Ok(level_limit(&amp))
}

fn level_limit(amp: &Amplitudes) -> f64 {
    let levels = amp.level.last().map_or(0, |l| l + 1);
    let mut sums = vec![Complex64::new(0.0, 0.0); levels];
    for (z, &l) in amp.z.iter().zip(&amp.level) {
        sums[l] += z;
    }
    sums.iter().map(|s| s.norm_sqr()).sum()
}

/// Exact `(1/T) ∫₀ᵀ |⟨b|e^{−iHt}|a⟩|² dt`, `T` in the units of `1/E`.
pub fn finite_time_average(
    spec: &HamiltonianSpectrum,
    a: &QuantumState,
    b: &QuantumState,
    horizon: f64,
) -> Result<f64> {
    check_horizon(horizon)?;
    let amp = amplitudes(spec, a, b)?;
    Ok(closed_form_average(&amp, horizon))
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive and finite, got {horizon}")));
    }
    Ok(())
}

fn closed_form_average(amp: &Amplitudes, horizon: f64) -> f64 {
    let n = amp.z.len();
    let mut total = level_limit(amp);
    for i in 0..n {
        for j in i + 1..n {
            if amp.level[i] == amp.level[j] {
                continue;
            }
            let k = time_average_kernel((amp.energies[i] - amp.energies[j]) * horizon);
            total += 2.0 * (amp.z[i] * amp.z[j].conj() * k).re;
        }
    }
    total
}

/// `Σ_{n<m, distinct levels} 2|z_n||z_m| min(1, 2/(|ΔE| T))`, a bound on the
/// distance of the finite-time average from its limit; nonincreasing in `T`.
fn error_envelope(amp: &Amplitudes, horizon: f64) -> f64 {
    let n = amp.z.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if amp.level[i] == amp.level[j] {
                continue;
            }
            let x = ((amp.energies[i] - amp.energies[j]) * horizon).abs();
            total += 2.0 * amp.z[i].norm() * amp.z[j].norm() * (2.0 / x).min(1.0);
        }
    }
    total
}

/// Composite Simpson estimate of the same average with `intervals` panels
/// (rounded up to even).
pub fn finite_time_average_quadrature(
    spec: &HamiltonianSpectrum,
    a: &QuantumState,
    b: &QuantumState,
    horizon: f64,
    intervals: usize,
) -> Result<f64> {
    check_horizon(horizon)?;
    let amp = amplitudes(spec, a, b)?;
    let m = (intervals.max(2) + 1) & !1;
    let h = horizon / m as f64;
    let mut s = 0.0;
    for k in 0..=m {
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * evolve(&amp, k as f64 * h).norm_sqr();
    }
    Ok(s * h / 3.0 / horizon)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeAverageCurve {
    /// Horizons in units of the inverse mean level spacing.
    pub horizons: Vec<f64>,
    pub values: Vec<f64>,
    pub limit: f64,
    pub envelope: Vec<f64>,
    /// Mean level spacing used to convert horizons to time.
    pub mean_level_spacing: f64,
}

impl TimeAverageCurve {
    pub fn abs_errors(&self) -> Vec<f64> {
        self.values.iter().map(|v| (v - self.limit).abs()).collect()
    }

    /// `|value − limit| / limit`.
    pub fn rel_errors(&self) -> Vec<f64> {
        self.abs_errors().iter().map(|e| e / self.limit).collect()
    }
}

/// Finite-time averages at `horizons`, given in units of the inverse mean
/// level spacing (`T = h / Δ̄`).
pub fn convergence_curve(
    spec: &HamiltonianSpectrum,
    a: &QuantumState,
    b: &QuantumState,
    horizons: &[f64],
) -> Result<TimeAverageCurve> {
    if horizons.is_empty() {
        return Err(Error::Domain("at least one horizon is required".into()));
    }
    if horizons.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("horizons must be strictly increasing".into()));
    }
    for &h in horizons {
        check_horizon(h)?;
    }
    let spacing = spec.mean_level_spacing();
    // a single level has no dynamics; any time unit will do
    let unit = if spacing > 0.0 { 1.0 / spacing } else { 1.0 };
    let amp = amplitudes(spec, a, b)?;
    let values = horizons
        .iter()
        .map(|&h| closed_form_average(&amp, h * unit))
        .collect();
    let envelope = horizons.iter().map(|&h| error_envelope(&amp, h * unit)).collect();
    Ok(TimeAverageCurve {
        horizons: horizons.to_vec(),
        values,
        limit: level_limit(&amp),
        envelope,
        mean_level_spacing: spacing,
    })
}
