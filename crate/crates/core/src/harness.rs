//! Experiment configuration, execution and result persistence for the CLI.
//!
//! A configuration is assembled from defaults, then an optional JSON document,
//! then command-line flags (later sources win). Every run yields CSV rows, a
//! JSON summary and a list of checks against the closed forms.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::birthmark::{estimate_enhancement, EnhancementReport, SamplingPath};
use crate::dynamics::convergence_curve;
use crate::ensembles::{sample_haar_state, sample_matrix, SymmetryClass, RNG_ID};
use crate::error::{Error, Result};
use crate::moments::{
    analytic_moments, estimate_fourth_tensor, estimate_fourth_tensor_sliced, estimate_moments,
    pairing_ratio, TensorFit, WeightSource, DENSE_TENSOR_MAX_N,
};
use crate::sectors::{estimate_sector_ratio, SectorLayout};
use crate::spectral::decompose;

pub use crate::estimator::{merge, EstimatorResult};

/// Width of the pass band in standard errors.
pub const DEFAULT_SIGMAS: f64 = 4.0;
/// Off-pattern tensor entries must stay within this many standard errors.
pub const OFF_PATTERN_SIGMAS: f64 = 5.0;
/// Largest accepted relative error of the last convergence horizon.
pub const CONVERGENCE_RTOL: f64 = 1e-2;

pub const DEFAULT_HORIZONS: [f64; 4] = [1e1, 1e2, 1e3, 1e4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Enhancement,
    Moments,
    Tensor,
    Sector,
    Convergence,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::Enhancement => "enhancement",
            Experiment::Moments => "moments",
            Experiment::Tensor => "tensor",
            Experiment::Sector => "sector",
            Experiment::Convergence => "convergence",
        }
    }
}

/// Every field optional; used for the JSON document and for flag overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub experiment: Option<Experiment>,
    pub class: Option<SymmetryClass>,
    pub n: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub path: Option<SamplingPath>,
    pub layout: Option<Vec<usize>>,
    pub accessible: Option<Vec<usize>>,
    pub horizons: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            experiment: other.experiment.or(self.experiment),
            class: other.class.or(self.class),
            n: other.n.or(self.n),
            samples: other.samples.or(self.samples),
            seed: other.seed.or(self.seed),
            path: other.path.or(self.path),
            layout: other.layout.or(self.layout),
            accessible: other.accessible.or(self.accessible),
            horizons: other.horizons.or(self.horizons),
            out: other.out.or(self.out),
            workers: other.workers.or(self.workers),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let experiment = self
            .experiment
            .ok_or_else(|| Error::config("experiment", "no experiment selected"))?;
        let samples = self.samples.unwrap_or(100_000);
        if samples < 2 {
            return Err(Error::config("samples", "must be at least 2"));
        }
        let layout = match experiment {
            Experiment::Sector => {
                let dims = self
                    .layout
                    .ok_or_else(|| Error::config("layout", "required for the sector experiment"))?;
                let accessible = self.accessible.unwrap_or_else(|| (0..dims.len()).collect());
                Some(SectorLayout::new(dims, accessible)?)
            }
            _ => None,
        };
        let n = match &layout {
            Some(l) => {
                if let Some(n) = self.n.filter(|&n| n != l.total()) {
                    return Err(Error::config(
                        "n",
                        format!("{n} disagrees with the layout total {}", l.total()),
                    ));
                }
                l.total()
            }
            None => self.n.unwrap_or(32),
        };
        if n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        if matches!(experiment, Experiment::Moments | Experiment::Tensor) && n < 2 {
            return Err(Error::config("n", "must be at least 2 for this experiment"));
        }
        let horizons = self.horizons.unwrap_or_else(|| DEFAULT_HORIZONS.to_vec());
        if horizons.is_empty() || horizons.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::config("horizons", "must be a nonempty list of positive values"));
        }
        if horizons.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("horizons", "must be strictly increasing"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be positive"));
        }
        Ok(ExperimentConfig {
            experiment,
            class: self.class.unwrap_or(SymmetryClass::Gue),
            n,
            samples,
            seed: self.seed.unwrap_or(1),
            path: self.path.unwrap_or(SamplingPath::Dirichlet),
            layout,
            horizons,
            out: self.out,
            workers: self.workers,
        })
    }
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub class: SymmetryClass,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub path: SamplingPath,
    pub layout: Option<SectorLayout>,
    /// In units of the inverse mean level spacing.
    pub horizons: Vec<f64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// One estimate compared with its reference value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub reference: f64,
    /// Accepted absolute deviation.
    pub band: f64,
    pub pass: bool,
}

impl Check {
    pub fn sigma_band(name: impl Into<String>, est: &EstimatorResult, reference: f64, k: f64) -> Self {
        Self::within(name, est.mean(), est.stderr(), reference, k * est.stderr())
    }

    pub fn within(name: impl Into<String>, estimate: f64, stderr: f64, reference: f64, band: f64) -> Self {
        Check {
            name: name.into(),
            estimate,
            stderr,
            reference,
            band,
            pass: (estimate - reference).abs() <= band,
        }
    }

    /// `estimate < bound`.
    pub fn below(name: impl Into<String>, estimate: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            estimate,
            stderr: f64::NAN,
            reference: bound,
            band: 0.0,
            pass: estimate < bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    /// File stem for the outputs.
    pub name: String,
    pub csv: String,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| Error::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        fs::write(&csv_path, &self.csv).map_err(|source| Error::Output {
            path: csv_path.clone(),
            source,
        })?;
        let json_path = dir.join(format!("{}.json", self.name));
        let text = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        fs::write(&json_path, text + "\n").map_err(|source| Error::Output {
            path: json_path.clone(),
            source,
        })?;
        Ok(())
    }

    /// Human-readable verdict table.
    pub fn verdict_table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "[{}] {:<40} estimate {:>14.8e}  reference {:>14.8e}  band {:>10.3e}",
                if c.pass { "PASS" } else { "FAIL" },
                format!("{}: {}", self.name, c.name),
                c.estimate,
                c.reference,
                c.band,
            );
        }
        s
    }
}

/// Locale-independent, 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_usize(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Runs one experiment on the current rayon pool.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    match config.experiment {
        Experiment::Enhancement => {
            let r = estimate_enhancement(config.class, config.n, config.samples, config.seed, config.path)?;
            Ok(enhancement_report(config, &r))
        }
        Experiment::Sector => {
            let layout = config.layout.as_ref().expect("validated sector config");
            let r = estimate_sector_ratio(layout, config.class, config.samples, config.seed, config.path)?;
            Ok(enhancement_report(config, &r))
        }
        Experiment::Moments => run_moments(config),
        Experiment::Tensor => run_tensor(config),
        Experiment::Convergence => run_convergence(config),
    }
}

/// Runs on a dedicated pool of `config.workers` threads when set. Batches are
/// fixed before dispatch, so the worker count only changes wall-clock time.
pub fn run_with_workers(config: &ExperimentConfig) -> Result<Report> {
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?
            .install(|| run(config)),
        None => run(config),
    }
}

fn base_summary(config: &ExperimentConfig) -> serde_json::Value {
    json!({
        "experiment": config.experiment,
        "config": config,
        "rng": RNG_ID,
    })
}

fn enhancement_report(config: &ExperimentConfig, r: &EnhancementReport) -> Report {
    let k = DEFAULT_SIGMAS;
    let checks = vec![
        Check::sigma_band("p_aa", r.p_aa(), r.analytic_p_aa, k),
        Check::sigma_band("p_ab", r.p_ab(), r.analytic_p_ab, k),
        Check::within("ratio", r.ratio(), r.ratio_stderr(), r.analytic_ratio, k * r.ratio_stderr()),
    ];
    let f = fmt_float;
    let mut csv = String::new();
    let (name, prefix) = match &config.layout {
        None => {
            csv.push_str("class,n,path,samples,p_aa_mean,p_aa_stderr,p_ab_mean,p_ab_stderr,ratio,analytic_ratio,seed\n");
            (
                format!("enhancement-{}-n{}-{}", r.class, r.n, r.path),
                format!("{},{},{}", r.class, r.n, r.path),
            )
        }
        Some(l) => {
            csv.push_str("class,n,d,layout,accessible,path,samples,p_aa_mean,p_aa_stderr,p_ab_mean,p_ab_stderr,ratio,analytic_ratio,seed\n");
            (
                format!("sector-{}-n{}-d{}-{}", r.class, r.n, l.accessible_dim(), r.path),
                format!(
                    "{},{},{},{},{},{}",
                    r.class,
                    r.n,
                    l.accessible_dim(),
                    join_usize(l.sector_dims()),
                    join_usize(l.accessible()),
                    r.path
                ),
            )
        }
    };
    let _ = writeln!(
        csv,
        "{prefix},{},{},{},{},{},{},{},{}",
        r.samples,
        f(r.p_aa().mean()),
        f(r.p_aa().stderr()),
        f(r.p_ab().mean()),
        f(r.p_ab().stderr()),
        f(r.ratio()),
        f(r.analytic_ratio),
        r.seed
    );
    let mut summary = base_summary(config);
    summary["result"] = json!({
        "p_aa": r.p_aa(),
        "p_ab": r.p_ab(),
        "ratio": r.ratio(),
        "ratio_stderr": r.ratio_stderr(),
        "analytic_p_aa": r.analytic_p_aa,
        "analytic_p_ab": r.analytic_p_ab,
        "analytic_ratio": r.analytic_ratio,
        "accessible_dim": r.accessible_dim,
        "degenerate_events": r.degenerate_events,
    });
    summary["checks"] = json!(checks);
    Report {
        name,
        csv,
        summary,
        checks,
    }
}

fn run_moments(config: &ExperimentConfig) -> Result<Report> {
    let est = estimate_moments(config.class, config.n, config.samples, config.seed, WeightSource::Dirichlet)?;
    let table = analytic_moments(config.class, config.n)?;
    let pair = table.e_pi_pj.expect("n >= 2");
    let k = DEFAULT_SIGMAS;
    let checks = vec![
        Check::sigma_band("e_pi_sq", &est.e_pi_sq, table.e_pi_sq, k),
        Check::sigma_band("e_pi_pj", &est.e_pi_pj, pair, k),
        Check::below("normalization_identity", table.normalization_residual().abs(), 1e-12),
    ];
    let f = fmt_float;
    let mut csv = String::from(
        "class,n,samples,e_pi_sq_mean,e_pi_sq_stderr,e_pi_sq_analytic,e_pi_pj_mean,e_pi_pj_stderr,e_pi_pj_analytic,seed\n",
    );
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{},{}",
        config.class,
        config.n,
        config.samples,
        f(est.e_pi_sq.mean()),
        f(est.e_pi_sq.stderr()),
        f(table.e_pi_sq),
        f(est.e_pi_pj.mean()),
        f(est.e_pi_pj.stderr()),
        f(pair),
        config.seed
    );
    let mut summary = base_summary(config);
    summary["result"] = json!({ "estimate": est, "analytic": table });
    summary["checks"] = json!(checks);
    Ok(Report {
        name: format!("moments-{}-n{}", config.class, config.n),
        csv,
        summary,
        checks,
    })
}

fn run_tensor(config: &ExperimentConfig) -> Result<Report> {
    let fit: TensorFit = if config.n <= DENSE_TENSOR_MAX_N {
        estimate_fourth_tensor(config.class, config.n, config.samples, config.seed)?
    } else {
        estimate_fourth_tensor_sliced(config.class, config.n, config.samples, config.seed)?
    };
    let table = analytic_moments(config.class, config.n)?;
    let d = table.e_pi_pj.expect("n >= 2");
    let k = DEFAULT_SIGMAS;
    let mut checks: Vec<Check> = fit
        .coefficient_names
        .iter()
        .zip(&fit.coefficient_stats)
        .map(|(name, s)| Check::sigma_band(format!("coefficient {name}"), s, d, k))
        .collect();
    checks.push(Check::sigma_band("diagonal C", &fit.diagonal, table.e_pi_sq, k));
    checks.push(Check::below("max off-pattern z", fit.max_off_pattern_z, OFF_PATTERN_SIGMAS));
    let f = fmt_float;
    let mut csv = String::from("class,n,samples,estimator,term,value,stderr,analytic,seed\n");
    let rows = fit
        .coefficient_names
        .iter()
        .zip(&fit.coefficients)
        .zip(&fit.coefficient_stats)
        .map(|((name, v), s)| (*name, *v, s.stderr(), d))
        .chain(std::iter::once(("C", fit.diagonal.mean(), fit.diagonal.stderr(), table.e_pi_sq)));
    for (term, v, se, analytic) in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{term},{},{},{},{}",
            config.class,
            config.n,
            config.samples,
            fit.estimator,
            f(v),
            f(se),
            f(analytic),
            config.seed
        );
    }
    let mut summary = base_summary(config);
    summary["result"] = fit.to_json();
    summary["analytic_pairing_ratio"] = json!(table.e_pi_sq / d);
    summary["pairing_ratio"] = json!(pairing_ratio(&fit)?);
    summary["checks"] = json!(checks);
    Ok(Report {
        name: format!("tensor-{}-n{}", config.class, config.n),
        csv,
        summary,
        checks,
    })
}

fn run_convergence(config: &ExperimentConfig) -> Result<Report> {
    // matrix, a and b come from distinct seeds derived from the master seed
    let h = sample_matrix(config.class, config.n, config.seed)?;
    let spec = decompose(&h)?;
    let a = sample_haar_state(config.class, config.n, config.seed.wrapping_add(1))?;
    let curve = convergence_curve(&spec, &a, &a, &config.horizons)?;
    let errors = curve.abs_errors();
    let rel = curve.rel_errors();
    let mut checks = vec![Check::below(
        "relative error at last horizon",
        *rel.last().expect("nonempty"),
        CONVERGENCE_RTOL,
    )];
    if errors.len() > 1 {
        checks.push(Check::below(
            "last error below first",
            *errors.last().expect("nonempty"),
            errors[0],
        ));
    }
    let f = fmt_float;
    let mut csv = String::from("T,value,limit,abs_error\n");
    for ((t, v), e) in curve.horizons.iter().zip(&curve.values).zip(&errors) {
        let _ = writeln!(csv, "{},{},{},{}", f(*t), f(*v), f(curve.limit), f(*e));
    }
    let mut summary = base_summary(config);
    summary["time_unit"] = json!("inverse mean level spacing");
    summary["result"] = json!({
        "limit": curve.limit,
        "mean_level_spacing": curve.mean_level_spacing,
        "horizons": curve.horizons,
        "values": curve.values,
        "abs_errors": errors,
        "error_envelope": curve.envelope,
        "degeneracy_clusters": spec.degeneracy_clusters().len(),
    });
    summary["checks"] = json!(checks);
    Ok(Report {
        name: format!("convergence-{}-n{}", config.class, config.n),
        csv,
        summary,
        checks,
    })
}

/// Configurations exercised by `verify-all`: every closed form at modest
/// sample sizes.
pub fn verification_suite(seed: u64) -> Result<Vec<ExperimentConfig>> {
    use Experiment::*;
    use SymmetryClass::*;
    let base = |experiment, class, n, samples| ConfigOverrides {
        experiment: Some(experiment),
        class: Some(class),
        n: Some(n),
        samples: Some(samples),
        seed: Some(seed),
        ..Default::default()
    };
    let mut out = Vec::new();
    for class in [Gue, Goe] {
        out.push(base(Enhancement, class, 32, 100_000));
        out.push(ConfigOverrides {
            path: Some(SamplingPath::Matrix),
            ..base(Enhancement, class, 16, 5_000)
        });
        out.push(base(Moments, class, 4, 100_000));
        out.push(base(Tensor, class, 4, 100_000));
        out.push(base(Convergence, class, 16, 2));
    }
    out.push(ConfigOverrides {
        layout: Some(vec![4, 4]),
        accessible: Some(vec![0]),
        n: None,
        ..base(Sector, Gue, 0, 100_000)
    });
    out.push(ConfigOverrides {
        layout: Some(vec![4, 4, 8]),
        accessible: Some(vec![0]),
        n: None,
        ..base(Sector, Goe, 0, 100_000)
    });
    out.into_iter().map(ConfigOverrides::resolve).collect()
}
