//! Acceptance suite: every closed-form prediction checked at its stated
//! sample size and tolerance. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use birthmark::birthmark::{
    analytic_cross_overlap, analytic_ratio, analytic_self_overlap, dilation, estimate_enhancement,
    SamplingPath,
};
use birthmark::dynamics::convergence_curve;
use birthmark::ensembles::{dirichlet_with, haar_state_with, stream_rng, weights_from_state};
use birthmark::estimator::{merge, EstimatorResult};
use birthmark::moments::{
    analytic_moments, estimate_fourth_tensor, estimate_moments, pairing_ratio, WeightSource,
};
use birthmark::sectors::{analytic_sector_ratio, estimate_sector_ratio, SectorLayout};
use birthmark::{decompose, sample_haar_state, sample_matrix, SymmetryClass};

use SymmetryClass::{Goe, Gue};

const SIGMAS: f64 = 4.0;
const SEED: u64 = 20_251_019;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&what);
        if !ok {
            self.detail.push_str(" <-- FAILED");
        }
    }

    /// `|mean − reference| ≤ k·stderr`.
    fn sigma(&mut self, label: &str, est: &EstimatorResult, reference: f64, k: f64) {
        let z = est.z_score(reference);
        self.check(
            z.abs() <= k,
            format!("{label} {:.6e} vs {reference:.6e} (z = {z:+.2})", est.mean()),
        );
    }
}

fn gue_self_overlap() -> Outcome {
    let mut o = Outcome::new();
    let r = estimate_enhancement(Gue, 32, 100_000, SEED, SamplingPath::Dirichlet).unwrap();
    let reference = 2.0 / 33.0;
    o.sigma("P_aa", r.p_aa(), reference, SIGMAS);
    let rel = (r.p_aa().mean() - reference).abs() / reference;
    o.check(rel < 0.01, format!("relative error {rel:.2e} < 1e-2"));
    o
}

fn goe_self_overlap() -> Outcome {
    let mut o = Outcome::new();
    let r = estimate_enhancement(Goe, 32, 100_000, SEED + 1, SamplingPath::Dirichlet).unwrap();
    let reference = 3.0 / 34.0;
    o.sigma("P_aa", r.p_aa(), reference, SIGMAS);
    let rel = (r.p_aa().mean() - reference).abs() / reference;
    o.check(rel < 0.01, format!("relative error {rel:.2e} < 1e-2"));
    o
}

fn cross_overlap() -> Outcome {
    let mut o = Outcome::new();
    for (k, class) in SymmetryClass::ALL.into_iter().enumerate() {
        let r = estimate_enhancement(class, 32, 100_000, SEED + 2 + k as u64, SamplingPath::Dirichlet)
            .unwrap();
        o.sigma(&format!("{class} P_ab"), r.p_ab(), 1.0 / 32.0, SIGMAS);
    }
    o
}

fn universal_limits() -> Outcome {
    let mut o = Outcome::new();
    for (k, class) in SymmetryClass::ALL.into_iter().enumerate() {
        let r = estimate_enhancement(class, 1024, 100_000, SEED + 4 + k as u64, SamplingPath::Dirichlet)
            .unwrap();
        let target = class.universal_factor();
        let rel = (r.ratio() - target).abs() / target;
        o.check(
            rel < 0.02,
            format!("{class} ratio {:.5} vs {target} (rel {rel:.2e} < 2e-2)", r.ratio()),
        );
    }
    o
}

fn matrix_path_equivalence() -> Outcome {
    let mut o = Outcome::new();
    for (k, class) in SymmetryClass::ALL.into_iter().enumerate() {
        let seed = SEED + 6 + k as u64;
        let m = estimate_enhancement(class, 64, 1_000, seed, SamplingPath::Matrix).unwrap();
        let d = estimate_enhancement(class, 64, 100_000, seed, SamplingPath::Dirichlet).unwrap();
        for (label, x, y) in [("P_aa", m.p_aa(), d.p_aa()), ("P_ab", m.p_ab(), d.p_ab())] {
            let combined = x.stderr().hypot(y.stderr());
            let z = (x.mean() - y.mean()) / combined;
            o.check(
                z.abs() <= SIGMAS,
                format!("{class} {label} matrix {:.5e} vs dirichlet {:.5e} (z = {z:+.2})", x.mean(), y.mean()),
            );
        }
    }
    o
}

fn dirichlet_moments() -> Outcome {
    let mut o = Outcome::new();
    for (k, class) in SymmetryClass::ALL.into_iter().enumerate() {
        for (j, n) in [2usize, 4, 8, 16].into_iter().enumerate() {
            let seed = SEED + 10 + (4 * k + j) as u64;
            let est = estimate_moments(class, n, 1_000_000, seed, WeightSource::Dirichlet).unwrap();
            let nf = n as f64;
            let (c, d) = match class {
                Gue => (2.0 / (nf * (nf + 1.0)), 1.0 / (nf * (nf + 1.0))),
                Goe => (3.0 / (nf * (nf + 2.0)), 1.0 / (nf * (nf + 2.0))),
            };
            o.sigma(&format!("{class} n={n} E[p_i^2]"), &est.e_pi_sq, c, SIGMAS);
            o.sigma(&format!("{class} n={n} E[p_i p_j]"), &est.e_pi_pj, d, SIGMAS);
        }
    }
    o
}

fn schur_weyl_structure() -> Outcome {
    let mut o = Outcome::new();
    for (class, lo, hi, seed) in [(Gue, 1.95, 2.05, SEED + 20), (Goe, 2.9, 3.1, SEED + 21)] {
        let fit = estimate_fourth_tensor(class, 8, 1_000_000, seed).unwrap();
        let ratio = pairing_ratio(&fit).unwrap();
        o.check(
            (lo..=hi).contains(&ratio),
            format!("{class} C/D = {ratio:.4} in [{lo}, {hi}]"),
        );
        o.check(
            fit.max_off_pattern_z < 5.0,
            format!(
                "{class} {} off-pattern entries, max |z| = {:.2} < 5",
                fit.off_pattern_entries, fit.max_off_pattern_z
            ),
        );
    }
    o
}

fn sector_amplification() -> Outcome {
    let mut o = Outcome::new();

    let gue = SectorLayout::new(vec![4, 4], vec![0]).unwrap();
    let r = estimate_sector_ratio(&gue, Gue, 100_000, SEED + 30, SamplingPath::Dirichlet).unwrap();
    let target = analytic_sector_ratio(Gue, 8, 4).unwrap();
    let z = (r.ratio() - target) / r.ratio_stderr();
    o.check(
        z.abs() <= SIGMAS && target == 3.2,
        format!("GUE N=8 d=4 ratio {:.4} vs {target} (z = {z:+.2})", r.ratio()),
    );

    // 3N/(d+2) at N = 16, d = 4
    let goe = SectorLayout::new(vec![4, 12], vec![0]).unwrap();
    let r = estimate_sector_ratio(&goe, Goe, 100_000, SEED + 31, SamplingPath::Dirichlet).unwrap();
    let target = 3.0 * 16.0 / 6.0;
    let z = (r.ratio() - target) / r.ratio_stderr();
    o.check(
        z.abs() <= SIGMAS,
        format!("GOE N=16 d=4 ratio {:.4} vs 3*16/6 = {target} (z = {z:+.2})", r.ratio()),
    );

    for (k, class) in SymmetryClass::ALL.into_iter().enumerate() {
        let full = SectorLayout::unrestricted(vec![1024]).unwrap();
        let r = estimate_sector_ratio(&full, class, 100_000, SEED + 32 + k as u64, SamplingPath::Dirichlet)
            .unwrap();
        let universal = class.universal_factor();
        let rel = (r.ratio() - universal).abs() / universal;
        o.check(
            rel < 0.02 && analytic_sector_ratio(class, 1024, 1024).unwrap() == analytic_ratio(class, 1024),
            format!("{class} d=N=1024 ratio {:.5} within 2% of {universal}", r.ratio()),
        );
    }
    o
}

fn finite_time_convergence() -> Outcome {
    let mut o = Outcome::new();
    let n = 16;
    let spec = decompose(&sample_matrix(Gue, n, SEED + 40).unwrap()).unwrap();
    let a = sample_haar_state(Gue, n, SEED + 41).unwrap();
    let b = sample_haar_state(Gue, n, SEED + 42).unwrap();
    let horizons = [1e1, 1e2, 1e3, 1e4];
    for (label, x, y) in [("return a->a", &a, &a), ("overlap a->b", &a, &b)] {
        let curve = convergence_curve(&spec, x, y, &horizons).unwrap();
        let rel = curve.rel_errors();
        let last = *rel.last().unwrap();
        o.check(last < 1e-2, format!("{label}: rel deviation at T=1e4 {last:.2e} < 1e-2"));
        let errs = curve.abs_errors();
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        o.check(
            decreasing,
            format!(
                "{label}: errors over T=1e1..1e4 decreasing [{}]",
                errs.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(", ")
            ),
        );
    }
    o
}

fn exact_invariants() -> Outcome {
    let mut o = Outcome::new();

    // ergodic floor on 1e5 random weight vectors of mixed size and class
    let mut rng = stream_rng(SEED + 50, 0);
    let mut worst = f64::INFINITY;
    for i in 0..100_000usize {
        let class = SymmetryClass::ALL[i % 2];
        let n = 1 + i % 64;
        let w = if i % 3 == 0 {
            weights_from_state(&haar_state_with(class, n, &mut rng)).unwrap()
        } else {
            dirichlet_with(class, n, &mut rng)
        };
        worst = worst.min(dilation(&w) - 1.0 / n as f64);
    }
    o.check(worst >= -1e-12, format!("min(dilation - 1/N) = {worst:.2e} >= -1e-12"));

    let mut max_resid: f64 = 0.0;
    for class in SymmetryClass::ALL {
        for n in 1..=4096 {
            max_resid = max_resid.max(analytic_moments(class, n).unwrap().normalization_residual().abs());
        }
    }
    o.check(max_resid <= 1e-12, format!("max |N C + N(N-1) D - 1| = {max_resid:.1e}"));

    let mut rng = stream_rng(SEED + 51, 0);
    let partials: Vec<EstimatorResult> = (0..16)
        .map(|_| {
            (0..1000)
                .map(|_| dilation(&dirichlet_with(Goe, 12, &mut rng)))
                .collect()
        })
        .collect();
    let ordered = merge(&partials).unwrap();
    let mut shuffled = partials.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(SEED));
    let reordered = merge(&shuffled).unwrap();
    let halves = merge(&[merge(&partials[..8]).unwrap(), merge(&partials[8..]).unwrap()]).unwrap();
    let dm = (ordered.mean() - reordered.mean())
        .abs()
        .max((ordered.mean() - halves.mean()).abs());
    o.check(
        dm <= 1e-12 && ordered.count == 16_000,
        format!("merge order mean deviation {dm:.1e} <= 1e-12"),
    );

    // sanity on the references themselves
    o.check(
        analytic_self_overlap(Gue, 32) == 2.0 / 33.0 && analytic_cross_overlap(32) == 1.0 / 32.0,
        "closed forms evaluate as written".into(),
    );
    o
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("GUE self-overlap N=32", gue_self_overlap),
        ("GOE self-overlap N=32", goe_self_overlap),
        ("cross overlap N=32", cross_overlap),
        ("universal ratio limits N=1024", universal_limits),
        ("matrix path equivalence N=64", matrix_path_equivalence),
        ("Dirichlet moments N=2..16", dirichlet_moments),
        ("pairing structure N=8", schur_weyl_structure),
        ("sector amplification", sector_amplification),
        ("finite-time convergence N=16", finite_time_convergence),
        ("exact invariants", exact_invariants),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        println!(
            "criterion {:>2} [{}] {name} ({:.1}s): {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
