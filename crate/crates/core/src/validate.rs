//! Small-scale cross-module consistency suite.
//!
//! Each check compares two independent routes to the same quantity. Margins
//! are wide enough that the verdicts do not depend on the seed.

use serde::{Deserialize, Serialize};

use crate::channel::{
    sample_block_eigen, BandBases, CorrelationModel, EigenBasis, ZERO_EIGENVALUE_TOL,
};
use crate::codebook::{
    best_policy, log2_factorial, spectral_efficiency, stirling_bounds, AmplitudeSet, Codeword,
    PartitionPolicy,
};
use crate::detect::{
    brute_force_ml, constraint_residual, energy_estimates, isotropic_ml, ml_metric_table,
    viterbi_ml, weights_abque, weights_ed, weights_hsnr, DetectorKind, BRUTE_FORCE_CAP,
    CONSTRAINT_TOL, TRELLIS_STATE_CAP,
};
use crate::error::Result;
use crate::sim::{paired_decisions, trial_rng, OperatingPoint, SamplingPath};

/// Deliberate defects for exercising the suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// HSNR weights proportional to `gamma` instead of `1/gamma`.
    HsnrGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            fault: None,
        }
    }
}

type Check = fn(&ValidateOptions) -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 8] = [
    ("weight-constraint", weight_constraint),
    ("estimator-unbiasedness", unbiasedness),
    ("sorting-ml-equals-brute", sorting_vs_brute),
    ("viterbi-equals-brute", viterbi_vs_brute),
    ("isotropic-collapse", isotropic_collapse),
    ("stirling-bounds", stirling),
    ("se-below-entropy", se_below_entropy),
    ("uniform-policy-optimal", uniform_optimal),
];

pub fn run_validation(opts: &ValidateOptions) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let (passed, detail) = check(opts).unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckOutcome {
                name: name.to_string(),
                passed,
                detail,
            }
        })
        .collect()
}

fn correlated_basis(n: usize, rho: f64) -> Result<EigenBasis> {
    CorrelationModel::exponential(rho)?.eigen_basis(n)
}

fn hsnr_diag(basis: &EigenBasis, fault: Option<Fault>) -> Result<Vec<f64>> {
    match fault {
        None => Ok(weights_hsnr(basis)?.diag().to_vec()),
        Some(Fault::HsnrGamma) => {
            let g = basis.eigenvalues();
            let kept = g.iter().filter(|&&x| x >= ZERO_EIGENVALUE_TOL).count() as f64;
            Ok(g.iter().map(|&x| x / kept).collect())
        }
    }
}

fn weight_constraint(opts: &ValidateOptions) -> Result<(bool, String)> {
    let basis = correlated_basis(64, 0.7)?;
    let amps = AmplitudeSet::uniform(4)?;
    let mut worst = constraint_residual(weights_ed(&basis)?.diag(), &basis);
    worst = worst.max(constraint_residual(&hsnr_diag(&basis, opts.fault)?, &basis));
    for &eps in amps.energies() {
        worst = worst.max(constraint_residual(
            weights_abque(&basis, 0.1, eps)?.diag(),
            &basis,
        ));
    }
    Ok((
        worst <= CONSTRAINT_TOL,
        format!("max |sum a gamma - 1| = {worst:.3e}"),
    ))
}

fn unbiasedness(opts: &ValidateOptions) -> Result<(bool, String)> {
    const DRAWS: usize = 4000;
    let noise = 0.1;
    let basis = correlated_basis(64, 0.7)?;
    let bases = BandBases::Shared(basis.clone());
    let amps = AmplitudeSet::uniform(4)?;
    let hsnr = hsnr_diag(&basis, opts.fault)?;
    let trace: f64 = hsnr.iter().sum();
    let mut worst = 0.0f64;
    for (l, &eps) in amps.energies().iter().enumerate() {
        let cw = Codeword::from_levels(vec![l; DRAWS]);
        let mut rng = trial_rng(opts.seed, l as u64);
        let block = sample_block_eigen(&cw, &amps, &bases, noise, &mut rng)?;
        let ed = weights_ed(&basis)?;
        let genie = weights_abque(&basis, noise, eps)?;
        let mut sets: Vec<Vec<f64>> = Vec::new();
        for w in [&ed, &genie] {
            sets.push(energy_estimates(&block, &vec![w; DRAWS], noise)?);
        }
        // HSNR from raw weights so an injected defect is not rejected upstream
        sets.push(
            (0..DRAWS)
                .map(|k| {
                    let q: f64 = block
                        .row(k)
                        .iter()
                        .zip(&hsnr)
                        .map(|(z, a)| z.norm_sqr() * a)
                        .sum();
                    q - noise * trace
                })
                .collect(),
        );
        for est in &sets {
            let n = est.len() as f64;
            let mean = est.iter().sum::<f64>() / n;
            let var = est.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let z = (mean - eps).abs() / (var / n).sqrt();
            worst = worst.max(z);
        }
    }
    Ok((
        worst < 4.5,
        format!("largest bias {worst:.2} standard errors"),
    ))
}

fn sorting_vs_brute(opts: &ValidateOptions) -> Result<(bool, String)> {
    let point = OperatingPoint {
        policy: PartitionPolicy::new(vec![2, 2, 1, 1])?,
        antennas: 4,
        rho: 0.0,
        snr_db: 10.0,
        path: SamplingPath::Eigen,
        first_round: Default::default(),
    };
    let link = point.link()?;
    let rx = link.receiver();
    let trials = 2000u64;
    let mut mismatches = 0;
    for i in 0..trials {
        let block = link.trial(opts.seed, i)?;
        let table = ml_metric_table(&block, rx.bases(), rx.noise_power(), rx.amplitudes())?;
        let brute = brute_force_ml(&table, rx.policy(), BRUTE_FORCE_CAP)?;
        let sorted = isotropic_ml(&block, rx.noise_power(), rx.policy(), rx.amplitudes())?;
        mismatches += usize::from(brute.codeword != sorted.codeword);
    }
    Ok((
        mismatches == 0,
        format!("{mismatches} mismatches in {trials} trials"),
    ))
}

fn viterbi_vs_brute(opts: &ValidateOptions) -> Result<(bool, String)> {
    let point = OperatingPoint {
        policy: PartitionPolicy::new(vec![2, 2, 2, 2])?,
        antennas: 8,
        rho: 0.7,
        snr_db: 5.0,
        path: SamplingPath::Eigen,
        first_round: Default::default(),
    };
    let link = point.link()?;
    let rx = link.receiver();
    let trials = 300u64;
    let mut bad = 0;
    let mut worst_gap = 0.0f64;
    for i in 0..trials {
        let block = link.trial(opts.seed, i)?;
        let table = ml_metric_table(&block, rx.bases(), rx.noise_power(), rx.amplitudes())?;
        let brute = brute_force_ml(&table, rx.policy(), BRUTE_FORCE_CAP)?;
        let vit = viterbi_ml(&table, rx.policy(), TRELLIS_STATE_CAP)?;
        let gap = (brute.cost.unwrap_or(f64::NAN) - vit.cost.unwrap_or(f64::NAN)).abs();
        worst_gap = worst_gap.max(gap);
        bad += usize::from(brute.codeword != vit.codeword || !(gap <= 1e-9));
    }
    Ok((
        bad == 0,
        format!("{bad} disagreements in {trials} trials, max cost gap {worst_gap:.1e}"),
    ))
}

fn isotropic_collapse(opts: &ValidateOptions) -> Result<(bool, String)> {
    let point = OperatingPoint {
        policy: PartitionPolicy::new(vec![4, 4, 4, 4])?,
        antennas: 8,
        rho: 0.0,
        snr_db: 10.0,
        path: SamplingPath::Eigen,
        first_round: Default::default(),
    };
    let link = point.link()?;
    let kinds = [
        DetectorKind::MlIsoSort,
        DetectorKind::Ed,
        DetectorKind::Hsnr,
        DetectorKind::Abque,
    ];
    let trials = 1000;
    let d = paired_decisions(&link, &kinds, trials, opts.seed)?;
    let differing = (0..trials as usize)
        .filter(|&t| d.iter().any(|row| row[t] != d[0][t]))
        .count();
    Ok((
        differing == 0,
        format!("{differing} of {trials} trials differ"),
    ))
}

fn stirling(_: &ValidateOptions) -> Result<(bool, String)> {
    let mut failures = Vec::new();
    for alpha in 1..=170u64 {
        let (lo, hi) = stirling_bounds(alpha)?;
        // log2(alpha!) by direct summation, independent of the log-gamma route
        let exact: f64 = (2..=alpha).map(|i| (i as f64).log2()).sum();
        let lg = log2_factorial(alpha as usize);
        if !(lo < exact && exact < hi && lo < lg && lg < hi) {
            failures.push(alpha);
        }
    }
    if failures.is_empty() {
        Ok((true, "bracket holds for alpha = 1..=170".into()))
    } else {
        Ok((false, format!("bracket violated at alpha = {failures:?}")))
    }
}

fn se_below_entropy(_: &ValidateOptions) -> Result<(bool, String)> {
    let mut prev = 0.0;
    for k in (4..=256).step_by(4) {
        let se = spectral_efficiency(&PartitionPolicy::uniform(k, 4)?);
        if !(se < 2.0 && se >= prev) {
            return Ok((false, format!("K={k}: R={se} after {prev}")));
        }
        prev = se;
    }
    Ok((true, format!("R_256 = {prev:.6}")))
}

fn uniform_optimal(_: &ValidateOptions) -> Result<(bool, String)> {
    for (k, l) in [(12, 3), (16, 4)] {
        let best = best_policy(k, l)?;
        if best != PartitionPolicy::uniform(k, l)? {
            return Ok((false, format!("K={k}, L={l}: argmax {}", best.label())));
        }
    }
    Ok((true, "uniform partitions maximise SE".into()))
}
