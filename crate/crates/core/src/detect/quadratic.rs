//! Quadratic energy estimators `eps_hat_k = r_k^H A_k r_k - sigma^2 tr(A_k)`
//! with diagonal weights satisfying `tr(A_k Gamma_k) = 1`, and the sorting
//! detectors built on them.

use serde::{Deserialize, Serialize};

use crate::channel::{BandBases, EigenBasis, ReceivedBlock, ZERO_EIGENVALUE_TOL};
use crate::codebook::{check_pairing, AmplitudeSet, PartitionPolicy};
use crate::error::{Error, Result};

use super::{sort_assign, Decision};

/// Tolerance on the unbiasedness constraint `sum_n a_n gamma_n = 1`.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Ed,
    Hsnr,
    Abque,
    BqueGenie,
}

/// Diagonal of a weighting matrix `A_k` in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    diag: Vec<f64>,
    trace: f64,
    kind: WeightKind,
}

impl WeightMatrix {
    /// Validates non-negativity and the unbiasedness constraint against `basis`.
    pub fn new(diag: Vec<f64>, basis: &EigenBasis, kind: WeightKind) -> Result<Self> {
        if diag.len() != basis.dim() {
            return Err(Error::Dimension(format!(
                "{} weights for {} antennas",
                diag.len(),
                basis.dim()
            )));
        }
        if diag.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain(
                "weights must be finite and non-negative".into(),
            ));
        }
        let residual = constraint_residual(&diag, basis);
        if residual > CONSTRAINT_TOL {
            return Err(Error::Domain(format!(
                "weights violate tr(A Gamma) = 1 by {residual:e}"
            )));
        }
        let trace = diag.iter().sum();
        Ok(Self { diag, trace, kind })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }
}

/// `|sum_n a_n gamma_n - 1|`.
pub fn constraint_residual(diag: &[f64], basis: &EigenBasis) -> f64 {
    let s: f64 = diag
        .iter()
        .zip(basis.eigenvalues())
        .map(|(a, g)| a * g)
        .sum();
    (s - 1.0).abs()
}

/// `A = I / tr(Gamma)`.
pub fn weights_ed(basis: &EigenBasis) -> Result<WeightMatrix> {
    let tr = basis.trace();
    if !(tr > 0.0) {
        return Err(Error::DegenerateChannel("covariance has zero trace".into()));
    }
    WeightMatrix::new(vec![1.0 / tr; basis.dim()], basis, WeightKind::Ed)
}

/// `A = Gamma^{-1} / N` over the eigenvalues above the zero threshold, with
/// `N` replaced by the number of retained eigenvalues.
pub fn weights_hsnr(basis: &EigenBasis) -> Result<WeightMatrix> {
    let retained = basis
        .eigenvalues()
        .iter()
        .filter(|&&g| g >= ZERO_EIGENVALUE_TOL)
        .count();
    if retained == 0 {
        return Err(Error::DegenerateChannel("all eigenvalues are zero".into()));
    }
    let diag = basis
        .eigenvalues()
        .iter()
        .map(|&g| {
            if g >= ZERO_EIGENVALUE_TOL {
                1.0 / (retained as f64 * g)
            } else {
                0.0
            }
        })
        .collect();
    WeightMatrix::new(diag, basis, WeightKind::Hsnr)
}

/// `a_n = (gamma_n / d_n^2) / sum_m (gamma_m / d_m)^2` with `d_n = eps_hat gamma_n + sigma^2`.
pub fn weights_abque(basis: &EigenBasis, noise_power: f64, eps_hat: f64) -> Result<WeightMatrix> {
    abque_like(basis, noise_power, eps_hat, WeightKind::Abque)
}

fn abque_like(
    basis: &EigenBasis,
    noise_power: f64,
    eps_hat: f64,
    kind: WeightKind,
) -> Result<WeightMatrix> {
    if !(noise_power > 0.0) {
        return Err(Error::Domain(format!(
            "ABQUE weights need a positive noise power, got {noise_power}"
        )));
    }
    if !(eps_hat >= 0.0) {
        return Err(Error::Domain(format!(
            "energy hint must be non-negative, got {eps_hat}"
        )));
    }
    let ratio: Vec<f64> = basis
        .eigenvalues()
        .iter()
        .map(|&g| g / (eps_hat * g + noise_power))
        .collect();
    let norm: f64 = ratio.iter().map(|x| x * x).sum();
    if !(norm > 0.0) {
        return Err(Error::DegenerateChannel("all eigenvalues are zero".into()));
    }
    let diag = basis
        .eigenvalues()
        .iter()
        .zip(&ratio)
        .map(|(&g, &x)| {
            let d = eps_hat * g + noise_power;
            x / d / norm
        })
        .collect();
    WeightMatrix::new(diag, basis, kind)
}

/// Per-subcarrier estimates with one weight matrix per subcarrier.
pub fn energy_estimates(
    block: &ReceivedBlock,
    weights: &[&WeightMatrix],
    noise_power: f64,
) -> Result<Vec<f64>> {
    if weights.len() != block.subcarriers() {
        return Err(Error::Dimension(format!(
            "{} weight matrices for {} subcarriers",
            weights.len(),
            block.subcarriers()
        )));
    }
    weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            if w.diag.len() != block.antennas() {
                return Err(Error::Dimension(
                    "weight and block antenna counts differ".into(),
                ));
            }
            let quad: f64 = block
                .row(k)
                .iter()
                .zip(&w.diag)
                .map(|(z, a)| z.norm_sqr() * a)
                .sum();
            Ok(quad - noise_power * w.trace)
        })
        .collect()
}

/// How the first ABQUE round produces the energy hints for the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstRound {
    /// Codeword-level ED sorting decision (respects the multiset constraint).
    #[default]
    Codeword,
    /// Per-subcarrier nearest-level slicing of the ED estimates.
    Slicer,
}

/// Kinds of sorting detector driven by quadratic estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadraticKind {
    Ed,
    Hsnr,
    Abque,
    BqueGenie,
}

/// Precomputed weights for one operating point: ED and HSNR per distinct
/// basis, ABQUE per distinct basis and amplitude level.
#[derive(Debug, Clone)]
pub struct QuadraticWeights {
    ed: Vec<WeightMatrix>,
    hsnr: Vec<Result<WeightMatrix>>,
    // abque[slot][level]
    abque: Vec<Vec<WeightMatrix>>,
    genie: Vec<Vec<WeightMatrix>>,
    noise_power: f64,
    energies: Vec<f64>,
    first_round: FirstRound,
}

impl QuadraticWeights {
    pub fn new(
        bases: &BandBases,
        noise_power: f64,
        amplitudes: &AmplitudeSet,
        first_round: FirstRound,
    ) -> Result<Self> {
        let distinct = bases.distinct();
        let ed = distinct
            .iter()
            .map(weights_ed)
            .collect::<Result<Vec<_>>>()?;
        let hsnr = distinct.iter().map(weights_hsnr).collect();
        let per_level = |kind| {
            distinct
                .iter()
                .map(|b| {
                    amplitudes
                        .energies()
                        .iter()
                        .map(|&e| abque_like(b, noise_power, e, kind))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            ed,
            hsnr,
            abque: per_level(WeightKind::Abque)?,
            genie: per_level(WeightKind::BqueGenie)?,
            noise_power,
            energies: amplitudes.energies().to_vec(),
            first_round,
        })
    }

    pub fn ed(&self, slot: usize) -> &WeightMatrix {
        &self.ed[slot]
    }

    pub fn hsnr(&self, slot: usize) -> Result<&WeightMatrix> {
        self.hsnr[slot].as_ref().map_err(Clone::clone)
    }

    pub fn abque(&self, slot: usize, level: usize) -> &WeightMatrix {
        &self.abque[slot][level]
    }

    fn slot_of(&self, k: usize) -> usize {
        if self.ed.len() == 1 {
            0
        } else {
            k
        }
    }

    fn check(&self, block: &ReceivedBlock, policy: &PartitionPolicy) -> Result<()> {
        if policy.subcarriers() != block.subcarriers() {
            return Err(Error::Dimension(format!(
                "policy has K={} but the block has {} subcarriers",
                policy.subcarriers(),
                block.subcarriers()
            )));
        }
        if self.ed.len() != 1 && self.ed.len() != block.subcarriers() {
            return Err(Error::Dimension(
                "per-band weights do not match the block".into(),
            ));
        }
        if policy.num_levels() != self.energies.len() {
            return Err(Error::Dimension(
                "policy and amplitude set level counts differ".into(),
            ));
        }
        Ok(())
    }

    /// Runs the chosen sorting detector on one block.
    pub fn detect(
        &self,
        kind: QuadraticKind,
        block: &ReceivedBlock,
        policy: &PartitionPolicy,
    ) -> Result<Decision> {
        self.check(block, policy)?;
        let k_count = block.subcarriers();
        let one_pass = |weights: Vec<&WeightMatrix>| -> Result<Decision> {
            let est = energy_estimates(block, &weights, self.noise_power)?;
            let (codeword, perm) = sort_assign(&est, policy);
            Ok(Decision {
                codeword,
                permutation: Some(perm),
                metrics: Some(est),
                ..Decision::default()
            })
        };
        match kind {
            QuadraticKind::Ed => one_pass((0..k_count).map(|k| self.ed(self.slot_of(k))).collect()),
            QuadraticKind::Hsnr => one_pass(
                (0..k_count)
                    .map(|k| self.hsnr(self.slot_of(k)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            QuadraticKind::Abque => {
                let first = one_pass((0..k_count).map(|k| self.ed(self.slot_of(k))).collect())?;
                let hints: Vec<usize> = match self.first_round {
                    FirstRound::Codeword => first.codeword.levels().to_vec(),
                    FirstRound::Slicer => first
                        .metrics
                        .as_deref()
                        .unwrap_or_default()
                        .iter()
                        .map(|&e| nearest_level(&self.energies, e))
                        .collect(),
                };
                one_pass(
                    hints
                        .iter()
                        .enumerate()
                        .map(|(k, &l)| &self.abque[self.slot_of(k)][l])
                        .collect(),
                )
            }
            QuadraticKind::BqueGenie => {
                let truth = block.truth().ok_or_else(|| {
                    Error::Misuse("bque-genie needs the transmitted codeword in the block".into())
                })?;
                if truth.len() != k_count
                    || truth.levels().iter().any(|&l| l >= self.energies.len())
                {
                    return Err(Error::Misuse("ground truth does not fit the block".into()));
                }
                one_pass(
                    truth
                        .levels()
                        .iter()
                        .enumerate()
                        .map(|(k, &l)| &self.genie[self.slot_of(k)][l])
                        .collect(),
                )
            }
        }
    }
}

fn nearest_level(energies: &[f64], e: f64) -> usize {
    energies
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
        .map_or(0, |(l, _)| l)
}

/// One-shot convenience: computes the weights and runs `kind` on `block`.
pub fn detect_quadratic(
    kind: QuadraticKind,
    block: &ReceivedBlock,
    bases: &BandBases,
    noise_power: f64,
    policy: &PartitionPolicy,
    amplitudes: &AmplitudeSet,
) -> Result<Decision> {
    check_pairing(policy, amplitudes)?;
    bases.check(block.subcarriers())?;
    QuadraticWeights::new(bases, noise_power, amplitudes, FirstRound::Codeword)?
        .detect(kind, block, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_block_eigen, CorrelationModel};
    use crate::codebook::Codeword;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corr_basis(n: usize, rho: f64) -> EigenBasis {
        CorrelationModel::exponential(rho)
            .unwrap()
            .eigen_basis(n)
            .unwrap()
    }

    #[test]
    fn ed_examples() {
        let b = EigenBasis::diagonal(vec![3.0, 1.0]).unwrap();
        assert_eq!(weights_ed(&b).unwrap().diag(), &[0.25, 0.25]);
        let iso = weights_ed(&EigenBasis::identity(5)).unwrap();
        assert!(iso.diag().iter().all(|&a| (a - 0.2).abs() < 1e-15));
    }

    #[test]
    fn hsnr_examples() {
        let b = EigenBasis::diagonal(vec![2.0, 0.5]).unwrap();
        let w = weights_hsnr(&b).unwrap();
        assert_eq!(w.diag(), &[0.25, 1.0]);
        let iso = EigenBasis::identity(6);
        assert_eq!(
            weights_hsnr(&iso).unwrap().diag(),
            weights_ed(&iso).unwrap().diag()
        );

        let strong = corr_basis(64, 0.99);
        let w = weights_hsnr(&strong).unwrap();
        assert!(constraint_residual(w.diag(), &strong) < 1e-9);

        let rank_one = corr_basis(4, 1.0);
        let w = weights_hsnr(&rank_one).unwrap();
        assert_eq!(w.diag()[1..], [0.0, 0.0, 0.0]);
        assert!(weights_hsnr(&EigenBasis::diagonal(vec![0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn abque_limits() {
        let iso = EigenBasis::identity(4);
        for eps in [0.0, 0.3, 5.0] {
            let w = weights_abque(&iso, 0.7, eps).unwrap();
            assert!(w.diag().iter().all(|&a| (a - 0.25).abs() < 1e-14));
        }

        let b = corr_basis(8, 0.7);
        let g = b.eigenvalues();
        let tr_g2: f64 = g.iter().map(|x| x * x).sum();
        let noisy = weights_abque(&b, 1e6, 1.0).unwrap();
        for (a, gn) in noisy.diag().iter().zip(g) {
            assert!((a - gn / tr_g2).abs() < 1e-4 * (gn / tr_g2));
        }
        let hsnr = weights_hsnr(&b).unwrap();
        let strong = weights_abque(&b, 1.0, 1e6).unwrap();
        for (a, h) in strong.diag().iter().zip(hsnr.diag()) {
            assert!((a - h).abs() < 1e-4 * h);
        }
    }

    #[test]
    fn wrong_weights_are_rejected() {
        let b = corr_basis(8, 0.7);
        // gamma instead of 1/gamma
        let wrong: Vec<f64> = b.eigenvalues().iter().map(|g| g / 8.0).collect();
        assert!(WeightMatrix::new(wrong, &b, WeightKind::Hsnr).is_err());
    }

    #[test]
    fn estimate_arithmetic() {
        let b = EigenBasis::identity(1);
        let w = WeightMatrix::new(vec![1.0], &b, WeightKind::Ed).unwrap();
        let block = ReceivedBlock::new(1, 1, vec![Complex64::new(2.0, 0.0)], None).unwrap();
        assert_eq!(energy_estimates(&block, &[&w], 0.5).unwrap(), vec![3.5]);

        let zero = ReceivedBlock::new(2, 1, vec![Complex64::default(); 2], None).unwrap();
        let est = energy_estimates(&zero, &[&w, &w], 0.5).unwrap();
        assert_eq!(est, vec![-0.5, -0.5]);
    }

    #[test]
    fn worked_vector_for_every_kind() {
        let amps = AmplitudeSet::from_levels(vec![0.0, 2f64.sqrt()]).unwrap();
        let policy = PartitionPolicy::new(vec![2, 2]).unwrap();
        let u = [0.1, 3.0, 0.2, 2.5];
        let r = u
            .iter()
            .map(|&x: &f64| Complex64::new(x.sqrt(), 0.0))
            .collect();
        let truth = Codeword::from_levels(vec![0, 1, 0, 1]);
        let block = ReceivedBlock::new(4, 1, r, Some(truth)).unwrap();
        let bases = BandBases::Shared(EigenBasis::identity(1));
        for kind in [
            QuadraticKind::Ed,
            QuadraticKind::Hsnr,
            QuadraticKind::Abque,
            QuadraticKind::BqueGenie,
        ] {
            let d = detect_quadratic(kind, &block, &bases, 1.0, &policy, &amps).unwrap();
            assert_eq!(d.codeword.levels(), &[0, 1, 0, 1], "{kind:?}");
        }
    }

    #[test]
    fn genie_needs_truth() {
        let amps = AmplitudeSet::uniform(2).unwrap();
        let policy = PartitionPolicy::new(vec![1, 1]).unwrap();
        let block = ReceivedBlock::new(2, 1, vec![Complex64::default(); 2], None).unwrap();
        let bases = BandBases::Shared(EigenBasis::identity(1));
        let err = detect_quadratic(
            QuadraticKind::BqueGenie,
            &block,
            &bases,
            1.0,
            &policy,
            &amps,
        );
        assert!(matches!(err, Err(Error::Misuse(_))));
    }

    #[test]
    fn estimators_are_unbiased() {
        let n = 16;
        let basis = corr_basis(n, 0.7);
        let bases = BandBases::Shared(basis.clone());
        let amps = AmplitudeSet::uniform(4).unwrap();
        let noise = 0.1;
        let w = QuadraticWeights::new(&bases, noise, &amps, FirstRound::Codeword).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 20_000;
        for level in 0..4 {
            let cw = Codeword::from_levels(vec![level]);
            let eps = amps.energies()[level];
            for weights in [w.ed(0), w.hsnr(0).unwrap(), w.abque(0, level)] {
                let mut s = 0.0;
                let mut s2 = 0.0;
                for _ in 0..draws {
                    let b = sample_block_eigen(&cw, &amps, &bases, noise, &mut rng).unwrap();
                    let e = energy_estimates(&b, &[weights], noise).unwrap()[0];
                    s += e;
                    s2 += e * e;
                }
                let mean = s / draws as f64;
                let se = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
                assert!(
                    (mean - eps).abs() < 3.0 * se,
                    "{:?} level {level}: {mean} vs {eps}",
                    weights.kind()
                );
            }
        }
    }
}
