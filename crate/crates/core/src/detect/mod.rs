//! Detectors for PIM over noncoherent SIMO: exhaustive and trellis ML,
//! sorting ML for isotropic fading, the high-SNR limit and the quadratic
//! ED / HSNR / ABQUE / genie-BQUE family.

mod ml;
mod quadratic;
mod sorting;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{BandBases, ReceivedBlock};
use crate::codebook::{cardinality_u128, check_pairing, AmplitudeSet, Codeword, PartitionPolicy};
use crate::error::{Error, Result};

pub use ml::{
    brute_force_ml, ml_metric_table, viterbi_ml, MetricTable, BRUTE_FORCE_CAP, TRELLIS_STATE_CAP,
};
pub use quadratic::{
    constraint_residual, detect_quadratic, energy_estimates, weights_abque, weights_ed,
    weights_hsnr, FirstRound, QuadraticKind, QuadraticWeights, WeightKind, WeightMatrix,
    CONSTRAINT_TOL,
};
pub use sorting::{detect_hsnr_limit, isotropic_ml, llr_isotropic, IsotropicMetrics};

/// Output of a detector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decision {
    pub codeword: Codeword,
    /// Argsort permutation of the ranking statistic (sorting detectors only).
    pub permutation: Option<Vec<usize>>,
    pub llr: Option<f64>,
    /// Per-subcarrier statistic that was sorted.
    pub metrics: Option<Vec<f64>>,
    /// Path cost (ML detectors only).
    pub cost: Option<f64>,
}

/// Stable ascending argsort; equal values keep index order.
pub fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Assigns the `i`-th smallest metric the `i`-th reference level.
pub fn sort_assign(metrics: &[f64], policy: &PartitionPolicy) -> (Codeword, Vec<usize>) {
    let perm = argsort(metrics);
    let mut levels = vec![0; metrics.len()];
    for (&k, l) in perm.iter().zip(policy.reference_levels()) {
        levels[k] = l;
    }
    (Codeword::from_levels(levels), perm)
}

/// Detector selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DetectorKind {
    MlBrute,
    MlViterbi,
    MlIsoSort,
    Ed,
    Hsnr,
    Abque,
    BqueGenie,
    HsnrLimit,
    /// Returns the transmitted codeword; a diagnostic for the harness.
    Truth,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 9] = [
        Self::MlBrute,
        Self::MlViterbi,
        Self::MlIsoSort,
        Self::Ed,
        Self::Hsnr,
        Self::Abque,
        Self::BqueGenie,
        Self::HsnrLimit,
        Self::Truth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MlBrute => "ml-brute",
            Self::MlViterbi => "ml-viterbi",
            Self::MlIsoSort => "ml-iso-sort",
            Self::Ed => "ed",
            Self::Hsnr => "hsnr",
            Self::Abque => "abque",
            Self::BqueGenie => "bque-genie",
            Self::HsnrLimit => "hsnr-limit",
            Self::Truth => "truth",
        }
    }

    /// Whether the detector reads the transmitted codeword.
    pub fn uses_genie(self) -> bool {
        matches!(self, Self::BqueGenie | Self::HsnrLimit | Self::Truth)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::Misuse(format!(
                    "unknown detector `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

impl TryFrom<String> for DetectorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DetectorKind> for String {
    fn from(k: DetectorKind) -> Self {
        k.name().to_string()
    }
}

/// Receiver state for one operating point: statistical CSI plus every
/// precomputed weight set, shared read-only across trials.
#[derive(Debug, Clone)]
pub struct Receiver {
    policy: PartitionPolicy,
    amplitudes: AmplitudeSet,
    bases: BandBases,
    noise_power: f64,
    weights: QuadraticWeights,
    brute_cap: u128,
    state_cap: u128,
}

impl Receiver {
    pub fn new(
        policy: PartitionPolicy,
        amplitudes: AmplitudeSet,
        bases: BandBases,
        noise_power: f64,
    ) -> Result<Self> {
        Self::with_first_round(policy, amplitudes, bases, noise_power, FirstRound::Codeword)
    }

    pub fn with_first_round(
        policy: PartitionPolicy,
        amplitudes: AmplitudeSet,
        bases: BandBases,
        noise_power: f64,
        first_round: FirstRound,
    ) -> Result<Self> {
        check_pairing(&policy, &amplitudes)?;
        bases.check(policy.subcarriers())?;
        if !(noise_power > 0.0) || !noise_power.is_finite() {
            return Err(Error::Domain(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        let weights = QuadraticWeights::new(&bases, noise_power, &amplitudes, first_round)?;
        Ok(Self {
            policy,
            amplitudes,
            bases,
            noise_power,
            weights,
            brute_cap: BRUTE_FORCE_CAP,
            state_cap: TRELLIS_STATE_CAP,
        })
    }

    pub fn policy(&self) -> &PartitionPolicy {
        &self.policy
    }

    pub fn amplitudes(&self) -> &AmplitudeSet {
        &self.amplitudes
    }

    pub fn bases(&self) -> &BandBases {
        &self.bases
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn weights(&self) -> &QuadraticWeights {
        &self.weights
    }

    /// Rejects detectors that cannot run at this operating point, before any
    /// trial is spent.
    pub fn check_feasible(&self, kind: DetectorKind) -> Result<()> {
        match kind {
            DetectorKind::MlBrute => {
                let size = cardinality_u128(&self.policy);
                if size > self.brute_cap {
                    return Err(Error::SizeLimit {
                        what: "codebook",
                        size,
                        cap: self.brute_cap,
                        hint: "; use ml-viterbi or a sorting detector",
                    });
                }
            }
            DetectorKind::MlViterbi => {
                let states = self.policy.trellis_states();
                if states > self.state_cap {
                    return Err(Error::SizeLimit {
                        what: "trellis",
                        size: states,
                        cap: self.state_cap,
                        hint: "; use a sorting detector (abque, hsnr, ed)",
                    });
                }
            }
            DetectorKind::Hsnr => {
                for slot in 0..self.bases.distinct().len() {
                    self.weights.hsnr(slot)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn detect(&self, kind: DetectorKind, block: &ReceivedBlock) -> Result<Decision> {
        match kind {
            DetectorKind::MlBrute => {
                let t = ml_metric_table(block, &self.bases, self.noise_power, &self.amplitudes)?;
                brute_force_ml(&t, &self.policy, self.brute_cap)
            }
            DetectorKind::MlViterbi => {
                let t = ml_metric_table(block, &self.bases, self.noise_power, &self.amplitudes)?;
                viterbi_ml(&t, &self.policy, self.state_cap)
            }
            DetectorKind::MlIsoSort => {
                isotropic_ml(block, self.noise_power, &self.policy, &self.amplitudes)
            }
            DetectorKind::Ed => self.weights.detect(QuadraticKind::Ed, block, &self.policy),
            DetectorKind::Hsnr => self
                .weights
                .detect(QuadraticKind::Hsnr, block, &self.policy),
            DetectorKind::Abque => self
                .weights
                .detect(QuadraticKind::Abque, block, &self.policy),
            DetectorKind::BqueGenie => {
                self.weights
                    .detect(QuadraticKind::BqueGenie, block, &self.policy)
            }
            DetectorKind::HsnrLimit => {
                let truth = self.truth_of(block, kind)?;
                let active: Vec<usize> = truth
                    .levels()
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l != 0)
                    .map(|(k, _)| k)
                    .collect();
                detect_hsnr_limit(block, &self.bases, &self.policy, &active)
            }
            DetectorKind::Truth => Ok(Decision {
                codeword: self.truth_of(block, kind)?.clone(),
                ..Decision::default()
            }),
        }
    }

    fn truth_of<'a>(&self, block: &'a ReceivedBlock, kind: DetectorKind) -> Result<&'a Codeword> {
        block.truth().ok_or_else(|| {
            Error::Misuse(format!(
                "{kind} needs the transmitted codeword in the block"
            ))
        })
    }
}
