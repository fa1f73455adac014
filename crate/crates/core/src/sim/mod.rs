//! Monte Carlo harness: SER estimation, parameter sweeps and required-SNR
//! search.

mod rng;
mod search;
mod sweep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    db_to_linear, noise_power_for_snr, sample_block_eigen, BandBases, CorrelationModel,
    FullPathSampler, ReceivedBlock,
};
use crate::codebook::{random_codeword, AmplitudeSet, Codeword, PartitionPolicy};
use crate::detect::{DetectorKind, FirstRound, Receiver};
use crate::error::{Error, Result};

pub use rng::{trial_rng, TrialRng};
pub use search::{bisect_required_snr, required_snr, RequiredSnr, SearchOptions};
pub use sweep::{content_hash, sweep, Axis, ExperimentSpec, Provenance, Series, SweepResult};

/// Trials are dispatched to workers in batches of this size and scanned in
/// index order, so the stopping point never depends on scheduling.
const BATCH: u64 = 256;

/// How received blocks are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingPath {
    /// Draw eigenbasis observations directly.
    #[default]
    Eigen,
    /// Draw `h = S w`, form `y = h x + z` and rotate.
    Full,
}

/// Fixed-error-count stopping with a trial cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoppingRule {
    pub min_errors: u64,
    /// Extra floor on the number of symbols before stopping.
    pub min_symbols: u64,
    pub max_trials: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            min_errors: 200,
            min_symbols: 0,
            max_trials: 1_000_000,
        }
    }
}

impl StoppingRule {
    pub fn fixed_trials(trials: u64) -> Self {
        Self {
            min_errors: u64::MAX,
            min_symbols: 0,
            max_trials: trials,
        }
    }

    fn done(&self, errors: u64, symbols: u64) -> bool {
        errors >= self.min_errors && symbols >= self.min_symbols
    }
}

/// Symbol error rate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerEstimate {
    pub ser: f64,
    pub symbol_errors: u64,
    pub symbols: u64,
    pub std_error: f64,
    pub trials: u64,
}

impl SerEstimate {
    pub fn from_counts(symbol_errors: u64, trials: u64, subcarriers: usize) -> Result<Self> {
        if trials == 0 {
            return Err(Error::ZeroTrials);
        }
        let symbols = trials * subcarriers as u64;
        let ser = symbol_errors as f64 / symbols as f64;
        Ok(Self {
            ser,
            symbol_errors,
            symbols,
            std_error: (ser * (1.0 - ser) / symbols as f64).sqrt(),
            trials,
        })
    }
}

/// Parameters of a single simulated link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub policy: PartitionPolicy,
    pub antennas: usize,
    pub rho: f64,
    pub snr_db: f64,
    #[serde(default)]
    pub path: SamplingPath,
    #[serde(default)]
    pub first_round: FirstRound,
}

impl OperatingPoint {
    pub fn model(&self) -> Result<CorrelationModel> {
        if self.rho == 0.0 {
            Ok(CorrelationModel::Isotropic)
        } else {
            CorrelationModel::exponential(self.rho)
        }
    }

    pub fn link(&self) -> Result<Link> {
        if !self.snr_db.is_finite() {
            return Err(Error::Domain(format!(
                "SNR must be finite, got {} dB",
                self.snr_db
            )));
        }
        if self.antennas == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        let amplitudes = AmplitudeSet::uniform(self.policy.num_levels())?;
        let model = self.model()?;
        let sampler = match self.path {
            SamplingPath::Eigen => None,
            SamplingPath::Full => Some(FullPathSampler::new(model, self.antennas)?),
        };
        let basis = match &sampler {
            Some(s) => s.basis().clone(),
            None => model.eigen_basis(self.antennas)?,
        };
        let bases = BandBases::Shared(basis);
        let noise =
            noise_power_for_snr(db_to_linear(self.snr_db), &self.policy, &amplitudes, &bases)?;
        let receiver = Receiver::with_first_round(
            self.policy.clone(),
            amplitudes,
            bases,
            noise,
            self.first_round,
        )?;
        Ok(Link { receiver, sampler })
    }
}

/// A ready-to-simulate operating point: receiver state plus block sampler.
#[derive(Debug, Clone)]
pub struct Link {
    receiver: Receiver,
    sampler: Option<FullPathSampler>,
}

impl Link {
    pub fn new(receiver: Receiver, sampler: Option<FullPathSampler>) -> Self {
        Self { receiver, sampler }
    }

    pub fn receiver(&self) -> &Receiver {
        &self.receiver
    }

    /// Draws the codeword and block of trial `index`.
    pub fn trial(&self, seed: u64, index: u64) -> Result<ReceivedBlock> {
        let mut rng = trial_rng(seed, index);
        let rx = &self.receiver;
        let cw = random_codeword(rx.policy(), &mut rng);
        match &self.sampler {
            Some(s) => s.sample(&cw, rx.amplitudes(), rx.noise_power(), &mut rng),
            None => {
                sample_block_eigen(&cw, rx.amplitudes(), rx.bases(), rx.noise_power(), &mut rng)
            }
        }
    }
}

/// Anything that maps a received block to a codeword decision.
pub trait Detector: Sync {
    fn label(&self) -> String;

    /// Called once per operating point before any trial runs.
    fn prepare(&self, _receiver: &Receiver) -> Result<()> {
        Ok(())
    }

    fn decide(&self, receiver: &Receiver, block: &ReceivedBlock) -> Result<Codeword>;
}

impl Detector for DetectorKind {
    fn label(&self) -> String {
        self.name().to_string()
    }

    fn prepare(&self, receiver: &Receiver) -> Result<()> {
        receiver.check_feasible(*self)
    }

    fn decide(&self, receiver: &Receiver, block: &ReceivedBlock) -> Result<Codeword> {
        receiver.detect(*self, block).map(|d| d.codeword)
    }
}

/// Runs trials `0, 1, 2, ...` until the stopping rule fires or the cap is
/// reached. The result depends only on `(link, detector, rule, seed)`.
pub fn run_ser<D: Detector + ?Sized>(
    link: &Link,
    detector: &D,
    rule: &StoppingRule,
    seed: u64,
) -> Result<SerEstimate> {
    if rule.max_trials == 0 {
        return Err(Error::ZeroTrials);
    }
    detector.prepare(&link.receiver)?;
    let k = link.receiver.policy().subcarriers() as u64;
    let mut errors = 0u64;
    let mut trials = 0u64;
    let mut start = 0u64;
    while start < rule.max_trials {
        let end = (start + BATCH).min(rule.max_trials);
        let counts = (start..end)
            .into_par_iter()
            .map(|i| {
                let block = link.trial(seed, i)?;
                let decided = detector.decide(&link.receiver, &block)?;
                let truth = block.truth().expect("sampled blocks carry the codeword");
                Ok(truth.symbol_errors(&decided) as u64)
            })
            .collect::<Result<Vec<u64>>>()?;
        for e in counts {
            errors += e;
            trials += 1;
            if rule.done(errors, trials * k) {
                return SerEstimate::from_counts(errors, trials, k as usize);
            }
        }
        start = end;
    }
    SerEstimate::from_counts(errors, trials, k as usize)
}

/// Decisions of several detectors on the same `trials` blocks, indexed
/// `[detector][trial]`.
pub fn paired_decisions<D: Detector>(
    link: &Link,
    detectors: &[D],
    trials: u64,
    seed: u64,
) -> Result<Vec<Vec<Codeword>>> {
    for d in detectors {
        d.prepare(&link.receiver)?;
    }
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| {
            let block = link.trial(seed, i)?;
            detectors
                .iter()
                .map(|d| d.decide(&link.receiver, &block))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..detectors.len())
        .map(|j| rows.iter().map(|r| r[j].clone()).collect())
        .collect())
}
