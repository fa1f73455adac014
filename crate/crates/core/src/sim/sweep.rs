//! Parameter sweeps and their CSV / JSON artifacts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codebook::{spectral_efficiency, PartitionPolicy};
use crate::detect::{DetectorKind, FirstRound};
use crate::error::{Error, Result};

use super::{run_ser, OperatingPoint, SamplingPath, SerEstimate, StoppingRule};

/// Base operating point plus everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub policy: PartitionPolicy,
    pub antennas: usize,
    pub rho: f64,
    /// SNR used by axes other than `snr`.
    pub snr_db: f64,
    pub detectors: Vec<DetectorKind>,
    pub stopping: StoppingRule,
    pub seed: u64,
    #[serde(default)]
    pub path: SamplingPath,
    #[serde(default)]
    pub first_round: FirstRound,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(Error::Domain("detector list is empty".into()));
        }
        if self.stopping.max_trials == 0 {
            return Err(Error::ZeroTrials);
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Domain(format!(
                "SNR must be finite, got {}",
                self.snr_db
            )));
        }
        self.point().link().map(|_| ())
    }

    pub fn point(&self) -> OperatingPoint {
        OperatingPoint {
            policy: self.policy.clone(),
            antennas: self.antennas,
            rho: self.rho,
            snr_db: self.snr_db,
            path: self.path,
            first_round: self.first_round,
        }
    }
}

/// Swept parameter and its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "lowercase")]
pub enum Axis {
    Snr(Vec<f64>),
    Antennas(Vec<usize>),
    Correlation(Vec<f64>),
    Policy(Vec<PartitionPolicy>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Snr(_) => "snr",
            Axis::Antennas(_) => "antennas",
            Axis::Correlation(_) => "correlation",
            Axis::Policy(_) => "policy",
        }
    }

    /// CSV column header for the axis value.
    pub fn column(&self) -> &'static str {
        match self {
            Axis::Snr(_) => "snr_db",
            Axis::Antennas(_) => "antennas",
            Axis::Correlation(_) => "rho",
            Axis::Policy(_) => "policy",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::Snr(v) | Axis::Correlation(v) => v.len(),
            Axis::Antennas(v) => v.len(),
            Axis::Policy(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            Axis::Snr(v) | Axis::Correlation(v) => v.iter().map(|x| x.to_string()).collect(),
            Axis::Antennas(v) => v.iter().map(|x| x.to_string()).collect(),
            Axis::Policy(v) => v.iter().map(PartitionPolicy::label).collect(),
        }
    }

    fn point(&self, base: &OperatingPoint, i: usize) -> OperatingPoint {
        let mut p = base.clone();
        match self {
            Axis::Snr(v) => p.snr_db = v[i],
            Axis::Antennas(v) => p.antennas = v[i],
            Axis::Correlation(v) => p.rho = v[i],
            Axis::Policy(v) => p.policy = v[i].clone(),
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON encoding of `(spec, axis)`.
    pub spec_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub detector: String,
    pub estimates: Vec<SerEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    pub axis: Axis,
    pub series: Vec<Series>,
    /// Bits per channel use of each policy (policy axis only).
    pub spectral_efficiency: Option<Vec<f64>>,
    pub provenance: Provenance,
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("spec types serialize infallibly");
    hex::encode(Sha256::digest(&bytes))
}

/// Runs every (axis value, detector) pair with common random numbers: all
/// pairs share the master seed, so trial `i` sees the same codeword and
/// fading draw everywhere the operating point allows.
pub fn sweep(spec: &ExperimentSpec, axis: &Axis) -> Result<SweepResult> {
    if spec.detectors.is_empty() {
        return Err(Error::Domain("detector list is empty".into()));
    }
    if axis.is_empty() {
        return Err(Error::Domain(format!("{} axis has no values", axis.name())));
    }
    let base = spec.point();
    // build and check every point before spending any trials
    let links = (0..axis.len())
        .map(|i| {
            let link = axis.point(&base, i).link()?;
            for d in &spec.detectors {
                link.receiver().check_feasible(*d)?;
            }
            Ok(link)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut series: Vec<Series> = spec
        .detectors
        .iter()
        .map(|d| Series {
            detector: d.name().to_string(),
            estimates: Vec::with_capacity(links.len()),
        })
        .collect();
    for link in &links {
        for (s, d) in series.iter_mut().zip(&spec.detectors) {
            s.estimates
                .push(run_ser(link, d, &spec.stopping, spec.seed)?);
        }
    }

    let spectral_efficiency = match axis {
        Axis::Policy(v) => Some(v.iter().map(spectral_efficiency).collect()),
        _ => None,
    };
    Ok(SweepResult {
        spec: spec.clone(),
        axis: axis.clone(),
        series,
        spectral_efficiency,
        provenance: Provenance {
            spec_hash: content_hash(&(spec, axis)),
            seed: spec.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

impl SweepResult {
    /// One row per axis value and detector; the first line is a comment
    /// carrying the spec hash and seed.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# config_hash={} seed={} version={}",
            self.provenance.spec_hash, self.provenance.seed, self.provenance.version
        );
        let _ = write!(
            out,
            "{},detector,ser,std_error,symbols,errors,seed",
            self.axis.column()
        );
        if self.spectral_efficiency.is_some() {
            out.push_str(",se_bpcu");
        }
        out.push('\n');
        for (i, label) in self.axis.labels().iter().enumerate() {
            for s in &self.series {
                let e = &s.estimates[i];
                let _ = write!(
                    out,
                    "{label},{},{:.6e},{:.6e},{},{},{}",
                    s.detector,
                    e.ser,
                    e.std_error,
                    e.symbols,
                    e.symbol_errors,
                    self.provenance.seed
                );
                if let Some(se) = &self.spectral_efficiency {
                    let _ = write!(out, ",{:.9}", se[i]);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep results serialize infallibly")
    }

    pub fn series(&self, detector: DetectorKind) -> Option<&Series> {
        self.series.iter().find(|s| s.detector == detector.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(detectors: Vec<DetectorKind>) -> ExperimentSpec {
        ExperimentSpec {
            policy: PartitionPolicy::new(vec![2, 2, 2, 2]).unwrap(),
            antennas: 4,
            rho: 0.7,
            snr_db: 10.0,
            detectors,
            stopping: StoppingRule {
                min_errors: 20,
                min_symbols: 0,
                max_trials: 2_000,
            },
            seed: 9,
            path: SamplingPath::Eigen,
            first_round: FirstRound::Codeword,
        }
    }

    #[test]
    fn grid_shape() {
        let s = spec(vec![
            DetectorKind::Ed,
            DetectorKind::Abque,
            DetectorKind::MlViterbi,
        ]);
        let axis = Axis::Snr((0..=8).map(|i| 5.0 * i as f64).collect());
        let r = sweep(&s, &axis).unwrap();
        assert_eq!(r.series.len(), 3);
        assert!(r.series.iter().all(|x| x.estimates.len() == 9));
        let csv = r.to_csv();
        assert!(csv.starts_with("# config_hash="));
        assert_eq!(csv.lines().count(), 2 + 27);
        assert_eq!(
            csv.lines().nth(1),
            Some("snr_db,detector,ser,std_error,symbols,errors,seed")
        );
    }

    #[test]
    fn policy_axis_attaches_se() {
        let s = spec(vec![DetectorKind::Ed]);
        let axis = Axis::Policy(vec![
            PartitionPolicy::new(vec![8, 8, 8, 8]).unwrap(),
            PartitionPolicy::new(vec![12, 9, 6, 3]).unwrap(),
        ]);
        let r = sweep(&s, &axis).unwrap();
        let se = r.spectral_efficiency.as_ref().unwrap();
        assert!((se[0] - 1.7645).abs() < 1e-3);
        assert!((se[1] - 1.611).abs() < 1e-3);
        assert!(r
            .to_csv()
            .lines()
            .nth(2)
            .unwrap()
            .starts_with("8-8-8-8,ed,"));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(sweep(&spec(vec![]), &Axis::Snr(vec![0.0])).is_err());
        assert!(sweep(&spec(vec![DetectorKind::Ed]), &Axis::Snr(vec![])).is_err());
        assert!(spec(vec![]).validate().is_err());
    }

    #[test]
    fn infeasible_detector_fails_before_trials() {
        let mut s = spec(vec![DetectorKind::MlBrute]);
        s.policy = PartitionPolicy::new(vec![8, 8, 8, 8]).unwrap();
        let err = sweep(&s, &Axis::Snr(vec![0.0])).unwrap_err();
        assert!(matches!(err, Error::SizeLimit { .. }), "{err}");
    }

    #[test]
    fn csv_is_reproducible_and_hash_tracks_spec() {
        let s = spec(vec![DetectorKind::Hsnr]);
        let axis = Axis::Correlation(vec![0.0, 0.5]);
        let a = sweep(&s, &axis).unwrap();
        assert_eq!(a.to_csv(), sweep(&s, &axis).unwrap().to_csv());
        let mut t = s.clone();
        t.seed += 1;
        assert_ne!(
            a.provenance.spec_hash,
            sweep(&t, &axis).unwrap().provenance.spec_hash
        );
        let back: SweepResult = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}
