//! Run configuration: a TOML document with `[code]`, `[channel]`, `[sweep]`,
//! `[sim]`, `[output]` and `[search]` sections.

use std::path::{Path, PathBuf};

use pim_simo::codebook::PartitionPolicy;
use pim_simo::sim::{Axis, ExperimentSpec, SamplingPath, SearchOptions, StoppingRule};
use pim_simo::{DetectorKind, FirstRound};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub code: CodeSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub search: SearchSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    /// Number of amplitude levels `L`.
    pub levels: usize,
    /// Explicit multiplicities; exclusive with `subcarriers` + `uniform`.
    pub policy: Option<Vec<usize>>,
    pub subcarriers: Option<usize>,
    #[serde(default)]
    pub uniform: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub antennas: usize,
    pub rho: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            antennas: 64,
            rho: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    #[default]
    Snr,
    Antennas,
    Correlation,
    Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Number(f64),
    Policy(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: AxisName,
    pub values: Vec<AxisValue>,
    pub detectors: Vec<DetectorKind>,
    /// Operating SNR for axes other than `snr`.
    pub snr_db: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: AxisName::Snr,
            values: Vec::new(),
            detectors: vec![DetectorKind::Ed, DetectorKind::Hsnr, DetectorKind::Abque],
            snr_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub seed: Option<u64>,
    pub min_errors: u64,
    pub max_trials: u64,
    pub path: SamplingPath,
    pub first_round: FirstRound,
}

impl Default for SimSection {
    fn default() -> Self {
        let rule = StoppingRule::default();
        Self {
            seed: None,
            min_errors: rule.min_errors,
            max_trials: rule.max_trials,
            path: SamplingPath::Eigen,
            first_round: FirstRound::Codeword,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub target_ser: f64,
    pub lo_db: f64,
    pub hi_db: f64,
    pub tol_db: f64,
    /// Antenna counts to search over; defaults to `[channel] antennas`.
    pub antennas: Vec<usize>,
}

impl Default for SearchSection {
    fn default() -> Self {
        let o = SearchOptions::default();
        Self {
            target_ser: o.target_ser,
            lo_db: o.lo_db,
            hi_db: o.hi_db,
            tol_db: o.tol_db,
            antennas: Vec::new(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub env_seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub detectors: Option<Vec<DetectorKind>>,
}

/// 1-based line of `key` inside `[section]`, for error messages.
fn locate(raw: &str, section: &str, key: &str) -> Option<usize> {
    let header = format!("[{section}]");
    let mut inside = false;
    for (i, line) in raw.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            inside = t == header;
        } else if inside && t.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&raw).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok((cfg, raw))
    }

    /// Parses and validates; messages carry the offending line.
    pub fn parse(raw: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(raw).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate().map_err(|(section, key, msg)| {
            let at = locate(raw, section, key)
                .map(|l| format!("line {l}: "))
                .unwrap_or_default();
            CliError::Config(format!("{at}[{section}] {key}: {msg}"))
        })?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        self.policy().map_err(|m| ("code", "policy", m))?;
        if self.sweep.detectors.is_empty() {
            return Err(("sweep", "detectors", "list is empty".into()));
        }
        if self.channel.antennas == 0 {
            return Err(("channel", "antennas", "must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.channel.rho) {
            return Err((
                "channel",
                "rho",
                format!("{} is outside [0, 1]", self.channel.rho),
            ));
        }
        if self.sim.max_trials == 0 {
            return Err(("sim", "max_trials", "must be at least 1".into()));
        }
        if !self.sweep.snr_db.is_finite() {
            return Err(("sweep", "snr_db", "must be finite".into()));
        }
        self.axis().map_err(|m| ("sweep", "values", m))?;
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sim.seed = Some(seed);
        } else if self.sim.seed.is_none() {
            self.sim.seed = o.env_seed;
        }
        if let Some(out) = &o.out {
            self.output.directory = out.clone();
        }
        if let Some(d) = &o.detectors {
            self.sweep.detectors = d.clone();
        }
    }

    pub fn seed(&self) -> u64 {
        self.sim.seed.unwrap_or(0)
    }

    pub fn policy(&self) -> Result<PartitionPolicy, String> {
        let c = &self.code;
        let p = match (&c.policy, c.subcarriers, c.uniform) {
            (Some(m), None, false) => PartitionPolicy::new(m.clone()),
            (None, Some(k), true) => PartitionPolicy::uniform(k, c.levels),
            (None, Some(_), false) => {
                return Err("set uniform = true or give an explicit policy".into())
            }
            (None, None, _) => {
                return Err("give either policy or subcarriers with uniform = true".into())
            }
            (Some(_), _, _) => return Err("policy excludes subcarriers/uniform".into()),
        }
        .map_err(|e| e.to_string())?;
        if p.num_levels() != c.levels {
            return Err(format!(
                "policy has {} levels but levels = {}",
                p.num_levels(),
                c.levels
            ));
        }
        Ok(p)
    }

    pub fn axis(&self) -> Result<Axis, String> {
        let v = &self.sweep.values;
        if v.is_empty() {
            return Err("no values".into());
        }
        let numbers = || {
            v.iter()
                .map(|x| match x {
                    AxisValue::Number(n) if n.is_finite() => Ok(*n),
                    _ => Err(format!(
                        "{} axis takes finite numbers",
                        self.sweep.axis_name()
                    )),
                })
                .collect::<Result<Vec<f64>, String>>()
        };
        Ok(match self.sweep.axis {
            AxisName::Snr => Axis::Snr(numbers()?),
            AxisName::Correlation => {
                let r = numbers()?;
                if let Some(bad) = r.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(format!("correlation {bad} is outside [0, 1]"));
                }
                Axis::Correlation(r)
            }
            AxisName::Antennas => Axis::Antennas(
                numbers()?
                    .into_iter()
                    .map(|x| {
                        if x >= 1.0 && x.fract() == 0.0 {
                            Ok(x as usize)
                        } else {
                            Err(format!("antenna count {x} is not a positive integer"))
                        }
                    })
                    .collect::<Result<_, _>>()?,
            ),
            AxisName::Policy => Axis::Policy(
                v.iter()
                    .map(|x| match x {
                        AxisValue::Policy(m) => {
                            PartitionPolicy::new(m.clone()).map_err(|e| e.to_string())
                        }
                        AxisValue::Number(_) => {
                            Err("policy axis takes lists of multiplicities".into())
                        }
                    })
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    pub fn experiment(&self) -> Result<ExperimentSpec, CliError> {
        Ok(ExperimentSpec {
            policy: self.policy().map_err(CliError::Config)?,
            antennas: self.channel.antennas,
            rho: self.channel.rho,
            snr_db: self.sweep.snr_db,
            detectors: self.sweep.detectors.clone(),
            stopping: StoppingRule {
                min_errors: self.sim.min_errors,
                min_symbols: 0,
                max_trials: self.sim.max_trials,
            },
            seed: self.seed(),
            path: self.sim.path,
            first_round: self.sim.first_round,
        })
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            target_ser: self.search.target_ser,
            lo_db: self.search.lo_db,
            hi_db: self.search.hi_db,
            tol_db: self.search.tol_db,
        }
    }
}

impl SweepSection {
    fn axis_name(&self) -> &'static str {
        match self.axis {
            AxisName::Snr => "snr",
            AxisName::Antennas => "antennas",
            AxisName::Correlation => "correlation",
            AxisName::Policy => "policy",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECIPE: &str = r#"
[code]
levels = 4
subcarriers = 32
uniform = true

[channel]
antennas = 64
rho = 0.7

[sweep]
axis = "snr"
values = [0, 10, 20.5]
detectors = ["ed", "abque", "ml-viterbi"]

[sim]
seed = 5
"#;

    #[test]
    fn parses_recipe() {
        let cfg = RunConfig::parse(RECIPE).unwrap();
        assert_eq!(cfg.policy().unwrap().multiplicities(), &[8, 8, 8, 8]);
        assert_eq!(cfg.axis().unwrap(), Axis::Snr(vec![0.0, 10.0, 20.5]));
        assert_eq!(cfg.seed(), 5);
        assert_eq!(cfg.sim.min_errors, 200);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let raw = RECIPE.replace("rho = 0.7", "rho = 0.7\nspeed = 3");
        let err = RunConfig::parse(&raw).unwrap_err().to_string();
        assert!(err.contains("speed") && err.contains("line 10"), "{err}");
    }

    #[test]
    fn empty_detector_list_is_rejected() {
        let raw = RECIPE.replace(r#"["ed", "abque", "ml-viterbi"]"#, "[]");
        let err = RunConfig::parse(&raw).unwrap_err().to_string();
        assert!(
            err.contains("line 14") && err.contains("detectors"),
            "{err}"
        );
    }

    #[test]
    fn bad_detector_name_is_rejected() {
        let raw = RECIPE.replace("\"ed\"", "\"edd\"");
        assert!(RunConfig::parse(&raw).is_err());
    }

    #[test]
    fn policy_axis_takes_lists() {
        let raw = RECIPE
            .replace("axis = \"snr\"", "axis = \"policy\"")
            .replace("[0, 10, 20.5]", "[[8, 8, 8, 8], [12, 9, 6, 3]]");
        let cfg = RunConfig::parse(&raw).unwrap();
        assert!(matches!(cfg.axis().unwrap(), Axis::Policy(v) if v.len() == 2));
        let bad = RECIPE.replace("axis = \"snr\"", "axis = \"policy\"");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn flags_win_and_env_is_a_fallback() {
        let mut cfg = RunConfig::parse(RECIPE).unwrap();
        cfg.apply(&Overrides {
            env_seed: Some(9),
            ..Default::default()
        });
        assert_eq!(cfg.seed(), 5);
        cfg.apply(&Overrides {
            seed: Some(7),
            env_seed: Some(9),
            ..Default::default()
        });
        assert_eq!(cfg.seed(), 7);
        cfg.sim.seed = None;
        cfg.apply(&Overrides {
            env_seed: Some(9),
            ..Default::default()
        });
        assert_eq!(cfg.seed(), 9);
    }

    #[test]
    fn conflicting_code_section() {
        let raw = RECIPE.replace("uniform = true", "uniform = true\npolicy = [8, 8, 8, 8]");
        assert!(RunConfig::parse(&raw).is_err());
        let raw = RECIPE.replace("levels = 4", "levels = 3");
        assert!(RunConfig::parse(&raw).is_err());
    }
}
