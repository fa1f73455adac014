//! Subcommand implementations. Each is a thin adapter over the core crate.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pim_simo::codebook::{
    cardinality, code_rate, entropy_limit, se_upper_bound, spectral_efficiency, PartitionPolicy,
};
use pim_simo::sim::{content_hash, required_snr, sweep, RequiredSnr, SweepResult};
use pim_simo::validate::{run_validation, CheckOutcome, Fault, ValidateOptions};
use serde::Serialize;

use crate::config::{Format, Overrides, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct RateArgs {
    pub subcarriers: Option<usize>,
    pub levels: Option<usize>,
    pub uniform: bool,
    pub policy: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub policy: Vec<usize>,
    pub subcarriers: usize,
    pub levels: usize,
    /// Exact decimal.
    pub cardinality: String,
    pub spectral_efficiency: f64,
    /// Absent for a single-level constellation.
    pub code_rate: Option<f64>,
    pub entropy_limit: f64,
    /// Absent when some level has no subcarriers.
    pub se_upper_bound: Option<f64>,
    pub trellis_states: u128,
}

impl RateReport {
    pub fn to_text(&self) -> String {
        let opt =
            |x: Option<f64>, unit: &str| x.map_or("n/a".to_string(), |v| format!("{v:.6}{unit}"));
        let mut s = String::new();
        let label = self
            .policy
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join("-");
        let _ = writeln!(s, "policy              {label}");
        let _ = writeln!(s, "subcarriers         {}", self.subcarriers);
        let _ = writeln!(s, "levels              {}", self.levels);
        let _ = writeln!(s, "cardinality         {}", self.cardinality);
        let _ = writeln!(
            s,
            "spectral_efficiency {:.6} bpcu",
            self.spectral_efficiency
        );
        let _ = writeln!(s, "code_rate           {}", opt(self.code_rate, ""));
        let _ = writeln!(s, "entropy_limit       {:.6} bpcu", self.entropy_limit);
        let _ = writeln!(
            s,
            "se_upper_bound      {}",
            opt(self.se_upper_bound, " bpcu")
        );
        let _ = writeln!(s, "trellis_states      {}", self.trellis_states);
        s
    }
}

pub fn cmd_rate(args: &RateArgs) -> Result<RateReport, CliError> {
    let policy = match (&args.policy, args.subcarriers, args.uniform) {
        (Some(m), None, false) => PartitionPolicy::new(m.clone())?,
        (None, Some(k), true) => {
            let l = args
                .levels
                .ok_or_else(|| CliError::Config("--uniform needs --L".into()))?;
            PartitionPolicy::uniform(k, l)?
        }
        _ => {
            return Err(CliError::Config(
                "give either --policy K1,K2,... or --K <K> --L <L> --uniform".into(),
            ))
        }
    };
    let levels = policy.num_levels();
    if let Some(l) = args.levels {
        if l != levels {
            return Err(CliError::Config(format!(
                "--L {l} does not match a {levels}-level policy"
            )));
        }
    }
    Ok(RateReport {
        policy: policy.multiplicities().to_vec(),
        subcarriers: policy.subcarriers(),
        levels,
        cardinality: cardinality(&policy).to_string(),
        spectral_efficiency: spectral_efficiency(&policy),
        code_rate: (levels > 1)
            .then(|| code_rate(&policy, levels))
            .transpose()?,
        entropy_limit: entropy_limit(&policy),
        se_upper_bound: se_upper_bound(&policy).ok(),
        trellis_states: policy.trellis_states(),
    })
}

/// Files written by a sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub result: SweepResult,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: &'a str,
    seed: u64,
    config: &'a RunConfig,
    result: &'a SweepResult,
}

fn load(config: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let (mut cfg, _) = RunConfig::load(config)?;
    cfg.apply(overrides);
    Ok(cfg)
}

pub fn cmd_sweep(config: &Path, overrides: &Overrides) -> Result<SweepOutput, CliError> {
    let cfg = load(config, overrides)?;
    let spec = cfg.experiment()?;
    let axis = cfg.axis().map_err(CliError::Config)?;
    let result = sweep(&spec, &axis)?;

    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let mut out = SweepOutput {
        csv: None,
        json: None,
        result,
    };
    if cfg.output.formats.contains(&Format::Csv) {
        let path = dir.join(format!("{}.csv", axis.name()));
        fs::write(&path, out.result.to_csv())?;
        out.csv = Some(path);
    }
    if cfg.output.formats.contains(&Format::Json) {
        let path = dir.join("summary.json");
        let summary = Summary {
            config_hash: &out.result.provenance.spec_hash,
            seed: out.result.provenance.seed,
            config: &cfg,
            result: &out.result,
        };
        let text =
            serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        out.json = Some(path);
    }
    Ok(out)
}

/// One row per (antenna count, detector).
pub fn cmd_required_snr(config: &Path, overrides: &Overrides) -> Result<PathBuf, CliError> {
    let cfg = load(config, overrides)?;
    let spec = cfg.experiment()?;
    let opts = cfg.search_options();
    opts.validate()?;
    let grid = if cfg.search.antennas.is_empty() {
        vec![cfg.channel.antennas]
    } else {
        cfg.search.antennas.clone()
    };
    if grid.contains(&0) {
        return Err(CliError::Config(
            "[search] antennas: counts must be positive".into(),
        ));
    }
    // reject infeasible detectors before any search runs
    for &n in &grid {
        let mut p = spec.point();
        p.antennas = n;
        let link = p.link()?;
        for d in &spec.detectors {
            link.receiver().check_feasible(*d)?;
        }
    }

    let hash = content_hash(&(&spec, &opts, &grid));
    let mut csv = format!("# config_hash={hash} seed={}\n", spec.seed);
    csv.push_str("antennas,detector,required_snr_db,target_ser,seed\n");
    for &n in &grid {
        let mut s = spec.clone();
        s.antennas = n;
        for d in &spec.detectors {
            let value = match required_snr(&s, d, &opts)? {
                RequiredSnr::Reached(db) => format!("{db:.4}"),
                RequiredSnr::Unreachable => "unreachable".to_string(),
            };
            let _ = writeln!(csv, "{n},{d},{value},{:.6e},{}", opts.target_ser, spec.seed);
        }
    }
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let path = dir.join("required_snr.csv");
    fs::write(&path, csv)?;
    Ok(path)
}

/// Runs the consistency suite; `Err(Validation)` when any check fails.
pub fn cmd_validate(seed: u64, fault: Option<Fault>) -> Result<Vec<CheckOutcome>, CliError> {
    let outcomes = run_validation(&ValidateOptions { seed, fault });
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(outcomes)
    } else {
        Err(CliError::Validation(format!(
            "{}\nfailing checks: {}",
            format_outcomes(&outcomes),
            failed.join(", ")
        )))
    }
}

pub fn format_outcomes(outcomes: &[CheckOutcome]) -> String {
    outcomes
        .iter()
        .map(|c| {
            format!(
                "{} {:<24} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}
