//! Required-SNR search by bisection in dB.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{run_ser, Detector, ExperimentSpec, StoppingRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub target_ser: f64,
    pub lo_db: f64,
    pub hi_db: f64,
    pub tol_db: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            target_ser: 1e-3,
            lo_db: -5.0,
            hi_db: 60.0,
            tol_db: 0.25,
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_ser > 0.0 && self.target_ser < 1.0) {
            return Err(Error::Domain(format!(
                "target SER must lie in (0, 1), got {}",
                self.target_ser
            )));
        }
        if !(self.tol_db > 0.0) {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {}",
                self.tol_db
            )));
        }
        if !(self.lo_db.is_finite() && self.hi_db.is_finite() && self.lo_db < self.hi_db) {
            return Err(Error::Bracket(format!(
                "bracket [{}, {}] dB is not an ordered finite interval",
                self.lo_db, self.hi_db
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequiredSnr {
    Reached(f64),
    /// SER at the top of the bracket is still above target.
    Unreachable,
}

impl RequiredSnr {
    pub fn db(self) -> Option<f64> {
        match self {
            RequiredSnr::Reached(x) => Some(x),
            RequiredSnr::Unreachable => None,
        }
    }
}

/// Smallest SNR (to within `tol_db`) whose probed SER is at most the target.
///
/// Returns `lo` when the target is already met there, and `Unreachable`
/// when it is not met at `hi`.
pub fn bisect_required_snr<F>(mut probe: F, opts: &SearchOptions) -> Result<RequiredSnr>
where
    F: FnMut(f64) -> Result<f64>,
{
    opts.validate()?;
    if probe(opts.hi_db)? > opts.target_ser {
        return Ok(RequiredSnr::Unreachable);
    }
    if probe(opts.lo_db)? <= opts.target_ser {
        return Ok(RequiredSnr::Reached(opts.lo_db));
    }
    let (mut lo, mut hi) = (opts.lo_db, opts.hi_db);
    while hi - lo > opts.tol_db {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? <= opts.target_ser {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RequiredSnr::Reached(hi))
}

/// Probes with at least `100 / target` symbols and 100 errors each, capped
/// by the spec's trial budget. Every probe reuses the master seed.
pub fn required_snr<D: Detector + ?Sized>(
    spec: &ExperimentSpec,
    detector: &D,
    opts: &SearchOptions,
) -> Result<RequiredSnr> {
    opts.validate()?;
    let rule = StoppingRule {
        min_errors: 100,
        min_symbols: (100.0 / opts.target_ser).ceil() as u64,
        max_trials: spec.stopping.max_trials,
    };
    let base = spec.point();
    bisect_required_snr(
        |snr_db| {
            let mut p = base.clone();
            p.snr_db = snr_db;
            Ok(run_ser(&p.link()?, detector, &rule, spec.seed)?.ser)
        },
        opts,
    )
}
