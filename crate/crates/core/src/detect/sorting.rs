//! Sorting-based ML under isotropic fading, its reliability score, and the
//! high-SNR limit detector for correlated fading.

use crate::channel::{BandBases, ReceivedBlock, ZERO_EIGENVALUE_TOL};
use crate::codebook::{check_pairing, AmplitudeSet, Codeword, PartitionPolicy};
use crate::error::{Error, Result};

use super::{argsort, sort_assign, Decision};

/// Received energies `u_k` and the per-rank inverse variances `v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicMetrics {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl IsotropicMetrics {
    pub fn new(
        block: &ReceivedBlock,
        noise_power: f64,
        policy: &PartitionPolicy,
        amplitudes: &AmplitudeSet,
    ) -> Result<Self> {
        check_pairing(policy, amplitudes)?;
        let energies = amplitudes.energies();
        let v = policy
            .reference_levels()
            .into_iter()
            .map(|l| 1.0 / (energies[l] + noise_power))
            .collect();
        Ok(Self {
            u: block.energies(),
            v,
        })
    }
}

/// Pairs the `K_1` weakest subcarriers with level 1, the next `K_2` with
/// level 2, and so on. Optimal for isotropic fading; attaches the LLR.
pub fn isotropic_ml(
    block: &ReceivedBlock,
    noise_power: f64,
    policy: &PartitionPolicy,
    amplitudes: &AmplitudeSet,
) -> Result<Decision> {
    if policy.subcarriers() != block.subcarriers() {
        return Err(Error::Dimension(format!(
            "policy has K={} but the block has {} subcarriers",
            policy.subcarriers(),
            block.subcarriers()
        )));
    }
    let metrics = IsotropicMetrics::new(block, noise_power, policy, amplitudes)?;
    let (codeword, perm) = sort_assign(&metrics.u, policy);
    let llr = if noise_power > 0.0 {
        let sorted: Vec<f64> = perm.iter().map(|&k| metrics.u[k]).collect();
        Some(llr_isotropic(&sorted, &metrics.v, policy))
    } else {
        None
    };
    Ok(Decision {
        codeword,
        permutation: Some(perm),
        llr,
        metrics: Some(metrics.u),
        cost: None,
    })
}

/// Log-likelihood ratio between the best and second-best codewords:
/// `min over boundaries b of (u_(b+1) - u_(b)) (v_b - v_(b+1))`, with `u`
/// already sorted ascending. `+inf` when the codebook has a single codeword.
pub fn llr_isotropic(u_sorted: &[f64], v: &[f64], policy: &PartitionPolicy) -> f64 {
    let k = u_sorted.len();
    policy
        .boundaries()
        .into_iter()
        .filter(|&b| b > 0 && b < k)
        .map(|b| (u_sorted[b] - u_sorted[b - 1]) * (v[b - 1] - v[b]))
        .fold(f64::INFINITY, f64::min)
}

/// High-SNR limit detector with genie knowledge of the inactive subcarriers.
///
/// Subcarriers outside `active_set` are fixed to level 1; the active ones are
/// ranked by `r^H Gamma^{-1} r` (over the non-zero eigenvalues) and paired
/// with the non-zero reference amplitudes in ascending order.
pub fn detect_hsnr_limit(
    block: &ReceivedBlock,
    bases: &BandBases,
    policy: &PartitionPolicy,
    active_set: &[usize],
) -> Result<Decision> {
    let k_count = block.subcarriers();
    if policy.subcarriers() != k_count {
        return Err(Error::Dimension("policy and block sizes differ".into()));
    }
    bases.check(k_count)?;
    let inactive = policy.multiplicities()[0];
    if active_set.len() != k_count - inactive {
        return Err(Error::Misuse(format!(
            "active set has {} entries, expected K - K_1 = {}",
            active_set.len(),
            k_count - inactive
        )));
    }
    let mut seen = vec![false; k_count];
    for &k in active_set {
        if k >= k_count || std::mem::replace(&mut seen[k], true) {
            return Err(Error::Misuse(format!(
                "invalid or repeated active index {k}"
            )));
        }
    }

    let stats: Vec<f64> = active_set
        .iter()
        .map(|&k| {
            block
                .row(k)
                .iter()
                .zip(bases.band(k).eigenvalues())
                .filter(|(_, &g)| g >= ZERO_EIGENVALUE_TOL)
                .map(|(z, g)| z.norm_sqr() / g)
                .sum()
        })
        .collect();
    let order = argsort(&stats);
    let reference = policy.reference_levels();
    let mut levels = vec![0usize; k_count];
    for (rank, &i) in order.iter().enumerate() {
        levels[active_set[i]] = reference[inactive + rank];
    }
    Ok(Decision {
        codeword: Codeword::from_levels(levels),
        permutation: Some(order.iter().map(|&i| active_set[i]).collect()),
        metrics: Some(stats),
        ..Decision::default()
    })
}
