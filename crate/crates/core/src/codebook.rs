//! PIM alphabets: amplitude sets, partition policies, codewords and the
//! combinatorial / information-theoretic properties of the resulting code.
//!
//! A codebook is the set of distinct permutations of a reference vector in
//! which amplitude level `l` is repeated `K_l` times. Codewords are stored as
//! 0-based level indices; amplitudes are looked up on demand.

use std::f64::consts::{E, LN_2, PI};

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Default cap on explicit codebook enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Cap on the number of compositions scanned by [`best_policy`].
pub const COMPOSITION_CAP: u128 = 10_000_000;

/// Unipolar amplitude levels `sqrt(eps_1) = 0 < sqrt(eps_2) < ... < sqrt(eps_L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSet {
    levels: Vec<f64>,
    energies: Vec<f64>,
}

impl AmplitudeSet {
    /// Equally spaced levels `(l - 1) * d`, with `d` chosen so the mean energy
    /// over the `L` levels equals one.
    pub fn uniform(num_levels: usize) -> Result<Self> {
        if num_levels < 2 {
            return Err(Error::InvalidConstellation(format!(
                "need at least 2 levels, got {num_levels}"
            )));
        }
        let sum_sq: f64 = (0..num_levels).map(|i| (i * i) as f64).sum();
        let step = (num_levels as f64 / sum_sq).sqrt();
        let levels = (0..num_levels).map(|i| i as f64 * step).collect();
        Self::from_levels(levels)
    }

    /// Arbitrary ascending amplitude grid. The first level must be zero.
    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidConstellation(format!(
                "need at least 2 levels, got {}",
                levels.len()
            )));
        }
        if levels[0] != 0.0 {
            return Err(Error::InvalidConstellation(
                "the lowest level must be 0 (inactive subcarrier)".into(),
            ));
        }
        if levels.iter().any(|a| !a.is_finite()) || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConstellation(
                "levels must be finite and strictly ascending".into(),
            ));
        }
        let energies = levels.iter().map(|a| a * a).collect();
        Ok(Self { levels, energies })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Amplitudes `sqrt(eps_l)`, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Energies `eps_l`, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Mean energy when every level is used equally often.
    pub fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.energies.len() as f64
    }

    /// Multiplies every energy by `factor` (amplitudes by its square root).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidConstellation(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let s = factor.sqrt();
        Self::from_levels(self.levels.iter().map(|a| a * s).collect())
    }
}

/// Multiplicities `{K_l}` of each amplitude level in the reference vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PartitionPolicy {
    multiplicities: Vec<usize>,
}

impl TryFrom<Vec<usize>> for PartitionPolicy {
    type Error = Error;

    fn try_from(value: Vec<usize>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PartitionPolicy> for Vec<usize> {
    fn from(p: PartitionPolicy) -> Self {
        p.multiplicities
    }
}

impl PartitionPolicy {
    pub fn new(multiplicities: Vec<usize>) -> Result<Self> {
        if multiplicities.is_empty() {
            return Err(Error::InvalidPolicy("empty multiplicity list".into()));
        }
        if multiplicities.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidPolicy(
                "at least one subcarrier is required".into(),
            ));
        }
        Ok(Self { multiplicities })
    }

    /// `K_l = K / L` for every level; `L` must divide `K`.
    pub fn uniform(subcarriers: usize, num_levels: usize) -> Result<Self> {
        if num_levels == 0 || subcarriers == 0 {
            return Err(Error::InvalidPolicy("K and L must be positive".into()));
        }
        if !subcarriers.is_multiple_of(num_levels) {
            return Err(Error::InvalidPolicy(format!(
                "uniform policy needs L | K, got K={subcarriers}, L={num_levels}"
            )));
        }
        Self::new(vec![subcarriers / num_levels; num_levels])
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// Number of subcarriers `K`.
    pub fn subcarriers(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn num_levels(&self) -> usize {
        self.multiplicities.len()
    }

    /// `p_l = K_l / K`.
    pub fn fractions(&self) -> Vec<f64> {
        let k = self.subcarriers() as f64;
        self.multiplicities.iter().map(|&m| m as f64 / k).collect()
    }

    /// Cumulative counts `sum_{i<=j} K_i` for `j = 1..L-1`, i.e. the ranks at
    /// which the reference vector switches to a higher level.
    pub fn boundaries(&self) -> Vec<usize> {
        self.multiplicities[..self.num_levels() - 1]
            .iter()
            .scan(0, |acc, &m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }

    /// Trellis size `prod_l (K_l + 1)`, saturating.
    pub fn trellis_states(&self) -> u128 {
        self.multiplicities
            .iter()
            .fold(1u128, |acc, &m| acc.saturating_mul(m as u128 + 1))
    }

    /// Level index of every rank of the reference vector (ascending).
    pub fn reference_levels(&self) -> Vec<usize> {
        self.multiplicities
            .iter()
            .enumerate()
            .flat_map(|(l, &m)| std::iter::repeat_n(l, m))
            .collect()
    }

    pub fn reference_vector(&self, amplitudes: &AmplitudeSet) -> Result<ReferenceVector> {
        check_pairing(self, amplitudes)?;
        let level_of = self.reference_levels();
        let entries = level_of.iter().map(|&l| amplitudes.levels()[l]).collect();
        Ok(ReferenceVector { entries, level_of })
    }

    /// Average per-subcarrier energy of a uniformly drawn codeword.
    pub fn mean_energy(&self, amplitudes: &AmplitudeSet) -> Result<f64> {
        check_pairing(self, amplitudes)?;
        let total: f64 = self
            .multiplicities
            .iter()
            .zip(amplitudes.energies())
            .map(|(&m, e)| m as f64 * e)
            .sum();
        Ok(total / self.subcarriers() as f64)
    }

    /// Compact textual form, e.g. `12-9-6-3`.
    pub fn label(&self) -> String {
        self.multiplicities
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

pub(crate) fn check_pairing(policy: &PartitionPolicy, amplitudes: &AmplitudeSet) -> Result<()> {
    if policy.num_levels() != amplitudes.num_levels() {
        return Err(Error::Dimension(format!(
            "policy has {} levels but the amplitude set has {}",
            policy.num_levels(),
            amplitudes.num_levels()
        )));
    }
    Ok(())
}

/// The sorted template whose permutations form the codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceVector {
    pub entries: Vec<f64>,
    pub level_of: Vec<usize>,
}

/// A codeword as a vector of 0-based level indices, one per subcarrier.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    levels: Vec<usize>,
}

impl Codeword {
    pub fn from_levels(levels: Vec<usize>) -> Self {
        Self { levels }
    }

    /// Builds a codeword after checking it belongs to the policy's codebook.
    pub fn new(levels: Vec<usize>, policy: &PartitionPolicy) -> Result<Self> {
        let cw = Self { levels };
        if !cw.is_member(policy) {
            return Err(Error::InvalidPolicy(
                "level histogram does not match the policy multiplicities".into(),
            ));
        }
        Ok(cw)
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn amplitudes(&self, amplitudes: &AmplitudeSet) -> Vec<f64> {
        self.levels
            .iter()
            .map(|&l| amplitudes.levels()[l])
            .collect()
    }

    pub fn histogram(&self, num_levels: usize) -> Vec<usize> {
        let mut h = vec![0; num_levels];
        for &l in &self.levels {
            if l < num_levels {
                h[l] += 1;
            }
        }
        h
    }

    pub fn is_member(&self, policy: &PartitionPolicy) -> bool {
        self.levels.iter().all(|&l| l < policy.num_levels())
            && self.histogram(policy.num_levels()) == policy.multiplicities()
    }

    /// Number of positions at which the two codewords disagree.
    pub fn symbol_errors(&self, other: &Codeword) -> usize {
        self.levels
            .iter()
            .zip(&other.levels)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// `|X| = K! / prod_l K_l!`, exact.
pub fn cardinality(policy: &PartitionPolicy) -> BigUint {
    // product of binomials C(K_1 + ... + K_l, K_l) keeps intermediates small
    let mut total = BigUint::from(1u32);
    let mut n = 0usize;
    for &m in policy.multiplicities() {
        for i in 1..=m {
            n += 1;
            total *= n;
            total /= i;
        }
    }
    total
}

/// Cardinality as `u128`, saturating.
pub fn cardinality_u128(policy: &PartitionPolicy) -> u128 {
    let c = cardinality(policy);
    let digits = c.to_u64_digits();
    match digits.len() {
        0 => 0,
        1 => digits[0] as u128,
        2 => (digits[1] as u128) << 64 | digits[0] as u128,
        _ => u128::MAX,
    }
}

/// `log2(n!)` through the log-gamma function.
pub fn log2_factorial(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) / LN_2
}

/// `R_K = (log2 K! - sum_l log2 K_l!) / K` in bits per channel use.
pub fn spectral_efficiency(policy: &PartitionPolicy) -> f64 {
    let k = policy.subcarriers();
    let penalty = sorted_log2_factorial_sum(policy.multiplicities());
    (log2_factorial(k) - penalty) / k as f64
}

// Summation order fixed by sorting so permuted policies give identical sums.
fn sorted_log2_factorial_sum(multiplicities: &[usize]) -> f64 {
    let mut m = multiplicities.to_vec();
    m.sort_unstable();
    m.iter().map(|&x| log2_factorial(x)).sum()
}

/// Spectral efficiency divided by the uncoded rate `log2 L`.
pub fn code_rate(policy: &PartitionPolicy, num_levels: usize) -> Result<f64> {
    if num_levels < 2 {
        return Err(Error::InvalidConstellation(format!(
            "code rate needs L >= 2, got {num_levels}"
        )));
    }
    Ok(spectral_efficiency(policy) / (num_levels as f64).log2())
}

/// Shannon entropy of the level fractions, in bits (`0 log 0 = 0`).
pub fn entropy_limit(policy: &PartitionPolicy) -> f64 {
    policy
        .fractions()
        .into_iter()
        .filter(|&p| p > 0.0 && p < 1.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Robbins' bracket of `log2(alpha!)`: returns `(g_low, g_up)` in bits.
pub fn stirling_bounds(alpha: u64) -> Result<(f64, f64)> {
    if alpha < 1 {
        return Err(Error::Domain("stirling bounds need alpha >= 1".into()));
    }
    let a = alpha as f64;
    let log2e = E.log2();
    let base = 0.5 * (2.0 * PI * a).log2() + a * a.log2() - a * log2e;
    Ok((base + log2e / (12.0 * a + 1.0), base + log2e / (12.0 * a)))
}

/// `(g_up(K) - sum_l g_low(K_l)) / K`, an upper bound on the spectral efficiency.
pub fn se_upper_bound(policy: &PartitionPolicy) -> Result<f64> {
    if policy.multiplicities().contains(&0) {
        return Err(Error::Domain("SE upper bound needs every K_l >= 1".into()));
    }
    let k = policy.subcarriers();
    let (_, up) = stirling_bounds(k as u64)?;
    let mut low_sum = 0.0;
    for &m in policy.multiplicities() {
        low_sum += stirling_bounds(m as u64)?.0;
    }
    Ok((up - low_sum) / k as f64)
}

fn binomial_u128(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// SE-maximizing composition of `K` into `L` non-negative parts, by
/// exhaustive enumeration. Ties go to the lexicographically smallest vector.
pub fn best_policy(subcarriers: usize, num_levels: usize) -> Result<PartitionPolicy> {
    if num_levels < 2 || subcarriers < num_levels {
        return Err(Error::Domain(format!(
            "best_policy needs K >= L >= 2, got K={subcarriers}, L={num_levels}"
        )));
    }
    let count = binomial_u128(
        (subcarriers + num_levels - 1) as u128,
        (num_levels - 1) as u128,
    );
    if count > COMPOSITION_CAP {
        return Err(Error::SizeLimit {
            what: "composition enumeration",
            size: count,
            cap: COMPOSITION_CAP,
            hint: "",
        });
    }
    let table: Vec<f64> = (0..=subcarriers).map(log2_factorial).collect();
    let cost = |parts: &[usize]| {
        let mut sorted = parts.to_vec();
        sorted.sort_unstable();
        sorted.iter().map(|&m| table[m]).sum::<f64>()
    };

    // lexicographic walk starting at (0, ..., 0, K)
    let mut parts = vec![0; num_levels];
    parts[num_levels - 1] = subcarriers;
    let mut best = parts.clone();
    let mut best_cost = cost(&parts);
    while next_composition(&mut parts) {
        let c = cost(&parts);
        if c < best_cost - 1e-12 * best_cost.abs().max(1.0) {
            best_cost = c;
            best.clone_from(&parts);
        }
    }
    PartitionPolicy::new(best)
}

// Advances to the next composition in lexicographic order.
fn next_composition(parts: &mut [usize]) -> bool {
    let n = parts.len();
    // rightmost position before the last that can grow by taking from the tail
    let Some(i) = (0..n - 1)
        .rev()
        .find(|&i| parts[i + 1..].iter().any(|&p| p > 0))
    else {
        return false;
    };
    let tail: usize = parts[i + 1..].iter().sum();
    parts[i] += 1;
    for p in parts[i + 1..].iter_mut() {
        *p = 0;
    }
    parts[n - 1] = tail - 1;
    true
}

/// Rearranges `levels` into the next lexicographic permutation. Returns
/// `false` (leaving the slice sorted ascending) once the last one is passed.
pub(crate) fn next_permutation(levels: &mut [usize]) -> bool {
    let n = levels.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && levels[i - 1] >= levels[i] {
        i -= 1;
    }
    if i == 0 {
        levels.reverse();
        return false;
    }
    let mut j = n - 1;
    while levels[j] <= levels[i - 1] {
        j -= 1;
    }
    levels.swap(i - 1, j);
    levels[i..].reverse();
    true
}

/// Lexicographic iterator over every distinct permutation of the reference vector.
#[derive(Debug, Clone)]
pub struct Codewords {
    next: Option<Vec<usize>>,
}

impl Iterator for Codewords {
    type Item = Codeword;

    fn next(&mut self) -> Option<Codeword> {
        let current = self.next.take()?;
        let mut following = current.clone();
        if next_permutation(&mut following) {
            self.next = Some(following);
        }
        Some(Codeword::from_levels(current))
    }
}

/// All codewords in lexicographic order of level indices, refusing codebooks
/// larger than `cap`.
pub fn enumerate_codebook(policy: &PartitionPolicy, cap: u128) -> Result<Codewords> {
    let size = cardinality_u128(policy);
    if size > cap {
        return Err(Error::SizeLimit {
            what: "codebook",
            size,
            cap,
            hint: "",
        });
    }
    Ok(Codewords {
        next: Some(policy.reference_levels()),
    })
}

/// Uniform draw from the codebook by shuffling the reference vector.
pub fn random_codeword<R: Rng + ?Sized>(policy: &PartitionPolicy, rng: &mut R) -> Codeword {
    let mut levels = policy.reference_levels();
    levels.shuffle(rng);
    Codeword::from_levels(levels)
}
