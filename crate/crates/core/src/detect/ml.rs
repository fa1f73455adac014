//! Maximum-likelihood detection: per-subcarrier metric tables, exhaustive
//! search over the codebook and the trellis (Viterbi) equivalent.

use crate::channel::{BandBases, ReceivedBlock};
use crate::codebook::{
    cardinality_u128, next_permutation, AmplitudeSet, Codeword, PartitionPolicy,
};
use crate::error::{Error, Result};

use super::Decision;

/// Default cap on the codebook size accepted by [`brute_force_ml`].
pub const BRUTE_FORCE_CAP: u128 = 1_000_000;

/// Default cap on the trellis size accepted by [`viterbi_ml`].
pub const TRELLIS_STATE_CAP: u128 = 10_000_000;

/// `c[k][l]`: negative log-likelihood (up to a constant) of level `l` on subcarrier `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    subcarriers: usize,
    levels: usize,
    costs: Vec<f64>,
}

impl MetricTable {
    /// Row-major `K x L` table.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let levels = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || levels == 0 || rows.iter().any(|r| r.len() != levels) {
            return Err(Error::Dimension(
                "metric table rows must be non-empty and equal length".into(),
            ));
        }
        Ok(Self {
            subcarriers: rows.len(),
            levels,
            costs: rows.concat(),
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.costs[k * self.levels + l]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.costs[k * self.levels..(k + 1) * self.levels]
    }

    /// Total cost of assigning `levels[k]` to every subcarrier `k`.
    pub fn path_cost(&self, levels: &[usize]) -> f64 {
        levels
            .iter()
            .enumerate()
            .map(|(k, &l)| self.get(k, l))
            .sum()
    }

    fn check_policy(&self, policy: &PartitionPolicy) -> Result<()> {
        if policy.subcarriers() != self.subcarriers || policy.num_levels() != self.levels {
            return Err(Error::Dimension(format!(
                "table is {}x{} but policy has K={} L={}",
                self.subcarriers,
                self.levels,
                policy.subcarriers(),
                policy.num_levels()
            )));
        }
        Ok(())
    }
}

/// `c[k][l] = sum_n |r_{k,n}|^2 / (eps_l gamma_n + sigma^2) + ln(eps_l gamma_n + sigma^2)`.
pub fn ml_metric_table(
    block: &ReceivedBlock,
    bases: &BandBases,
    noise_power: f64,
    amplitudes: &AmplitudeSet,
) -> Result<MetricTable> {
    if !(noise_power > 0.0) {
        return Err(Error::Domain(format!(
            "ML metrics need a positive noise power, got {noise_power}"
        )));
    }
    let k_count = block.subcarriers();
    bases.check(k_count)?;
    if bases.antennas() != block.antennas() {
        return Err(Error::Dimension(
            "basis and block antenna counts differ".into(),
        ));
    }
    let energies = amplitudes.energies();
    let levels = energies.len();

    // per distinct basis: inverse variances and log-determinants per level
    let per_slot: Vec<(Vec<f64>, Vec<f64>)> = bases
        .distinct()
        .iter()
        .map(|basis| {
            let g = basis.eigenvalues();
            let mut inv = Vec::with_capacity(levels * g.len());
            let mut logdet = Vec::with_capacity(levels);
            for &eps in energies {
                let mut ld = 0.0;
                for &gn in g {
                    let d = eps * gn + noise_power;
                    inv.push(1.0 / d);
                    ld += d.ln();
                }
                logdet.push(ld);
            }
            (inv, logdet)
        })
        .collect();

    let n = block.antennas();
    let mut costs = Vec::with_capacity(k_count * levels);
    let mut power = vec![0.0; n];
    for k in 0..k_count {
        for (p, z) in power.iter_mut().zip(block.row(k)) {
            *p = z.norm_sqr();
        }
        let (inv, logdet) = &per_slot[bases.slot(k)];
        for l in 0..levels {
            let w = &inv[l * n..(l + 1) * n];
            let quad: f64 = power.iter().zip(w).map(|(p, w)| p * w).sum();
            costs.push(quad + logdet[l]);
        }
    }
    Ok(MetricTable {
        subcarriers: k_count,
        levels,
        costs,
    })
}

/// Exhaustive ML over the codebook; the first (lexicographically smallest)
/// minimizer wins ties.
pub fn brute_force_ml(
    table: &MetricTable,
    policy: &PartitionPolicy,
    cap: u128,
) -> Result<Decision> {
    table.check_policy(policy)?;
    let size = cardinality_u128(policy);
    if size > cap {
        return Err(Error::SizeLimit {
            what: "codebook",
            size,
            cap,
            hint: "; use ml-viterbi or a sorting detector",
        });
    }
    let mut levels = policy.reference_levels();
    let mut best = levels.clone();
    let mut best_cost = table.path_cost(&levels);
    while next_permutation(&mut levels) {
        let c = table.path_cost(&levels);
        if c < best_cost {
            best_cost = c;
            best.clone_from(&levels);
        }
    }
    Ok(Decision {
        codeword: Codeword::from_levels(best),
        cost: Some(best_cost),
        ..Decision::default()
    })
}

/// ML by dynamic programming over level-usage states `(n_1, ..., n_L)`.
///
/// The cost-to-go of every state is computed backwards from the terminal
/// state `(K_1, ..., K_L)`; the decision is then traced forwards taking the
/// smallest level that stays on an optimal path, which reproduces the
/// lexicographic tie-break of [`brute_force_ml`].
pub fn viterbi_ml(
    table: &MetricTable,
    policy: &PartitionPolicy,
    state_cap: u128,
) -> Result<Decision> {
    table.check_policy(policy)?;
    let states = policy.trellis_states();
    if states > state_cap {
        return Err(Error::SizeLimit {
            what: "trellis",
            size: states,
            cap: state_cap,
            hint: "; use ml-brute for tiny codebooks or a sorting detector (abque, hsnr, ed)",
        });
    }
    let states = states as usize;
    let caps = policy.multiplicities();
    let levels = caps.len();
    let k_count = policy.subcarriers();
    let mut strides = Vec::with_capacity(levels);
    let mut s = 1usize;
    for &m in caps {
        strides.push(s);
        s *= m + 1;
    }

    let mut cost_to_go = vec![f64::INFINITY; states];
    cost_to_go[states - 1] = 0.0;
    // mixed-radix odometer over count vectors, walked downwards from the
    // terminal state so every successor is final before it is read
    let mut counts = caps.to_vec();
    let mut stage = k_count;
    for idx in (0..states - 1).rev() {
        for (c, &m) in counts.iter_mut().zip(caps) {
            if *c > 0 {
                *c -= 1;
                stage -= 1;
                break;
            }
            *c = m;
            stage += m;
        }
        if stage >= k_count {
            continue;
        }
        let row = table.row(stage);
        let mut best = f64::INFINITY;
        for l in 0..levels {
            if counts[l] < caps[l] {
                let v = row[l] + cost_to_go[idx + strides[l]];
                if v < best {
                    best = v;
                }
            }
        }
        cost_to_go[idx] = best;
    }

    let mut decided = Vec::with_capacity(k_count);
    counts.iter_mut().for_each(|c| *c = 0);
    let mut idx = 0usize;
    for stage in 0..k_count {
        let row = table.row(stage);
        let target = cost_to_go[idx];
        let l = (0..levels)
            .find(|&l| counts[l] < caps[l] && row[l] + cost_to_go[idx + strides[l]] == target)
            .ok_or_else(|| Error::Domain("non-finite metric in trellis".into()))?;
        counts[l] += 1;
        idx += strides[l];
        decided.push(l);
    }
    Ok(Decision {
        codeword: Codeword::from_levels(decided),
        cost: Some(cost_to_go[0]),
        ..Decision::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::EigenBasis;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn policy(m: &[usize]) -> PartitionPolicy {
        PartitionPolicy::new(m.to_vec()).unwrap()
    }

    fn table(rows: &[&[f64]]) -> MetricTable {
        MetricTable::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn metric_table_arithmetic() {
        let amps = AmplitudeSet::from_levels(vec![0.0, 1.0]).unwrap();
        let bases = BandBases::Shared(EigenBasis::identity(1));
        let zero = ReceivedBlock::new(1, 1, vec![Complex64::default()], None).unwrap();
        let t = ml_metric_table(&zero, &bases, 1.0, &amps).unwrap();
        assert_eq!(t.get(0, 0), 0.0);

        let block = ReceivedBlock::new(1, 1, vec![Complex64::new(1.0, 1.0)], None).unwrap();
        let t = ml_metric_table(&block, &bases, 1.0, &amps).unwrap();
        assert!((t.get(0, 1) - (1.0 + 2f64.ln())).abs() < 1e-12);
        assert!(ml_metric_table(&block, &bases, 0.0, &amps).is_err());
    }

    #[test]
    fn isotropic_table_matches_closed_form() {
        let amps = AmplitudeSet::uniform(3).unwrap();
        let n = 5;
        let bases = BandBases::Shared(EigenBasis::identity(n));
        let r: Vec<Complex64> = (0..2 * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let block = ReceivedBlock::new(2, n, r, None).unwrap();
        let noise = 0.4;
        let t = ml_metric_table(&block, &bases, noise, &amps).unwrap();
        let u = block.energies();
        for (k, &uk) in u.iter().enumerate() {
            for (l, &eps) in amps.energies().iter().enumerate() {
                let closed = uk / (eps + noise) + n as f64 * (eps + noise).ln();
                assert!((t.get(k, l) - closed).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn brute_force_worked_example() {
        let t = table(&[&[1.0, 3.0], &[4.0, 1.0], &[2.0, 2.0], &[5.0, 0.0]]);
        let d = brute_force_ml(&t, &policy(&[2, 2]), BRUTE_FORCE_CAP).unwrap();
        assert_eq!(d.codeword.levels(), &[0, 1, 0, 1]);
        assert_eq!(d.cost, Some(4.0));

        let v = viterbi_ml(&t, &policy(&[2, 2]), TRELLIS_STATE_CAP).unwrap();
        assert_eq!(v.codeword, d.codeword);
        assert_eq!(v.cost, Some(4.0));
    }

    #[test]
    fn single_codeword_policy() {
        let t = table(&[&[1.0, 0.0], &[2.0, 0.0], &[3.0, 0.0]]);
        let p = policy(&[3, 0]);
        assert_eq!(
            brute_force_ml(&t, &p, 10).unwrap().codeword.levels(),
            &[0, 0, 0]
        );
        assert_eq!(
            viterbi_ml(&t, &p, 10).unwrap().codeword.levels(),
            &[0, 0, 0]
        );
    }

    #[test]
    fn dominant_column_is_found() {
        let t = table(&[
            &[0.0, 9.0, 9.0],
            &[9.0, 9.0, 0.0],
            &[9.0, 0.0, 9.0],
            &[0.0, 9.0, 9.0],
        ]);
        let p = policy(&[2, 1, 1]);
        let d = brute_force_ml(&t, &p, 100).unwrap();
        assert_eq!(d.codeword.levels(), &[0, 2, 1, 0]);
        assert_eq!(viterbi_ml(&t, &p, 100).unwrap().codeword, d.codeword);
    }

    #[test]
    fn ties_resolve_to_the_smallest_level_first() {
        let t = table(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        let p = policy(&[1, 2]);
        let d = brute_force_ml(&t, &p, 100).unwrap();
        assert_eq!(d.codeword.levels(), &[0, 1, 1]);
        assert_eq!(viterbi_ml(&t, &p, 100).unwrap().codeword, d.codeword);
    }

    #[test]
    fn caps_are_enforced() {
        let rows: Vec<Vec<f64>> = vec![vec![0.0; 4]; 32];
        let t = MetricTable::from_rows(&rows).unwrap();
        let p = policy(&[8, 8, 8, 8]);
        assert!(matches!(
            brute_force_ml(&t, &p, BRUTE_FORCE_CAP),
            Err(Error::SizeLimit { .. })
        ));
        assert!(matches!(
            viterbi_ml(&t, &p, 1000),
            Err(Error::SizeLimit { .. })
        ));
        assert!(viterbi_ml(&t, &p, TRELLIS_STATE_CAP).is_ok());
    }

    proptest! {
        #[test]
        fn viterbi_equals_brute_force(
            (mults, costs) in prop::collection::vec(0usize..4, 2..5)
                .prop_filter("non-empty", |m| m.iter().sum::<usize>() > 0 && m.iter().sum::<usize>() <= 9)
                .prop_flat_map(|m| {
                    let k: usize = m.iter().sum();
                    let l = m.len();
                    (Just(m), prop::collection::vec(-5.0f64..5.0, k * l))
                })
        ) {
            let p = PartitionPolicy::new(mults.clone()).unwrap();
            let l = mults.len();
            let rows: Vec<Vec<f64>> = costs.chunks(l).map(<[f64]>::to_vec).collect();
            let t = MetricTable::from_rows(&rows).unwrap();
            let b = brute_force_ml(&t, &p, BRUTE_FORCE_CAP).unwrap();
            let v = viterbi_ml(&t, &p, TRELLIS_STATE_CAP).unwrap();
            prop_assert_eq!(&b.codeword, &v.codeword);
            prop_assert!((b.cost.unwrap() - v.cost.unwrap()).abs() < 1e-9);
            prop_assert!(v.codeword.is_member(&p));
        }

        #[test]
        fn integer_tables_tie_break_identically(
            costs in prop::collection::vec(0u8..3, 12)
        ) {
            let p = PartitionPolicy::new(vec![2, 1, 1]).unwrap();
            let rows: Vec<Vec<f64>> = costs.chunks(3).map(|c| c.iter().map(|&x| x as f64).collect()).collect();
            let t = MetricTable::from_rows(&rows).unwrap();
            let b = brute_force_ml(&t, &p, 100).unwrap();
            let v = viterbi_ml(&t, &p, 100).unwrap();
            prop_assert_eq!(b.codeword, v.codeword);
        }
    }
}
