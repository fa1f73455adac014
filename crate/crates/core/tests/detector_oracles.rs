use pim_simo::channel::{sample_block_eigen, BandBases, CorrelationModel};
use pim_simo::codebook::{random_codeword, AmplitudeSet, PartitionPolicy};
use pim_simo::detect::{brute_force_ml, ml_metric_table, BRUTE_FORCE_CAP};
use pim_simo::sim::{paired_decisions, trial_rng, OperatingPoint, SamplingPath};
use pim_simo::{DetectorKind, Receiver};

fn point(m: &[usize], n: usize, rho: f64, snr_db: f64) -> OperatingPoint {
    OperatingPoint {
        policy: PartitionPolicy::new(m.to_vec()).unwrap(),
        antennas: n,
        rho,
        snr_db,
        path: SamplingPath::Eigen,
        first_round: Default::default(),
    }
}

#[test]
fn isotropic_sorting_family_matches_exhaustive_ml() {
    let link = point(&[2, 2, 1, 1], 4, 0.0, 10.0).link().unwrap();
    let rx = link.receiver();
    let kinds = [
        DetectorKind::MlIsoSort,
        DetectorKind::Ed,
        DetectorKind::Abque,
        DetectorKind::Hsnr,
    ];
    let decisions = paired_decisions(&link, &kinds, 10_000, 17).unwrap();
    for t in 0..10_000u64 {
        let block = link.trial(17, t).unwrap();
        let table = ml_metric_table(&block, rx.bases(), rx.noise_power(), rx.amplitudes()).unwrap();
        let ml = brute_force_ml(&table, rx.policy(), BRUTE_FORCE_CAP)
            .unwrap()
            .codeword;
        for row in &decisions {
            assert_eq!(row[t as usize], ml, "trial {t}");
        }
    }
}

#[test]
fn hsnr_limit_tracks_viterbi_at_high_snr() {
    let policy = PartitionPolicy::uniform(8, 4).unwrap();
    let amps = AmplitudeSet::uniform(4).unwrap();
    let bases = BandBases::Shared(
        CorrelationModel::exponential(0.7)
            .unwrap()
            .eigen_basis(64)
            .unwrap(),
    );
    let noise = 1e-6;
    let rx = Receiver::new(policy.clone(), amps.clone(), bases.clone(), noise).unwrap();
    let trials = 10_000;
    let mut agree = 0;
    for t in 0..trials {
        let mut rng = trial_rng(23, t);
        let cw = random_codeword(&policy, &mut rng);
        let block = sample_block_eigen(&cw, &amps, &bases, noise, &mut rng).unwrap();
        let lim = rx.detect(DetectorKind::HsnrLimit, &block).unwrap().codeword;
        let vit = rx.detect(DetectorKind::MlViterbi, &block).unwrap().codeword;
        let active = cw
            .levels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(|(k, _)| k);
        agree += usize::from(active.clone().all(|k| lim.levels()[k] == vit.levels()[k]));
    }
    assert!(agree as f64 >= 0.99 * trials as f64, "{agree} / {trials}");
}

#[test]
fn decisions_are_codewords_for_every_detector() {
    let p = point(&[3, 2, 2, 1], 16, 0.9, 3.0);
    let link = p.link().unwrap();
    let kinds: Vec<DetectorKind> = DetectorKind::ALL.to_vec();
    let decisions = paired_decisions(&link, &kinds, 300, 8).unwrap();
    for row in decisions {
        for cw in row {
            assert_eq!(cw.histogram(4), p.policy.multiplicities());
        }
    }
}

#[test]
fn genie_bque_is_no_worse_than_abque() {
    let link = point(&[4, 4, 4, 4], 16, 0.9, 0.0).link().unwrap();
    let d = paired_decisions(
        &link,
        &[DetectorKind::Abque, DetectorKind::BqueGenie],
        5_000,
        3,
    )
    .unwrap();
    let errs = |row: &Vec<pim_simo::Codeword>| -> usize {
        row.iter()
            .enumerate()
            .map(|(t, cw)| {
                link.trial(3, t as u64)
                    .unwrap()
                    .truth()
                    .unwrap()
                    .symbol_errors(cw)
            })
            .sum()
    };
    let (a, g) = (errs(&d[0]), errs(&d[1]));
    let symbols = 5_000.0 * 16.0;
    let (pa, pg) = (a as f64 / symbols, g as f64 / symbols);
    let se = ((pa * (1.0 - pa) + pg * (1.0 - pg)) / symbols).sqrt();
    assert!(pg <= pa + 2.0 * se, "genie {pg} abque {pa}");
}
