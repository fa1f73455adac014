use pim_simo::codebook::PartitionPolicy;
use pim_simo::sim::{
    run_ser, sweep, Axis, ExperimentSpec, OperatingPoint, SamplingPath, SerEstimate, StoppingRule,
};
use pim_simo::{DetectorKind, FirstRound};

fn spec(
    m: &[usize],
    n: usize,
    rho: f64,
    detectors: Vec<DetectorKind>,
    rule: StoppingRule,
) -> ExperimentSpec {
    ExperimentSpec {
        policy: PartitionPolicy::new(m.to_vec()).unwrap(),
        antennas: n,
        rho,
        snr_db: 10.0,
        detectors,
        stopping: rule,
        seed: 12,
        path: SamplingPath::Eigen,
        first_round: FirstRound::Codeword,
    }
}

fn within(a: &SerEstimate, b: &SerEstimate, z: f64) -> bool {
    (a.ser - b.ser).abs() <= z * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
}

#[test]
fn execution_order_does_not_matter() {
    let link = spec(&[2, 2, 2, 2], 8, 0.7, vec![], StoppingRule::default())
        .point()
        .link()
        .unwrap();
    let trials = 3_000u64;
    let reversed: usize = (0..trials)
        .rev()
        .map(|t| {
            let b = link.trial(4, t).unwrap();
            let d = link.receiver().detect(DetectorKind::Abque, &b).unwrap();
            b.truth().unwrap().symbol_errors(&d.codeword)
        })
        .sum();
    let est = run_ser(
        &link,
        &DetectorKind::Abque,
        &StoppingRule::fixed_trials(trials),
        4,
    )
    .unwrap();
    assert_eq!(est.symbol_errors, reversed as u64);
}

#[test]
fn ser_is_non_increasing_in_snr() {
    let detectors = vec![
        DetectorKind::MlViterbi,
        DetectorKind::Ed,
        DetectorKind::Hsnr,
        DetectorKind::Abque,
        DetectorKind::BqueGenie,
    ];
    let rule = StoppingRule {
        min_errors: 200,
        min_symbols: 0,
        max_trials: 20_000,
    };
    let s = spec(&[2, 2, 2, 2], 8, 0.7, detectors, rule);
    let r = sweep(&s, &Axis::Snr((0..=6).map(|i| 5.0 * i as f64).collect())).unwrap();
    for series in &r.series {
        for w in series.estimates.windows(2) {
            let slack = 3.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
            assert!(w[1].ser <= w[0].ser + slack, "{}: {:?}", series.detector, w);
        }
    }
    let (abque, genie) = (
        r.series(DetectorKind::Abque).unwrap(),
        r.series(DetectorKind::BqueGenie).unwrap(),
    );
    for (a, g) in abque.estimates.iter().zip(&genie.estimates) {
        assert!(g.ser <= a.ser + 2.0 * (a.std_error.powi(2) + g.std_error.powi(2)).sqrt());
    }
}

#[test]
fn isotropic_point_collapses_detectors() {
    let detectors = vec![
        DetectorKind::MlViterbi,
        DetectorKind::MlIsoSort,
        DetectorKind::Ed,
        DetectorKind::Hsnr,
        DetectorKind::Abque,
    ];
    let rule = StoppingRule {
        min_errors: 300,
        min_symbols: 0,
        max_trials: 200_000,
    };
    let mut s = spec(&[4, 4, 4, 4], 8, 0.0, detectors, rule);
    s.snr_db = 10.0;
    let r = sweep(&s, &Axis::Correlation(vec![0.0, 0.5])).unwrap();
    let at0 = |k| r.series(k).unwrap().estimates[0];
    assert_eq!(at0(DetectorKind::Ed), at0(DetectorKind::MlIsoSort));
    assert_eq!(at0(DetectorKind::Hsnr), at0(DetectorKind::MlIsoSort));
    assert_eq!(at0(DetectorKind::Abque), at0(DetectorKind::MlIsoSort));
    assert!(within(
        &at0(DetectorKind::MlViterbi),
        &at0(DetectorKind::Ed),
        3.0
    ));
}

#[test]
fn error_floors_at_high_snr() {
    let rule = StoppingRule {
        min_errors: 200,
        min_symbols: 0,
        max_trials: 2_000_000,
    };
    let est = |kind: DetectorKind, snr_db: f64| {
        let p = OperatingPoint {
            policy: PartitionPolicy::uniform(32, 4).unwrap(),
            antennas: 64,
            rho: 0.7,
            snr_db,
            path: SamplingPath::Eigen,
            first_round: FirstRound::Codeword,
        };
        run_ser(&p.link().unwrap(), &kind, &rule, 7).unwrap()
    };
    let (ed40, ed60) = (est(DetectorKind::Ed, 40.0), est(DetectorKind::Ed, 60.0));
    let (ab40, ab60) = (
        est(DetectorKind::Abque, 40.0),
        est(DetectorKind::Abque, 60.0),
    );
    assert!(ed60.ser >= 0.5 * ed40.ser, "{ed40:?} {ed60:?}");
    assert!(ab60.ser >= 0.5 * ab40.ser, "{ab40:?} {ab60:?}");
    // one-sided 95% test on the difference
    let se = (ed60.std_error.powi(2) + ab60.std_error.powi(2)).sqrt();
    assert!(ed60.ser - ab60.ser > 1.645 * se);
}
