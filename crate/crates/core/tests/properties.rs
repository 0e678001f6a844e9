use memk::*;
use proptest::prelude::*;
use rand::Rng;

/// Random full-support parameters with every event probability in a
/// moderate range.
fn random_params(k: usize, l_max: usize, seed: u64) -> ChannelParams {
    let mut rng = rng_from_seed(seed);
    ChannelParams::from_fn(k, l_max, |_, _, _| {
        let i = rng.random_range(0.005..0.08);
        let d = rng.random_range(0.005..0.08);
        let s = rng.random_range(0.005..0.08);
        [i, d, s, 1.0 - i - d - s]
    })
    .unwrap()
}

fn random_seq(n: usize, seed: u64) -> NucSeq {
    let mut rng = rng_from_seed(seed);
    NucSeq::new((0..n).map(|_| rng.random_range(0..4u8)).collect()).unwrap()
}

fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

#[test]
fn drift_bookkeeping_on_sampled_traces() {
    let params = random_params(2, 3, 1);
    let channel = Channel::new(&params).unwrap();
    let mut rng = rng_from_seed(2);
    for t in 0..100_000u64 {
        let x = random_seq(12 + (t % 20) as usize, t);
        let (y, trace) = channel.transmit_with(x.as_slice(), &mut rng);
        let ins: usize = trace.events.iter().filter_map(|e| e.ins_len()).sum();
        assert_eq!(trace.len(), x.len());
        assert_eq!(y.len(), x.len() - trace.count(EventKind::Del) + ins);
        assert_eq!(trace.output_len(), y.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn app_rows_are_normalized(seed in any::<u64>(), k in 1usize..=2, coded in any::<bool>(), q4 in any::<bool>()) {
        let params = random_params(k, 2, seed);
        let (block, bits) = if coded {
            (InnerBlock::new(&InnerCode::default(), 12, 0).unwrap(), 12)
        } else {
            (InnerBlock::uncoded(10), 20)
        };
        let x = block.encode(&random_bits(bits, seed ^ 1)).unwrap();
        let (y, _) = transmit(&x, &params, seed ^ 2).unwrap();
        let window = default_drift_window(block.channel_len(), &params).unwrap();
        let bps = if q4 { 2 } else { 1 };
        match app_single(y.as_slice(), &block, &params, &vec![0.5; bits], bps, window) {
            Ok(app) => {
                prop_assert_eq!(app.len(), bits / bps);
                for row in app.rows() {
                    let sum: f64 = row.iter().sum();
                    prop_assert!((sum - 1.0).abs() <= 1e-9, "row sums to {}", sum);
                    prop_assert!(row.iter().all(|p| (0.0..=1.0 + 1e-12).contains(p)));
                }
            }
            Err(Error::WindowViolation { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn reads_inside_the_window_are_decodable(seed in any::<u64>(), k in 1usize..=2) {
        let params = random_params(k, 2, seed);
        let block = InnerBlock::new(&InnerCode::default(), 24, 3).unwrap();
        let x = block.encode(&random_bits(24, seed)).unwrap();
        let (y, _) = transmit(&x, &params, seed ^ 5).unwrap();
        let window = DriftWindow::symmetric(6);
        let drift = y.len() as i64 - x.len() as i64;
        let out = JointDecoder::new(&block, &params, window).unwrap().decode(y.as_slice(), &[0.5; 24], 1);
        if window.contains(drift) {
            let out = out.unwrap();
            prop_assert!(out.log_likelihood.is_finite());
        } else {
            let is_violation = matches!(out, Err(Error::WindowViolation { .. }));
            prop_assert!(is_violation);
        }
    }

    #[test]
    fn combining_ignores_row_scaling(seed in any::<u64>(), scale in 1e-6f64..1e6) {
        let mut rng = rng_from_seed(seed);
        let mut row = || -> Vec<f64> { (0..4).map(|_| rng.random_range(0.01..1.0)).collect() };
        let a: Vec<f64> = (0..5).flat_map(|_| row()).collect();
        let b: Vec<f64> = (0..5).flat_map(|_| row()).collect();
        let norm = |v: &[f64]| -> Vec<f64> {
            v.chunks(4).flat_map(|c| { let s: f64 = c.iter().sum(); c.iter().map(move |x| x / s) }).collect()
        };
        let a_n = AppMatrix::from_flat(4, norm(&a)).unwrap();
        let b_n = AppMatrix::from_flat(4, norm(&b)).unwrap();
        let b_s = AppMatrix::from_flat(4, norm(&b).iter().map(|x| x * scale).collect()).unwrap();
        let prior = AppMatrix::uniform(5, 4);
        let c1 = combine_separate(&[a_n.clone(), b_n], &prior).unwrap();
        let c2 = combine_separate(&[a_n, b_s], &prior).unwrap();
        prop_assert!(c1.max_abs_diff(&c2) < 1e-12);
    }

    #[test]
    fn ldpc_codewords_have_zero_syndrome(seed in any::<u64>(), q4 in any::<bool>()) {
        let (proto, _) = table1(5).unwrap();
        let code = LdpcCode::from_protograph(&proto, 12, if q4 { 4 } else { 2 }, 3).unwrap();
        let info = random_bits(code.k_bits(), seed);
        let word = code.encode(&info).unwrap();
        prop_assert!(code.is_codeword(&word));
        prop_assert_eq!(code.extract_info(&word), info);
        let soft = if q4 {
            let probs: Vec<f64> = word
                .chunks(2)
                .flat_map(|p| {
                    let a = (p[0] << 1 | p[1]) as usize;
                    (0..4).map(move |s| if s == a { 0.97 } else { 0.01 })
                })
                .collect();
            SoftWord::Quaternary(AppMatrix::from_flat(4, probs).unwrap())
        } else {
            SoftWord::Binary(word.iter().map(|&b| if b == 0 { 4.0 } else { -4.0 }).collect())
        };
        let out = code.decode(&soft, &BpOptions::default()).unwrap();
        prop_assert!(out.converged);
        prop_assert_eq!(out.bits, word);
    }
}

#[test]
fn runs_are_deterministic_under_fixed_seeds() {
    let params = random_params(1, 2, 9);
    let x = random_seq(60, 4);
    assert_eq!(
        transmit_multi(&x, &params, 3, 77).unwrap(),
        transmit_multi(&x, &params, 3, 77).unwrap()
    );

    let cfg = AirConfig {
        source: AirSource::Model(&params),
        decoder: &params,
        reads: 2,
        inner: InnerCode::default(),
        payload_bits: 48,
        q: 2,
        num_sequences: 6,
        seed: 5,
        window: None,
    };
    assert_eq!(bcjr_once_rate(&cfg).unwrap(), bcjr_once_rate(&cfg).unwrap());

    let (proto, _) = table1(5).unwrap();
    let code = LdpcCode::from_protograph(&proto, 12, 2, 1).unwrap();
    let fer = || {
        simulate_fer(FerConfig {
            code: &code,
            inner: InnerCode::default(),
            block_payload_bits: 48,
            channel: &params,
            decoder: &params,
            reads: 2,
            window: None,
            bp: BpOptions::default(),
            max_frames: 4,
            target_errors: 100,
            seed: 8,
        })
        .unwrap()
    };
    assert_eq!(fer(), fer());

    let records: Vec<DatasetRecord> = (0..20)
        .map(|i| {
            let x = random_seq(40, i);
            let reads = transmit_multi(&x, &params, 2, i)
                .unwrap()
                .into_iter()
                .map(|(y, _)| y)
                .collect();
            DatasetRecord {
                ref_id: format!("r{i}"),
                x,
                reads,
            }
        })
        .collect();
    assert_eq!(
        estimate(&records, 1, 2, 3).unwrap(),
        estimate(&records, 1, 2, 3).unwrap()
    );
}

#[test]
fn undersized_window_flags_frames() {
    let params = ChannelParams::iid(1, 2, [0.03, 0.03, 0.01, 0.93]).unwrap();
    let (proto, _) = table1(5).unwrap();
    let code = LdpcCode::from_protograph(&proto, 12, 2, 1).unwrap();
    let run = |window: Option<DriftWindow>| {
        simulate_fer(FerConfig {
            code: &code,
            inner: InnerCode::default(),
            block_payload_bits: 48,
            channel: &params,
            decoder: &params,
            reads: 2,
            window,
            bp: BpOptions::default(),
            max_frames: 20,
            target_errors: 100,
            seed: 2,
        })
        .unwrap()
    };
    let normal = run(None);
    let narrow = run(Some(DriftWindow::symmetric(0)));
    assert!(narrow.window_violations > normal.window_violations);
    assert!(narrow.window_violations > 0);
    assert!(narrow.frame_errors >= normal.frame_errors);
}
