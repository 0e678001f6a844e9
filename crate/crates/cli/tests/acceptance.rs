//! Acceptance criteria. Every test prints one `PASS`/`FAIL` line.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use memk::outer::decode_binary;
use memk::*;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn random_seq(rng: &mut SimRng, n: usize) -> NucSeq {
    NucSeq::new((0..n).map(|_| rng.random_range(0..4u8)).collect()).unwrap()
}

fn random_bits(rng: &mut SimRng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn random_params(rng: &mut SimRng, k: usize) -> ChannelParams {
    ChannelParams::from_fn(k, 2, |_, _, _| {
        let i = rng.random_range(0.01..0.15);
        let d = rng.random_range(0.01..0.15);
        let s = rng.random_range(0.01..0.15);
        [i, d, s, 1.0 - i - d - s]
    })
    .unwrap()
}

/// Memory-2 channel whose homopolymer kmers are deletion prone.
fn homopolymer_channel() -> ChannelParams {
    ChannelParams::from_fn(2, 2, |region, ctx, prev| {
        let homo = region == PositionClass::Middle && ctx % 5 == 0;
        let (i, d, s) = if homo { (0.01, 0.12, 0.03) } else { (0.01, 0.01, 0.02) };
        let d = if prev == Some(EventKind::Del) { d * 1.5 } else { d };
        [i, d, s, 1.0 - i - d - s]
    })
    .unwrap()
}

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rng_from_seed(101);
    let mut worst = 0.0f64;
    let mut instances = 0;
    while instances < 120 {
        let k = rng.random_range(1..=2usize);
        let n = rng.random_range(k.max(2)..=6usize);
        let params = random_params(&mut rng, k);
        let block = InnerBlock::uncoded(n);
        let bits = random_bits(&mut rng, 2 * n);
        let x = block.encode(&bits).unwrap();
        let seed = rng.random();
        let (y, _) = transmit(&x, &params, seed).unwrap();
        if y.len() > 10 {
            continue;
        }
        let bps = rng.random_range(1..=2usize);
        let priors: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.2..0.8)).collect();
        let fast = app_single(y.as_slice(), &block, &params, &priors, bps, DriftWindow::symmetric(12)).unwrap();
        let exact = brute_force_app(&y, &block, &params, &priors, bps).unwrap();
        worst = worst.max(fast.max_abs_diff(&exact));
        instances += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && elapsed < 60.0;
    report(
        1,
        "oracle equivalence",
        pass,
        &format!("{instances} instances, max |APP error| = {worst:.2e} (<= 1e-9), {elapsed:.1} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_estimator_round_trip() {
    let start = Instant::now();
    // k = 1 with context and previous-event dependence at nanopore-like rates
    let truth = ChannelParams::from_fn(1, 2, |_, ctx, prev| {
        let c = ctx as f64;
        let (i, d, s) = match prev {
            Some(EventKind::Del) => (0.01, 0.06 + 0.005 * c, 0.03),
            Some(EventKind::Ins) => (0.03, 0.02, 0.02),
            Some(EventKind::Sub) => (0.01, 0.02, 0.05),
            _ => (0.01 + 0.002 * c, 0.02 + 0.004 * c, 0.02 + 0.003 * c),
        };
        [i, d, s, 1.0 - i - d - s]
    })
    .unwrap();
    let channel = Channel::new(&truth).unwrap();
    let mut rng = rng_from_seed(202);
    let mut true_counts = CountTable::new(1, 2);
    let mut records = Vec::with_capacity(2000);
    for s in 0..2000 {
        let x = random_seq(&mut rng, 110);
        let (y, trace) = channel.transmit_with(x.as_slice(), &mut rng);
        true_counts.accumulate(x.as_slice(), &trace);
        records.push(DatasetRecord {
            ref_id: format!("s{s}"),
            x,
            reads: vec![y],
        });
    }
    let est = estimate(&records, 1, 2, 7).unwrap();

    let middle = PositionClass::Middle;
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut worst_sigma = 0.0f64;
    for ctx in 0..4 {
        for prev in 0..4 {
            let n: u64 = true_counts.regions[middle.index()][ctx].event[prev].iter().sum();
            let p_prev = Some(EventKind::from_index(prev));
            let t = truth.event_probs(middle, ctx, p_prev);
            let e = est.event_probs(middle, ctx, p_prev);
            for z in 0..4 {
                let sigma = (t[z] * (1.0 - t[z]) / n as f64).sqrt();
                let dev = (e[z] - t[z]).abs();
                let in_sigma = dev <= 3.0 * sigma;
                let in_abs = t[z] < 0.05 || dev <= 0.01;
                worst_sigma = worst_sigma.max(dev / sigma);
                checked += 1;
                if !(in_sigma && in_abs) {
                    failures.push(format!(
                        "ctx {ctx} prev {:?} {:?}: est {:.4} truth {:.4} ({:.1} sigma, n = {n})",
                        EventKind::from_index(prev),
                        EventKind::from_index(z),
                        e[z],
                        t[z],
                        dev / sigma
                    ));
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && elapsed < 120.0;
    report(
        2,
        "estimator round trip",
        pass,
        &format!(
            "{checked} middle-region event probabilities, {} outside 3 sigma / 0.01, worst {worst_sigma:.1} sigma, {elapsed:.1} s",
            failures.len()
        ),
    );
    for f in failures.iter().take(12) {
        println!("    {f}");
    }
    assert!(pass);
}

#[test]
fn criterion_3_rate_accounting() {
    let code = InnerCode::default();
    let x = encode_block(&[1; 162], &ConvCodeSpec::default()).unwrap();
    let trellis = Trellis::new(&code, 162).unwrap();
    let rate = 162.0 / (trellis.channel_len() - code.tail()) as f64;
    let designs: Vec<String> = [1, 2, 5].iter().map(|&m| table1(m).unwrap().1.to_string()).collect();
    let pass = x.len() == 110
        && trellis.channel_len() == 110
        && rate == 1.5
        && code.rate() == 1.5
        && designs == ["6/5", "21/16", "7/5"];
    report(
        3,
        "rate accounting",
        pass,
        &format!(
            "162 bits -> {} symbols, R_i = {rate}, Table I rates {}",
            x.len(),
            designs.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_air_sanity() {
    let start = Instant::now();
    let perfect = ChannelParams::perfect(1);
    // every output symbol uniform and independent of the input
    let blind = ChannelParams::iid(1, 2, [0.0, 0.0, 0.75, 0.25]).unwrap();
    let run = |ch: &ChannelParams| {
        bcjr_once_rate(&AirConfig {
            source: AirSource::Model(ch),
            decoder: ch,
            reads: 1,
            inner: InnerCode::default(),
            payload_bits: 162,
            q: 2,
            num_sequences: 100,
            seed: 4,
            window: None,
        })
        .unwrap()
    };
    let full = run(&perfect);
    let none = run(&blind);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (full.rate - 1.5).abs() <= 0.01 && none.rate.abs() <= 0.02 && elapsed < 60.0;
    report(
        4,
        "AIR sanity",
        pass,
        &format!(
            "perfect {:.4} (1.500 +/- 0.01), information-free {:.4} (0 +/- 0.02), {elapsed:.1} s",
            full.rate, none.rate
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_air_orderings() {
    let start = Instant::now();
    let truth = homopolymer_channel();
    let baseline = iid_baseline_params(&truth).unwrap();
    let window = default_drift_window(110, &truth).unwrap();
    let run = |decoder: &ChannelParams, reads: usize| {
        bcjr_once_rate(&AirConfig {
            source: AirSource::Model(&truth),
            decoder,
            reads,
            inner: InnerCode::default(),
            payload_bits: 162,
            q: 2,
            num_sequences: 500,
            seed: 5,
            window: Some(window),
        })
        .unwrap()
    };
    let by_m: Vec<AirResult> = [1, 2, 5].iter().map(|&m| run(&truth, m)).collect();
    let gap = |a: &AirResult, b: &AirResult| (b.rate - a.rate) / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    let g12 = gap(&by_m[0], &by_m[1]);
    let g25 = gap(&by_m[1], &by_m[2]);
    let pass_a = g12 > 3.0 && g25 > 3.0;

    let iid = run(&baseline, 1);
    let (diff, diff_se) = by_m[0].paired_difference(&iid).unwrap();
    let pass_b = diff > 3.0 * diff_se;
    let unpaired = gap(&iid, &by_m[0]);

    let elapsed = start.elapsed().as_secs_f64();
    let pass = pass_a && pass_b && elapsed < 1800.0;
    report(
        5,
        "AIR orderings",
        pass,
        &format!(
            "(a) M=1,2,5 rates {:.4}, {:.4}, {:.4} (stderr {:.4}, {:.4}, {:.4}), gaps {g12:.1} and {g25:.1} sigma; \
             (b) k=2 {:.4} vs iid {:.4}, paired gain {diff:.4} = {:.1} sigma ({unpaired:.1} sigma unpaired); {elapsed:.0} s",
            by_m[0].rate,
            by_m[1].rate,
            by_m[2].rate,
            by_m[0].stderr,
            by_m[1].stderr,
            by_m[2].stderr,
            by_m[0].rate,
            iid.rate,
            diff / diff_se
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_concatenated_fer() {
    let start = Instant::now();
    let (proto, _) = table1(5).unwrap();
    let code = LdpcCode::from_protograph(&proto, 100, 2, 1).unwrap();
    let channel = ChannelParams::iid(1, 2, [0.009, 0.009, 0.009, 0.973]).unwrap();
    let run = |reads: usize, max_frames: usize| {
        simulate_fer(FerConfig {
            code: &code,
            inner: InnerCode::default(),
            block_payload_bits: 162,
            channel: &channel,
            decoder: &channel,
            reads,
            window: None,
            bp: BpOptions::default(),
            max_frames,
            target_errors: 30,
            seed: 6,
        })
        .unwrap()
    };
    let results: Vec<(usize, FerResult)> = [(1, 1000), (2, 2000), (5, 12000)]
        .iter()
        .map(|&(m, f)| (m, run(m, f)))
        .collect();
    let r5 = &results[2].1;
    let operating = r5.fer < 1e-2 && r5.frame_errors >= 30;
    let monotone = results.windows(2).all(|w| w[1].1.fer < w[0].1.fer);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = operating && monotone && elapsed < 3600.0;
    let summary: Vec<String> = results
        .iter()
        .map(|(m, r)| {
            format!(
                "M={m}: {}/{} = {:.4} [{:.4}, {:.4}]",
                r.frame_errors, r.frames, r.fer, r.ci_low, r.ci_high
            )
        })
        .collect();
    report(
        6,
        "concatenated code FER",
        pass,
        &format!("N_o = {}, {}; {elapsed:.0} s", code.n_bits(), summary.join("; ")),
    );
    assert!(pass);
}

fn tree_check_matrix(rng: &mut SimRng) -> ParityCheck {
    // each new check shares exactly one variable with the existing tree
    let checks = rng.random_range(2..=4usize);
    let mut entries = Vec::new();
    let mut vars = 0usize;
    for r in 0..checks {
        let degree = rng.random_range(2..=4usize);
        if r > 0 {
            entries.push((r, rng.random_range(0..vars)));
        }
        let fresh = if r == 0 { degree } else { degree - 1 };
        for _ in 0..fresh {
            entries.push((r, vars));
            vars += 1;
        }
    }
    ParityCheck::from_entries(checks, vars, &entries).unwrap()
}

fn brute_bit_llrs(pc: &ParityCheck, llrs: &[f64]) -> Vec<f64> {
    let n = pc.cols();
    let mut p1 = vec![0.0; n];
    let mut total = 0.0;
    for w in 0..1u32 << n {
        let bits: Vec<u8> = (0..n).map(|i| ((w >> i) & 1) as u8).collect();
        if !pc.is_codeword(&bits) {
            continue;
        }
        let p: f64 = bits
            .iter()
            .zip(llrs)
            .map(|(&b, &l)| 1.0 / (1.0 + (if b == 1 { l } else { -l }).exp()))
            .product();
        total += p;
        for (acc, &b) in p1.iter_mut().zip(&bits) {
            if b == 1 {
                *acc += p;
            }
        }
    }
    p1.iter().map(|p| ((total - p) / p).ln()).collect()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Runs every subcommand twice into separate directories and compares the outputs.
fn commands_are_deterministic() -> Result<usize, String> {
    use clap::Parser;
    use memk_cli::{run, Cli};

    let dir = scratch("determinism");
    ChannelParams::iid(1, 2, [0.02, 0.02, 0.02, 0.94])
        .unwrap()
        .save(dir.join("ch.json"))
        .unwrap();
    let configs = [
        (
            "simulate",
            "params = \"ch.json\"\nreads = 2\nseed = 3\n[random]\ncount = 30\nlength = 60\n",
        ),
        (
            "encode",
            "payload_bits = 48\nblocks = 3\nseed = 3\n[inner]\ntype = \"convolutional\"\noffset_seed = 2\n",
        ),
        (
            "estimate",
            "refs = \"simulate_a/refs.txt\"\nreads = \"simulate_a/reads.txt\"\nk = [1, 2]\nseed = 3\n",
        ),
        (
            "decode",
            "params = \"ch.json\"\nreads = \"encode_a/encoded.txt\"\npayload_bits = 48\n\
             [inner]\ntype = \"convolutional\"\noffset_seed = 2\n",
        ),
        (
            "air",
            "source = \"model\"\ntruth = \"ch.json\"\ndecoders = [\"ch.json\"]\nm_reads = [1, 2]\n\
             payload_bits = 48\nnum_sequences = 5\nseed = 3\n",
        ),
        (
            "fer",
            "channel = \"ch.json\"\nm_reads = [2]\nmax_frames = 3\nblock_payload_bits = 48\nseed = 3\n\
             [outer]\ndesign = 5\nlift = 12\n",
        ),
    ];
    for (cmd, text) in configs {
        let cfg = dir.join(format!("{cmd}.toml"));
        fs::write(&cfg, text).unwrap();
        for run_id in ["a", "b"] {
            let out = dir.join(format!("{cmd}_{run_id}"));
            let args = ["memk", cmd, cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
            run(&Cli::parse_from(args)).map_err(|e| format!("{cmd}: {e:#}"))?;
        }
        let a = dir_snapshot(&dir.join(format!("{cmd}_a")));
        if a.is_empty() || a != dir_snapshot(&dir.join(format!("{cmd}_b"))) {
            return Err(format!("{cmd} outputs differ between identical runs"));
        }
    }
    Ok(configs.len())
}

#[test]
fn criterion_7_property_suites() {
    let start = Instant::now();
    let mut rng = rng_from_seed(707);
    let mut notes = Vec::new();

    let mut worst_norm = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(1..=2usize);
        let params = random_params(&mut rng, k);
        let block = InnerBlock::new(&InnerCode::default(), 30, rng.random_range(0..5)).unwrap();
        let x = block.encode(&random_bits(&mut rng, 30)).unwrap();
        let (y, _) = transmit(&x, &params, rng.random()).unwrap();
        let bps = rng.random_range(1..=2usize);
        if let Ok(app) = app_single(
            y.as_slice(),
            &block,
            &params,
            &[0.5; 30],
            bps,
            DriftWindow::symmetric(12),
        ) {
            for row in app.rows() {
                worst_norm = worst_norm.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    let norm_ok = worst_norm <= 1e-9;
    notes.push(format!("APP rows within {worst_norm:.1e} of 1"));

    let params = random_params(&mut rng, 2);
    let channel = Channel::new(&params).unwrap();
    let mut drift_ok = true;
    for _ in 0..100_000 {
        let n = rng.random_range(2..40usize);
        let x = random_seq(&mut rng, n);
        let (y, trace) = channel.transmit_with(x.as_slice(), &mut rng);
        let inserted: usize = trace.events.iter().filter_map(|e| e.ins_len()).sum();
        drift_ok &= y.len() == n - trace.count(EventKind::Del) + inserted;
    }
    notes.push(format!(
        "drift bookkeeping on 1e5 traces {}",
        if drift_ok { "holds" } else { "BROKEN" }
    ));

    let mut ldpc_ok = true;
    for (m, z, q) in [(1, 25, 2), (2, 24, 4), (5, 20, 2), (5, 20, 4)] {
        let (proto, _) = table1(m).unwrap();
        let code = LdpcCode::from_protograph(&proto, z, q, 2).unwrap();
        for _ in 0..10 {
            let info = random_bits(&mut rng, code.k_bits());
            let word = code.encode(&info).unwrap();
            ldpc_ok &= code.is_codeword(&word) && code.extract_info(&word) == info;
            let soft = if q == 2 {
                SoftWord::Binary(word.iter().map(|&b| if b == 0 { 8.0 } else { -8.0 }).collect())
            } else {
                let rows: Vec<Vec<f64>> = word
                    .chunks(2)
                    .map(|p| {
                        let a = usize::from(p[0] << 1 | p[1]);
                        (0..4).map(|s| if s == a { 0.97 } else { 0.01 }).collect()
                    })
                    .collect();
                SoftWord::Quaternary(AppMatrix::from_rows(4, &rows).unwrap())
            };
            let out = code.decode(&soft, &BpOptions::default()).unwrap();
            ldpc_ok &= out.converged && out.bits == word;
        }
    }
    notes.push(format!(
        "LDPC zero syndrome and noiseless recovery {}",
        if ldpc_ok { "hold" } else { "BROKEN" }
    ));

    let opts = BpOptions {
        max_iters: 10,
        clamp: 30.0,
        early_stop: false,
    };
    let mut worst_map = 0.0f64;
    for _ in 0..50 {
        let pc = tree_check_matrix(&mut rng);
        let llrs: Vec<f64> = (0..pc.cols()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let bp = decode_binary(&llrs, &pc, &opts).unwrap();
        for (a, b) in bp.reliability.iter().zip(brute_bit_llrs(&pc, &llrs)) {
            worst_map = worst_map.max((a - b).abs());
        }
    }
    let map_ok = worst_map < 1e-9;
    notes.push(format!("BP vs exact MAP on trees {worst_map:.1e}"));

    let det = commands_are_deterministic();
    let det_ok = det.is_ok();
    notes.push(match &det {
        Ok(n) => format!("{n} commands byte-identical across reruns"),
        Err(e) => e.clone(),
    });

    let elapsed = start.elapsed().as_secs_f64();
    let pass = norm_ok && drift_ok && ldpc_ok && map_ok && det_ok;
    report(
        7,
        "property suites",
        pass,
        &format!("{}; {elapsed:.1} s", notes.join("; ")),
    );
    assert!(pass);
}
