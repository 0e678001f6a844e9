use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use memk::{iid_baseline_params, ChannelParams, PositionClass};

fn workdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn memk(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_memk"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) {
    let out = memk(args, dir);
    assert!(
        out.status.success(),
        "memk {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn encode_perfect_channel_decode_round_trip() {
    let dir = workdir("round_trip");
    ChannelParams::perfect(2).save(dir.join("perfect.json")).unwrap();
    let inner = "[inner]\ntype = \"convolutional\"\noffset_seed = 5\n";
    write(
        &dir,
        "encode.toml",
        &format!("payload_bits = 99\nblocks = 3\nseed = 4\nout = \"enc\"\n{inner}"),
    );
    write(
        &dir,
        "sim.toml",
        "params = \"perfect.json\"\nrefs = \"enc/encoded.txt\"\nreads = 2\nout = \"sim\"\n",
    );
    write(
        &dir,
        "decode.toml",
        &format!("params = \"perfect.json\"\nreads = \"sim/reads.txt\"\npayload_bits = 99\nout = \"dec\"\n{inner}"),
    );
    ok(&["encode", "encode.toml"], &dir);
    ok(&["simulate", "sim.toml"], &dir);
    ok(&["decode", "decode.toml"], &dir);
    assert_eq!(read(&dir, "enc/payloads.txt"), read(&dir, "dec/decoded.txt"));
    assert_eq!(read(&dir, "enc/encoded.txt").lines().count(), 3);
}

#[test]
fn simulate_is_reproducible() {
    let dir = workdir("simulate");
    ChannelParams::iid(1, 2, [0.05, 0.05, 0.05, 0.85])
        .unwrap()
        .save(dir.join("ch.json"))
        .unwrap();
    write(
        &dir,
        "sim.toml",
        "params = \"ch.json\"\nreads = 3\nseed = 9\n[random]\ncount = 20\nlength = 50\n",
    );
    ok(&["simulate", "sim.toml", "--out", "a"], &dir);
    ok(&["simulate", "sim.toml", "--out", "a2"], &dir);
    ok(&["simulate", "sim.toml", "--out", "b", "--seed", "10"], &dir);
    for f in ["reads.txt", "refs.txt"] {
        assert_eq!(read(&dir, &format!("a/{f}")), read(&dir, &format!("a2/{f}")));
    }
    assert_ne!(read(&dir, "a/reads.txt"), read(&dir, "b/reads.txt"));
    assert_eq!(read(&dir, "a/reads.txt").lines().count(), 60);
    let csv = read(&dir, "a/simulate.csv");
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.last(), Some(&"config_sha256"));
    assert!(csv.lines().skip(1).all(|l| l.contains(",9,")));
}

#[test]
fn estimate_writes_one_file_per_k() {
    let dir = workdir("estimate");
    ChannelParams::iid(1, 2, [0.02, 0.03, 0.03, 0.92])
        .unwrap()
        .save(dir.join("ch.json"))
        .unwrap();
    write(
        &dir,
        "sim.toml",
        "params = \"ch.json\"\nreads = 2\nseed = 1\nout = \"sim\"\n[random]\ncount = 40\nlength = 60\n",
    );
    write(
        &dir,
        "est.toml",
        "refs = \"sim/refs.txt\"\nreads = \"sim/reads.txt\"\nk = [1, 2]\nout = \"est\"\n",
    );
    ok(&["simulate", "sim.toml"], &dir);
    ok(&["estimate", "est.toml"], &dir);
    let k1 = ChannelParams::load(dir.join("est/params_k1.json")).unwrap();
    let k2 = ChannelParams::load(dir.join("est/params_k2.json")).unwrap();
    assert!(k1.validate().is_empty() && k2.validate().is_empty());
    assert_eq!(
        k2.region(PositionClass::Middle).contexts.len(),
        4 * k1.region(PositionClass::Middle).contexts.len()
    );
    let summary = read(&dir, "est/estimate_summary.csv");
    assert_eq!(summary.lines().count(), 1 + 2 * 4);

    ok(&["estimate", "est.toml", "--k", "3", "--out", "est3"], &dir);
    assert!(dir.join("est3/params_k3.json").exists());
    assert!(!dir.join("est3/params_k1.json").exists());
    // 4^3 middle contexts cannot all be seen in 40 short references twice over
    assert!(read(&dir, "est3/estimate_fallbacks.csv").lines().count() > 1);
}

#[test]
fn mismatched_decoder_still_returns_apps() {
    let dir = workdir("mismatch");
    let truth = ChannelParams::from_fn(2, 2, |_, ctx, _| {
        let d = if ctx % 5 == 0 { 0.1 } else { 0.02 };
        [0.01, d, 0.02, 0.97 - d]
    })
    .unwrap();
    truth.save(dir.join("truth.json")).unwrap();
    ChannelParams::iid(1, 2, [0.01, 0.04, 0.02, 0.93])
        .unwrap()
        .save(dir.join("k1.json"))
        .unwrap();
    write(&dir, "encode.toml", "payload_bits = 24\nblocks = 2\nout = \"enc\"\n");
    write(
        &dir,
        "sim.toml",
        "params = \"truth.json\"\nrefs = \"enc/encoded.txt\"\nreads = 2\nout = \"sim\"\n",
    );
    write(
        &dir,
        "decode.toml",
        "params = \"k1.json\"\nreads = \"sim/reads.txt\"\npayload_bits = 24\nq = 4\nout = \"dec\"\n",
    );
    ok(&["encode", "encode.toml"], &dir);
    ok(&["simulate", "sim.toml"], &dir);
    ok(&["decode", "decode.toml"], &dir);
    let app = read(&dir, "dec/app.csv");
    assert!(app.starts_with("ref_id,symbol,p0,p1,p2,p3,seed,config_sha256"));
    assert_eq!(app.lines().count(), 1 + 2 * 12);
}

#[test]
fn air_on_a_perfect_channel_gives_full_rate() {
    let dir = workdir("air");
    ChannelParams::perfect(1).save(dir.join("perfect.json")).unwrap();
    write(
        &dir,
        "air.toml",
        "source = \"model\"\ntruth = \"perfect.json\"\ndecoders = [\"perfect.json\"]\nm_reads = [1, 2]\n\
         payload_bits = 60\nnum_sequences = 4\nseed = 3\nout = \"air\"\n",
    );
    ok(&["air", "air.toml"], &dir);
    let mut rdr = csv::Reader::from_path(dir.join("air/air.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let rate: f64 = r[col("rate_bits_per_symbol")].parse().unwrap();
        assert!((rate - 1.5).abs() < 1e-9);
        assert_eq!(&r[col("status")], "ok");
    }
    let first = read(&dir, "air/air.csv");
    ok(&["air", "air.toml"], &dir);
    assert_eq!(first, read(&dir, "air/air.csv"));
}

#[test]
fn air_records_failing_cells_and_continues() {
    let dir = workdir("air_fail");
    ChannelParams::iid(1, 2, [0.05, 0.05, 0.05, 0.85])
        .unwrap()
        .save(dir.join("noisy.json"))
        .unwrap();
    let base = iid_baseline_params(&ChannelParams::perfect(1)).unwrap();
    base.save(dir.join("perfect.json")).unwrap();
    write(
        &dir,
        "air.toml",
        "source = \"model\"\ntruth = \"noisy.json\"\ndecoders = [\"perfect.json\", \"noisy.json\"]\nm_reads = [1]\n\
         payload_bits = 60\nnum_sequences = 3\nout = \"air\"\n",
    );
    ok(&["air", "air.toml"], &dir);
    let text = read(&dir, "air/air.csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("error"), "{}", lines[1]);
    assert!(lines[2].contains(",ok,"), "{}", lines[2]);
}

#[test]
fn fer_on_a_noiseless_channel_has_no_errors() {
    let dir = workdir("fer");
    ChannelParams::perfect(1).save(dir.join("perfect.json")).unwrap();
    write(
        &dir,
        "fer.toml",
        "channel = \"perfect.json\"\nm_reads = [1, 2]\nmax_frames = 3\nblock_payload_bits = 48\nout = \"fer\"\n\
         [outer]\ndesign = 5\nlift = 12\n",
    );
    ok(&["fer", "fer.toml"], &dir);
    let text = read(&dir, "fer/fer.csv");
    assert_eq!(text.lines().count(), 3);
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[5], "3");
        assert_eq!(fields[6], "0");
    }
    ok(&["fer", "fer.toml", "--m-reads", "1", "--out", "fer_b"], &dir);
    let strip_hash = |l: &str| l.rsplit_once(',').unwrap().0.to_string();
    let again = read(&dir, "fer_b/fer.csv");
    assert_eq!(
        strip_hash(text.lines().nth(1).unwrap()),
        strip_hash(again.lines().nth(1).unwrap())
    );
    ok(&["fer", "fer.toml", "--out", "fer_c"], &dir);
    assert_eq!(text, read(&dir, "fer_c/fer.csv"));
}

#[test]
fn failures_exit_nonzero_with_json() {
    let dir = workdir("errors");
    write(&dir, "bad.toml", "params = \"missing.json\"\nreads = \"r.txt\"\n");
    let out = memk(&["decode", "bad.toml"], &dir);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("missing.json"));

    write(&dir, "enc.toml", "payload_bits = 10\n");
    let out = memk(&["encode", "enc.toml"], &dir);
    assert!(!out.status.success());
    assert!(serde_json::from_slice::<serde_json::Value>(&out.stderr).is_ok());

    let out = memk(&["encode", "enc.toml", "--k", "2"], &dir);
    assert!(!out.status.success());
}
