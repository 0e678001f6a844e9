//! Subcommand implementations.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::Rng;
use serde::Serialize;

use memk::{
    bcjr_once_rate, combine_separate, default_drift_window, derive_seed, estimate_with, ingest, read_sequences,
    rng_from_seed, simulate_fer, stream_seed, table1, transmit_multi, AirConfig, AirSource, AppMatrix, ChannelParams,
    DriftWindow, Error as CoreError, EstimateOptions, EventKind, FerConfig, InnerBlock, JointDecoder, LdpcCode, NucSeq,
    ParityCheck, PositionClass, SimRng,
};

use crate::config::{
    config_hash, AirExperiment, DecodeConfig, EncodeConfig, EstimateConfig, FerExperiment, Loaded, SimulateConfig,
    SourceKind,
};

fn random_bits(rng: &mut SimRng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn write_rows<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_lines<'a>(path: &Path, lines: impl IntoIterator<Item = (&'a str, String)>) -> Result<()> {
    let mut f =
        std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for (id, body) in lines {
        writeln!(f, "{id} {body}")?;
    }
    f.flush()?;
    Ok(())
}

fn load_params(path: &Path) -> Result<ChannelParams> {
    ChannelParams::load(path).with_context(|| format!("loading channel parameters {}", path.display()))
}

fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

fn parse_bits(text: &str) -> Result<Vec<u8>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => bail!("payload character {c:?} is not 0 or 1"),
        })
        .collect()
}

/// Block index encoded in a `blk<index>` identifier.
pub fn block_index(id: &str) -> Result<usize> {
    id.strip_prefix("blk")
        .and_then(|n| n.parse().ok())
        .with_context(|| format!("cannot infer block index from id {id:?}; expected `blk<index>`"))
}

pub fn block_id(index: usize) -> String {
    format!("blk{index}")
}

fn window_for(n: usize, params: &ChannelParams, width: Option<u32>) -> Result<DriftWindow> {
    match width {
        Some(w) => Ok(DriftWindow::symmetric(w)),
        None => Ok(default_drift_window(n, params)?),
    }
}

fn prev_label(prev: Option<EventKind>) -> String {
    prev.map(|p| format!("{p:?}")).unwrap_or_else(|| "-".into())
}

#[derive(Serialize)]
struct EstimateRow {
    k: usize,
    region: &'static str,
    transitions: u64,
    contexts_seen: usize,
    contexts_total: usize,
    fallback_rows: usize,
    records: usize,
    reads: usize,
    params_file: String,
    seed: u64,
    config_sha256: String,
}

#[derive(Serialize)]
struct FallbackCsvRow {
    k: usize,
    region: &'static str,
    context: String,
    table: &'static str,
    prev: String,
    seed: u64,
    config_sha256: String,
}

/// Estimates one parameter file per requested `k`.
pub fn estimate(cfg: &Loaded<EstimateConfig>) -> Result<Vec<PathBuf>> {
    let c = &cfg.config;
    let hash = config_hash(c)?;
    let records = ingest(cfg.path(&c.refs), cfg.path(&c.reads))?;
    let out = cfg.path(&c.out);
    create_dir(&out)?;
    let mut rows = Vec::new();
    let mut fallback_rows = Vec::new();
    let mut written = Vec::new();
    for &k in &c.k {
        let opts = EstimateOptions {
            k,
            l_max: c.l_max,
            seed: c.seed,
            single_insertion: c.single_insertion.into(),
        };
        let (params, summary) = estimate_with(&records, &opts).with_context(|| format!("estimating k = {k}"))?;
        let file = out.join(format!("params_k{k}.json"));
        params.save(&file)?;
        for region in PositionClass::ALL {
            let i = region.index();
            rows.push(EstimateRow {
                k,
                region: region.name(),
                transitions: summary.transitions[i],
                contexts_seen: summary.contexts_seen[i],
                contexts_total: summary.contexts_total[i],
                fallback_rows: summary.fallbacks.iter().filter(|f| f.region == region).count(),
                records: summary.records,
                reads: summary.reads,
                params_file: file.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                seed: c.seed,
                config_sha256: hash.clone(),
            });
        }
        for f in &summary.fallbacks {
            fallback_rows.push(FallbackCsvRow {
                k,
                region: f.region.name(),
                context: f.context.clone(),
                table: f.table,
                prev: prev_label(f.prev),
                seed: c.seed,
                config_sha256: hash.clone(),
            });
        }
        written.push(file);
    }
    write_rows(&out.join("estimate_summary.csv"), &rows)?;
    write_rows(&out.join("estimate_fallbacks.csv"), &fallback_rows)?;
    Ok(written)
}

#[derive(Serialize)]
struct SimulateRow {
    ref_id: String,
    read: usize,
    input_len: usize,
    output_len: usize,
    insertions: usize,
    deletions: usize,
    substitutions: usize,
    seed: u64,
    config_sha256: String,
}

/// Passes references through the channel, writing `refs.txt`, `reads.txt` and `simulate.csv`.
pub fn simulate(cfg: &Loaded<SimulateConfig>) -> Result<()> {
    let c = &cfg.config;
    let hash = config_hash(c)?;
    let params = load_params(&cfg.path(&c.params))?;
    let refs: Vec<(String, NucSeq)> = match (&c.refs, &c.random) {
        (Some(path), _) => read_sequences(cfg.path(path))?,
        (None, Some(r)) => {
            let mut rng = rng_from_seed(stream_seed(c.seed, "refs"));
            (0..r.count)
                .map(|i| {
                    let bits = random_bits(&mut rng, 2 * r.length);
                    let symbols = bits.chunks(2).map(|p| (p[0] << 1) | p[1]).collect();
                    Ok((format!("ref{i}"), NucSeq::new(symbols)?))
                })
                .collect::<Result<_>>()?
        }
        (None, None) => bail!("no references configured"),
    };
    ensure!(!refs.is_empty(), "reference set is empty");
    let reads_seed = stream_seed(c.seed, "reads");
    let mut reads = Vec::new();
    let mut rows = Vec::new();
    for (i, (id, x)) in refs.iter().enumerate() {
        let out = transmit_multi(x, &params, c.reads, derive_seed(reads_seed, i as u64))
            .with_context(|| format!("transmitting {id}"))?;
        for (j, (y, trace)) in out.into_iter().enumerate() {
            rows.push(SimulateRow {
                ref_id: id.clone(),
                read: j,
                input_len: x.len(),
                output_len: y.len(),
                insertions: trace.count(EventKind::Ins),
                deletions: trace.count(EventKind::Del),
                substitutions: trace.count(EventKind::Sub),
                seed: c.seed,
                config_sha256: hash.clone(),
            });
            reads.push((id.as_str(), y.to_string()));
        }
    }
    let out = cfg.path(&c.out);
    create_dir(&out)?;
    write_lines(
        &out.join("refs.txt"),
        refs.iter().map(|(id, x)| (id.as_str(), x.to_string())),
    )?;
    write_lines(&out.join("reads.txt"), reads)?;
    write_rows(&out.join("simulate.csv"), &rows)
}

#[derive(Serialize)]
struct EncodeRow {
    ref_id: String,
    block: usize,
    payload_bits: usize,
    channel_len: usize,
    inner_code: &'static str,
    seed: u64,
    config_sha256: String,
}

/// Encodes payload blocks, writing `encoded.txt`, `payloads.txt` and `encode.csv`.
pub fn encode(cfg: &Loaded<EncodeConfig>) -> Result<()> {
    let c = &cfg.config;
    let hash = config_hash(c)?;
    let period = c.inner.period();
    ensure!(
        c.payload_bits > 0 && c.payload_bits.is_multiple_of(period),
        "payload_bits = {} must be a positive multiple of the inner period {period}",
        c.payload_bits
    );
    let payloads: Vec<Vec<u8>> = if c.payloads.is_empty() {
        let seed = stream_seed(c.seed, "payload");
        (0..c.blocks)
            .map(|i| random_bits(&mut rng_from_seed(derive_seed(seed, i as u64)), c.payload_bits))
            .collect()
    } else {
        c.payloads
            .iter()
            .map(|p| {
                let bits = parse_bits(p)?;
                ensure!(
                    bits.len() == c.payload_bits,
                    "payload has {} bits, expected {}",
                    bits.len(),
                    c.payload_bits
                );
                Ok(bits)
            })
            .collect::<Result<_>>()?
    };
    let mut encoded = Vec::new();
    let mut rows = Vec::new();
    for (i, bits) in payloads.iter().enumerate() {
        let x = c.inner.encode(bits, i)?;
        rows.push(EncodeRow {
            ref_id: block_id(i),
            block: i,
            payload_bits: bits.len(),
            channel_len: x.len(),
            inner_code: c.inner.name(),
            seed: c.seed,
            config_sha256: hash.clone(),
        });
        encoded.push(x.to_string());
    }
    let ids: Vec<String> = (0..payloads.len()).map(block_id).collect();
    let out = cfg.path(&c.out);
    create_dir(&out)?;
    write_lines(&out.join("encoded.txt"), ids.iter().map(String::as_str).zip(encoded))?;
    write_lines(
        &out.join("payloads.txt"),
        ids.iter()
            .map(String::as_str)
            .zip(payloads.iter().map(|p| bits_to_string(p))),
    )?;
    write_rows(&out.join("encode.csv"), &rows)
}

#[derive(Serialize)]
struct DecodeRow {
    ref_id: String,
    reads: usize,
    reads_used: usize,
    window_violations: usize,
    zero_likelihood: usize,
    log_likelihood: f64,
    seed: u64,
    config_sha256: String,
}

/// Decodes every block of a reads file, writing `decoded.txt`, `app.csv` and `decode.csv`.
pub fn decode(cfg: &Loaded<DecodeConfig>) -> Result<()> {
    let c = &cfg.config;
    let hash = config_hash(c)?;
    let params = load_params(&cfg.path(&c.params))?;
    let bps = if c.q == 4 { 2 } else { 1 };
    ensure!(
        c.payload_bits > 0 && c.payload_bits.is_multiple_of(c.inner.period()) && c.payload_bits.is_multiple_of(bps),
        "payload_bits = {} must be a positive multiple of the inner period {} and of {bps}",
        c.payload_bits,
        c.inner.period()
    );
    let mut order = Vec::new();
    let mut grouped: HashMap<String, Vec<NucSeq>> = HashMap::new();
    for (id, y) in read_sequences(cfg.path(&c.reads))? {
        if !grouped.contains_key(&id) {
            block_index(&id)?;
            order.push(id.clone());
        }
        grouped.entry(id).or_default().push(y);
    }
    ensure!(!order.is_empty(), "reads file is empty");

    let priors = vec![0.5; c.payload_bits];
    let mut decoded = Vec::new();
    let mut rows = Vec::new();
    let out = cfg.path(&c.out);
    create_dir(&out)?;
    let mut app_out = csv_writer(&out.join("app.csv"))?;
    let mut header = vec!["ref_id".to_string(), "symbol".to_string()];
    header.extend((0..c.q).map(|a| format!("p{a}")));
    header.extend(["seed".to_string(), "config_sha256".to_string()]);
    app_out.write_record(&header)?;

    for id in &order {
        let index = block_index(id)?;
        let block = InnerBlock::new(&c.inner, c.payload_bits, index)?;
        let window = window_for(block.channel_len(), &params, c.drift_window)?;
        let decoder = JointDecoder::new(&block, &params, window)?;
        let reads = &grouped[id];
        let take = c.max_reads.unwrap_or(reads.len()).min(reads.len());
        let mut apps = Vec::new();
        let (mut violations, mut zero, mut ll) = (0, 0, 0.0);
        for y in &reads[..take] {
            match decoder.decode(y.as_slice(), &priors, bps) {
                Ok(o) => {
                    ll += o.log_likelihood;
                    apps.push(o.app);
                }
                Err(CoreError::WindowViolation { .. }) => violations += 1,
                Err(CoreError::ZeroLikelihood) => zero += 1,
                Err(e) => return Err(e).with_context(|| format!("decoding {id}")),
            }
        }
        let symbols = c.payload_bits / bps;
        let combined = if apps.is_empty() {
            AppMatrix::uniform(symbols, c.q)
        } else {
            combine_separate(&apps, &AppMatrix::uniform(symbols, c.q))?
        };
        for (j, row) in combined.rows().enumerate() {
            let mut rec = vec![id.clone(), j.to_string()];
            rec.extend(row.iter().map(|p| format!("{p:.17e}")));
            rec.extend([c.seed.to_string(), hash.clone()]);
            app_out.write_record(&rec)?;
        }
        let bits: Vec<u8> = combined
            .hard_decisions()
            .into_iter()
            .flat_map(|a| (0..bps).rev().map(move |b| ((a >> b) & 1) as u8))
            .collect();
        decoded.push(bits_to_string(&bits));
        rows.push(DecodeRow {
            ref_id: id.clone(),
            reads: reads.len(),
            reads_used: apps.len(),
            window_violations: violations,
            zero_likelihood: zero,
            log_likelihood: ll,
            seed: c.seed,
            config_sha256: hash.clone(),
        });
    }
    app_out.flush()?;
    write_lines(&out.join("decoded.txt"), order.iter().map(String::as_str).zip(decoded))?;
    write_rows(&out.join("decode.csv"), &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AirRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub decoder_k: usize,
    pub decoder: String,
    pub source: &'static str,
    pub inner_code: &'static str,
    pub rate_bits_per_symbol: Option<f64>,
    pub stderr: Option<f64>,
    pub num_sequences: usize,
    pub skipped_frames: usize,
    pub status: String,
    pub seed: u64,
    pub config_sha256: String,
}

/// Sweeps `(M, decoder)` and writes `air.csv`; failing cells become error rows.
pub fn air(cfg: &Loaded<AirExperiment>) -> Result<Vec<AirRow>> {
    let c = &cfg.config;
    let hash = config_hash(c)?;
    let mut decoders = Vec::new();
    for path in &c.decoders {
        let params = load_params(&cfg.path(path))?;
        if c.decoder_k.is_none_or(|k| k == params.k) {
            decoders.push((path.display().to_string(), params));
        }
    }
    if let Some(k) = c.decoder_k {
        ensure!(!decoders.is_empty(), "no decoder parameter file has k = {k}");
    }
    let truth = match c.source {
        SourceKind::Model => Some(load_params(&cfg.path(c.truth.as_ref().context("missing truth")?))?),
        SourceKind::Dataset => None,
    };
    let records = match c.source {
        SourceKind::Dataset => ingest(
            cfg.path(c.refs.as_ref().context("missing refs")?),
            cfg.path(c.reads.as_ref().context("missing reads")?),
        )?,
        SourceKind::Model => Vec::new(),
    };
    let channel_len = c
        .inner
        .channel_len(c.payload_bits.div_ceil(c.inner.period()) * c.inner.period());
    let mut rows = Vec::new();
    for &m in &c.m_reads {
        for (name, dec) in &decoders {
            let source = match &truth {
                Some(t) => AirSource::Model(t),
                None => AirSource::Dataset(&records),
            };
            let result = window_for(channel_len, dec, c.drift_window).and_then(|window| {
                Ok(bcjr_once_rate(&AirConfig {
                    source,
                    decoder: dec,
                    reads: m,
                    inner: c.inner.clone(),
                    payload_bits: c.payload_bits,
                    q: c.q,
                    num_sequences: c.num_sequences,
                    seed: c.seed,
                    window: Some(window),
                })?)
            });
            let mut row = AirRow {
                m,
                decoder_k: dec.k,
                decoder: name.clone(),
                source: source.name(),
                inner_code: c.inner.name(),
                rate_bits_per_symbol: None,
                stderr: None,
                num_sequences: 0,
                skipped_frames: 0,
                status: "ok".into(),
                seed: c.seed,
                config_sha256: hash.clone(),
            };
            match result {
                Ok(r) => {
                    row.rate_bits_per_symbol = Some(r.rate);
                    row.stderr = Some(r.stderr);
                    row.num_sequences = r.num_sequences();
                    row.skipped_frames = r.skipped_frames;
                }
                Err(e) => row.status = format!("error: {e:#}"),
            }
            rows.push(row);
        }
    }
    let out = cfg.path(&c.out);
    create_dir(&out)?;
    write_rows(&out.join("air.csv"), &rows)?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FerRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub decoder_k: usize,
    pub n_bits: usize,
    pub k_bits: usize,
    pub q: usize,
    pub frames: usize,
    pub frame_errors: usize,
    pub fer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub window_violations: usize,
    pub erased_blocks: usize,
    pub bp_failures: usize,
    pub info_bit_errors: usize,
    pub seed: u64,
    pub config_sha256: String,
}

/// Builds the outer code described by a FER config.
pub fn outer_code(cfg: &Loaded<FerExperiment>) -> Result<LdpcCode> {
    let o = &cfg.config.outer;
    let code = match (o.design, &o.parity_check) {
        (Some(m), _) => {
            let (proto, _) = table1(m)?;
            let z = o.lift.context("`outer.design` needs `outer.lift`")?;
            LdpcCode::from_protograph(&proto, z, o.q, o.seed)?
        }
        (None, Some(path)) => {
            let path = cfg.path(path);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            LdpcCode::new(ParityCheck::from_text(&text)?, o.q)?
        }
        (None, None) => bail!("no outer code configured"),
    };
    Ok(code)
}

/// Runs the end-to-end simulation for every `M` and writes `fer.csv`.
pub fn fer(cfg: &Loaded<FerExperiment>) -> Result<Vec<FerRow>> {
    let c = &cfg.config;
    let hash = config_hash(c)?;
    let channel = load_params(&cfg.path(&c.channel))?;
    let decoder = match &c.decoder {
        Some(p) => load_params(&cfg.path(p))?,
        None => channel.clone(),
    };
    let code = outer_code(cfg)?;
    let mut rows = Vec::new();
    for &m in &c.m_reads {
        let window = c.drift_window.map(DriftWindow::symmetric);
        let r = simulate_fer(FerConfig {
            code: &code,
            inner: c.inner.clone(),
            block_payload_bits: c.block_payload_bits,
            channel: &channel,
            decoder: &decoder,
            reads: m,
            window,
            bp: c.bp,
            max_frames: c.max_frames,
            target_errors: c.target_errors,
            seed: c.seed,
        })
        .with_context(|| format!("simulating M = {m}"))?;
        rows.push(FerRow {
            m,
            decoder_k: decoder.k,
            n_bits: code.n_bits(),
            k_bits: code.k_bits(),
            q: code.q(),
            frames: r.frames,
            frame_errors: r.frame_errors,
            fer: r.fer,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            window_violations: r.window_violations,
            erased_blocks: r.erased_blocks,
            bp_failures: r.bp_failures,
            info_bit_errors: r.info_bit_errors,
            seed: c.seed,
            config_sha256: hash.clone(),
        });
    }
    let out = cfg.path(&c.out);
    create_dir(&out)?;
    write_rows(&out.join("fer.csv"), &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_ids_round_trip() {
        for i in [0, 7, 123] {
            assert_eq!(block_index(&block_id(i)).unwrap(), i);
        }
        assert!(block_index("ref3").is_err());
        assert!(block_index("blk").is_err());
    }

    #[test]
    fn bit_strings() {
        assert_eq!(parse_bits("0110").unwrap(), vec![0, 1, 1, 0]);
        assert!(parse_bits("012").is_err());
        assert_eq!(bits_to_string(&[1, 0, 1]), "101");
    }
}
