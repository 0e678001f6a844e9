//! BCJR-once achievable information rates under separate decoding.

use rand::seq::index::sample;
use rand::Rng;

use crate::channel::{rows_in, transmit_multi, ChannelParams, ContextRow, PositionClass, RegionTable, ALPHABET};
use crate::decoder::{default_drift_window, AppMatrix, DriftWindow, JointDecoder, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::estimate::DatasetRecord;
use crate::inner::{InnerBlock, InnerCode, Trellis};
use crate::rng::{derive_seed, rng_from_seed, stream_seed};

/// Per-symbol LLRs `L_i(a) = sum_j ln(q_j(a) / q_j(0))` over reads `j`.
pub fn llrs(apps: &[AppMatrix]) -> Result<Vec<Vec<f64>>> {
    let first = apps.first().ok_or(Error::NoReads)?;
    if apps.iter().any(|a| a.q() != first.q() || a.len() != first.len()) {
        return Err(Error::ShapeMismatch("APP matrices differ in shape".into()));
    }
    Ok((0..first.len())
        .map(|i| {
            let mut l = vec![0.0; first.q()];
            for app in apps {
                let row = app.row(i);
                let base = row[0].max(PROB_FLOOR).ln();
                for (la, &p) in l.iter_mut().zip(row) {
                    *la += p.max(PROB_FLOOR).ln() - base;
                }
            }
            l[0] = 0.0;
            l
        })
        .collect())
}

/// `log2 softmax(l)[a]`.
fn log2_posterior(l: &[f64], a: usize) -> f64 {
    let top = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = l.iter().map(|v| (v - top).exp()).sum();
    (l[a] - top - norm.ln()) / std::f64::consts::LN_2
}

/// Where the transmitted sequences and their reads come from.
#[derive(Clone, Copy, Debug)]
pub enum AirSource<'a> {
    /// Payloads drawn uniformly and sent through this channel.
    Model(&'a ChannelParams),
    /// Stored references and their reads. Each reference is interpreted as
    /// the inner encoding of a uniformly drawn payload plus a matching offset.
    Dataset(&'a [DatasetRecord]),
}

impl AirSource<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            AirSource::Model(_) => "model",
            AirSource::Dataset(_) => "dataset",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AirConfig<'a> {
    pub source: AirSource<'a>,
    /// Channel law assumed by the inner decoder.
    pub decoder: &'a ChannelParams,
    pub reads: usize,
    pub inner: InnerCode,
    /// Payload bits per sequence (162 gives 110 nucleotides with the default code).
    pub payload_bits: usize,
    /// Outer alphabet size, 2 or 4.
    pub q: usize,
    pub num_sequences: usize,
    pub seed: u64,
    /// Defaults to the window derived from the decoder's indel rates.
    pub window: Option<DriftWindow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AirResult {
    /// Bits per nucleotide.
    pub rate: f64,
    pub stderr: f64,
    /// Rate estimate of every decoded sequence.
    pub contributions: Vec<f64>,
    /// Index of the sequence behind each entry of `contributions`.
    pub sequence_ids: Vec<usize>,
    /// Sequences dropped because a read left the drift window.
    pub skipped_frames: usize,
    /// Dataset references dropped for having too few reads or the wrong length.
    pub skipped_records: usize,
}

impl AirResult {
    pub fn num_sequences(&self) -> usize {
        self.contributions.len()
    }

    /// Mean and standard error of `self - other` over the sequences decoded in both runs.
    pub fn paired_difference(&self, other: &AirResult) -> Option<(f64, f64)> {
        let theirs: std::collections::HashMap<usize, f64> = other
            .sequence_ids
            .iter()
            .copied()
            .zip(other.contributions.iter().copied())
            .collect();
        let diffs: Vec<f64> = self
            .sequence_ids
            .iter()
            .zip(&self.contributions)
            .filter_map(|(id, c)| theirs.get(id).map(|o| c - o))
            .collect();
        if diffs.len() < 2 {
            return None;
        }
        Some(mean_and_stderr(&diffs))
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimates the BCJR-once rate in bits per nucleotide.
pub fn bcjr_once_rate(cfg: &AirConfig<'_>) -> Result<AirResult> {
    if cfg.reads == 0 {
        return Err(Error::NoReads);
    }
    if cfg.num_sequences == 0 {
        return Err(Error::Config("need at least one sequence".into()));
    }
    if cfg.q != 2 && cfg.q != 4 {
        return Err(Error::Config(format!("outer alphabet size {} must be 2 or 4", cfg.q)));
    }
    let bps = if cfg.q == 4 { 2 } else { 1 };
    if !cfg.payload_bits.is_multiple_of(cfg.inner.period()) || !cfg.payload_bits.is_multiple_of(bps) {
        return Err(Error::PayloadLength {
            len: cfg.payload_bits,
            period: cfg.inner.period(),
        });
    }
    let trellis = Trellis::new(&cfg.inner, cfg.payload_bits)?;
    let n = trellis.channel_len();
    let symbols = cfg.payload_bits / bps;
    let symbols_per_nt = symbols as f64 / (n - cfg.inner.tail()) as f64;
    let log_q = (cfg.q as f64).log2();
    let window = match cfg.window {
        Some(w) => w,
        None => default_drift_window(n, cfg.decoder)?,
    };
    let priors = vec![0.5; cfg.payload_bits];

    let mut contributions = Vec::with_capacity(cfg.num_sequences);
    let mut sequence_ids = Vec::with_capacity(cfg.num_sequences);
    let mut skipped_frames = 0;
    let mut skipped_records = 0;

    let decode_one = |block: &InnerBlock, payload: &[u8], reads: &[&[u8]]| -> Result<Option<f64>> {
        let dec = JointDecoder::new(block, cfg.decoder, window)?;
        let mut apps = Vec::with_capacity(reads.len());
        for y in reads {
            match dec.decode(y, &priors, bps) {
                Ok(out) => apps.push(out.app),
                Err(Error::WindowViolation { .. } | Error::ZeroLikelihood) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        let l = llrs(&apps)?;
        let info: f64 = payload
            .chunks(bps)
            .zip(&l)
            .map(|(bits, li)| {
                let w = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                log2_posterior(li, w)
            })
            .sum();
        Ok(Some(symbols_per_nt * (log_q + info / symbols as f64)))
    };

    match cfg.source {
        AirSource::Model(truth) => {
            for s in 0..cfg.num_sequences {
                let seq_seed = derive_seed(cfg.seed, s as u64);
                let mut rng = rng_from_seed(stream_seed(seq_seed, "payload"));
                let payload: Vec<u8> = (0..cfg.payload_bits).map(|_| rng.random_range(0..2)).collect();
                let block = InnerBlock::new(&cfg.inner, cfg.payload_bits, s)?;
                let x = block.encode(&payload)?;
                let reads = transmit_multi(&x, truth, cfg.reads, stream_seed(seq_seed, "reads"))?;
                let views: Vec<&[u8]> = reads.iter().map(|(y, _)| y.as_slice()).collect();
                match decode_one(&block, &payload, &views)? {
                    Some(c) => {
                        contributions.push(c);
                        sequence_ids.push(s);
                    }
                    None => skipped_frames += 1,
                }
            }
        }
        AirSource::Dataset(records) => {
            if records.is_empty() {
                return Err(Error::EmptyDataset);
            }
            for (s, rec) in records.iter().enumerate() {
                if contributions.len() + skipped_frames >= cfg.num_sequences {
                    break;
                }
                if rec.reads.len() < cfg.reads || rec.x.len() != n {
                    skipped_records += 1;
                    continue;
                }
                let seq_seed = derive_seed(cfg.seed, s as u64);
                let mut rng = rng_from_seed(stream_seed(seq_seed, "payload"));
                let payload: Vec<u8> = (0..cfg.payload_bits).map(|_| rng.random_range(0..2)).collect();
                let raw = trellis.encode(&payload);
                let offset: Vec<u8> = rec.x.iter().zip(&raw).map(|(&x, &r)| (x + 4 - r) & 3).collect();
                let block = InnerBlock::with_offset(trellis.clone(), offset, cfg.payload_bits)?;
                let picks = sample(&mut rng, rec.reads.len(), cfg.reads);
                let views: Vec<&[u8]> = picks.iter().map(|j| rec.reads[j].as_slice()).collect();
                match decode_one(&block, &payload, &views)? {
                    Some(c) => {
                        contributions.push(c);
                        sequence_ids.push(s);
                    }
                    None => skipped_frames += 1,
                }
            }
        }
    }
    if contributions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (rate, stderr) = mean_and_stderr(&contributions);
    Ok(AirResult {
        rate,
        stderr,
        contributions,
        sequence_ids,
        skipped_frames,
        skipped_records,
    })
}

/// Middle-region marginals under context weights `weights` (length `4^k`).
struct Marginal {
    event: [f64; 4],
    ins_len: Vec<f64>,
    /// Substitution distribution per own symbol.
    sub: [[f64; 4]; 4],
}

fn marginalize(params: &ChannelParams, weights: &[f64]) -> Marginal {
    let middle = params.region(PositionClass::Middle);
    let total_w: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|v| v / total_w).collect();
    let mut transition = [[0.0; 4]; 4];
    for (row, &wc) in middle.contexts.iter().zip(&w) {
        for (prev, probs) in row.event.iter().enumerate() {
            for z in 0..4 {
                transition[prev][z] += wc * probs[z];
            }
        }
    }
    let mut pi = [0.25; 4];
    for _ in 0..5000 {
        let mut next = [0.0; 4];
        for prev in 0..4 {
            for z in 0..4 {
                next[z] += pi[prev] * transition[prev][z];
            }
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < 1e-16 {
            break;
        }
    }
    let mut event = [0.0; 4];
    let mut ins_len = vec![0.0; params.l_max - 1];
    let mut sub = [[0.0; 4]; 4];
    let mut ins_mass = 0.0;
    let mut sub_mass = [0.0; 4];
    for (ctx, (row, &wc)) in middle.contexts.iter().zip(&w).enumerate() {
        let mut p_ctx = [0.0; 4];
        for (prev, probs) in row.event.iter().enumerate() {
            for z in 0..4 {
                p_ctx[z] += pi[prev] * probs[z];
            }
        }
        for z in 0..4 {
            event[z] += wc * p_ctx[z];
        }
        let wi = wc * p_ctx[0];
        ins_mass += wi;
        for (acc, p) in ins_len.iter_mut().zip(&row.ins_len) {
            *acc += wi * p;
        }
        let own = ctx % ALPHABET;
        let ws = wc * p_ctx[2];
        sub_mass[own] += ws;
        for (acc, p) in sub[own].iter_mut().zip(&row.sub) {
            *acc += ws * p;
        }
    }
    let norm = |v: &mut [f64], mass: f64, fallback: &dyn Fn(usize) -> f64| {
        if mass > 0.0 {
            v.iter_mut().for_each(|p| *p /= mass);
        } else {
            v.iter_mut().enumerate().for_each(|(i, p)| *p = fallback(i));
        }
    };
    let l = ins_len.len() as f64;
    norm(&mut ins_len, ins_mass, &|_| 1.0 / l);
    for own in 0..4 {
        norm(&mut sub[own], sub_mass[own], &|a| {
            if a == own {
                0.0
            } else {
                1.0 / 3.0
            }
        });
    }
    let s: f64 = event.iter().sum();
    event.iter_mut().for_each(|p| *p /= s);
    Marginal { event, ins_len, sub }
}

/// Tables of a decoder that assumes position-, context- and memory-free
/// errors: every row becomes the middle-region marginal, with contexts
/// weighted uniformly and previous events by their stationary frequencies.
pub fn iid_baseline_params(params: &ChannelParams) -> Result<ChannelParams> {
    let n = ChannelParams::context_count(params.k, PositionClass::Middle);
    iid_baseline_params_weighted(params, &vec![1.0; n])
}

/// As [`iid_baseline_params`] with explicit middle-context weights, e.g.
/// empirical kmer frequencies.
pub fn iid_baseline_params_weighted(params: &ChannelParams, weights: &[f64]) -> Result<ChannelParams> {
    params.check()?;
    let n = ChannelParams::context_count(params.k, PositionClass::Middle);
    if weights.len() != n || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ShapeMismatch(format!("need {n} non-negative context weights")));
    }
    let m = marginalize(params, weights);
    let regions = PositionClass::ALL.map(|region| RegionTable {
        contexts: (0..ChannelParams::context_count(params.k, region))
            .map(|ctx| ContextRow {
                event: vec![m.event; rows_in(region)],
                ins_len: m.ins_len.clone(),
                sub: m.sub[ctx % ALPHABET],
            })
            .collect(),
    });
    ChannelParams::new(params.k, params.l_max, regions)
}
