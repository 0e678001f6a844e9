//! Inner code: a punctured rate-1/2 binary convolutional code whose surviving
//! bits are packed pairwise into nucleotides, plus a pseudo-random offset.
//!
//! The default code has generators `[5, 7]` (octal), two memory elements and
//! puncturing matrix `(1 0 1; 1 1 0)`, so every 3 input bits become 2
//! nucleotides. Blocks are terminated with two unpunctured zero-input steps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::NucSeq;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Per-step puncturing: whether `(v0, v1)` survive.
pub type PunctureColumn = [bool; 2];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvCodeSpec {
    /// Generator taps, most significant bit on the current input.
    pub generators: [u32; 2],
    /// Number of binary memory elements.
    pub memory: usize,
    /// One column per time step of the puncturing period.
    pub puncture: Vec<PunctureColumn>,
    /// Seed of the additive offset sequence; `None` disables the offset.
    pub offset_seed: Option<u64>,
}

impl Default for ConvCodeSpec {
    fn default() -> Self {
        ConvCodeSpec {
            generators: [0o5, 0o7],
            memory: 2,
            puncture: vec![[true, true], [false, true], [true, false]],
            offset_seed: None,
        }
    }
}

/// Groups of consecutive time steps that produce exactly one nucleotide.
fn symbol_groups(puncture: &[PunctureColumn]) -> Option<Vec<usize>> {
    let mut groups = Vec::new();
    let mut steps = 0;
    let mut kept = 0;
    for col in puncture {
        steps += 1;
        kept += col.iter().filter(|&&b| b).count();
        match kept {
            0 | 1 => {}
            2 => {
                groups.push(steps);
                steps = 0;
                kept = 0;
            }
            _ => return None,
        }
    }
    if kept != 0 {
        return None;
    }
    if steps > 0 {
        // Trailing steps without survivors ride along with the last symbol.
        *groups.last_mut()? += steps;
    }
    Some(groups)
}

impl ConvCodeSpec {
    pub fn with_offset(mut self, seed: u64) -> Self {
        self.offset_seed = Some(seed);
        self
    }

    pub fn period(&self) -> usize {
        self.puncture.len()
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || self.memory > 10 {
            return Err(Error::InvalidCode(format!("memory {} outside 1..=10", self.memory)));
        }
        let limit = 1u32 << (self.memory + 1);
        if self.generators.iter().any(|&g| g == 0 || g >= limit) {
            return Err(Error::InvalidCode(format!(
                "generators {:o}/{:o} do not fit memory {}",
                self.generators[0], self.generators[1], self.memory
            )));
        }
        if self.puncture.is_empty() {
            return Err(Error::InvalidCode("empty puncturing pattern".into()));
        }
        match symbol_groups(&self.puncture) {
            Some(groups) if groups.iter().all(|&g| g <= 4) => Ok(()),
            _ => Err(Error::InvalidCode(
                "puncturing pattern must keep whole pairs of bits per group of at most 4 steps".into(),
            )),
        }
    }

    /// One encoder step. The state holds `(u_{t-1}, ..., u_{t-memory})`,
    /// most recent input in the most significant bit.
    #[inline]
    pub fn step(&self, state: usize, bit: u8) -> (usize, u8, u8) {
        let reg = ((bit as u32) << self.memory) | state as u32;
        let v0 = ((reg & self.generators[0]).count_ones() & 1) as u8;
        let v1 = ((reg & self.generators[1]).count_ones() & 1) as u8;
        let next = (reg >> 1) as usize;
        (next, v0, v1)
    }

    /// Input bits per nucleotide-producing group within one period.
    pub fn groups(&self) -> Vec<usize> {
        symbol_groups(&self.puncture).unwrap_or_default()
    }

    /// Nucleotides produced per puncturing period.
    pub fn symbols_per_period(&self) -> usize {
        self.groups().len()
    }

    /// Inner rate in bits per nucleotide, excluding termination.
    pub fn rate(&self) -> f64 {
        self.period() as f64 / self.symbols_per_period() as f64
    }
}

/// One step of the default `[5, 7]` encoder.
pub fn conv_step(state: usize, bit: u8) -> (usize, u8, u8) {
    ConvCodeSpec::default().step(state, bit)
}

/// Encodes a payload without offset. Returns the nucleotides and the final
/// encoder state (always zero after termination).
pub fn encode_block_raw(bits: &[u8], spec: &ConvCodeSpec) -> Result<(Vec<u8>, usize)> {
    spec.validate()?;
    let period = spec.period();
    if !bits.len().is_multiple_of(period) {
        return Err(Error::PayloadLength {
            len: bits.len(),
            period,
        });
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::InvalidCode("payload bits must be 0 or 1".into()));
    }
    let mut out = Vec::with_capacity(bits.len() / period * spec.symbols_per_period() + spec.memory);
    let mut state = 0;
    let mut survivors: Vec<u8> = Vec::with_capacity(4);
    for (t, &bit) in bits.iter().enumerate() {
        let (next, v0, v1) = spec.step(state, bit);
        state = next;
        let keep = spec.puncture[t % period];
        if keep[0] {
            survivors.push(v0);
        }
        if keep[1] {
            survivors.push(v1);
        }
        if survivors.len() == 2 {
            out.push((survivors[0] << 1) | survivors[1]);
            survivors.clear();
        }
    }
    debug_assert!(survivors.is_empty());
    for _ in 0..spec.memory {
        let (next, v0, v1) = spec.step(state, 0);
        state = next;
        out.push((v0 << 1) | v1);
    }
    Ok((out, state))
}

/// Encodes one block and adds the block-0 offset of `spec`.
pub fn encode_block(bits: &[u8], spec: &ConvCodeSpec) -> Result<NucSeq> {
    let (raw, _) = encode_block_raw(bits, spec)?;
    let offset = block_offset(spec.offset_seed, 0, raw.len());
    Ok(add_offset(&raw, &offset))
}

/// Pseudo-random nucleotides from a ChaCha8 stream seeded with `seed`.
pub fn offset_sequence(seed: u64, len: usize) -> NucSeq {
    let mut rng = rng_from_seed(seed);
    let v = (0..len).map(|_| rng.random_range(0..4u8)).collect();
    NucSeq::new(v).expect("symbols in range")
}

/// Offset of block `index`; all zeros when no seed is configured.
pub fn block_offset(seed: Option<u64>, index: usize, len: usize) -> NucSeq {
    match seed {
        Some(s) => offset_sequence(derive_seed(s, index as u64), len),
        None => NucSeq::new(vec![0; len]).expect("zeros"),
    }
}

pub fn add_offset(word: &[u8], offset: &[u8]) -> NucSeq {
    assert_eq!(word.len(), offset.len(), "offset length mismatch");
    NucSeq::new(word.iter().zip(offset).map(|(&a, &b)| (a + b) & 3).collect()).expect("symbols in range")
}

pub fn remove_offset(word: &[u8], offset: &[u8]) -> NucSeq {
    assert_eq!(word.len(), offset.len(), "offset length mismatch");
    NucSeq::new(word.iter().zip(offset).map(|(&a, &b)| (a + 4 - b) & 3).collect()).expect("symbols in range")
}

/// The inner code in front of the channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InnerCode {
    /// Payload bits are mapped two per nucleotide.
    Uncoded {
        offset_seed: Option<u64>,
    },
    Convolutional(ConvCodeSpec),
}

impl Default for InnerCode {
    fn default() -> Self {
        InnerCode::Convolutional(ConvCodeSpec::default())
    }
}

impl InnerCode {
    pub fn offset_seed(&self) -> Option<u64> {
        match self {
            InnerCode::Uncoded { offset_seed } => *offset_seed,
            InnerCode::Convolutional(spec) => spec.offset_seed,
        }
    }

    /// Payload bits per encoding period.
    pub fn period(&self) -> usize {
        match self {
            InnerCode::Uncoded { .. } => 2,
            InnerCode::Convolutional(spec) => spec.period(),
        }
    }

    /// Termination nucleotides appended to every block.
    pub fn tail(&self) -> usize {
        match self {
            InnerCode::Uncoded { .. } => 0,
            InnerCode::Convolutional(spec) => spec.memory,
        }
    }

    /// Bits per nucleotide, excluding termination.
    pub fn rate(&self) -> f64 {
        match self {
            InnerCode::Uncoded { .. } => 2.0,
            InnerCode::Convolutional(spec) => spec.rate(),
        }
    }

    /// Channel length of a block carrying `bits` payload bits (already a
    /// multiple of the period).
    pub fn channel_len(&self, bits: usize) -> usize {
        match self {
            InnerCode::Uncoded { .. } => bits / 2,
            InnerCode::Convolutional(spec) => bits / spec.period() * spec.symbols_per_period() + spec.memory,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InnerCode::Uncoded { .. } => "none",
            InnerCode::Convolutional(_) => "conv57",
        }
    }

    /// Encodes block `index` (payload length a multiple of the period) and
    /// applies that block's offset.
    pub fn encode(&self, bits: &[u8], index: usize) -> Result<NucSeq> {
        let raw = self.encode_raw(bits)?;
        let offset = block_offset(self.offset_seed(), index, raw.len());
        Ok(add_offset(&raw, &offset))
    }

    pub fn encode_raw(&self, bits: &[u8]) -> Result<Vec<u8>> {
        match self {
            InnerCode::Uncoded { .. } => {
                if !bits.len().is_multiple_of(2) {
                    return Err(Error::PayloadLength {
                        len: bits.len(),
                        period: 2,
                    });
                }
                if bits.iter().any(|&b| b > 1) {
                    return Err(Error::InvalidCode("payload bits must be 0 or 1".into()));
                }
                Ok(bits.chunks(2).map(|p| (p[0] << 1) | p[1]).collect())
            }
            InnerCode::Convolutional(spec) => encode_block_raw(bits, spec).map(|(raw, _)| raw),
        }
    }
}

/// Branch table of one trellis section type, indexed `state << bits | input`.
#[derive(Clone, Debug)]
pub struct SectionTable {
    pub input_bits: usize,
    pub next: Vec<u16>,
    pub symbol: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Section {
    pub table: usize,
    /// Index of the first payload bit consumed by this section.
    pub first_bit: usize,
}

/// Symbol-level trellis of an inner code over one block: one section per
/// nucleotide, each consuming a few payload bits (first bit most significant
/// in the section input value).
#[derive(Clone, Debug)]
pub struct Trellis {
    pub num_states: usize,
    pub tables: Vec<SectionTable>,
    pub sections: Vec<Section>,
    pub payload_bits: usize,
    /// Whether the block ends in the zero state.
    pub terminated: bool,
}

impl Trellis {
    pub fn new(code: &InnerCode, payload_bits: usize) -> Result<Self> {
        let period = code.period();
        if !payload_bits.is_multiple_of(period) {
            return Err(Error::PayloadLength {
                len: payload_bits,
                period,
            });
        }
        match code {
            InnerCode::Uncoded { .. } => {
                let table = SectionTable {
                    input_bits: 2,
                    next: vec![0; 4],
                    symbol: (0..4).collect(),
                };
                let sections = (0..payload_bits / 2)
                    .map(|i| Section {
                        table: 0,
                        first_bit: 2 * i,
                    })
                    .collect();
                Ok(Trellis {
                    num_states: 1,
                    tables: vec![table],
                    sections,
                    payload_bits,
                    terminated: false,
                })
            }
            InnerCode::Convolutional(spec) => {
                spec.validate()?;
                let groups = spec.groups();
                let n_states = spec.num_states();
                let mut tables = Vec::new();
                let mut step0 = 0;
                for &g in &groups {
                    let mut next = vec![0u16; n_states << g];
                    let mut symbol = vec![0u8; n_states << g];
                    for s in 0..n_states {
                        for u in 0..1usize << g {
                            let mut state = s;
                            let mut kept = Vec::with_capacity(2);
                            for j in 0..g {
                                let bit = ((u >> (g - 1 - j)) & 1) as u8;
                                let (ns, v0, v1) = spec.step(state, bit);
                                state = ns;
                                let keep = spec.puncture[step0 + j];
                                if keep[0] {
                                    kept.push(v0);
                                }
                                if keep[1] {
                                    kept.push(v1);
                                }
                            }
                            next[(s << g) | u] = state as u16;
                            symbol[(s << g) | u] = (kept[0] << 1) | kept[1];
                        }
                    }
                    tables.push(SectionTable {
                        input_bits: g,
                        next,
                        symbol,
                    });
                    step0 += g;
                }
                let tail_table = tables.len();
                tables.push(SectionTable {
                    input_bits: 0,
                    next: (0..n_states).map(|s| spec.step(s, 0).0 as u16).collect(),
                    symbol: (0..n_states)
                        .map(|s| {
                            let (_, v0, v1) = spec.step(s, 0);
                            (v0 << 1) | v1
                        })
                        .collect(),
                });
                let mut sections = Vec::new();
                let mut bit = 0;
                for _ in 0..payload_bits / period {
                    for (gi, &g) in groups.iter().enumerate() {
                        sections.push(Section {
                            table: gi,
                            first_bit: bit,
                        });
                        bit += g;
                    }
                }
                for _ in 0..spec.memory {
                    sections.push(Section {
                        table: tail_table,
                        first_bit: bit,
                    });
                }
                Ok(Trellis {
                    num_states: n_states,
                    tables,
                    sections,
                    payload_bits,
                    terminated: true,
                })
            }
        }
    }

    pub fn channel_len(&self) -> usize {
        self.sections.len()
    }

    pub fn table(&self, section: usize) -> &SectionTable {
        &self.tables[self.sections[section].table]
    }

    /// `(section, position within the section input)` of a payload bit.
    pub fn bit_location(&self, bit: usize) -> (usize, usize) {
        let sec = self.sections.partition_point(|s| s.first_bit <= bit) - 1;
        (sec, bit - self.sections[sec].first_bit)
    }

    /// Encodes by walking the branch tables (no offset).
    pub fn encode(&self, bits: &[u8]) -> Vec<u8> {
        let mut state = 0usize;
        self.sections
            .iter()
            .map(|sec| {
                let t = &self.tables[sec.table];
                let u = bits[sec.first_bit..sec.first_bit + t.input_bits]
                    .iter()
                    .fold(0usize, |acc, &b| (acc << 1) | b as usize);
                let idx = (state << t.input_bits) | u;
                state = t.next[idx] as usize;
                t.symbol[idx]
            })
            .collect()
    }
}

/// A trellis together with the offset added to its output: everything the
/// joint decoder needs to know about one transmitted block.
#[derive(Clone, Debug)]
pub struct InnerBlock {
    pub trellis: Trellis,
    pub offset: Vec<u8>,
    /// Real payload bits; the rest of the trellis input is zero padding.
    pub payload_bits: usize,
}

impl InnerBlock {
    /// Block `index` of `code` carrying `payload_bits` bits, zero-padded up to
    /// a whole period.
    pub fn new(code: &InnerCode, payload_bits: usize, index: usize) -> Result<Self> {
        let period = code.period();
        let padded = payload_bits.div_ceil(period) * period;
        let trellis = Trellis::new(code, padded)?;
        let offset = block_offset(code.offset_seed(), index, trellis.channel_len()).into_vec();
        Ok(InnerBlock {
            trellis,
            offset,
            payload_bits,
        })
    }

    /// Uncoded block of `n` nucleotides without offset.
    pub fn uncoded(n: usize) -> Self {
        Self::new(&InnerCode::Uncoded { offset_seed: None }, 2 * n, 0).expect("uncoded plan is valid")
    }

    pub fn with_offset(trellis: Trellis, offset: Vec<u8>, payload_bits: usize) -> Result<Self> {
        if offset.len() != trellis.channel_len() || offset.iter().any(|&o| o > 3) {
            return Err(Error::ShapeMismatch(format!(
                "offset of length {} for a block of {} symbols",
                offset.len(),
                trellis.channel_len()
            )));
        }
        if payload_bits > trellis.payload_bits {
            return Err(Error::ShapeMismatch(format!(
                "{payload_bits} payload bits exceed trellis input {}",
                trellis.payload_bits
            )));
        }
        Ok(InnerBlock {
            trellis,
            offset,
            payload_bits,
        })
    }

    pub fn channel_len(&self) -> usize {
        self.trellis.channel_len()
    }

    /// Channel word for `payload` (length `payload_bits`).
    pub fn encode(&self, payload: &[u8]) -> Result<NucSeq> {
        if payload.len() != self.payload_bits {
            return Err(Error::ShapeMismatch(format!(
                "payload of {} bits for a block of {}",
                payload.len(),
                self.payload_bits
            )));
        }
        if payload.iter().any(|&b| b > 1) {
            return Err(Error::InvalidCode("payload bits must be 0 or 1".into()));
        }
        Ok(add_offset(&self.encode_raw(payload), &self.offset))
    }

    /// Channel word before the offset; `payload` is zero-padded as needed.
    pub fn encode_raw(&self, payload: &[u8]) -> Vec<u8> {
        let mut bits = payload.to_vec();
        bits.resize(self.trellis.payload_bits, 0);
        self.trellis.encode(&bits)
    }
}

/// One block of the segmented outer codeword.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub start_bit: usize,
    /// Outer-codeword bits carried by the block.
    pub payload_bits: usize,
    /// Payload plus known zero padding up to a whole period.
    pub padded_bits: usize,
    pub channel_len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPlan {
    pub blocks: Vec<Block>,
}

impl BlockPlan {
    /// Greedy segmentation into full blocks plus one residual block.
    pub fn new(outer_len_bits: usize, block_payload_bits: usize, code: &InnerCode) -> Result<Self> {
        if block_payload_bits == 0 {
            return Err(Error::Config("block payload size must be positive".into()));
        }
        if outer_len_bits == 0 {
            return Err(Error::Config("outer codeword length must be positive".into()));
        }
        let period = code.period();
        if !block_payload_bits.is_multiple_of(period) {
            return Err(Error::PayloadLength {
                len: block_payload_bits,
                period,
            });
        }
        let mut blocks = Vec::new();
        let mut start = 0;
        while start < outer_len_bits {
            let payload = block_payload_bits.min(outer_len_bits - start);
            let padded = payload.div_ceil(period) * period;
            blocks.push(Block {
                start_bit: start,
                payload_bits: payload,
                padded_bits: padded,
                channel_len: code.channel_len(padded),
            });
            start += payload;
        }
        Ok(BlockPlan { blocks })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn full_blocks(&self, block_payload_bits: usize) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.payload_bits == block_payload_bits)
            .count()
    }

    pub fn total_channel_len(&self) -> usize {
        self.blocks.iter().map(|b| b.channel_len).sum()
    }
}

/// Block plan for the default inner code.
pub fn plan_blocks(outer_len_bits: usize, block_payload_bits: usize) -> Result<BlockPlan> {
    BlockPlan::new(outer_len_bits, block_payload_bits, &InnerCode::default())
}
