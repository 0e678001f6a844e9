//! The memory-k nanopore channel.
//!
//! Each input symbol `x_i` is acted on by one event `z_i` drawn from
//! `p(z_i | kmer_i, z_{i-1})`. The kmer is the window `x_{i-k+1..=i}` in the
//! middle of the strand; the first position, the positions before a full
//! kmer exists, and the last position use their own tables keyed by `x_i`
//! alone. An insertion emits a burst of `L` uniform symbols followed by the
//! faithful `x_i`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Number of nucleotides.
pub const ALPHABET: usize = 4;

/// Tolerance on the normalization of every probability row.
pub const NORM_TOL: f64 = 1e-12;

const BASES: [char; 4] = ['A', 'C', 'G', 'T'];

/// A sequence over `{0, 1, 2, 3}` (A, C, G, T).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct NucSeq(Vec<u8>);

impl NucSeq {
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s as usize >= ALPHABET) {
            return Err(Error::InvalidSymbol(bad));
        }
        Ok(NucSeq(symbols))
    }

    pub fn empty() -> Self {
        NucSeq(Vec::new())
    }

    /// Parses `ACGT` text (case-insensitive).
    pub fn from_acgt(text: &str) -> Result<Self> {
        text.chars()
            .map(|c| match c.to_ascii_uppercase() {
                'A' => Ok(0),
                'C' => Ok(1),
                'G' => Ok(2),
                'T' => Ok(3),
                other => Err(Error::InvalidBase(other)),
            })
            .collect::<Result<Vec<u8>>>()
            .map(NucSeq)
    }

    pub fn to_acgt(&self) -> String {
        self.0.iter().map(|&s| BASES[s as usize]).collect()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }
}

impl std::ops::Deref for NucSeq {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for NucSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_acgt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Ins = 0,
    Del = 1,
    Sub = 2,
    NoErr = 3,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [EventKind::Ins, EventKind::Del, EventKind::Sub, EventKind::NoErr];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> EventKind {
        EventKind::ALL[i]
    }
}

/// One channel event together with what it emitted beyond `x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    /// A burst of the given length, followed by the faithful symbol.
    Ins(usize),
    Del,
    /// Substitution by the carried symbol.
    Sub(u8),
    NoErr,
}

impl Event {
    pub fn kind(self) -> EventKind {
        match self {
            Event::Ins(_) => EventKind::Ins,
            Event::Del => EventKind::Del,
            Event::Sub(_) => EventKind::Sub,
            Event::NoErr => EventKind::NoErr,
        }
    }

    pub fn ins_len(self) -> Option<usize> {
        match self {
            Event::Ins(l) => Some(l),
            _ => None,
        }
    }

    /// Number of output symbols produced by this event.
    pub fn emitted(self) -> usize {
        match self {
            Event::Ins(l) => l + 1,
            Event::Del => 0,
            Event::Sub(_) | Event::NoErr => 1,
        }
    }
}

/// The per-input-symbol event sequence of one transmission.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventTrace {
    pub events: Vec<Event>,
}

impl EventTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind() == kind).count()
    }

    /// Output length implied by the trace: `N - #Del + sum of burst lengths`.
    pub fn output_len(&self) -> usize {
        self.events.iter().map(|e| e.emitted()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PositionClass {
    Begin = 0,
    Prefix = 1,
    Middle = 2,
    End = 3,
}

impl PositionClass {
    pub const ALL: [PositionClass; 4] = [
        PositionClass::Begin,
        PositionClass::Prefix,
        PositionClass::Middle,
        PositionClass::End,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PositionClass::Begin => "begin",
            PositionClass::Prefix => "prefix",
            PositionClass::Middle => "middle",
            PositionClass::End => "end",
        }
    }
}

/// Region of 1-based position `i` in a strand of length `n` for memory `k`.
pub fn classify_position(i: usize, k: usize, n: usize) -> Result<PositionClass> {
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    Ok(region_of(i, k, n))
}

#[inline]
pub(crate) fn region_of(i: usize, k: usize, n: usize) -> PositionClass {
    if i == 1 {
        PositionClass::Begin
    } else if i == n {
        PositionClass::End
    } else if i < k {
        PositionClass::Prefix
    } else {
        PositionClass::Middle
    }
}

/// The channel context of 1-based position `i`: the full kmer once one is
/// available, the single symbol `x_i` before that.
pub fn kmer_context(x: &[u8], i: usize, k: usize) -> Result<&[u8]> {
    if i == 0 || i > x.len() {
        return Err(Error::IndexOutOfRange { index: i, len: x.len() });
    }
    if k >= 1 && i >= k {
        Ok(&x[i - k..i])
    } else {
        Ok(&x[i - 1..i])
    }
}

/// Index of a context window, oldest symbol most significant.
pub fn context_index(window: &[u8]) -> usize {
    window.iter().fold(0, |acc, &s| acc * ALPHABET + s as usize)
}

/// Table row index of the context used at position `i` in `region`.
#[inline]
pub(crate) fn context_at(x: &[u8], i: usize, k: usize, region: PositionClass) -> usize {
    match region {
        PositionClass::Middle => context_index(&x[i - k..i]),
        _ => x[i - 1] as usize,
    }
}

/// Distributions attached to one context of one region.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextRow {
    /// `p(z | context, z_prev)`, columns ordered Ins, Del, Sub, NoErr. The
    /// begin region has a single row; every other region has one row per
    /// previous event, indexed by [`EventKind::index`].
    pub event: Vec<[f64; 4]>,
    /// `p(L | context, Ins)` for `L = 2..=l_max`.
    pub ins_len: Vec<f64>,
    /// `p(a* | context, Sub)`; zero at the context's own last symbol.
    pub sub: [f64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionTable {
    pub contexts: Vec<ContextRow>,
}

/// Full transition-probability tables of a memory-k channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    pub k: usize,
    pub l_max: usize,
    /// Indexed by [`PositionClass::index`].
    pub regions: [RegionTable; 4],
}

/// One broken invariant found by [`ChannelParams::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub table: String,
    pub context: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]: {}", self.table, self.context, self.message)
    }
}

pub(crate) fn rows_in(region: PositionClass) -> usize {
    if region == PositionClass::Begin {
        1
    } else {
        4
    }
}

/// Uniform substitution distribution over the three symbols other than `own`.
pub fn uniform_sub(own: usize) -> [f64; 4] {
    let mut s = [1.0 / 3.0; 4];
    s[own] = 0.0;
    s
}

impl ChannelParams {
    pub fn new(k: usize, l_max: usize, regions: [RegionTable; 4]) -> Result<Self> {
        let params = ChannelParams { k, l_max, regions };
        params.check()?;
        Ok(params)
    }

    /// Builds tables whose event rows come from `f(region, context, prev)`,
    /// with uniform burst lengths and uniform substitutions.
    pub fn from_fn<F>(k: usize, l_max: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(PositionClass, usize, Option<EventKind>) -> [f64; 4],
    {
        if k == 0 || l_max < 2 {
            return Err(Error::InvalidParams(format!(
                "need k >= 1 and l_max >= 2, got k = {k}, l_max = {l_max}"
            )));
        }
        let regions = PositionClass::ALL.map(|region| {
            let n_ctx = Self::context_count(k, region);
            let contexts = (0..n_ctx)
                .map(|ctx| {
                    let event = if region == PositionClass::Begin {
                        vec![f(region, ctx, None)]
                    } else {
                        EventKind::ALL.iter().map(|&z| f(region, ctx, Some(z))).collect()
                    };
                    ContextRow {
                        event,
                        ins_len: vec![1.0 / (l_max - 1) as f64; l_max - 1],
                        sub: uniform_sub(ctx % ALPHABET),
                    }
                })
                .collect();
            RegionTable { contexts }
        });
        Self::new(k, l_max, regions)
    }

    /// Position-, context- and memory-independent tables.
    pub fn iid(k: usize, l_max: usize, event: [f64; 4]) -> Result<Self> {
        Self::from_fn(k, l_max, |_, _, _| event)
    }

    /// The error-free channel.
    pub fn perfect(k: usize) -> Self {
        Self::iid(k, 2, [0.0, 0.0, 0.0, 1.0]).expect("perfect channel tables are valid")
    }

    pub fn context_count(k: usize, region: PositionClass) -> usize {
        match region {
            PositionClass::Middle => ALPHABET.pow(k as u32),
            _ => ALPHABET,
        }
    }

    pub fn region(&self, region: PositionClass) -> &RegionTable {
        &self.regions[region.index()]
    }

    pub fn row(&self, region: PositionClass, ctx: usize) -> &ContextRow {
        &self.regions[region.index()].contexts[ctx]
    }

    /// `p(. | context, prev)` in `region`; the begin region ignores `prev`.
    pub fn event_probs(&self, region: PositionClass, ctx: usize, prev: Option<EventKind>) -> &[f64; 4] {
        let row = self.row(region, ctx);
        if region == PositionClass::Begin {
            &row.event[0]
        } else {
            &row.event[prev.unwrap_or(EventKind::NoErr).index()]
        }
    }

    /// Human-readable context label, e.g. `"0213"` for a middle kmer.
    pub fn context_label(&self, region: PositionClass, ctx: usize) -> String {
        let width = if region == PositionClass::Middle { self.k } else { 1 };
        let mut digits = vec![b'0'; width];
        let mut rest = ctx;
        for d in digits.iter_mut().rev() {
            *d = b'0' + (rest % ALPHABET) as u8;
            rest /= ALPHABET;
        }
        String::from_utf8(digits).expect("ascii digits")
    }

    fn parse_context(&self, region: PositionClass, label: &str) -> Option<usize> {
        let width = if region == PositionClass::Middle { self.k } else { 1 };
        if label.len() != width {
            return None;
        }
        label.bytes().try_fold(0usize, |acc, b| match b {
            b'0'..=b'3' => Some(acc * ALPHABET + (b - b'0') as usize),
            _ => None,
        })
    }

    /// Lists every broken invariant; empty iff the tables are usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |table: String, context: String, message: String| {
            out.push(Violation {
                table,
                context,
                message,
            })
        };
        if self.k == 0 {
            push("params".into(), "-".into(), "memory k must be at least 1".into());
        }
        if self.l_max < 2 {
            push(
                "params".into(),
                "-".into(),
                format!("l_max = {} must be at least 2", self.l_max),
            );
        }
        if self.k == 0 || self.k > 12 {
            return out;
        }
        for region in PositionClass::ALL {
            let table = self.region(region);
            let expected = Self::context_count(self.k, region);
            if table.contexts.len() != expected {
                push(
                    format!("{}.contexts", region.name()),
                    "-".into(),
                    format!("expected {expected} contexts, found {}", table.contexts.len()),
                );
                continue;
            }
            for (ctx, row) in table.contexts.iter().enumerate() {
                let label = self.context_label(region, ctx);
                if row.event.len() != rows_in(region) {
                    push(
                        format!("{}.event_probs", region.name()),
                        label.clone(),
                        format!("expected {} rows, found {}", rows_in(region), row.event.len()),
                    );
                }
                for (r, probs) in row.event.iter().enumerate() {
                    if let Some(msg) = check_distribution(probs) {
                        push(format!("{}.event_probs[{r}]", region.name()), label.clone(), msg);
                    }
                }
                if row.ins_len.len() + 1 != self.l_max {
                    push(
                        format!("{}.ins_len_probs", region.name()),
                        label.clone(),
                        format!(
                            "expected {} entries, found {}",
                            self.l_max.saturating_sub(1),
                            row.ins_len.len()
                        ),
                    );
                } else if let Some(msg) = check_distribution(&row.ins_len) {
                    push(format!("{}.ins_len_probs", region.name()), label.clone(), msg);
                }
                let own = ctx % ALPHABET;
                if row.sub[own] != 0.0 {
                    push(
                        format!("{}.sub_probs", region.name()),
                        label.clone(),
                        format!("mass {} on the unsubstituted symbol {own}", row.sub[own]),
                    );
                } else if let Some(msg) = check_distribution(&row.sub) {
                    push(format!("{}.sub_probs", region.name()), label.clone(), msg);
                }
            }
        }
        out
    }

    pub(crate) fn check(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidParams(text.join("; ")))
        }
    }

    /// Stationary distribution of the previous event in the middle region
    /// under uniformly distributed contexts.
    pub fn stationary_prev(&self) -> [f64; 4] {
        let middle = self.region(PositionClass::Middle);
        let n_ctx = middle.contexts.len() as f64;
        let mut transition = [[0.0; 4]; 4];
        for row in &middle.contexts {
            for (prev, probs) in row.event.iter().enumerate() {
                for z in 0..4 {
                    transition[prev][z] += probs[z] / n_ctx;
                }
            }
        }
        let mut pi = [0.25; 4];
        for _ in 0..2000 {
            let mut next = [0.0; 4];
            for prev in 0..4 {
                for z in 0..4 {
                    next[z] += pi[prev] * transition[prev][z];
                }
            }
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }

    /// Average event distribution in the middle region, weighting contexts
    /// uniformly and previous events by their stationary frequencies.
    pub fn average_event_probs(&self) -> [f64; 4] {
        let pi = self.stationary_prev();
        let middle = self.region(PositionClass::Middle);
        let n_ctx = middle.contexts.len() as f64;
        let mut avg = [0.0; 4];
        for row in &middle.contexts {
            for (prev, probs) in row.event.iter().enumerate() {
                for z in 0..4 {
                    avg[z] += probs[z] * pi[prev] / n_ctx;
                }
            }
        }
        avg
    }

    pub fn to_json(&self) -> Result<String> {
        self.check()?;
        let file = ParamsFile::from_params(self);
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)?;
        file.into_params()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_distribution(probs: &[f64]) -> Option<String> {
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Some(format!("probability {p} outside [0, 1]"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORM_TOL {
        return Some(format!("row sums to {sum}"));
    }
    None
}

/// Probability written with 17 significant digits so files round-trip exactly.
#[derive(Clone, Copy, Debug)]
struct Prob(f64);

impl Serialize for Prob {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let raw =
            serde_json::value::RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Prob {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Prob)
    }
}

#[derive(Serialize, Deserialize)]
struct RowFile {
    event_probs: Vec<[Prob; 4]>,
    ins_len_probs: Vec<Prob>,
    sub_probs: [Prob; 4],
}

#[derive(Serialize, Deserialize)]
struct RegionsFile {
    begin: BTreeMap<String, RowFile>,
    prefix: BTreeMap<String, RowFile>,
    middle: BTreeMap<String, RowFile>,
    end: BTreeMap<String, RowFile>,
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    k: usize,
    l_max: usize,
    regions: RegionsFile,
}

impl ParamsFile {
    fn from_params(params: &ChannelParams) -> Self {
        let region_map = |region: PositionClass| {
            params
                .region(region)
                .contexts
                .iter()
                .enumerate()
                .map(|(ctx, row)| {
                    let file_row = RowFile {
                        event_probs: row.event.iter().map(|r| r.map(Prob)).collect(),
                        ins_len_probs: row.ins_len.iter().copied().map(Prob).collect(),
                        sub_probs: row.sub.map(Prob),
                    };
                    (params.context_label(region, ctx), file_row)
                })
                .collect()
        };
        ParamsFile {
            k: params.k,
            l_max: params.l_max,
            regions: RegionsFile {
                begin: region_map(PositionClass::Begin),
                prefix: region_map(PositionClass::Prefix),
                middle: region_map(PositionClass::Middle),
                end: region_map(PositionClass::End),
            },
        }
    }

    fn into_params(self) -> Result<ChannelParams> {
        if self.k == 0 || self.k > 12 {
            return Err(Error::InvalidParams(format!("unsupported memory k = {}", self.k)));
        }
        let skeleton = ChannelParams {
            k: self.k,
            l_max: self.l_max,
            regions: PositionClass::ALL.map(|_| RegionTable { contexts: Vec::new() }),
        };
        let RegionsFile {
            begin,
            prefix,
            middle,
            end,
        } = self.regions;
        let maps = [begin, prefix, middle, end];
        let mut regions = Vec::with_capacity(4);
        for (region, map) in PositionClass::ALL.into_iter().zip(maps) {
            let n_ctx = ChannelParams::context_count(self.k, region);
            let mut slots: Vec<Option<ContextRow>> = vec![None; n_ctx];
            for (label, row) in map {
                let ctx = skeleton
                    .parse_context(region, &label)
                    .ok_or_else(|| Error::InvalidParams(format!("{}: bad context label {label:?}", region.name())))?;
                slots[ctx] = Some(ContextRow {
                    event: row.event_probs.iter().map(|r| r.map(|p| p.0)).collect(),
                    ins_len: row.ins_len_probs.iter().map(|p| p.0).collect(),
                    sub: row.sub_probs.map(|p| p.0),
                });
            }
            let contexts = slots
                .into_iter()
                .enumerate()
                .map(|(ctx, slot)| {
                    slot.ok_or_else(|| {
                        Error::InvalidParams(format!(
                            "{}: missing context {}",
                            region.name(),
                            skeleton.context_label(region, ctx)
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            regions.push(RegionTable { contexts });
        }
        let regions: [RegionTable; 4] = regions.try_into().expect("four regions");
        ChannelParams::new(self.k, self.l_max, regions)
    }
}

/// Validated view of channel parameters that can sample reads.
#[derive(Clone, Copy, Debug)]
pub struct Channel<'a> {
    params: &'a ChannelParams,
}

impl<'a> Channel<'a> {
    pub fn new(params: &'a ChannelParams) -> Result<Self> {
        params.check()?;
        Ok(Channel { params })
    }

    pub fn params(&self) -> &'a ChannelParams {
        self.params
    }

    /// Sends `x` through the channel once.
    pub fn transmit_with<R: Rng + ?Sized>(&self, x: &[u8], rng: &mut R) -> (NucSeq, EventTrace) {
        let p = self.params;
        let n = x.len();
        let mut y = Vec::with_capacity(n + n / 4 + 4);
        let mut events = Vec::with_capacity(n);
        let mut prev: Option<EventKind> = None;
        for i in 1..=n {
            let region = region_of(i, p.k, n);
            let ctx = context_at(x, i, p.k, region);
            let row = p.row(region, ctx);
            let z = EventKind::from_index(sample_index(p.event_probs(region, ctx, prev), rng));
            let xi = x[i - 1];
            let event = match z {
                EventKind::NoErr => {
                    y.push(xi);
                    Event::NoErr
                }
                EventKind::Del => Event::Del,
                EventKind::Sub => {
                    let a = sample_index(&row.sub, rng) as u8;
                    y.push(a);
                    Event::Sub(a)
                }
                EventKind::Ins => {
                    let len = 2 + sample_index(&row.ins_len, rng);
                    for _ in 0..len {
                        y.push(rng.random_range(0..ALPHABET as u8));
                    }
                    y.push(xi);
                    Event::Ins(len)
                }
            };
            events.push(event);
            prev = Some(z);
        }
        (NucSeq(y), EventTrace { events })
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Transmits `x` once; deterministic given `seed`.
pub fn transmit(x: &NucSeq, params: &ChannelParams, seed: u64) -> Result<(NucSeq, EventTrace)> {
    if x.is_empty() {
        return Err(Error::InvalidParams("channel input must be non-empty".into()));
    }
    let channel = Channel::new(params)?;
    let mut rng = rng_from_seed(seed);
    Ok(channel.transmit_with(x, &mut rng))
}

/// `m` independent transmissions of `x`, read `j` seeded by child `j` of `seed`.
pub fn transmit_multi(x: &NucSeq, params: &ChannelParams, m: usize, seed: u64) -> Result<Vec<(NucSeq, EventTrace)>> {
    if m == 0 {
        return Err(Error::NoReads);
    }
    if x.is_empty() {
        return Err(Error::InvalidParams("channel input must be non-empty".into()));
    }
    let channel = Channel::new(params)?;
    Ok((0..m)
        .map(|j| {
            let mut rng = rng_from_seed(derive_seed(seed, j as u64));
            channel.transmit_with(x, &mut rng)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[u8]) -> NucSeq {
        NucSeq::new(v.to_vec()).unwrap()
    }

    #[test]
    fn position_classes() {
        assert_eq!(classify_position(1, 5, 110).unwrap(), PositionClass::Begin);
        assert_eq!(classify_position(3, 5, 110).unwrap(), PositionClass::Prefix);
        assert_eq!(classify_position(5, 5, 110).unwrap(), PositionClass::Middle);
        assert_eq!(classify_position(109, 5, 110).unwrap(), PositionClass::Middle);
        assert_eq!(classify_position(110, 5, 110).unwrap(), PositionClass::End);
        assert_eq!(classify_position(2, 1, 3).unwrap(), PositionClass::Middle);
        assert!(classify_position(0, 5, 110).is_err());
        assert!(classify_position(111, 5, 110).is_err());
    }

    #[test]
    fn kmer_windows() {
        let x = [0, 1, 2, 3, 0];
        assert_eq!(kmer_context(&x, 5, 3).unwrap(), &[2, 3, 0]);
        assert_eq!(kmer_context(&x, 2, 3).unwrap(), &[1]);
        assert_eq!(kmer_context(&[1, 1, 1], 3, 1).unwrap(), &[1]);
        assert!(kmer_context(&x, 6, 3).is_err());
        assert_eq!(context_index(&[2, 3, 0]), 2 * 16 + 3 * 4);
    }

    #[test]
    fn acgt_mapping() {
        let s = NucSeq::from_acgt("ACGT").unwrap();
        assert_eq!(s.as_slice(), &[0, 1, 2, 3]);
        assert_eq!(s.to_acgt(), "ACGT");
        assert!(matches!(NucSeq::from_acgt("ACNT"), Err(Error::InvalidBase('N'))));
        assert!(NucSeq::new(vec![0, 4]).is_err());
    }

    #[test]
    fn error_free_channel_is_identity() {
        let p = ChannelParams::perfect(2);
        let (y, trace) = transmit(&seq(&[0, 1, 2, 3]), &p, 1).unwrap();
        assert_eq!(y.as_slice(), &[0, 1, 2, 3]);
        assert!(trace.events.iter().all(|e| *e == Event::NoErr));
    }

    #[test]
    fn all_delete_empties_output() {
        let p = ChannelParams::iid(1, 2, [0.0, 1.0, 0.0, 0.0]).unwrap();
        let (y, trace) = transmit(&seq(&[0, 1, 2]), &p, 3).unwrap();
        assert!(y.is_empty());
        assert_eq!(trace.count(EventKind::Del), 3);
    }

    #[test]
    fn insertion_appends_burst_then_symbol() {
        let p = ChannelParams::iid(1, 2, [1.0, 0.0, 0.0, 0.0]).unwrap();
        for seed in 0..20 {
            let (y, trace) = transmit(&seq(&[0]), &p, seed).unwrap();
            assert_eq!(y.len(), 3);
            assert_eq!(y[2], 0);
            assert_eq!(trace.events, vec![Event::Ins(2)]);
        }
    }

    #[test]
    fn substitution_never_repeats_input() {
        let p = ChannelParams::iid(1, 2, [0.0, 0.0, 1.0, 0.0]).unwrap();
        let x = seq(&[0, 1, 2, 3, 0, 1, 2, 3]);
        let (y, _) = transmit(&x, &p, 9).unwrap();
        assert_eq!(y.len(), x.len());
        assert!(y.iter().zip(x.iter()).all(|(a, b)| a != b));
    }

    #[test]
    fn multi_read_reproducible() {
        let p = ChannelParams::iid(1, 3, [0.05, 0.05, 0.05, 0.85]).unwrap();
        let x = seq(&[0, 1, 2, 3, 3, 2, 1, 0, 0, 1]);
        let a = transmit_multi(&x, &p, 2, 42).unwrap();
        let b = transmit_multi(&x, &p, 2, 42).unwrap();
        assert_eq!(a, b);
        let perfect = transmit_multi(&x, &ChannelParams::perfect(1), 5, 1).unwrap();
        assert!(perfect.iter().all(|(y, _)| *y == x));
        assert!(matches!(transmit_multi(&x, &p, 0, 1), Err(Error::NoReads)));
    }

    #[test]
    fn validate_reports_violations() {
        let p = ChannelParams::iid(2, 2, [0.25; 4]).unwrap();
        assert!(p.validate().is_empty());

        let mut bad = p.clone();
        bad.regions[PositionClass::Middle.index()].contexts[5].event[1] = [0.3, 0.3, 0.2, 0.1];
        let v = bad.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].context, "11");
        assert!(v[0].table.starts_with("middle.event_probs"));

        let mut bad = p.clone();
        bad.regions[PositionClass::End.index()].contexts[2].sub = [0.25; 4];
        let v = bad.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].table.starts_with("end.sub_probs"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = ChannelParams::from_fn(2, 3, |region, ctx, prev| {
            let e = 0.01
                + 0.001 * ctx as f64
                + 0.003 * region.index() as f64
                + prev.map_or(0.0, |z| 0.0007 * z.index() as f64);
            [e, 2.0 * e, 1.0 / 3.0 * e, 1.0 - e - 2.0 * e - 1.0 / 3.0 * e]
        })
        .unwrap();
        let text = p.to_json().unwrap();
        assert!(text.contains("\"middle\""));
        assert!(text.contains("\"33\""));
        let back = ChannelParams::from_json(&text).unwrap();
        assert_eq!(p, back);
    }
}
