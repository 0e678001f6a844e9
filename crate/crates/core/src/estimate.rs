//! Channel-parameter estimation from reference/read pairs.
//!
//! Every read is aligned to its reference with a unit-cost edit-distance
//! lattice. Backtracking from the bottom-right corner (ties broken uniformly
//! at random) yields one event per reference symbol, and the transition
//! probabilities are the normalized event counts per region, context and
//! previous event.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;

use crate::channel::{
    context_at, region_of, rows_in, ChannelParams, ContextRow, Event, EventKind, EventTrace, NucSeq, PositionClass,
    RegionTable, ALPHABET,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

/// Additive smoothing applied to every count before normalization.
pub const SMOOTHING: f64 = 1e-6;

const MOVE_DIAG: u8 = 1;
const MOVE_DEL: u8 = 2;
const MOVE_INS: u8 = 4;

/// One reference strand with its reads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetRecord {
    pub ref_id: String,
    pub x: NucSeq,
    pub reads: Vec<NucSeq>,
}

/// Unit-cost edit-distance lattice between a reference `x` and a read `y`.
///
/// Cell `(i, j)` holds the distance between `x[..i]` and `y[..j]` together
/// with the set of predecessor moves achieving it.
#[derive(Clone, Debug)]
pub struct Lattice {
    x: Vec<u8>,
    y: Vec<u8>,
    cost: Vec<u32>,
    moves: Vec<u8>,
}

impl Lattice {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.y.len() + 1) + j
    }

    pub fn cost(&self, i: usize, j: usize) -> u32 {
        self.cost[self.idx(i, j)]
    }

    /// The Levenshtein distance between the two sequences.
    pub fn distance(&self) -> u32 {
        self.cost(self.x.len(), self.y.len())
    }

    pub fn reference(&self) -> &[u8] {
        &self.x
    }

    pub fn read(&self) -> &[u8] {
        &self.y
    }
}

pub fn lattice(x: &[u8], y: &[u8]) -> Lattice {
    let (n, m) = (x.len(), y.len());
    let width = m + 1;
    let mut cost = vec![0u32; (n + 1) * width];
    let mut moves = vec![0u8; (n + 1) * width];
    for j in 1..=m {
        cost[j] = j as u32;
        moves[j] = MOVE_INS;
    }
    for i in 1..=n {
        cost[i * width] = i as u32;
        moves[i * width] = MOVE_DEL;
        for j in 1..=m {
            let diag = cost[(i - 1) * width + j - 1] + u32::from(x[i - 1] != y[j - 1]);
            let del = cost[(i - 1) * width + j] + 1;
            let ins = cost[i * width + j - 1] + 1;
            let best = diag.min(del).min(ins);
            let mut set = 0;
            if diag == best {
                set |= MOVE_DIAG;
            }
            if del == best {
                set |= MOVE_DEL;
            }
            if ins == best {
                set |= MOVE_INS;
            }
            cost[i * width + j] = best;
            moves[i * width + j] = set;
        }
    }
    Lattice {
        x: x.to_vec(),
        y: y.to_vec(),
        cost,
        moves,
    }
}

/// A single step of an optimal alignment path, in forward order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EditOp {
    Match,
    Sub(u8),
    Del,
    Ins(u8),
}

impl EditOp {
    pub fn cost(self) -> u32 {
        match self {
            EditOp::Match => 0,
            _ => 1,
        }
    }
}

/// One optimal alignment path, ties broken uniformly at random.
pub fn backtrack_path(lat: &Lattice, rng: &mut SimRng) -> Vec<EditOp> {
    let (mut i, mut j) = (lat.x.len(), lat.y.len());
    let mut ops = Vec::with_capacity(i.max(j));
    while i > 0 || j > 0 {
        let set = lat.moves[lat.idx(i, j)];
        let choices: Vec<u8> = [MOVE_DIAG, MOVE_DEL, MOVE_INS]
            .into_iter()
            .filter(|m| set & m != 0)
            .collect();
        let pick = if choices.len() == 1 {
            choices[0]
        } else {
            choices[rng.random_range(0..choices.len())]
        };
        match pick {
            MOVE_DIAG => {
                let (a, b) = (lat.x[i - 1], lat.y[j - 1]);
                ops.push(if a == b { EditOp::Match } else { EditOp::Sub(b) });
                i -= 1;
                j -= 1;
            }
            MOVE_DEL => {
                ops.push(EditOp::Del);
                i -= 1;
            }
            _ => {
                ops.push(EditOp::Ins(lat.y[j - 1]));
                j -= 1;
            }
        }
    }
    ops.reverse();
    ops
}

/// How a lone lattice insertion (burst length 1) is turned into an event,
/// given that the channel model only produces bursts of two or more.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SingleInsertion {
    /// Count it as a burst of length 2 on the following position.
    #[default]
    Clamp,
    /// Drop it; the following position keeps its own event.
    Discard,
}

/// Folds an alignment path into one event per reference symbol.
///
/// A run of insertions is attached to the next reference symbol as an `Ins`
/// event of the run length, replacing that symbol's own event. Trailing
/// insertions attach to the last symbol.
pub fn fold_events(ops: &[EditOp], policy: SingleInsertion) -> EventTrace {
    let mut events = Vec::new();
    let mut pending = 0usize;
    let fold = |run: usize, own: Event| -> Event {
        match (run, policy) {
            (0, _) => own,
            (1, SingleInsertion::Discard) => own,
            (1, SingleInsertion::Clamp) => Event::Ins(2),
            (r, _) => Event::Ins(r),
        }
    };
    for &op in ops {
        let own = match op {
            EditOp::Ins(_) => {
                pending += 1;
                continue;
            }
            EditOp::Match => Event::NoErr,
            EditOp::Sub(a) => Event::Sub(a),
            EditOp::Del => Event::Del,
        };
        events.push(fold(pending, own));
        pending = 0;
    }
    if pending > 0 {
        if let Some(last) = events.last_mut() {
            *last = fold(pending, *last);
        }
    }
    EventTrace { events }
}

/// Event trace of one optimal alignment; deterministic given `seed`.
pub fn backtrack(lat: &Lattice, seed: u64) -> EventTrace {
    backtrack_with(lat, seed, SingleInsertion::Clamp)
}

pub fn backtrack_with(lat: &Lattice, seed: u64, policy: SingleInsertion) -> EventTrace {
    let mut rng = rng_from_seed(seed);
    fold_events(&backtrack_path(lat, &mut rng), policy)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextCounts {
    /// `[prev row][event]`; a single row in the begin region.
    pub event: Vec<[u64; 4]>,
    /// Burst lengths `2..=l_max`; longer bursts are counted at `l_max`.
    pub ins_len: Vec<u64>,
    pub sub: [u64; 4],
}

/// Event counts per region, context and previous event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    pub k: usize,
    pub l_max: usize,
    pub regions: [Vec<ContextCounts>; 4],
}

impl CountTable {
    pub fn new(k: usize, l_max: usize) -> Self {
        let regions = PositionClass::ALL.map(|region| {
            (0..ChannelParams::context_count(k, region))
                .map(|_| ContextCounts {
                    event: vec![[0; 4]; rows_in(region)],
                    ins_len: vec![0; l_max - 1],
                    sub: [0; 4],
                })
                .collect()
        });
        CountTable { k, l_max, regions }
    }

    /// Adds the transitions of one aligned read of reference `x`.
    pub fn accumulate(&mut self, x: &[u8], trace: &EventTrace) {
        let n = x.len();
        debug_assert_eq!(trace.len(), n);
        let mut prev: Option<EventKind> = None;
        for (i, &event) in (1..=n).zip(&trace.events) {
            let region = region_of(i, self.k, n);
            let ctx = context_at(x, i, self.k, region);
            let cell = &mut self.regions[region.index()][ctx];
            let row = if region == PositionClass::Begin {
                0
            } else {
                prev.unwrap_or(EventKind::NoErr).index()
            };
            cell.event[row][event.kind().index()] += 1;
            match event {
                Event::Ins(len) => cell.ins_len[len.clamp(2, self.l_max) - 2] += 1,
                Event::Sub(a) => cell.sub[a as usize] += 1,
                _ => {}
            }
            prev = Some(event.kind());
        }
    }

    pub fn merge(&mut self, other: &CountTable) {
        assert_eq!(
            (self.k, self.l_max),
            (other.k, other.l_max),
            "count tables differ in shape"
        );
        for (mine, theirs) in self.regions.iter_mut().zip(&other.regions) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                for (ra, rb) in a.event.iter_mut().zip(&b.event) {
                    for z in 0..4 {
                        ra[z] += rb[z];
                    }
                }
                for (la, lb) in a.ins_len.iter_mut().zip(&b.ins_len) {
                    *la += lb;
                }
                for s in 0..4 {
                    a.sub[s] += b.sub[s];
                }
            }
        }
    }

    /// Number of transitions counted in `region`.
    pub fn transitions(&self, region: PositionClass) -> u64 {
        self.regions[region.index()]
            .iter()
            .flat_map(|c| c.event.iter())
            .map(|r| r.iter().sum::<u64>())
            .sum()
    }

    pub fn total_transitions(&self) -> u64 {
        PositionClass::ALL.iter().map(|&r| self.transitions(r)).sum()
    }

    /// Normalizes the counts into channel parameters. Rows without data fall
    /// back to the aggregate of their region, and to uniform if that is empty
    /// too. Returns the parameters and the list of rows that fell back.
    pub fn normalize(&self) -> (ChannelParams, Vec<FallbackRow>) {
        let mut fallbacks = Vec::new();
        let labeler = ChannelParams {
            k: self.k,
            l_max: self.l_max,
            regions: PositionClass::ALL.map(|_| RegionTable { contexts: Vec::new() }),
        };
        let regions = PositionClass::ALL.map(|region| {
            let cells = &self.regions[region.index()];
            let n_rows = rows_in(region);
            let mut agg_event = vec![[0u64; 4]; n_rows];
            let mut agg_len = vec![0u64; self.l_max - 1];
            let mut agg_sub = [[0u64; 4]; 4];
            for (ctx, c) in cells.iter().enumerate() {
                for (r, row) in c.event.iter().enumerate() {
                    for z in 0..4 {
                        agg_event[r][z] += row[z];
                    }
                }
                for (a, b) in agg_len.iter_mut().zip(&c.ins_len) {
                    *a += b;
                }
                for (acc, n) in agg_sub[ctx % ALPHABET].iter_mut().zip(&c.sub) {
                    *acc += n;
                }
            }
            let contexts = cells
                .iter()
                .enumerate()
                .map(|(ctx, c)| {
                    let own = ctx % ALPHABET;
                    let label = labeler.context_label(region, ctx);
                    let event = (0..n_rows)
                        .map(|r| {
                            let (counts, fell_back) = pick(&c.event[r], &agg_event[r]);
                            if fell_back {
                                fallbacks.push(FallbackRow {
                                    region,
                                    context: label.clone(),
                                    table: "event",
                                    prev: (region != PositionClass::Begin).then(|| EventKind::from_index(r)),
                                });
                            }
                            let mut out = [0.0; 4];
                            smooth_into(counts, &[true; 4], &mut out);
                            out
                        })
                        .collect();
                    let (len_counts, _) = pick(&c.ins_len, &agg_len);
                    let mut ins_len = vec![0.0; self.l_max - 1];
                    smooth_into(len_counts, &vec![true; self.l_max - 1], &mut ins_len);
                    let (sub_counts, _) = pick(&c.sub, &agg_sub[own]);
                    let mut allowed = [true; 4];
                    allowed[own] = false;
                    let mut sub = [0.0; 4];
                    smooth_into(sub_counts, &allowed, &mut sub);
                    ContextRow { event, ins_len, sub }
                })
                .collect();
            RegionTable { contexts }
        });
        let params = ChannelParams {
            k: self.k,
            l_max: self.l_max,
            regions,
        };
        (params, fallbacks)
    }
}

fn pick<'a>(own: &'a [u64], aggregate: &'a [u64]) -> (&'a [u64], bool) {
    if own.iter().sum::<u64>() > 0 {
        (own, false)
    } else {
        (aggregate, true)
    }
}

/// `(c + eps) / (sum + n eps)` over the allowed entries, zero elsewhere. All
/// zero counts give the uniform distribution over the allowed entries.
fn smooth_into(counts: &[u64], allowed: &[bool], out: &mut [f64]) {
    let total: f64 = counts
        .iter()
        .zip(allowed)
        .filter(|(_, &ok)| ok)
        .map(|(&c, _)| c as f64 + SMOOTHING)
        .sum();
    for ((o, &c), &ok) in out.iter_mut().zip(counts).zip(allowed) {
        *o = if ok { (c as f64 + SMOOTHING) / total } else { 0.0 };
    }
    // Renormalize once more so the row sums to one to the last ulp.
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|o| *o /= sum);
}

/// A table row that had no observations of its own.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FallbackRow {
    pub region: PositionClass,
    pub context: String,
    pub table: &'static str,
    pub prev: Option<EventKind>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EstimationSummary {
    pub records: usize,
    pub reads: usize,
    /// Transitions per region, indexed by [`PositionClass::index`].
    pub transitions: [u64; 4],
    /// Contexts with at least one observation, per region.
    pub contexts_seen: [usize; 4],
    pub contexts_total: [usize; 4],
    pub fallbacks: Vec<FallbackRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EstimateOptions {
    pub k: usize,
    pub l_max: usize,
    pub seed: u64,
    pub single_insertion: SingleInsertion,
}

/// Aligns every read of every record and accumulates event counts.
pub fn count_events(data: &[DatasetRecord], opts: &EstimateOptions) -> Result<CountTable> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if opts.k == 0 || opts.l_max < 2 {
        return Err(Error::InvalidParams(format!(
            "need k >= 1 and l_max >= 2, got k = {}, l_max = {}",
            opts.k, opts.l_max
        )));
    }
    let mut table = CountTable::new(opts.k, opts.l_max);
    let mut read_index = 0u64;
    for record in data {
        if record.reads.is_empty() {
            return Err(Error::NoReads);
        }
        for read in &record.reads {
            let lat = lattice(&record.x, read);
            let trace = backtrack_with(&lat, derive_seed(opts.seed, read_index), opts.single_insertion);
            read_index += 1;
            table.accumulate(&record.x, &trace);
        }
    }
    Ok(table)
}

/// Estimates memory-k channel parameters from a dataset.
pub fn estimate(data: &[DatasetRecord], k: usize, l_max: usize, seed: u64) -> Result<ChannelParams> {
    let opts = EstimateOptions {
        k,
        l_max,
        seed,
        single_insertion: SingleInsertion::Clamp,
    };
    estimate_with(data, &opts).map(|(params, _)| params)
}

pub fn estimate_with(data: &[DatasetRecord], opts: &EstimateOptions) -> Result<(ChannelParams, EstimationSummary)> {
    let table = count_events(data, opts)?;
    let (params, fallbacks) = table.normalize();
    params.check()?;
    let mut summary = EstimationSummary {
        records: data.len(),
        reads: data.iter().map(|r| r.reads.len()).sum(),
        fallbacks,
        ..Default::default()
    };
    for region in PositionClass::ALL {
        let cells = &table.regions[region.index()];
        summary.transitions[region.index()] = table.transitions(region);
        summary.contexts_total[region.index()] = cells.len();
        summary.contexts_seen[region.index()] = cells
            .iter()
            .filter(|c| c.event.iter().any(|r| r.iter().any(|&n| n > 0)))
            .count();
    }
    Ok((params, summary))
}

fn parse_lines(path: &Path) -> Result<Vec<(usize, String, NucSeq)>> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields.next().expect("non-empty line has a field").to_string();
        let seq_text = fields.next().unwrap_or("");
        if fields.next().is_some() {
            return Err(Error::Parse {
                file,
                line: no + 1,
                message: "expected `ref_id sequence`".into(),
            });
        }
        let seq = NucSeq::from_acgt(seq_text).map_err(|e| Error::Parse {
            file: file.clone(),
            line: no + 1,
            message: e.to_string(),
        })?;
        out.push((no + 1, id, seq));
    }
    Ok(out)
}

/// Reads a `ref_id sequence` file, keeping line order.
pub fn read_sequences(path: impl AsRef<Path>) -> Result<Vec<(String, NucSeq)>> {
    Ok(parse_lines(path.as_ref())?
        .into_iter()
        .map(|(_, id, s)| (id, s))
        .collect())
}

/// Reads a reference file and a reads file, both `ref_id sequence` per line.
/// References without reads are dropped.
pub fn ingest(refs_path: impl AsRef<Path>, reads_path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let refs_path = refs_path.as_ref();
    let reads_path = reads_path.as_ref();
    let mut records = Vec::new();
    let mut by_id = HashMap::new();
    for (line, id, x) in parse_lines(refs_path)? {
        if by_id.insert(id.clone(), records.len()).is_some() {
            return Err(Error::Parse {
                file: refs_path.display().to_string(),
                line,
                message: format!("duplicate ref_id {id:?}"),
            });
        }
        records.push(DatasetRecord {
            ref_id: id,
            x,
            reads: Vec::new(),
        });
    }
    let reads = parse_lines(reads_path)?;
    if reads.is_empty() {
        return Err(Error::NoReads);
    }
    for (_, id, y) in reads {
        let slot = *by_id.get(&id).ok_or_else(|| Error::UnknownRefId(id.clone()))?;
        records[slot].reads.push(y);
    }
    records.retain(|r| !r.reads.is_empty());
    Ok(records)
}

/// Writes records in the format read by [`ingest`].
pub fn write_dataset(
    refs_path: impl AsRef<Path>,
    reads_path: impl AsRef<Path>,
    records: &[DatasetRecord],
) -> Result<()> {
    let mut refs = std::io::BufWriter::new(std::fs::File::create(refs_path)?);
    let mut reads = std::io::BufWriter::new(std::fs::File::create(reads_path)?);
    for r in records {
        writeln!(refs, "{} {}", r.ref_id, r.x)?;
        for y in &r.reads {
            writeln!(reads, "{} {}", r.ref_id, y)?;
        }
    }
    refs.flush()?;
    reads.flush()?;
    Ok(())
}
