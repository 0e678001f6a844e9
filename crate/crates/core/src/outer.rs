//! Protograph LDPC outer code: base matrices, quasi-cyclic lifting, systematic
//! encoding and sum-product decoding over GF(2) or GF(4).

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::decoder::{AppMatrix, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Base matrix whose entries count parallel edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protograph {
    pub base: Vec<Vec<u8>>,
}

/// An exact rational number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(num, den).max(1);
        Fraction {
            num: num / g,
            den: den / g,
        }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Protograph {
    pub fn new(base: Vec<Vec<u8>>) -> Result<Self> {
        let cols = base.first().map_or(0, Vec::len);
        if base.is_empty() || cols == 0 || base.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidCode("base matrix must be a non-empty rectangle".into()));
        }
        if cols <= base.len() {
            return Err(Error::InvalidCode("base matrix needs more columns than rows".into()));
        }
        if base.iter().flatten().any(|&e| e > 3) {
            return Err(Error::InvalidCode("base matrix entries are limited to 3".into()));
        }
        Ok(Protograph { base })
    }

    pub fn rows(&self) -> usize {
        self.base.len()
    }

    pub fn cols(&self) -> usize {
        self.base[0].len()
    }

    /// `1 - rows / cols`, assuming full rank.
    pub fn design_rate(&self) -> Fraction {
        Fraction::new((self.cols() - self.rows()) as u64, self.cols() as u64)
    }

    pub fn max_multiplicity(&self) -> u8 {
        self.base.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// Optimized protograph for `m` reads and the overall rate it achieves with
/// the rate-3/2 inner code.
pub fn table1(m: usize) -> Result<(Protograph, Fraction)> {
    let base = match m {
        1 => vec![vec![1, 2, 0, 1, 2, 2, 1, 1, 1, 3], vec![2, 0, 3, 2, 1, 0, 1, 2, 2, 0]],
        2 => vec![vec![2, 2, 3, 3, 2, 3, 3, 3]],
        5 => vec![vec![3, 2, 3, 3, 2, 2, 3, 3, 2, 2, 3, 3, 3, 2, 3]],
        _ => return Err(Error::UnsupportedReads(m)),
    };
    let proto = Protograph::new(base)?;
    let r = proto.design_rate();
    Ok((proto, Fraction::new(3 * r.num, 2 * r.den)))
}

/// Sparse binary parity-check matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityCheck {
    rows: usize,
    cols: usize,
    /// Column indices of every row, ascending.
    row_adj: Vec<Vec<u32>>,
    col_adj: Vec<Vec<u32>>,
    /// Lift factor, 1 for matrices not built by lifting.
    pub lift: usize,
    /// Circulant shifts per base edge `(row, col, shifts)`.
    pub shifts: Vec<(usize, usize, Vec<usize>)>,
}

impl ParityCheck {
    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize)]) -> Result<Self> {
        let mut row_adj = vec![Vec::new(); rows];
        for &(r, c) in entries {
            if r >= rows || c >= cols {
                return Err(Error::IndexOutOfRange {
                    index: r.max(c),
                    len: rows.min(cols),
                });
            }
            row_adj[r].push(c as u32);
        }
        for row in &mut row_adj {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidCode("repeated entry in parity-check matrix".into()));
            }
        }
        let mut col_adj = vec![Vec::new(); cols];
        for (r, row) in row_adj.iter().enumerate() {
            for &c in row {
                col_adj[c as usize].push(r as u32);
            }
        }
        Ok(ParityCheck {
            rows,
            cols,
            row_adj,
            col_adj,
            lift: 1,
            shifts: Vec::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.row_adj[r]
    }

    pub fn col(&self, c: usize) -> &[u32] {
        &self.col_adj[c]
    }

    pub fn nnz(&self) -> usize {
        self.row_adj.iter().map(Vec::len).sum()
    }

    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.row_adj
            .iter()
            .map(|row| row.iter().fold(0, |acc, &c| acc ^ (bits[c as usize] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.cols && self.syndrome(bits).iter().all(|&s| s == 0)
    }

    /// Number of pairs of rows sharing at least two columns, i.e. whether the
    /// Tanner graph has 4-cycles. Checked directly on the matrix.
    pub fn four_cycle_pairs(&self) -> usize {
        let mut shared: HashMap<(u32, u32), u32> = HashMap::new();
        for col in &self.col_adj {
            for (i, &a) in col.iter().enumerate() {
                for &b in &col[i + 1..] {
                    *shared.entry((a, b)).or_default() += 1;
                }
            }
        }
        shared.values().filter(|&&n| n >= 2).count()
    }

    pub fn has_girth_six(&self) -> bool {
        self.four_cycle_pairs() == 0
    }

    /// `rows cols` header followed by one `r c` line per nonzero entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for (r, row) in self.row_adj.iter().enumerate() {
            for c in row {
                writeln!(out, "{r} {c}").expect("write to string");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let parse_pair = |line: &str, n: usize| -> Result<(usize, usize)> {
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(Error::Parse {
                    file: "parity-check".into(),
                    line: n,
                    message: format!("expected two integers, found {line:?}"),
                }),
            }
        };
        let (rows, cols) = parse_pair(lines.next().unwrap_or(""), 1)?;
        let entries = lines
            .enumerate()
            .map(|(i, l)| parse_pair(l, i + 2))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(rows, cols, &entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// One edge of the protograph with its circulant shift.
#[derive(Clone, Copy, Debug)]
struct BaseEdge {
    row: usize,
    col: usize,
    shift: usize,
}

/// Whether giving `candidate` shift `shift` closes a length-4 cycle with the
/// edges placed so far. Every closed walk `e1 e2 e3 e4` (row, column, row,
/// column) with distinct consecutive edges lifts to cycles iff
/// `s1 - s2 + s3 - s4 = 0 (mod Z)`; it suffices to put the new edge first.
fn closes_four_cycle(placed: &[BaseEdge], candidate: BaseEdge, z: usize) -> bool {
    let all: Vec<(usize, BaseEdge)> = placed
        .iter()
        .copied()
        .enumerate()
        .chain(std::iter::once((usize::MAX, candidate)))
        .collect();
    let id1 = usize::MAX;
    let e1 = candidate;
    for &(id2, e2) in all.iter().filter(|(id, e)| *id != id1 && e.col == e1.col) {
        for &(id3, e3) in all.iter().filter(|(id, e)| *id != id2 && e.row == e2.row) {
            for &(_, e4) in all
                .iter()
                .filter(|(id, e)| *id != id3 && *id != id1 && e.row == e1.row && e.col == e3.col)
            {
                let sum = (e1.shift + z - e2.shift + e3.shift + z - e4.shift) % z;
                if sum == 0 {
                    return true;
                }
            }
        }
    }
    false
}

fn build_lifted(proto: &Protograph, z: usize, edges: &[BaseEdge]) -> ParityCheck {
    let mut entries = Vec::with_capacity(edges.len() * z);
    for e in edges {
        for i in 0..z {
            entries.push((e.row * z + i, e.col * z + (i + e.shift) % z));
        }
    }
    let mut pc = ParityCheck::from_entries(proto.rows() * z, proto.cols() * z, &entries)
        .expect("distinct shifts give distinct entries");
    pc.lift = z;
    let mut shifts: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for e in edges {
        match shifts.last_mut() {
            Some((r, c, s)) if *r == e.row && *c == e.col => s.push(e.shift),
            _ => shifts.push((e.row, e.col, vec![e.shift])),
        }
    }
    pc.shifts = shifts;
    pc
}

/// Lifts `proto` by `z` with circulant permutations. Shifts are placed greedily
/// in random order, rejecting any that closes a 4-cycle; when no shift is
/// free the edge takes the first distinct one and the result is not girth-6.
/// Use [`ParityCheck::has_girth_six`] to check the outcome.
pub fn lift(proto: &Protograph, z: usize, seed: u64) -> Result<ParityCheck> {
    if z == 0 {
        return Err(Error::LiftTooSmall {
            z,
            reason: "lift factor must be positive".into(),
        });
    }
    if (proto.max_multiplicity() as usize) > z {
        return Err(Error::LiftTooSmall {
            z,
            reason: format!("{} parallel edges need distinct shifts", proto.max_multiplicity()),
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut placed: Vec<BaseEdge> = Vec::new();
    let mut order: Vec<usize> = (0..z).collect();
    for (r, row) in proto.base.iter().enumerate() {
        for (c, &mult) in row.iter().enumerate() {
            let mut used: Vec<usize> = Vec::new();
            for _ in 0..mult {
                order.shuffle(&mut rng);
                let fresh = order.iter().copied().filter(|s| !used.contains(s));
                let mut choice = None;
                let mut fallback = None;
                for shift in fresh {
                    fallback.get_or_insert(shift);
                    let cand = BaseEdge { row: r, col: c, shift };
                    if !closes_four_cycle(&placed, cand, z) {
                        choice = Some(shift);
                        break;
                    }
                }
                let shift = choice.or(fallback).expect("z >= multiplicity");
                used.push(shift);
                placed.push(BaseEdge { row: r, col: c, shift });
            }
        }
    }
    Ok(build_lifted(proto, z, &placed))
}

/// Dense GF(2) matrix, one bit per column.
#[derive(Clone, Debug)]
struct BitMatrix {
    words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        BitMatrix {
            words,
            data: vec![0; rows * words],
        }
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> bool {
        (self.data[r * self.words + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize) {
        self.data[r * self.words + c / 64] |= 1 << (c % 64);
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for w in 0..self.words {
                self.data.swap(a * self.words + w, b * self.words + w);
            }
        }
    }

    fn xor_row(&mut self, dst: usize, src: usize) {
        for w in 0..self.words {
            let v = self.data[src * self.words + w];
            self.data[dst * self.words + w] ^= v;
        }
    }
}

/// Systematic encoder obtained by Gaussian elimination of the parity-check
/// matrix.
#[derive(Clone, Debug)]
pub struct SystematicEncoder {
    n: usize,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// Parity bit `i` is the XOR of the information bits selected by row `i`.
    parity_rows: BitMatrix,
}

impl SystematicEncoder {
    pub fn new(pc: &ParityCheck) -> Result<Self> {
        let (m, n) = (pc.rows(), pc.cols());
        let mut h = BitMatrix::zeros(m, n);
        for r in 0..m {
            for &c in pc.row(r) {
                h.set(r, c as usize);
            }
        }
        // Eliminate from the last column down so that information bits
        // tend to occupy the leading positions.
        let mut pivots = Vec::with_capacity(m);
        let mut rank = 0;
        for c in (0..n).rev() {
            if rank == m {
                break;
            }
            let Some(p) = (rank..m).find(|&r| h.get(r, c)) else {
                continue;
            };
            h.swap_rows(rank, p);
            for r in 0..m {
                if r != rank && h.get(r, c) {
                    h.xor_row(r, rank);
                }
            }
            pivots.push(c);
            rank += 1;
        }
        if rank < m {
            return Err(Error::RankDeficient { rows: m, rank });
        }
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&c| is_pivot[c] = true);
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let mut parity_rows = BitMatrix::zeros(m, info_positions.len());
        for r in 0..m {
            for (j, &c) in info_positions.iter().enumerate() {
                if h.get(r, c) {
                    parity_rows.set(r, j);
                }
            }
        }
        Ok(SystematicEncoder {
            n,
            info_positions,
            parity_positions: pivots,
            parity_rows,
        })
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k() {
            return Err(Error::ShapeMismatch(format!(
                "{} information bits for dimension {}",
                info.len(),
                self.k()
            )));
        }
        let mut packed = vec![0u64; self.parity_rows.words];
        for (j, &b) in info.iter().enumerate() {
            if b > 1 {
                return Err(Error::InvalidCode("information bits must be 0 or 1".into()));
            }
            packed[j / 64] |= (b as u64) << (j % 64);
        }
        let mut word = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            word[pos] = b;
        }
        let w = self.parity_rows.words;
        for (r, &pos) in self.parity_positions.iter().enumerate() {
            let row = &self.parity_rows.data[r * w..(r + 1) * w];
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            word[pos] = (ones & 1) as u8;
        }
        Ok(word)
    }

    pub fn extract_info(&self, word: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| word[p]).collect()
    }
}

/// Belief-propagation settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpOptions {
    pub max_iters: usize,
    /// Magnitude limit of every log-likelihood ratio.
    pub clamp: f64,
    /// Stop as soon as the hard decision satisfies every check.
    pub early_stop: bool,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            max_iters: 50,
            clamp: 30.0,
            early_stop: true,
        }
    }
}

/// Soft input of the outer decoder.
#[derive(Clone, Debug)]
pub enum SoftWord {
    /// `ln p(0) / p(1)` per code bit.
    Binary(Vec<f64>),
    /// Probabilities of `(bit 2j, bit 2j+1)` as one GF(4) symbol per row.
    Quaternary(AppMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpOutcome {
    /// Hard decision on every code bit.
    pub bits: Vec<u8>,
    /// Zero syndrome reached with no undecided position.
    pub converged: bool,
    pub iterations: usize,
    /// Binary: posterior LLR per bit. GF(4): `ln p(best) - ln p(runner-up)`
    /// per symbol.
    pub reliability: Vec<f64>,
}

/// Binary sum-product decoding with a flooding schedule.
pub fn decode_binary(llrs: &[f64], pc: &ParityCheck, opts: &BpOptions) -> Result<BpOutcome> {
    let n = pc.cols();
    if llrs.len() != n {
        return Err(Error::ShapeMismatch(format!("{} LLRs for code length {n}", llrs.len())));
    }
    let clamp = |v: f64| {
        if v.is_nan() {
            0.0
        } else {
            v.clamp(-opts.clamp, opts.clamp)
        }
    };
    let channel: Vec<f64> = llrs.iter().map(|&l| clamp(l)).collect();
    // Edge ids are assigned row by row; `col_edges` lists them per column.
    let mut row_start = Vec::with_capacity(pc.rows() + 1);
    let mut edge_col = Vec::with_capacity(pc.nnz());
    row_start.push(0);
    for r in 0..pc.rows() {
        edge_col.extend(pc.row(r).iter().map(|&c| c as usize));
        row_start.push(edge_col.len());
    }
    let mut col_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &c) in edge_col.iter().enumerate() {
        col_edges[c].push(e);
    }
    let mut v2c: Vec<f64> = edge_col.iter().map(|&c| channel[c]).collect();
    let mut c2v = vec![0.0; edge_col.len()];
    let mut posterior = channel.clone();
    let mut bits = vec![0u8; n];
    let mut tanh_buf = Vec::new();
    let mut suffix = Vec::new();
    let max_iters = opts.max_iters.max(1);
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iters {
        iterations += 1;
        for r in 0..pc.rows() {
            let edges = row_start[r]..row_start[r + 1];
            tanh_buf.clear();
            tanh_buf.extend(v2c[edges.clone()].iter().map(|&m| (m / 2.0).tanh()));
            let deg = tanh_buf.len();
            suffix.clear();
            suffix.resize(deg + 1, 1.0);
            for i in (0..deg).rev() {
                suffix[i] = suffix[i + 1] * tanh_buf[i];
            }
            let mut prefix = 1.0;
            for (i, e) in edges.enumerate() {
                let prod = (prefix * suffix[i + 1]).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                c2v[e] = clamp(2.0 * prod.atanh());
                prefix *= tanh_buf[i];
            }
        }
        for c in 0..n {
            let total = channel[c] + col_edges[c].iter().map(|&e| c2v[e]).sum::<f64>();
            posterior[c] = total;
            for &e in &col_edges[c] {
                v2c[e] = clamp(total - c2v[e]);
            }
            bits[c] = (total < 0.0) as u8;
        }
        let decided = posterior.iter().all(|&l| l != 0.0);
        converged = decided && pc.syndrome(&bits).iter().all(|&s| s == 0);
        if converged && opts.early_stop {
            break;
        }
    }
    Ok(BpOutcome {
        bits,
        converged,
        iterations,
        reliability: posterior,
    })
}

#[inline]
fn wht4(p: [f64; 4]) -> [f64; 4] {
    let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
    [a + b + c + d, a - b + c - d, a + b - c - d, a - b - c + d]
}

fn normalize4(mut p: [f64; 4]) -> [f64; 4] {
    p.iter_mut().for_each(|v| *v = v.max(PROB_FLOOR));
    let s: f64 = p.iter().sum();
    p.map(|v| v / s)
}

/// Sum-product decoding over GF(4) for a binary parity-check matrix. Check
/// node convolutions run in the Walsh-Hadamard domain.
pub fn decode_gf4(probs: &AppMatrix, pc: &ParityCheck, opts: &BpOptions) -> Result<BpOutcome> {
    let n = pc.cols();
    if probs.q() != 4 || probs.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} symbol probabilities for code length {n} over GF(4)",
            probs.len(),
            probs.q()
        )));
    }
    let floor = (-opts.clamp).exp();
    let channel: Vec<[f64; 4]> = probs
        .rows()
        .map(|r| {
            let s: f64 = r.iter().sum();
            let s = if s > 0.0 { s } else { 1.0 };
            normalize4([r[0], r[1], r[2], r[3]].map(|v| (v / s).max(floor)))
        })
        .collect();
    let mut row_start = vec![0];
    let mut edge_col = Vec::with_capacity(pc.nnz());
    for r in 0..pc.rows() {
        edge_col.extend(pc.row(r).iter().map(|&c| c as usize));
        row_start.push(edge_col.len());
    }
    let mut col_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &c) in edge_col.iter().enumerate() {
        col_edges[c].push(e);
    }
    let mut v2c: Vec<[f64; 4]> = edge_col.iter().map(|&c| channel[c]).collect();
    let mut c2v = vec![[0.25; 4]; edge_col.len()];
    let mut symbols = vec![0usize; n];
    let mut reliability = vec![0.0; n];
    let mut spectra: Vec<[f64; 4]> = Vec::new();
    let mut suffix: Vec<[f64; 4]> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..opts.max_iters.max(1) {
        iterations += 1;
        for r in 0..pc.rows() {
            let edges = row_start[r]..row_start[r + 1];
            spectra.clear();
            spectra.extend(v2c[edges.clone()].iter().map(|&m| wht4(m)));
            let deg = spectra.len();
            suffix.clear();
            suffix.resize(deg + 1, [1.0; 4]);
            for i in (0..deg).rev() {
                suffix[i] = std::array::from_fn(|s| suffix[i + 1][s] * spectra[i][s]);
            }
            let mut prefix = [1.0; 4];
            for (i, e) in edges.enumerate() {
                let spec: [f64; 4] = std::array::from_fn(|s| prefix[s] * suffix[i + 1][s]);
                c2v[e] = normalize4(wht4(spec).map(|v| v.max(floor)));
                prefix = std::array::from_fn(|s| prefix[s] * spectra[i][s]);
            }
        }
        for c in 0..n {
            let edges = &col_edges[c];
            let mut total = channel[c];
            for &e in edges {
                total = normalize4(std::array::from_fn(|a| total[a] * c2v[e][a]));
            }
            for &e in edges {
                let out: [f64; 4] = std::array::from_fn(|a| total[a] / c2v[e][a]);
                v2c[e] = normalize4(out.map(|v| v.max(floor)));
            }
            let mut order = [0usize, 1, 2, 3];
            order.sort_by(|&a, &b| total[b].total_cmp(&total[a]));
            symbols[c] = order[0];
            reliability[c] = total[order[0]].ln() - total[order[1]].ln();
        }
        let bits = symbols_to_bits(&symbols);
        let (hi, lo): (Vec<u8>, Vec<u8>) = bits.chunks(2).map(|p| (p[0], p[1])).unzip();
        let decided = reliability.iter().all(|&r| r > 0.0);
        converged = decided && pc.is_codeword(&hi) && pc.is_codeword(&lo);
        if converged && opts.early_stop {
            break;
        }
    }
    Ok(BpOutcome {
        bits: symbols_to_bits(&symbols),
        converged,
        iterations,
        reliability,
    })
}

fn symbols_to_bits(symbols: &[usize]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| [((s >> 1) & 1) as u8, (s & 1) as u8])
        .collect()
}

/// Outer code: a lifted parity-check matrix with its encoder, over GF(2) or
/// GF(4). Over GF(4) each code symbol is a pair of consecutive bits and the
/// two bit planes are independent binary codewords.
#[derive(Clone, Debug)]
pub struct LdpcCode {
    pub pc: ParityCheck,
    encoder: SystematicEncoder,
    q: usize,
}

impl LdpcCode {
    pub fn new(pc: ParityCheck, q: usize) -> Result<Self> {
        if q != 2 && q != 4 {
            return Err(Error::Config(format!("outer alphabet size {q} must be 2 or 4")));
        }
        let encoder = SystematicEncoder::new(&pc)?;
        Ok(LdpcCode { pc, encoder, q })
    }

    /// Lifts `proto` with the first of a run of derived seeds that gives a
    /// full-rank matrix, preferring ones without 4-cycles.
    pub fn from_protograph(proto: &Protograph, z: usize, q: usize, seed: u64) -> Result<Self> {
        let mut fallback = None;
        let mut last_err = None;
        for attempt in 0..16 {
            let pc = lift(proto, z, derive_seed(seed, attempt))?;
            let girth6 = pc.has_girth_six();
            match Self::new(pc, q) {
                Ok(code) if girth6 => return Ok(code),
                Ok(code) => {
                    fallback.get_or_insert(code);
                }
                Err(e) => last_err = Some(e),
            }
        }
        fallback.ok_or_else(|| last_err.expect("at least one attempt"))
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn bits_per_symbol(&self) -> usize {
        if self.q == 4 {
            2
        } else {
            1
        }
    }

    /// Code length in bits.
    pub fn n_bits(&self) -> usize {
        self.pc.cols() * self.bits_per_symbol()
    }

    /// Information bits per codeword.
    pub fn k_bits(&self) -> usize {
        self.encoder.k() * self.bits_per_symbol()
    }

    pub fn rate(&self) -> Fraction {
        Fraction::new(self.encoder.k() as u64, self.pc.cols() as u64)
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if self.q == 2 {
            return self.encoder.encode(info);
        }
        if info.len() != self.k_bits() {
            return Err(Error::ShapeMismatch(format!(
                "{} information bits for dimension {}",
                info.len(),
                self.k_bits()
            )));
        }
        let (hi, lo): (Vec<u8>, Vec<u8>) = info.chunks(2).map(|p| (p[0], p[1])).unzip();
        let (hi, lo) = (self.encoder.encode(&hi)?, self.encoder.encode(&lo)?);
        Ok(hi.iter().zip(&lo).flat_map(|(&a, &b)| [a, b]).collect())
    }

    pub fn extract_info(&self, word: &[u8]) -> Vec<u8> {
        if self.q == 2 {
            return self.encoder.extract_info(word);
        }
        self.encoder
            .info_positions()
            .iter()
            .flat_map(|&p| [word[2 * p], word[2 * p + 1]])
            .collect()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        if word.len() != self.n_bits() {
            return false;
        }
        if self.q == 2 {
            return self.pc.is_codeword(word);
        }
        let (hi, lo): (Vec<u8>, Vec<u8>) = word.chunks(2).map(|p| (p[0], p[1])).unzip();
        self.pc.is_codeword(&hi) && self.pc.is_codeword(&lo)
    }

    pub fn decode(&self, soft: &SoftWord, opts: &BpOptions) -> Result<BpOutcome> {
        match (soft, self.q) {
            (SoftWord::Binary(llrs), 2) => decode_binary(llrs, &self.pc, opts),
            (SoftWord::Quaternary(probs), 4) => decode_gf4(probs, &self.pc, opts),
            _ => Err(Error::ShapeMismatch(
                "soft input does not match the outer alphabet".into(),
            )),
        }
    }
}

/// Binary LLRs `ln p(0) / p(1)` from rows of bit probabilities.
pub fn bit_llrs(app: &AppMatrix) -> Result<Vec<f64>> {
    if app.q() != 2 {
        return Err(Error::ShapeMismatch("bit LLRs need a binary APP matrix".into()));
    }
    Ok(app
        .rows()
        .map(|r| r[0].max(PROB_FLOOR).ln() - r[1].max(PROB_FLOOR).ln())
        .collect())
}
