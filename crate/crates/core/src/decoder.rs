//! Symbolwise MAP decoding of one read over the joint trellis of the inner
//! code and the memory-k channel, with drift states, and separate combining
//! of several reads.
//!
//! A trellis state is `(history, previous event, encoder state, drift)` where
//! the history holds the last `k - 1` channel input symbols. There is one
//! section per channel input symbol. Forward messages are stored for every
//! section; backward messages are produced on the fly and only for states the
//! forward pass reached.

use std::fmt::Write as _;
use std::path::Path;

use crate::channel::{region_of, ChannelParams, EventKind, NucSeq, PositionClass, ALPHABET};
use crate::error::{Error, Result};
use crate::inner::InnerBlock;

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

const EVENTS: usize = 4;
const INS: usize = 0;
const DEL: usize = 1;
const SUB: usize = 2;
const NOERR: usize = 3;

/// Admissible range of the drift (inserted minus deleted symbols so far).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DriftWindow {
    pub d_min: i32,
    pub d_max: i32,
}

impl DriftWindow {
    pub fn new(d_min: i32, d_max: i32) -> Result<Self> {
        if d_min > 0 || d_max < 0 {
            return Err(Error::InvalidParams(format!(
                "drift window [{d_min}, {d_max}] must contain 0"
            )));
        }
        Ok(DriftWindow { d_min, d_max })
    }

    pub fn symmetric(d_max: u32) -> Self {
        DriftWindow {
            d_min: -(d_max as i32),
            d_max: d_max as i32,
        }
    }

    /// Number of drift values.
    pub fn width(&self) -> usize {
        (self.d_max - self.d_min + 1) as usize
    }

    /// Drift changes possible in one section: one deletion, no change, or an
    /// insertion burst of each admissible length.
    pub fn transitions(l_max: usize) -> usize {
        l_max + 1
    }

    pub fn contains(&self, d: i64) -> bool {
        d >= self.d_min as i64 && d <= self.d_max as i64
    }
}

/// Symmetric window of `ceil(5 sqrt(N p / (1 - p)))` where `p` is the larger
/// of the average insertion and deletion probabilities.
pub fn default_drift_window(n: usize, params: &ChannelParams) -> Result<DriftWindow> {
    let avg = params.average_event_probs();
    let p = avg[EventKind::Ins.index()].max(avg[EventKind::Del.index()]);
    drift_window_for(n, p)
}

pub fn drift_window_for(n: usize, p: f64) -> Result<DriftWindow> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParams(format!(
            "indel probability {p} must lie in [0, 1)"
        )));
    }
    let d = (5.0 * (n as f64 * p / (1.0 - p)).sqrt()).ceil();
    Ok(DriftWindow::symmetric(d as u32))
}

/// Per-symbol probability distributions over an outer alphabet of size `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct AppMatrix {
    q: usize,
    data: Vec<f64>,
}

impl AppMatrix {
    pub fn from_flat(q: usize, data: Vec<f64>) -> Result<Self> {
        if q < 2 || !data.len().is_multiple_of(q) {
            return Err(Error::ShapeMismatch(format!(
                "{} entries do not form rows of {q}",
                data.len()
            )));
        }
        Ok(AppMatrix { q, data })
    }

    pub fn from_rows(q: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::ShapeMismatch(format!("rows must have {q} entries")));
        }
        Self::from_flat(q, rows.concat())
    }

    pub fn uniform(len: usize, q: usize) -> Self {
        AppMatrix {
            q,
            data: vec![1.0 / q as f64; len * q],
        }
    }

    /// Symbol priors implied by independent bit priors `p(bit = 1)`, first bit
    /// most significant.
    pub fn from_bit_priors(bit_priors: &[f64], bits_per_symbol: usize) -> Result<Self> {
        if bits_per_symbol == 0 || bits_per_symbol > 8 || !bit_priors.len().is_multiple_of(bits_per_symbol) {
            return Err(Error::ShapeMismatch(format!(
                "{} bit priors cannot be grouped by {bits_per_symbol}",
                bit_priors.len()
            )));
        }
        let q = 1 << bits_per_symbol;
        let mut data = Vec::with_capacity(bit_priors.len() / bits_per_symbol * q);
        for chunk in bit_priors.chunks(bits_per_symbol) {
            for a in 0..q {
                let mut p = 1.0;
                for (j, &p1) in chunk.iter().enumerate() {
                    let bit = (a >> (bits_per_symbol - 1 - j)) & 1;
                    p *= if bit == 1 { p1 } else { 1.0 - p1 };
                }
                data.push(p);
            }
        }
        Ok(AppMatrix { q, data })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.q)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Index of the most probable symbol of every row.
    pub fn hard_decisions(&self) -> Vec<usize> {
        self.rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (a, &p)| if p > best.1 { (a, p) } else { best },
                    )
                    .0
            })
            .collect()
    }

    pub fn concat(parts: &[AppMatrix]) -> Result<Self> {
        let q = parts.first().map_or(2, |p| p.q);
        if parts.iter().any(|p| p.q != q) {
            return Err(Error::ShapeMismatch("alphabet sizes differ".into()));
        }
        Ok(AppMatrix {
            q,
            data: parts.iter().flat_map(|p| p.data.iter().copied()).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &AppMatrix) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for a in 0..self.q {
            write!(out, ",p{a}").expect("write to string");
        }
        out.push('\n');
        for (i, row) in self.rows().enumerate() {
            write!(out, "{i}").expect("write to string");
            for p in row {
                write!(out, ",{p:.17e}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn normalize_in_place(v: &mut [f64]) -> f64 {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter_mut().for_each(|p| *p /= sum);
    }
    sum
}

/// Separate decoding: `prod_j p_j(a) / prior(a)^(M-1)`, renormalized, in the
/// log domain.
pub fn combine_separate(apps: &[AppMatrix], priors: &AppMatrix) -> Result<AppMatrix> {
    let first = apps.first().ok_or(Error::NoReads)?;
    for app in apps {
        if app.q != priors.q || app.len() != priors.len() {
            return Err(Error::ShapeMismatch(format!(
                "APP matrix {}x{} against priors {}x{}",
                app.len(),
                app.q,
                priors.len(),
                priors.q
            )));
        }
    }
    if priors.data.iter().any(|&p| p <= 0.0) {
        return Err(Error::ZeroPrior);
    }
    if apps.len() == 1 {
        return Ok(first.clone());
    }
    let q = first.q;
    let extra = (apps.len() - 1) as f64;
    let mut data = vec![0.0; first.data.len()];
    let mut logs = vec![0.0; q];
    for (i, out) in data.chunks_mut(q).enumerate() {
        for (a, l) in logs.iter_mut().enumerate() {
            let idx = i * q + a;
            *l = apps.iter().map(|m| m.data[idx].max(PROB_FLOOR).ln()).sum::<f64>() - extra * priors.data[idx].ln();
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (o, l) in out.iter_mut().zip(&logs) {
            *o = (l - top).exp();
        }
        normalize_in_place(out);
    }
    Ok(AppMatrix { q, data })
}

/// Emission factor and drift change of one event, without the event prior.
///
/// `pos` is the index of the next unread output symbol. Returns `None` when
/// the event cannot have produced `y` at this point.
pub fn branch_metric(
    event: EventKind,
    ins_len: usize,
    x: u8,
    y: &[u8],
    pos: usize,
    ins_len_probs: &[f64],
    sub_probs: &[f64; 4],
) -> Option<(f64, i32)> {
    match event {
        EventKind::NoErr => (y.get(pos) == Some(&x)).then_some((1.0, 0)),
        EventKind::Sub => match y.get(pos) {
            Some(&a) if a != x => Some((sub_probs[a as usize], 0)),
            _ => None,
        },
        EventKind::Del => Some((1.0, -1)),
        EventKind::Ins => {
            if ins_len < 2 || ins_len - 2 >= ins_len_probs.len() {
                return None;
            }
            (y.get(pos + ins_len) == Some(&x)).then(|| {
                (
                    0.25f64.powi(ins_len as i32) * ins_len_probs[ins_len - 2],
                    ins_len as i32,
                )
            })
        }
    }
}

/// Result of decoding one read.
#[derive(Clone, Debug)]
pub struct DecodeOutput {
    pub app: AppMatrix,
    /// `ln p(y)` under the decoder's model and priors.
    pub log_likelihood: f64,
}

#[derive(Clone, Copy)]
struct Layout {
    hist: usize,
    enc: usize,
    width: usize,
    d_min: i32,
}

impl Layout {
    #[inline]
    fn index(&self, h: usize, z: usize, s: usize, di: usize) -> usize {
        ((h * EVENTS + z) * self.enc + s) * self.width + di
    }

    fn len(&self) -> usize {
        self.hist * EVENTS * self.enc * self.width
    }
}

/// One input choice of a section, prepared for a fixed `(history, event, state)`.
struct Choice<'p> {
    u: usize,
    prior: f64,
    x: u8,
    next_hist: usize,
    next_state: usize,
    events: &'p [f64; 4],
    ins_len: &'p [f64],
    sub: &'p [f64; 4],
}

/// How the bits of an outer symbol fall onto trellis sections.
#[derive(Clone, Copy, Debug)]
enum SymbolPlacement {
    /// All bits in one section, at the given input-bit positions.
    Local { section: usize },
    /// First bit at the end of `section`, second at the start of `section + 1`.
    Split { section: usize },
}

/// Joint trellis decoder for one block.
pub struct JointDecoder<'a> {
    block: &'a InnerBlock,
    params: &'a ChannelParams,
    window: DriftWindow,
    layout: Layout,
    regions: Vec<PositionClass>,
}

impl<'a> JointDecoder<'a> {
    pub fn new(block: &'a InnerBlock, params: &'a ChannelParams, window: DriftWindow) -> Result<Self> {
        params.check()?;
        DriftWindow::new(window.d_min, window.d_max)?;
        let n = block.channel_len();
        if n == 0 {
            return Err(Error::ShapeMismatch("empty block".into()));
        }
        let layout = Layout {
            hist: ALPHABET.pow(params.k as u32 - 1),
            enc: block.trellis.num_states,
            width: window.width(),
            d_min: window.d_min,
        };
        let regions = (1..=n).map(|i| region_of(i, params.k, n)).collect();
        Ok(JointDecoder {
            block,
            params,
            window,
            layout,
            regions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.layout.len()
    }

    fn check_priors(&self, bit_priors: &[f64]) -> Result<()> {
        if bit_priors.len() != self.block.payload_bits {
            return Err(Error::ShapeMismatch(format!(
                "{} bit priors for {} payload bits",
                bit_priors.len(),
                self.block.payload_bits
            )));
        }
        if bit_priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParams("bit priors must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Prior of every input value of every section; padding bits are zero.
    fn section_priors(&self, bit_priors: &[f64]) -> Vec<Vec<f64>> {
        let trellis = &self.block.trellis;
        trellis
            .sections
            .iter()
            .map(|sec| {
                let b = trellis.tables[sec.table].input_bits;
                (0..1usize << b)
                    .map(|u| {
                        (0..b)
                            .map(|j| {
                                let bit = (u >> (b - 1 - j)) & 1;
                                let p1 = bit_priors.get(sec.first_bit + j).copied().unwrap_or(0.0);
                                if bit == 1 {
                                    p1
                                } else {
                                    1.0 - p1
                                }
                            })
                            .product()
                    })
                    .collect()
            })
            .collect()
    }

    fn prepare<'s>(&'s self, t: usize, h: usize, z: usize, s: usize, priors: &[f64], out: &mut Vec<Choice<'s>>) {
        out.clear();
        let trellis = &self.block.trellis;
        let table = trellis.table(t);
        let region = self.regions[t];
        let b = table.input_bits;
        let offset = self.block.offset[t];
        let prev = EventKind::from_index(z);
        for (u, &prior) in priors.iter().enumerate() {
            if prior == 0.0 {
                continue;
            }
            let idx = (s << b) | u;
            let x = (table.symbol[idx] + offset) & 3;
            let ctx = match region {
                PositionClass::Middle => h * ALPHABET + x as usize,
                _ => x as usize,
            };
            let row = self.params.row(region, ctx);
            out.push(Choice {
                u,
                prior,
                x,
                next_hist: (h * ALPHABET + x as usize) % self.layout.hist,
                next_state: table.next[idx] as usize,
                events: self.params.event_probs(region, ctx, Some(prev)),
                ins_len: &row.ins_len,
                sub: &row.sub,
            });
        }
    }

    /// Calls `visit(target index, gamma)` for every surviving branch of one
    /// choice leaving drift `d` at section `t`.
    #[inline]
    fn branches(&self, t: usize, d: i32, c: &Choice<'_>, y: &[u8], mut visit: impl FnMut(usize, f64)) {
        let n = self.regions.len();
        let n_out = y.len() as i64;
        let l_max = self.params.l_max;
        let budget = ((n - t - 1) * (l_max + 1)) as i64;
        let pos = (t as i64 + d as i64) as usize;
        let lay = self.layout;
        let mut emit = |z: usize, d_next: i32, gamma: f64| {
            if gamma == 0.0 || d_next < self.window.d_min || d_next > self.window.d_max {
                return;
            }
            let consumed = t as i64 + 1 + d_next as i64;
            if consumed > n_out || n_out - consumed > budget {
                return;
            }
            visit(
                lay.index(c.next_hist, z, c.next_state, (d_next - lay.d_min) as usize),
                gamma,
            );
        };
        let ev = c.events;
        if let Some(&a) = y.get(pos) {
            if a == c.x {
                emit(NOERR, d, c.prior * ev[NOERR]);
            } else {
                emit(SUB, d, c.prior * ev[SUB] * c.sub[a as usize]);
            }
        }
        emit(DEL, d - 1, c.prior * ev[DEL]);
        if ev[INS] > 0.0 {
            let mut burst = 1.0;
            for len in 2..=l_max {
                burst *= if len == 2 { 1.0 / 16.0 } else { 0.25 };
                if y.get(pos + len) == Some(&c.x) {
                    emit(INS, d + len as i32, c.prior * ev[INS] * burst * c.ins_len[len - 2]);
                }
            }
        }
    }

    /// Runs `f(t, h, z, s, di)` over every state of `weights` with positive mass.
    fn for_each_live(&self, weights: &[f64], mut f: impl FnMut(usize, usize, usize, usize)) {
        let lay = self.layout;
        for h in 0..lay.hist {
            for z in 0..EVENTS {
                for s in 0..lay.enc {
                    let base = lay.index(h, z, s, 0);
                    if weights[base..base + lay.width].iter().any(|&w| w > 0.0) {
                        f(h, z, s, base);
                    }
                }
            }
        }
    }

    fn final_mask(&self, y: &[u8]) -> Vec<f64> {
        let lay = self.layout;
        let n = self.regions.len();
        let d_end = y.len() as i64 - n as i64;
        let di = (d_end - lay.d_min as i64) as usize;
        let mut mask = vec![0.0; lay.len()];
        for h in 0..lay.hist {
            for z in 0..EVENTS {
                for s in 0..lay.enc {
                    if !self.block.trellis.terminated || s == 0 {
                        mask[lay.index(h, z, s, di)] = 1.0;
                    }
                }
            }
        }
        mask
    }

    fn check_read(&self, y: &[u8]) -> Result<()> {
        if y.iter().any(|&a| a > 3) {
            return Err(Error::InvalidSymbol(*y.iter().find(|&&a| a > 3).expect("present")));
        }
        let drift = y.len() as i64 - self.regions.len() as i64;
        if !self.window.contains(drift) {
            return Err(Error::WindowViolation {
                drift,
                d_min: self.window.d_min,
                d_max: self.window.d_max,
            });
        }
        Ok(())
    }

    /// Scaled forward messages for sections `0..=N` and `ln p(y)`.
    fn forward(&self, y: &[u8], priors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
        let lay = self.layout;
        let n = self.regions.len();
        let mut alphas = Vec::with_capacity(n + 1);
        let mut start = vec![0.0; lay.len()];
        start[lay.index(0, NOERR, 0, (-lay.d_min) as usize)] = 1.0;
        alphas.push(start);
        let mut log_likelihood = 0.0;
        let mut choices = Vec::new();
        for t in 0..n {
            let alpha = &alphas[t];
            let mut next = vec![0.0; lay.len()];
            self.for_each_live(alpha, |h, z, s, base| {
                self.prepare(t, h, z, s, &priors[t], &mut choices);
                for di in 0..lay.width {
                    let a = alpha[base + di];
                    if a == 0.0 {
                        continue;
                    }
                    let d = di as i32 + lay.d_min;
                    for c in &choices {
                        self.branches(t, d, c, y, |target, g| next[target] += a * g);
                    }
                }
            });
            if t + 1 == n {
                let mask = self.final_mask(y);
                next.iter_mut().zip(&mask).for_each(|(a, m)| *a *= m);
            }
            let sum = normalize_in_place(&mut next);
            if sum == 0.0 || !sum.is_finite() {
                return Err(Error::ZeroLikelihood);
            }
            log_likelihood += sum.ln();
            alphas.push(next);
        }
        Ok((alphas, log_likelihood))
    }

    fn placements(&self, bits_per_symbol: usize) -> Vec<SymbolPlacement> {
        let trellis = &self.block.trellis;
        (0..self.block.payload_bits / bits_per_symbol)
            .map(|j| {
                let (first, _) = trellis.bit_location(j * bits_per_symbol);
                let (last, _) = trellis.bit_location(j * bits_per_symbol + bits_per_symbol - 1);
                if first == last {
                    SymbolPlacement::Local { section: first }
                } else {
                    debug_assert_eq!(last, first + 1);
                    SymbolPlacement::Split { section: first }
                }
            })
            .collect()
    }

    /// Decodes one read. `bit_priors` holds `p(bit = 1)` per payload bit and
    /// `bits_per_symbol` groups bits into outer symbols (1 or 2).
    pub fn decode(&self, y: &[u8], bit_priors: &[f64], bits_per_symbol: usize) -> Result<DecodeOutput> {
        if !(1..=2).contains(&bits_per_symbol) || !self.block.payload_bits.is_multiple_of(bits_per_symbol) {
            return Err(Error::ShapeMismatch(format!(
                "{} payload bits cannot be grouped by {bits_per_symbol}",
                self.block.payload_bits
            )));
        }
        self.check_priors(bit_priors)?;
        self.check_read(y)?;
        let priors = self.section_priors(bit_priors);
        let (alphas, log_likelihood) = self.forward(y, &priors)?;

        let lay = self.layout;
        let n = self.regions.len();
        let q = 1usize << bits_per_symbol;
        let trellis = &self.block.trellis;
        let placements = self.placements(bits_per_symbol);
        let mut local: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut split_start: Vec<Option<usize>> = vec![None; n];
        let mut split_end: Vec<Option<usize>> = vec![None; n];
        for (j, p) in placements.iter().enumerate() {
            match *p {
                SymbolPlacement::Local { section } => local[section].push(j),
                SymbolPlacement::Split { section } => {
                    split_start[section] = Some(j);
                    split_end[section + 1] = Some(j);
                }
            }
        }

        let mut app = vec![0.0; placements.len() * q];
        let mut beta_next = self.final_mask(y);
        // Backward messages of the next section split by the value of the
        // second bit of a symbol straddling the section boundary.
        let mut split_next = [vec![0.0; lay.len()], vec![0.0; lay.len()]];
        let mut split_cur = [vec![0.0; lay.len()], vec![0.0; lay.len()]];
        let mut choices = Vec::new();
        for t in (0..n).rev() {
            let alpha = &alphas[t];
            let b = trellis.table(t).input_bits;
            let sec_first_bit = trellis.sections[t].first_bit;
            let mut beta = vec![0.0; lay.len()];
            let mut acc = vec![0.0; 1 << b];
            let mut joint = [[0.0f64; 2]; 2];
            let start_bit = split_start[t].map(|j| j * bits_per_symbol - sec_first_bit);
            let end_bit = split_end[t].map(|j| j * bits_per_symbol + 1 - sec_first_bit);
            if end_bit.is_some() {
                split_cur.iter_mut().for_each(|v| v.iter_mut().for_each(|w| *w = 0.0));
            }
            self.for_each_live(alpha, |h, z, s, base| {
                self.prepare(t, h, z, s, &priors[t], &mut choices);
                for di in 0..lay.width {
                    let a = alpha[base + di];
                    if a == 0.0 {
                        continue;
                    }
                    let d = di as i32 + lay.d_min;
                    let here = base + di;
                    for c in &choices {
                        let bit_of = |pos: usize| (c.u >> (b - 1 - pos)) & 1;
                        self.branches(t, d, c, y, |target, g| {
                            let w = g * beta_next[target];
                            if w > 0.0 {
                                beta[here] += w;
                                acc[c.u] += a * w;
                                if let Some(pos) = end_bit {
                                    split_cur[bit_of(pos)][here] += w;
                                }
                            }
                            if let Some(pos) = start_bit {
                                let first = bit_of(pos);
                                joint[first][0] += a * g * split_next[0][target];
                                joint[first][1] += a * g * split_next[1][target];
                            }
                        });
                    }
                }
            });
            for &j in &local[t] {
                let row = &mut app[j * q..(j + 1) * q];
                let first = j * bits_per_symbol - sec_first_bit;
                for (u, &w) in acc.iter().enumerate() {
                    let sym = (u >> (b - first - bits_per_symbol)) & (q - 1);
                    row[sym] += w;
                }
                normalize_in_place(row);
            }
            if let Some(j) = split_start[t] {
                let row = &mut app[j * q..(j + 1) * q];
                for (a, r) in joint.iter().enumerate() {
                    for (bb, &w) in r.iter().enumerate() {
                        row[(a << 1) | bb] = w;
                    }
                }
                normalize_in_place(row);
            }
            let scale = beta.iter().copied().fold(0.0, f64::max);
            if scale > 0.0 {
                beta.iter_mut().for_each(|v| *v /= scale);
                if end_bit.is_some() {
                    split_cur
                        .iter_mut()
                        .for_each(|v| v.iter_mut().for_each(|w| *w /= scale));
                }
            }
            beta_next = beta;
            if end_bit.is_some() {
                std::mem::swap(&mut split_cur, &mut split_next);
            }
        }
        Ok(DecodeOutput {
            app: AppMatrix { q, data: app },
            log_likelihood,
        })
    }

    /// Forward probability mass per drift value after `t` sections.
    pub fn drift_profile(&self, y: &[u8], bit_priors: &[f64], t: usize) -> Result<Vec<(i32, f64)>> {
        self.check_priors(bit_priors)?;
        self.check_read(y)?;
        let priors = self.section_priors(bit_priors);
        let (alphas, _) = self.forward(y, &priors)?;
        let lay = self.layout;
        let alpha = alphas.get(t).ok_or(Error::IndexOutOfRange {
            index: t,
            len: alphas.len(),
        })?;
        let mut mass = vec![0.0; lay.width];
        for (i, &a) in alpha.iter().enumerate() {
            mass[i % lay.width] += a;
        }
        Ok(mass
            .into_iter()
            .enumerate()
            .map(|(di, m)| (di as i32 + lay.d_min, m))
            .collect())
    }

    /// Structural branch count of every section: all states, all inputs, all
    /// events whose drift stays in the window.
    pub fn edge_counts(&self) -> Vec<usize> {
        let trellis = &self.block.trellis;
        let l_max = self.params.l_max as i32;
        let per_drift: usize = (0..self.layout.width as i32)
            .map(|di| {
                let d = di + self.layout.d_min;
                let inside = |dn: i32| (dn >= self.window.d_min && dn <= self.window.d_max) as usize;
                inside(d) * 2 + inside(d - 1) + (2..=l_max).map(|l| inside(d + l)).sum::<usize>()
            })
            .sum();
        (0..self.regions.len())
            .map(|t| {
                let inputs = 1usize << trellis.table(t).input_bits;
                self.layout.hist * EVENTS * self.layout.enc * inputs * per_drift
            })
            .collect()
    }
}

/// Upper bound on branches per section: `2^nu 4^(k+1) Delta (delta + 1)`.
pub fn edge_bound(encoder_states: usize, k: usize, window: DriftWindow, l_max: usize) -> usize {
    encoder_states * ALPHABET.pow(k as u32 + 1) * window.width() * (DriftWindow::transitions(l_max) + 1)
}

/// APPs of the outer symbols carried by `block` given one read `y`.
pub fn app_single(
    y: &[u8],
    block: &InnerBlock,
    params: &ChannelParams,
    bit_priors: &[f64],
    bits_per_symbol: usize,
    window: DriftWindow,
) -> Result<AppMatrix> {
    JointDecoder::new(block, params, window)?
        .decode(y, bit_priors, bits_per_symbol)
        .map(|o| o.app)
}

/// `p(y | x)` by explicit recursion over every event sequence.
fn likelihood_by_traces(x: &[u8], y: &[u8], params: &ChannelParams) -> f64 {
    fn go(x: &[u8], y: &[u8], p: &ChannelParams, i: usize, pos: usize, prev: Option<EventKind>) -> f64 {
        let n = x.len();
        if i == n {
            return if pos == y.len() { 1.0 } else { 0.0 };
        }
        let region = region_of(i + 1, p.k, n);
        let ctx = match region {
            PositionClass::Middle => crate::channel::context_index(&x[i + 1 - p.k..=i]),
            _ => x[i] as usize,
        };
        let row = p.row(region, ctx);
        let ev = p.event_probs(region, ctx, prev);
        let xi = x[i];
        let mut total = 0.0;
        if pos < y.len() {
            if y[pos] == xi {
                if ev[NOERR] > 0.0 {
                    total += ev[NOERR] * go(x, y, p, i + 1, pos + 1, Some(EventKind::NoErr));
                }
            } else if ev[SUB] > 0.0 {
                total += ev[SUB] * row.sub[y[pos] as usize] * go(x, y, p, i + 1, pos + 1, Some(EventKind::Sub));
            }
        }
        if ev[DEL] > 0.0 {
            total += ev[DEL] * go(x, y, p, i + 1, pos, Some(EventKind::Del));
        }
        if ev[INS] > 0.0 {
            for len in 2..=p.l_max {
                if pos + len < y.len() && y[pos + len] == xi {
                    total += ev[INS]
                        * row.ins_len[len - 2]
                        * 0.25f64.powi(len as i32)
                        * go(x, y, p, i + 1, pos + len + 1, Some(EventKind::Ins));
                }
            }
        }
        total
    }
    go(x, y, params, 0, 0, None)
}

/// Exact APPs by enumerating every payload and every event sequence. Only
/// for tiny instances: at most 8 channel symbols, 12 read symbols, 16
/// payload bits and memory 2.
pub fn brute_force_app(
    y: &NucSeq,
    block: &InnerBlock,
    params: &ChannelParams,
    bit_priors: &[f64],
    bits_per_symbol: usize,
) -> Result<AppMatrix> {
    let n = block.channel_len();
    if n > 8 || y.len() > 12 || params.k > 2 || block.payload_bits > 16 {
        return Err(Error::OracleTooLarge(format!(
            "N = {n}, |y| = {}, k = {}, {} payload bits",
            y.len(),
            params.k,
            block.payload_bits
        )));
    }
    if !(1..=2).contains(&bits_per_symbol) || !block.payload_bits.is_multiple_of(bits_per_symbol) {
        return Err(Error::ShapeMismatch("bad symbol grouping".into()));
    }
    if bit_priors.len() != block.payload_bits {
        return Err(Error::ShapeMismatch("prior length".into()));
    }
    params.check()?;
    let q = 1usize << bits_per_symbol;
    let n_sym = block.payload_bits / bits_per_symbol;
    let mut app = vec![0.0; n_sym * q];
    let mut total = 0.0;
    let mut bits = vec![0u8; block.payload_bits];
    for w in 0..1u32 << block.payload_bits {
        let mut prior = 1.0;
        for (j, b) in bits.iter_mut().enumerate() {
            *b = ((w >> (block.payload_bits - 1 - j)) & 1) as u8;
            prior *= if *b == 1 { bit_priors[j] } else { 1.0 - bit_priors[j] };
        }
        if prior == 0.0 {
            continue;
        }
        let x = block.encode(&bits)?;
        let p = prior * likelihood_by_traces(&x, y, params);
        if p == 0.0 {
            continue;
        }
        total += p;
        for (j, chunk) in bits.chunks(bits_per_symbol).enumerate() {
            let sym = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            app[j * q + sym] += p;
        }
    }
    if total == 0.0 {
        return Err(Error::ZeroLikelihood);
    }
    app.iter_mut().for_each(|p| *p /= total);
    Ok(AppMatrix { q, data: app })
}
