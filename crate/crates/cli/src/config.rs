//! TOML experiment configurations, one table shape per subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use memk::{BpOptions, InnerCode, SingleInsertion};

/// Overrides accepted by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub k: Option<usize>,
    pub m_reads: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A parsed config together with the directory its relative paths refer to.
#[derive(Clone, Debug)]
pub struct Loaded<T> {
    pub config: T,
    pub base: PathBuf,
}

impl<T> Loaded<T> {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

/// SHA-256 of the effective configuration, hex encoded. Output locations are
/// not part of it.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn check_exists(loaded_base: &Path, p: &Path, what: &str) -> Result<()> {
    let full = if p.is_absolute() {
        p.to_path_buf()
    } else {
        loaded_base.join(p)
    };
    ensure!(full.exists(), "{what} {} does not exist", full.display());
    Ok(())
}

fn default_l_max() -> usize {
    2
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_payload_bits() -> usize {
    162
}

fn default_q() -> usize {
    2
}

fn default_one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionPolicy {
    #[default]
    Clamp,
    Discard,
}

impl From<InsertionPolicy> for SingleInsertion {
    fn from(p: InsertionPolicy) -> Self {
        match p {
            InsertionPolicy::Clamp => SingleInsertion::Clamp,
            InsertionPolicy::Discard => SingleInsertion::Discard,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub refs: PathBuf,
    pub reads: PathBuf,
    pub k: Vec<usize>,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub single_insertion: InsertionPolicy,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
}

/// Random references drawn uniformly when no reference file is given.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRefs {
    pub count: usize,
    pub length: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: PathBuf,
    pub refs: Option<PathBuf>,
    pub random: Option<RandomRefs>,
    #[serde(default = "default_one")]
    pub reads: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeConfig {
    #[serde(default)]
    pub inner: InnerCode,
    #[serde(default = "default_payload_bits")]
    pub payload_bits: usize,
    /// Explicit payloads as `0`/`1` strings; random payloads are drawn otherwise.
    #[serde(default)]
    pub payloads: Vec<String>,
    #[serde(default = "default_one")]
    pub blocks: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeConfig {
    pub params: PathBuf,
    pub reads: PathBuf,
    #[serde(default)]
    pub inner: InnerCode,
    #[serde(default = "default_payload_bits")]
    pub payload_bits: usize,
    #[serde(default = "default_q")]
    pub q: usize,
    /// Use at most this many reads per block.
    pub max_reads: Option<usize>,
    pub drift_window: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Model,
    Dataset,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirExperiment {
    pub source: SourceKind,
    /// Channel generating the reads in model mode.
    pub truth: Option<PathBuf>,
    pub refs: Option<PathBuf>,
    pub reads: Option<PathBuf>,
    /// Parameter files of the decoders to compare.
    pub decoders: Vec<PathBuf>,
    /// Keep only the decoders of this memory length.
    pub decoder_k: Option<usize>,
    pub m_reads: Vec<usize>,
    #[serde(default)]
    pub inner: InnerCode,
    #[serde(default = "default_payload_bits")]
    pub payload_bits: usize,
    #[serde(default = "default_q")]
    pub q: usize,
    pub num_sequences: usize,
    pub drift_window: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterSpec {
    /// Table I design, selected by its read count.
    pub design: Option<usize>,
    /// Parity-check matrix file, used instead of a lifted design.
    pub parity_check: Option<PathBuf>,
    pub lift: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_q")]
    pub q: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FerExperiment {
    pub channel: PathBuf,
    /// Decoder parameters; the channel itself when absent.
    pub decoder: Option<PathBuf>,
    pub outer: OuterSpec,
    #[serde(default)]
    pub inner: InnerCode,
    #[serde(default = "default_payload_bits")]
    pub block_payload_bits: usize,
    pub m_reads: Vec<usize>,
    pub max_frames: usize,
    #[serde(default = "default_target_errors")]
    pub target_errors: usize,
    pub drift_window: Option<u32>,
    #[serde(default)]
    pub bp: BpOptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
}

fn default_target_errors() -> usize {
    memk::DEFAULT_TARGET_ERRORS
}

fn reject_k(k: Option<usize>, command: &str) -> Result<()> {
    if k.is_some() {
        bail!("--k is not used by `{command}`");
    }
    Ok(())
}

fn single_m(m: &Option<Vec<usize>>, command: &str) -> Result<Option<usize>> {
    match m.as_deref() {
        None => Ok(None),
        Some([one]) => Ok(Some(*one)),
        Some(_) => bail!("`{command}` takes a single --m-reads value"),
    }
}

impl Loaded<EstimateConfig> {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        ensure!(o.m_reads.is_none(), "--m-reads is not used by `estimate`");
        let c = &mut self.config;
        if let Some(k) = o.k {
            c.k = vec![k];
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(out) = &o.out {
            c.out.clone_from(out);
        }
        ensure!(!c.k.is_empty(), "at least one k is required");
        ensure!(c.k.iter().all(|&k| k >= 1), "k must be at least 1");
        check_exists(&self.base, &c.refs, "reference file")?;
        check_exists(&self.base, &c.reads, "reads file")
    }
}

impl Loaded<SimulateConfig> {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        reject_k(o.k, "simulate")?;
        let c = &mut self.config;
        if let Some(m) = single_m(&o.m_reads, "simulate")? {
            c.reads = m;
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(out) = &o.out {
            c.out.clone_from(out);
        }
        ensure!(c.reads >= 1, "reads must be at least 1");
        match (&c.refs, &c.random) {
            (Some(_), Some(_)) => bail!("give either `refs` or `[random]`, not both"),
            (None, None) => bail!("one of `refs` or `[random]` is required"),
            (Some(r), None) => check_exists(&self.base, r, "reference file")?,
            (None, Some(r)) => ensure!(
                r.count > 0 && r.length > 0,
                "random references need positive count and length"
            ),
        }
        check_exists(&self.base, &c.params, "parameter file")
    }
}

impl Loaded<EncodeConfig> {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        reject_k(o.k, "encode")?;
        ensure!(o.m_reads.is_none(), "--m-reads is not used by `encode`");
        let c = &mut self.config;
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(out) = &o.out {
            c.out.clone_from(out);
        }
        if !c.payloads.is_empty() {
            c.blocks = c.payloads.len();
        }
        ensure!(c.blocks >= 1, "blocks must be at least 1");
        Ok(())
    }
}

impl Loaded<DecodeConfig> {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        reject_k(o.k, "decode")?;
        let c = &mut self.config;
        if let Some(m) = single_m(&o.m_reads, "decode")? {
            c.max_reads = Some(m);
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(out) = &o.out {
            c.out.clone_from(out);
        }
        ensure!(c.q == 2 || c.q == 4, "q must be 2 or 4");
        check_exists(&self.base, &c.params, "parameter file")?;
        check_exists(&self.base, &c.reads, "reads file")
    }
}

impl Loaded<AirExperiment> {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        let c = &mut self.config;
        if o.k.is_some() {
            c.decoder_k = o.k;
        }
        if let Some(m) = &o.m_reads {
            c.m_reads.clone_from(m);
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(out) = &o.out {
            c.out.clone_from(out);
        }
        ensure!(!c.m_reads.is_empty(), "m_reads must not be empty");
        ensure!(
            !c.decoders.is_empty(),
            "at least one decoder parameter file is required"
        );
        ensure!(c.num_sequences > 0, "num_sequences must be positive");
        for d in &c.decoders {
            check_exists(&self.base, d, "decoder parameter file")?;
        }
        match c.source {
            SourceKind::Model => {
                let truth = c.truth.as_ref().context("model source needs `truth`")?;
                check_exists(&self.base, truth, "truth parameter file")
            }
            SourceKind::Dataset => {
                let refs = c.refs.as_ref().context("dataset source needs `refs`")?;
                let reads = c.reads.as_ref().context("dataset source needs `reads`")?;
                check_exists(&self.base, refs, "reference file")?;
                check_exists(&self.base, reads, "reads file")
            }
        }
    }
}

impl Loaded<FerExperiment> {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        reject_k(o.k, "fer")?;
        let c = &mut self.config;
        if let Some(m) = &o.m_reads {
            c.m_reads.clone_from(m);
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(out) = &o.out {
            c.out.clone_from(out);
        }
        ensure!(!c.m_reads.is_empty(), "m_reads must not be empty");
        ensure!(c.max_frames > 0, "max_frames must be positive");
        match (&c.outer.design, &c.outer.parity_check) {
            (Some(_), Some(_)) => bail!("give either `outer.design` or `outer.parity_check`, not both"),
            (None, None) => bail!("one of `outer.design` or `outer.parity_check` is required"),
            (Some(_), None) => ensure!(c.outer.lift.is_some(), "`outer.design` needs `outer.lift`"),
            (None, Some(p)) => check_exists(&self.base, p, "parity-check file")?,
        }
        check_exists(&self.base, &c.channel, "channel parameter file")?;
        if let Some(d) = &c.decoder {
            check_exists(&self.base, d, "decoder parameter file")?;
        }
        Ok(())
    }
}
