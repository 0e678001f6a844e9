//! End-to-end frame error rate simulation of the concatenated scheme.

use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::channel::{transmit_multi, ChannelParams};
use crate::decoder::{combine_separate, default_drift_window, AppMatrix, DriftWindow, JointDecoder};
use crate::error::{Error, Result};
use crate::inner::{BlockPlan, InnerBlock, InnerCode};
use crate::outer::{bit_llrs, BpOptions, LdpcCode, SoftWord};
use crate::rng::{derive_seed, rng_from_seed, stream_seed};

/// Default number of frame errors after which a run stops.
pub const DEFAULT_TARGET_ERRORS: usize = 100;

#[derive(Clone, Debug)]
pub struct FerConfig<'a> {
    pub code: &'a LdpcCode,
    pub inner: InnerCode,
    /// Outer codeword bits carried per inner block.
    pub block_payload_bits: usize,
    /// Channel that produces the reads.
    pub channel: &'a ChannelParams,
    /// Channel law assumed by the inner decoder.
    pub decoder: &'a ChannelParams,
    pub reads: usize,
    /// Defaults to the window derived from the decoder's indel rates.
    pub window: Option<DriftWindow>,
    pub bp: BpOptions,
    pub max_frames: usize,
    pub target_errors: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FerResult {
    pub frames: usize,
    pub frame_errors: usize,
    pub fer: f64,
    /// 95% Clopper-Pearson interval.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Reads dropped because their drift left the window.
    pub window_violations: usize,
    /// Blocks for which no read survived; their APPs are uniform.
    pub erased_blocks: usize,
    /// Frames on which belief propagation did not converge.
    pub bp_failures: usize,
    pub info_bit_errors: usize,
}

/// Exact binomial confidence interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: usize, n: usize, confidence: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - confidence;
    let (kf, nf) = (k as f64, n as f64);
    let low = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0)
            .expect("positive shapes")
            .inverse_cdf(alpha / 2.0)
    };
    let high = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf)
            .expect("positive shapes")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (low, high)
}

/// Outcome of one simulated frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameOutcome {
    pub info_bit_errors: usize,
    pub converged: bool,
    pub window_violations: usize,
    pub erased_blocks: usize,
}

/// Prepared per-run state: block plan and inner blocks.
pub struct FerRunner<'a> {
    cfg: FerConfig<'a>,
    plan: BlockPlan,
    blocks: Vec<InnerBlock>,
    windows: Vec<DriftWindow>,
}

impl<'a> FerRunner<'a> {
    pub fn new(cfg: FerConfig<'a>) -> Result<Self> {
        if cfg.reads == 0 {
            return Err(Error::NoReads);
        }
        let bps = cfg.code.bits_per_symbol();
        if !cfg.block_payload_bits.is_multiple_of(bps) {
            return Err(Error::Config(format!(
                "block payload of {} bits splits outer symbols of {bps} bits",
                cfg.block_payload_bits
            )));
        }
        let plan = BlockPlan::new(cfg.code.n_bits(), cfg.block_payload_bits, &cfg.inner)?;
        let blocks = plan
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| InnerBlock::new(&cfg.inner, b.payload_bits, i))
            .collect::<Result<Vec<_>>>()?;
        let windows = blocks
            .iter()
            .map(|b| match cfg.window {
                Some(w) => Ok(w),
                None => default_drift_window(b.channel_len(), cfg.decoder),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FerRunner {
            cfg,
            plan,
            blocks,
            windows,
        })
    }

    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    /// Simulates frame `index` of the run.
    pub fn frame(&self, index: usize) -> Result<FrameOutcome> {
        let cfg = &self.cfg;
        let code = cfg.code;
        let bps = code.bits_per_symbol();
        let frame_seed = derive_seed(cfg.seed, index as u64);
        let mut rng = rng_from_seed(stream_seed(frame_seed, "info"));
        let info: Vec<u8> = (0..code.k_bits()).map(|_| rng.random_range(0..2)).collect();
        let word = code.encode(&info)?;
        let mut window_violations = 0;
        let mut erased_blocks = 0;
        let mut parts = Vec::with_capacity(self.blocks.len());
        for (i, (spec, block)) in self.plan.blocks.iter().zip(&self.blocks).enumerate() {
            let bits = &word[spec.start_bit..spec.start_bit + spec.payload_bits];
            let x = block.encode(bits)?;
            let reads = transmit_multi(
                &x,
                cfg.channel,
                cfg.reads,
                derive_seed(stream_seed(frame_seed, "reads"), i as u64),
            )?;
            let decoder = JointDecoder::new(block, cfg.decoder, self.windows[i])?;
            let priors = vec![0.5; spec.payload_bits];
            let mut apps = Vec::with_capacity(cfg.reads);
            for (y, _) in &reads {
                match decoder.decode(y, &priors, bps) {
                    Ok(out) => apps.push(out.app),
                    Err(Error::WindowViolation { .. } | Error::ZeroLikelihood) => window_violations += 1,
                    Err(e) => return Err(e),
                }
            }
            let uniform = AppMatrix::uniform(spec.payload_bits / bps, code.q());
            if apps.is_empty() {
                erased_blocks += 1;
                parts.push(uniform);
            } else {
                parts.push(combine_separate(&apps, &uniform)?);
            }
        }
        let app = AppMatrix::concat(&parts)?;
        let soft = if code.q() == 2 {
            SoftWord::Binary(bit_llrs(&app)?)
        } else {
            SoftWord::Quaternary(app)
        };
        let out = code.decode(&soft, &cfg.bp)?;
        let decoded = code.extract_info(&out.bits);
        let info_bit_errors = decoded.iter().zip(&info).filter(|(a, b)| a != b).count();
        Ok(FrameOutcome {
            info_bit_errors,
            converged: out.converged,
            window_violations,
            erased_blocks,
        })
    }

    /// Runs frames until the target error count or the frame cap is reached.
    pub fn run(&self) -> Result<FerResult> {
        let cfg = &self.cfg;
        if cfg.max_frames == 0 {
            return Err(Error::Config("frame budget must be positive".into()));
        }
        let mut res = FerResult {
            frames: 0,
            frame_errors: 0,
            fer: 0.0,
            ci_low: 0.0,
            ci_high: 1.0,
            window_violations: 0,
            erased_blocks: 0,
            bp_failures: 0,
            info_bit_errors: 0,
        };
        while res.frames < cfg.max_frames && res.frame_errors < cfg.target_errors.max(1) {
            let f = self.frame(res.frames)?;
            res.frames += 1;
            res.frame_errors += (f.info_bit_errors > 0) as usize;
            res.info_bit_errors += f.info_bit_errors;
            res.window_violations += f.window_violations;
            res.erased_blocks += f.erased_blocks;
            res.bp_failures += (!f.converged) as usize;
        }
        res.fer = res.frame_errors as f64 / res.frames as f64;
        (res.ci_low, res.ci_high) = clopper_pearson(res.frame_errors, res.frames, 0.95);
        Ok(res)
    }
}

pub fn simulate_fer(cfg: FerConfig<'_>) -> Result<FerResult> {
    FerRunner::new(cfg)?.run()
}
