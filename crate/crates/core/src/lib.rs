//! Simulation, estimation, decoding and rate analysis for the memory-k
//! nanopore DNA storage channel.

pub mod air;
pub mod channel;
pub mod decoder;
pub mod error;
pub mod estimate;
pub mod inner;
pub mod outer;
pub mod pipeline;
pub mod rng;

pub use air::{bcjr_once_rate, iid_baseline_params, llrs, AirConfig, AirResult, AirSource};
pub use channel::{
    classify_position, kmer_context, transmit, transmit_multi, Channel, ChannelParams, ContextRow, Event, EventKind,
    EventTrace, NucSeq, PositionClass, RegionTable, Violation,
};
pub use decoder::{
    app_single, brute_force_app, combine_separate, default_drift_window, AppMatrix, DecodeOutput, DriftWindow,
    JointDecoder,
};
pub use error::{Error, Result};
pub use estimate::{
    backtrack, estimate, estimate_with, ingest, lattice, read_sequences, write_dataset, CountTable, DatasetRecord,
    EstimateOptions, EstimationSummary, FallbackRow, Lattice, SingleInsertion,
};
pub use inner::{
    conv_step, encode_block, offset_sequence, plan_blocks, BlockPlan, ConvCodeSpec, InnerBlock, InnerCode, Trellis,
};
pub use outer::{bit_llrs, lift, table1, BpOptions, BpOutcome, Fraction, LdpcCode, ParityCheck, Protograph, SoftWord};
pub use pipeline::{
    clopper_pearson, simulate_fer, FerConfig, FerResult, FerRunner, FrameOutcome, DEFAULT_TARGET_ERRORS,
};
pub use rng::{derive_seed, rng_from_seed, stream_seed, SimRng};
