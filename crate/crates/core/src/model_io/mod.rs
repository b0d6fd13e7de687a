//! Checkpoints, resumed training, topic deduplication and document
//! inference.

mod checkpoint;
mod dedup;
mod infer;

pub use checkpoint::{
    load_checkpoint, parse_checkpoint, resume_state, save_checkpoint, write_checkpoint, Checkpoint,
    CheckpointHeader, LoadLimits, FORMAT_NAME, FORMAT_VERSION,
};
pub use dedup::{dedup_topics, remap_topics, topic_l1_distance, DedupReport};
pub use infer::{infer_document, parse_infer_line, InferMode};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error("missing edge topics for resume")]
    MissingEdges,
    #[error("checkpoint inconsistent: {0}")]
    Invariant(String),
    #[error("incompatible with checkpoint: {0}")]
    Incompatible(String),
    #[error("document has no known words")]
    EmptyDocument,
    #[error("L1 threshold must be in [0, 2], got {0}")]
    Threshold(f64),
}
