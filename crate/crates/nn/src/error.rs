use carryscan_core::error::FormatError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    Shape { op: String, expected: String, found: String },
    #[error("training diverged at step {step} epoch {epoch}: loss {loss}")]
    Diverged { step: u8, epoch: usize, loss: f64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Format(#[from] FormatError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
