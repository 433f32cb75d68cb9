use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch (file corrupt?)")]
    Checksum,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged (non-finite loss) at generation {generation}, epoch {epoch}, iteration {iteration} ({context})")]
    Divergence {
        generation: usize,
        epoch: usize,
        iteration: usize,
        context: String,
    },
}
