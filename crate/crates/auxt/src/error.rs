//! Crate-wide error type and the process exit codes the CLI maps it onto.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed image or CSV input. `offset` is the byte position that
    /// first failed to parse.
    #[error("{path}: parse error at byte {offset}: {msg}")]
    Parse {
        path: String,
        offset: usize,
        msg: String,
    },

    #[error("{path}: unsupported format: {msg}")]
    UnsupportedFormat { path: String, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config: {0}")]
    Config(String),

    /// Malformed bitstream or checkpoint container.
    #[error("format: {0}")]
    Format(String),

    #[error("model mismatch: bitstream was produced by model {bitstream:#018x}, checkpoint hashes to {checkpoint:#018x}")]
    ModelMismatch { bitstream: u64, checkpoint: u64 },

    /// A latent symbol left the coder alphabet. Latents this large mean the
    /// transform blew up, so this is reported as divergence, not a format bug.
    #[error("latent value {value} at flat index {index} is outside the coder alphabet [-32768, 32767]")]
    LatentOverflow { value: f64, index: usize },

    #[error("training diverged at iteration {iteration}: non-finite {what}")]
    Diverged { iteration: u64, what: String },

    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 0 success, 1 runtime, 2 usage,
    /// 3 malformed input, 4 model mismatch, 5 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Parse { .. } | Error::UnsupportedFormat { .. } | Error::Format(_) => 3,
            Error::ModelMismatch { .. } => 4,
            Error::LatentOverflow { .. } | Error::Diverged { .. } => 5,
            _ => 1,
        }
    }
}
