use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid block length {length} for a series of {samples} samples (need 4 <= L <= T, L even)")]
    InvalidBlockLength { length: usize, samples: usize },

    #[error("block index {index} out of range (series has {n_blocks} blocks)")]
    BlockOutOfRange { index: usize, n_blocks: usize },

    #[error("smoothing half-width {half_width} too large for block length {block_length} (need 2n+1 <= L/8)")]
    InvalidSmoothing { half_width: usize, block_length: usize },

    #[error("band {band} contains no Fourier frequencies at resolution {resolution_hz} Hz")]
    EmptyBand { band: String, resolution_hz: f64 },

    #[error("invalid band definition: {0}")]
    InvalidBand(String),

    #[error("zero smoothed auto-power in band {band}")]
    DegeneratePower { band: String },

    #[error("block {block} has zero variance on every channel")]
    DegenerateCovariance { block: usize },

    #[error("degenerate similarity: {0}")]
    DegenerateSimilarity(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("k-means produced an empty cluster after {restarts} restarts")]
    EmptyCluster { restarts: usize },

    #[error("phase {phase} has only {count} blocks (need at least {required})")]
    InsufficientPhaseData { phase: u8, count: usize, required: usize },

    #[error("only {count} points on one side of the split (need at least {required})")]
    InsufficientTailData { count: usize, required: usize },

    #[error("threshold too high: phase {phase} has {count} exceedances (need at least {required})")]
    ThresholdTooHigh { phase: u8, count: usize, required: usize },

    #[error("fit failed for channel {channel}: {reason}")]
    FitFailure { channel: usize, reason: String },

    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),

    #[error("empty residual pool for phase {0}")]
    EmptyPool(u8),

    #[error("empty phase {0}")]
    EmptyPhase(u8),

    #[error("bootstrap unstable: {dropped} of {requested} replicates failed")]
    BootstrapUnstable { dropped: usize, requested: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{stage}: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tags an error with the pipeline stage it came from.
    pub fn at(self, stage: &str) -> Self {
        Error::Stage { stage: stage.to_string(), source: Box::new(self) }
    }

    /// Outermost stage tag, if any.
    pub fn stage(&self) -> Option<&str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Stage { source, .. } => source.kind(),
            Error::InvalidConfig(_)
            | Error::InvalidBlockLength { .. }
            | Error::InvalidSmoothing { .. }
            | Error::InvalidBand(_)
            | Error::EmptyBand { .. }
            | Error::InvalidProbability(_) => ErrorKind::Config,
            Error::InvalidSeries(_)
            | Error::BlockOutOfRange { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::InsufficientPhaseData { .. }
            | Error::InsufficientTailData { .. }
            | Error::ThresholdTooHigh { .. }
            | Error::EmptyPhase(_)
            | Error::EmptyPool(_) => ErrorKind::Data,
            Error::DegeneratePower { .. }
            | Error::DegenerateCovariance { .. }
            | Error::DegenerateSimilarity(_)
            | Error::Numeric(_)
            | Error::EmptyCluster { .. }
            | Error::FitFailure { .. }
            | Error::BootstrapUnstable { .. } => ErrorKind::Numeric,
        }
    }
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
