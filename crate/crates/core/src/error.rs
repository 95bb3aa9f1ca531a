use std::path::PathBuf;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("header parse error: missing required key `{0}`")]
    MissingKey(&'static str),

    #[error("header parse error: bad value for `{key}`: {value:?}")]
    BadValue { key: String, value: String },

    #[error("unsupported volume: {0}")]
    Unsupported(String),

    #[error("raw payload size mismatch: expected {expected} bytes, got {actual}")]
    PayloadSize { expected: usize, actual: usize },

    #[error("annotation csv header error: {0}")]
    CsvHeader(String),

    #[error("annotation csv line {line}: {msg}")]
    CsvRow { line: u64, msg: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("direction matrix is singular (|det| = {0:e})")]
    SingularDirection(f64),

    #[error("box for series {series_uid} slice {z_index} lies entirely outside the {width}x{height} canvas")]
    BoxOutsideCanvas {
        series_uid: String,
        z_index: usize,
        width: usize,
        height: usize,
    },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("weights error: {0}")]
    Weights(String),

    #[error("missing weight tensor(s): {}", .0.join(", "))]
    MissingWeights(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    #[error("image format error: {0}")]
    Image(String),

    #[error("no volumes found in {0}")]
    NoVolumes(PathBuf),

    #[error("{failed} of {total} volumes failed to load")]
    VolumesFailed { failed: usize, total: usize },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// Attach a file path to an error.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
