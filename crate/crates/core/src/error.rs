use thiserror::Error;

/// Errors raised across the lab.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("size limit exceeded: {what} is {actual}, limit {limit}")]
    SizeLimit {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("value {value} is not a multiple of 2^-{scale_bits}")]
    Quantization { value: f64, scale_bits: u32 },

    #[error("rectangle carries zero mass under the given distribution")]
    DegenerateRectangle,

    #[error("rounded gradient entry {rounded} is not a valid {precision}-approximation of {clipped}")]
    InvalidRounding {
        clipped: f64,
        rounded: f64,
        precision: f64,
    },

    #[error("parameters diverged at step {step}")]
    Divergence { step: usize },

    #[error("oracle response {response} is outside tolerance {tolerance} of {expected}")]
    OracleContract {
        expected: f64,
        response: f64,
        tolerance: f64,
    },

    #[error("sample budget of {budget} features exhausted after {rounds} accepted rounds")]
    Budget {
        budget: usize,
        rounds: usize,
        partial: Box<crate::boost::BoostState>,
    },

    #[error("unsupported precision {0}")]
    Precision(f64),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("content hash mismatch: stored {stored}, computed {computed}")]
    HashMismatch { stored: String, computed: String },

    #[error("malformed artifact: {0}")]
    Malformed(String),

    #[error("in module {module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: Box<LabError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn in_module(self, module: &'static str) -> LabError {
        match self {
            e @ LabError::Module { .. } => e,
            other => LabError::Module {
                module,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
