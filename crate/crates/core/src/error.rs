use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("invalid symbol `{0}`: symbols must be non-empty and contain no whitespace")]
    InvalidSymbol(String),

    #[error("{} sample(s) cannot be parsed by the model: {}", .0.len(), preview(.0))]
    UnparseableSample(Vec<String>),

    #[error("{} sample(s) have zero probability under the model: {}", .0.len(), preview(.0))]
    ZeroProbabilitySample(Vec<String>),

    #[error("random walk exceeded the maximum length of {0} symbols")]
    MaxLengthExceeded(usize),

    #[error("pruning disconnected the initial state from the final state")]
    EmptyModel,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("dimension mismatch: {0} counts vs {1} prior weights")]
    DimensionMismatch(usize, usize),

    #[error("prior weights must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("probability vector is not on the simplex (sum {0})")]
    OffSimplex(f64),

    #[error("degenerate Bernoulli structure prior: p = {0} is outside (0, 1]")]
    DegenerateBernoulli(f64),

    #[error("invalid merge pair ({0}, {1})")]
    InvalidPair(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
}

fn preview(samples: &[String]) -> String {
    let shown: Vec<String> = samples.iter().take(5).map(|s| format!("\"{s}\"")).collect();
    if samples.len() > 5 {
        format!("{}, ...", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
