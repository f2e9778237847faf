use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symmetry map is not a permutation: index {index} maps to {target}")]
    NotAPermutation { index: usize, target: usize },

    #[error("symmetry map is not an involution: pi(pi({index})) != {index}")]
    NotInvolutive { index: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("shape has no points")]
    EmptyShape,

    #[error("normalization size is zero or not finite ({0})")]
    ZeroSize(f64),

    #[error("insufficient data: need at least {needed}, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("input is constant; correlation is undefined")]
    ConstantInput,

    #[error("sample {sample_id} has no {key} value")]
    MissingError { sample_id: String, key: String },

    #[error("cannot select {m} samples out of {n}")]
    MTooLarge { m: usize, n: usize },

    #[error("selection sizes differ: {0} vs {1}")]
    MMismatch(usize, usize),

    #[error("methods are not evaluated on the same sample universe: {0}")]
    UniverseMismatch(String),

    #[error("degenerate training shapes: {0}")]
    DegenerateShapes(String),

    #[error("singular normal equations at stage {stage}")]
    SingularSystem { stage: usize },

    #[error("no samples were flagged; precision is undefined")]
    NoPositives,

    #[error("no samples carry the bad label; recall is undefined")]
    NoBadLabels,

    #[error("no threshold reaches recall {target}")]
    Unachievable { target: f64 },

    #[error("analytic error oracle requires outlier_rate = 0")]
    OutlierUnsupported,

    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("line {line}: expected {expected} points, found {found}")]
    InconsistentK { line: usize, expected: usize, found: usize },

    #[error("line {line}: duplicate sample id {id}")]
    DuplicateId { line: usize, id: String },

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable, machine-parsable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::NotAPermutation { .. } => "NotAPermutation",
            Error::NotInvolutive { .. } => "NotInvolutive",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::EmptyShape => "EmptyShape",
            Error::ZeroSize(_) => "ZeroSize",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::ConstantInput => "ConstantInput",
            Error::MissingError { .. } => "MissingError",
            Error::MTooLarge { .. } => "MTooLarge",
            Error::MMismatch(..) => "MMismatch",
            Error::UniverseMismatch(_) => "UniverseMismatch",
            Error::DegenerateShapes(_) => "DegenerateShapes",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::NoPositives => "NoPositives",
            Error::NoBadLabels => "NoBadLabels",
            Error::Unachievable { .. } => "Unachievable",
            Error::OutlierUnsupported => "OutlierUnsupported",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::InconsistentK { .. } => "InconsistentK",
            Error::DuplicateId { .. } => "DuplicateId",
            Error::ModelFormat(_) => "ModelFormat",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Sample { source, .. } => source.category(),
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }

    pub(crate) fn for_sample(self, sample_id: &str) -> Error {
        Error::Sample {
            sample_id: sample_id.to_string(),
            source: Box::new(self),
        }
    }
}
