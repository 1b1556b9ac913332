use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("all weights vanished{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    AllWeightsZero { step: Option<usize> },

    #[error("noise covariance is singular")]
    SingularNoise,

    #[error("observation noise covariance D*D^T is not invertible")]
    SingularInnovation,

    #[error("combined support of {size} atoms exceeds the exact-solver cap of {cap}")]
    SupportTooLarge { size: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state left the representable range at step {step}")]
    NonFiniteState { step: usize },

    #[error("observation {step} has zero probability under the predicted law")]
    ZeroLikelihood { step: usize },

    #[error("map is not monotone on the probe grid (sign change near x = {at})")]
    NotMonotone { at: f64 },

    #[error("sandwich violated at x = {x:?}, y = {y:?}: ratio {ratio} outside [{lower}, {upper}]")]
    SandwichViolated {
        x: Vec<f64>,
        y: Vec<f64>,
        ratio: f64,
        lower: f64,
        upper: f64,
    },

    #[error("flow deviation {estimate} at s = {time} exceeds bound {bound} plus Monte Carlo allowance {allowance}")]
    BoundViolated {
        time: f64,
        estimate: f64,
        bound: f64,
        allowance: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Annotated {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn annotate(self, context: impl Into<String>) -> Self {
        Error::Annotated {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
