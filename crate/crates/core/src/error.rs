use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("pole: p2 vanishes at {re}+{im}i")]
    Pole { re: f64, im: f64 },

    #[error("root solver did not converge after {iterations} iterations (max residual {residual:e})")]
    RootSolver { iterations: usize, residual: f64 },

    #[error("operation requires a symbolic system, got {0}")]
    NotSymbolic(&'static str),

    #[error("operation requires a rational map")]
    NotRational,

    #[error("depth {requested} is shallower than current depth {current}")]
    RefineDepth { requested: usize, current: usize },

    #[error("depth {requested} is deeper than current depth {current}")]
    ProjectDepth { requested: usize, current: usize },

    #[error("measure has insufficient depth: need {needed}, have {available}")]
    InsufficientDepth { needed: usize, available: usize },

    #[error("zero-mass cylinder {word}")]
    ZeroMass { word: String },

    #[error("incompatible representations: {0}")]
    Incompatible(String),

    #[error("empty sample cloud")]
    EmptyCloud,

    #[error("invalid weights: {0}")]
    BadWeights(String),

    #[error("negative weight {value} on cylinder {word}")]
    NegativeWeight { word: String, value: f64 },

    #[error("iterate vanished identically")]
    ZeroIterate,

    #[error("dominant eigenvalue {eigenvalue} differs from 1 (rescale the weight by 1/eigenvalue)")]
    Eigenvalue { eigenvalue: f64 },

    #[error("power iteration did not converge within {iterations} iterations (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },

    #[error("harmonic function vanishes on cylinder {word}")]
    VanishingHarmonic { word: String },

    #[error("transition probabilities sum to {sum} at step {step}")]
    Normalization { step: usize, sum: f64 },

    #[error("martingales belong to different systems")]
    MismatchedSystems,

    #[error("weight does not match filter (sup difference {difference:e})")]
    WeightMismatch { difference: f64 },

    #[error("martingale needs at least {needed} levels, has {available}")]
    TooFewLevels { needed: usize, available: usize },

    #[error("low-pass normalization violated: |m0(0) - sqrt(N)| = {deviation:e}")]
    Normalization0 { deviation: f64 },

    #[error("cascade diverged at iteration {iteration}")]
    Diverged { iteration: usize, sup_differences: Vec<f64> },

    #[error("quadrature tail estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Truncation { estimate: f64, tolerance: f64 },

    #[error("negative multiplicity {value} on cylinder {word}")]
    NegativeMultiplicity { word: String, value: i64 },

    #[error("infinite minus infinite multiplicity on cylinder {word}")]
    InfiniteDifference { word: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
