use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {requested} exceeds the configured cap of {cap}")]
    DimensionCap { requested: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("state vector is not normalized (norm {norm:.15})")]
    NotNormalized { norm: f64 },

    #[error("singular value decomposition did not converge on a {rows}x{cols} matrix")]
    SvdNonConvergence { rows: usize, cols: usize },

    #[error("QR decomposition failed: {0}")]
    Qr(String),

    #[error("Gram matrix is ill-conditioned (condition number {condition:.3e}); lower the degree or raise the sample count")]
    IllConditioned { condition: f64 },

    #[error("irrep {label} does not occur in the ({m}, {mbar}) tensor-power representation")]
    EmptyIsotypic { label: String, m: usize, mbar: usize },

    #[error("equivariance system has nullity {found}, expected {expected}")]
    RankDeficiency { expected: usize, found: usize },

    #[error("intertwiner check failed: {0}")]
    IntertwinerCheck(String),

    #[error("integrand failed at sample {sample} (seed {seed}, stream {stream}): {source}")]
    Evaluation {
        sample: usize,
        seed: u64,
        stream: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("shot budget of {requested} exceeds the cap of {cap}")]
    ShotBudget { requested: u64, cap: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}
