use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular state: V = {0} ft/s (must be positive)")]
    SingularState(f64),

    #[error("unknown aerodynamic coefficient `{0}`")]
    UnknownCoefficient(String),

    #[error("malformed aerodynamic tables: {0}")]
    Tables(String),

    #[error("linearization produced a non-finite entry in {matrix}[{row}][{col}]")]
    Linearization {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("LQR synthesis failed: {0}")]
    Synthesis(String),

    #[error("gain at schedule node {index} (V = {v} ft/s, alpha = {alpha_deg} deg) is not stabilizing: spectral abscissa {abscissa}")]
    UnstableNode {
        index: usize,
        v: f64,
        alpha_deg: f64,
        abscissa: f64,
    },

    #[error("trim at schedule node {index} (V = {v} ft/s, alpha = {alpha_deg} deg) did not reach a stationary point")]
    UnconvergedTrim { index: usize, v: f64, alpha_deg: f64 },

    #[error("degenerate MCMC proposal: acceptance rate {0:.4} after adaptation")]
    DegenerateProposal(f64),

    #[error("non-finite value while propagating sample {0}")]
    Propagation(usize),

    #[error("density query could not be resolved: {0}")]
    UnresolvableQuery(String),

    #[error("mass imbalance: total mass {0} deviates from 1")]
    MassImbalance(f64),

    #[error("transport problem too large: {m} x {n} = {size} coupling variables exceeds budget {budget}")]
    BudgetExceeded {
        m: usize,
        n: usize,
        size: usize,
        budget: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
