use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate equilibrium: force at the start is {0:e}")]
    DegenerateEquilibrium(f64),
    #[error("integration blow-up near tau = {0}")]
    BlowUp(f64),
    #[error("step size underflow at tau = {0}")]
    StepSizeUnderflow(f64),
    #[error("step budget of {0} exhausted")]
    MaxSteps(usize),
    #[error("unbounded orbit: {0}")]
    UnboundedOrbit(String),
    #[error("degenerate orbit: {0}")]
    DegenerateOrbit(String),
    #[error("trajectory is not closed")]
    NotClosed,
    #[error("integrator failure: {0}")]
    IntegratorFailure(String),
    #[error("undersampled angle: jump of {jump:.3} rad at tau = {tau}; use a finer grid")]
    UndersampledAngle { tau: f64, jump: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical instability: {0}")]
    Instability(String),
    #[error("no feasible candidate")]
    NoFeasibleCandidate,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
