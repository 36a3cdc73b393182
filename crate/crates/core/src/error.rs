use thiserror::Error;

/// Failure modes shared across the solver modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no scenarios supplied")]
    NoScenarios,

    #[error("sample is not a 0/1 indicator value: {value}")]
    NonIndicator { value: f64 },

    #[error("invalid time grid: need start < end and at least one step (start {start}, end {end}, steps {n_steps})")]
    InvalidGrid { start: f64, end: f64, n_steps: usize },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("state blew up at step {step} (|x| = {value:.3e})")]
    BlowUp { step: usize, value: f64 },

    #[error("time step violates the stability bound: dt = {dt:.3e} > {dt_max:.3e}; shrink dt or coarsen the spatial grid")]
    CflViolation { dt: f64, dt_max: f64 },

    #[error("path left the spatial window at step {step} (x = {x:.6})")]
    WindowEscape { step: usize, x: f64 },

    #[error("proximal step failed: {0}")]
    Prox(String),

    #[error("inversion failed: recovered controls miss the target by {gap:.3e}")]
    InversionFailed { gap: f64 },

    #[error("preimage not unique: field slice at time index {t_index} is not strictly monotone")]
    NonMonotoneSlice { t_index: usize },

    #[error("not enough points: need at least {need}, got {got}")]
    NotEnoughPoints { need: usize, got: usize },
}

impl Error {
    /// True for failures of the numerical scheme itself, as opposed to
    /// malformed arguments. Callers use this to pick process exit codes.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::CflViolation { .. }
                | Error::WindowEscape { .. }
                | Error::Prox(_)
                | Error::InversionFailed { .. }
                | Error::NonMonotoneSlice { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
