use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (bad index, mismatched grids, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("gauge infeasible: {0}")]
    GaugeInfeasible(String),

    /// A Fourier coefficient of the window underflowed inside the used band.
    #[error("window coefficient c_{k} = {value:e} is too small to divide by (n = {n}, m = {m})")]
    WindowUnderflow { k: i64, value: f64, n: usize, m: usize },

    #[error(
        "PRE_FULL_PSI needs {required} bytes of window storage, budget is {budget} bytes; \
         use PRE_PSI or raise the memory budget"
    )]
    MemoryBudget { required: u128, budget: u128 },

    #[error("state became non-finite at step {step}")]
    BlowUp { step: usize },

    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
