use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("history underrun: query at t = {query} precedes buffered span starting at {start}")]
    HistoryUnderrun { query: f64, start: f64 },
    #[error("history push out of order: t = {t} is not after last stored time {last}")]
    NonMonotoneTime { t: f64, last: f64 },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("nonlinear iteration diverged at t = {t} after {iters} Picard iterations (update norm {update:.3e})")]
    NonlinearDivergence { t: f64, iters: usize, update: f64 },
    #[error("inadmissible gains: {0}")]
    Inadmissible(String),
    #[error("certification refused: {0}")]
    CertificationRefused(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("inconsistent parameters: {0}")]
    Inconsistent(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
