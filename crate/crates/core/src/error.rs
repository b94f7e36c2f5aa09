use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix exponential input has norm {norm:.3e}, above the supported range {limit}")]
    NormOverflow { norm: f64, limit: f64 },

    #[error("matrix is not unimodular: |det - 1| = {residual:.3e}")]
    NotUnimodular { residual: f64 },

    #[error("vector is not in the complement r: residual {residual:.3e}")]
    NotInComplement { residual: f64 },

    #[error("basis is too ill-conditioned to reduce (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("chart radius {delta} exceeds the injectivity bound {bound}")]
    ChartRadius { delta: f64, bound: f64 },

    #[error("quadratic form is degenerate")]
    DegenerateForm,

    #[error("quadratic form is definite; an indefinite form is required")]
    DefiniteForm,

    #[error("parallel vector has zero r0 component")]
    ZeroTransverse,

    #[error("orbit walk drifted off the form quadric: residual {residual:.3e}")]
    Drift { residual: f64 },

    #[error("weight factor overflow: alpha1(center) = {alpha1:.3e} is too deep in the cusp")]
    CuspOverflow { alpha1: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
