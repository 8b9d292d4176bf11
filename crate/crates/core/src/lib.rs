//! Numerical curvature laboratory for conformally quasi-recurrent metrics.
//!
//! Metrics are given as expressions in a small DSL ([`exprdsl`]), evaluated as
//! truncated Taylor jets ([`jets`]) and turned into pointwise curvature
//! tensors ([`curvature`]). [`analysis`] and [`petrov`] check the structural
//! identities, [`catalog`] holds reference geometries and [`battery`] runs
//! everything at a point.

pub mod analysis;
pub mod battery;
pub mod catalog;
pub mod curvature;
pub mod exprdsl;
pub mod jets;
pub mod petrov;
pub mod tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] exprdsl::SpecError),
    #[error(transparent)]
    Parse(#[from] exprdsl::ParseError),
    #[error(transparent)]
    Eval(#[from] exprdsl::EvalError),
    #[error(transparent)]
    Tensor(#[from] tensor::TensorError),
    #[error(transparent)]
    Curvature(#[from] curvature::CurvatureError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Petrov(#[from] petrov::PetrovError),
    #[error(transparent)]
    Catalog(#[from] catalog::CatalogError),
    #[error("{0}")]
    Input(String),
}

impl Error {
    /// True for failures of the geometry at a point (singular metric, domain
    /// errors) as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        use curvature::CurvatureError as C;
        fn eval(e: &exprdsl::EvalError) -> bool {
            matches!(e, exprdsl::EvalError::Domain(_))
        }
        fn curv(e: &C) -> bool {
            match e {
                C::SingularMetric(_) => true,
                C::Eval(e) => eval(e),
                C::Tensor(t) => matches!(t, tensor::TensorError::SingularMetric(_)),
                _ => false,
            }
        }
        match self {
            Error::Eval(e) => eval(e),
            Error::Tensor(t) => matches!(t, tensor::TensorError::SingularMetric(_)),
            Error::Curvature(c) => curv(c),
            Error::Analysis(analysis::AnalysisError::Curvature(c)) => curv(c),
            Error::Petrov(petrov::PetrovError::DegenerateFrame) => true,
            _ => false,
        }
    }
}
