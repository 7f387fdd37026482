use thiserror::Error;

use crate::geometry::GeometryError;
use crate::linalg::{CgReport, LinalgError};
use crate::splines::SplineError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("solver did not converge in {} iterations (relative residual {:e})",
        report.iterations, report.relative_residual())]
    NotConverged { report: CgReport },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
