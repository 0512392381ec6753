use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("grid under-resolves the beam: pitch {pitch:.4e} m, need <= {required:.4e} m")]
    Sampling { pitch: f64, required: f64 },

    #[error("propagation over {distance:.4e} m leaves the grid window: predicted extent {extent:.4e} m on {axis}, half-width {half_width:.4e} m")]
    PropagationWindow {
        distance: f64,
        axis: &'static str,
        extent: f64,
        half_width: f64,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("focus not bracketed: minimum at search boundary z = {z:.4e} m")]
    FocusNotBracketed { z: f64 },

    #[error("no total internal reflection possible: n_ambient {n_ambient} >= n_effective {n_effective}")]
    NoTir { n_ambient: f64, n_effective: f64 },

    #[error("ray trapped by total internal reflection at the top surface (internal tilt {internal_tilt_deg:.3} deg)")]
    TrappedRay { internal_tilt_deg: f64 },

    #[error("infeasible design targets: `{constraint}` violated ({detail})")]
    Infeasible { constraint: &'static str, detail: String },

    #[error("channel {index}: {source}")]
    Channel {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("perturbation {parameter} = {value}: {source}")]
    Perturbation {
        parameter: String,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    /// Innermost error, skipping channel and perturbation wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Channel { source, .. } | Error::Perturbation { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn ensure_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {value}")))
    }
}
