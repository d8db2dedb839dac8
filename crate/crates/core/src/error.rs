use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("Bessel order {order} outside the supported range 0..={max}")]
    UnsupportedOrder { order: u32, max: u32 },
    #[error("Bessel zero index {index} outside the supported range 1..={max}")]
    UnsupportedZeroIndex { index: u32, max: u32 },
    #[error("argument must be finite, got {0}")]
    NonFinite(f64),
    #[error("dilution parameter undefined for non-positive prestress ({0} Pa)")]
    ZeroStress(f64),
    #[error("eigensolver did not converge for mode ({n},{m}) on a {grid_n}-cell grid")]
    NonConvergence { n: u32, m: u32, grid_n: usize },
    #[error("mode ({n},{m}) not found in mode table")]
    ModeNotFound { n: u32, m: u32 },
    #[error("mode ({n},{m}) is not axisymmetric; dissipation model covers n = 0 only")]
    NonAxisymmetric { n: u32, m: u32 },
    #[error("target {target_hz} Hz is above the unloaded frequency {unloaded_hz} Hz; mass loading can only lower it")]
    TargetAboveUnloaded { target_hz: f64, unloaded_hz: f64 },
    #[error("no coating density up to {max_density} kg/m^3 reaches {target_hz} Hz")]
    CalibrationBracket { target_hz: f64, max_density: f64 },
    #[error("insufficient resolution: estimated relative quadrature error {estimate:.3e} exceeds {tolerance:.3e}")]
    InsufficientResolution { estimate: f64, tolerance: f64 },
    #[error("membrane touches the electrode at r = {r} m, theta = {theta} rad")]
    Contact { r: f64, theta: f64 },
    #[error("capacitance must be positive, got {0} F")]
    NonPositiveCapacitance(f64),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("empty spectrum")]
    EmptySpectrum,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
