//! Fixed numeric formatting for tabular output.

use crate::scalar::{to_f64, Real};

/// Scientific notation with nine significant digits, e.g. `3.14767640e5`.
pub fn sci<T: Real>(x: T) -> String {
    format!("{:.8e}", to_f64(x))
}
