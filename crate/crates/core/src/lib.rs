//! Design and analysis toolkit for metalized-membrane electro-optomechanical
//! transducers.
//!
//! The numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the working precision most callers want.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod analysis;
pub mod device;
pub mod dissipation;
pub mod eigen;
pub mod electromech;
pub mod error;
pub mod modes;
pub mod output;
pub mod quadrature;
pub mod scalar;
pub mod special;

pub use analysis::{
    detect_peaks, fit_gap, fit_ringdown, identify_modes, q_from_tau, AmplitudeUnits, GapFit, Identification,
    MatchStrategy, PeakAssignment, RingdownFit, RingdownRecord, ShiftDataset,
};
pub use device::{
    default_device, device_to_toml, load_device, parse_device, save_device, DeviceConfig, ElectrodeRef, FilmLayer,
    MembraneStack, SolverSettings,
};
pub use dissipation::{
    coating_dilution, coverage_modulation, dilution_parameter, energies_closed, energies_numeric, q_bilayer,
    q_from_energies, q_total, DissipationBudget, EnergyBreakdown, QFactor,
};
pub use electromech::{
    capacitance_pm, capacitance_series, coupling_point, dc_dbeta, device_layout, effective_area,
    frequency_shift_general, frequency_shift_plate, CouplingPoint, ElectrodeLayout, MetalMask, Polarity, Sector,
};
pub use error::{Error, Result};
pub use modes::{
    calibrate_coating_density, loaded_modes, loaded_modes_threaded, uniform_modes, ModeSpec, ModeTable, Provenance,
};
pub use scalar::Real;
pub use special::{bessel_j, bessel_j_prime, bessel_zero};

pub type FilmLayer64 = FilmLayer<f64>;
pub type MembraneStack64 = MembraneStack<f64>;
pub type DeviceConfig64 = DeviceConfig<f64>;
pub type FilmLayer32 = FilmLayer<f32>;
pub type MembraneStack32 = MembraneStack<f32>;
pub type DeviceConfig32 = DeviceConfig<f32>;
pub type ModeSpec64 = ModeSpec<f64>;
pub type ModeTable64 = ModeTable<f64>;
pub type ModeTable32 = ModeTable<f32>;
pub type DissipationBudget64 = DissipationBudget<f64>;
pub type EnergyBreakdown64 = EnergyBreakdown<f64>;
pub type ElectrodeLayout64 = ElectrodeLayout<f64>;
pub type CouplingPoint64 = CouplingPoint<f64>;
pub type RingdownRecord64 = RingdownRecord<f64>;
pub type ShiftDataset64 = ShiftDataset<f64>;
pub type PeakAssignment64 = PeakAssignment<f64>;
