//! Quantum carpets: space-time densities of bound wavepackets, their
//! decomposition into velocity bundles of intermode terms, and fractional
//! revivals rebuilt from a classicized wavefunction.

pub mod carpet;
pub mod error;
pub mod interference;
pub mod packet;
pub mod revival;
pub mod spectra;

pub use carpet::{
    density_grid, export_grid, extract_extrema, trajectory_overlay_score, verify_period, CarpetGrid, ExportFormat,
    ExtremaSet, Extremum, ExtremumKind, FieldSource, OverlayScore, PeriodCheck,
};
pub use error::{Error, Result};
pub use interference::{
    beta_isw_initial, build_bundles, bundle_field, characteristic_velocity, classify_term, constant_phase_trajectory,
    degeneracy_speed, BundleSet, IntermodeTerm, Sign, TermClass, VelocityBundle,
};
pub use packet::{make_coefficients, psi, psi_cl, CoefficientKind, CoefficientSet};
pub use revival::{gauss_coefficients, hierarchy_check, reconstruct_fractional, time_scales, vcl_degeneracy};
pub use spectra::{EigenState, ModelKind, NumerovConfig, Path, PathPoint, SpectrumModel};
