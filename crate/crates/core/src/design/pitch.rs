use crate::error::{ensure_positive, Result};
use crate::ion_crystal::IonCrystal;

/// Waveguide positions that image onto the ions at `magnification`:
/// `position_i = ion_i / magnification`.
pub fn pitch_plan(crystal: &IonCrystal, magnification: f64) -> Result<Vec<f64>> {
    scale_positions(&crystal.positions(), magnification)
}

/// Divides every position by `magnification`.
pub fn scale_positions(positions: &[f64], magnification: f64) -> Result<Vec<f64>> {
    ensure_positive("magnification", magnification)?;
    Ok(positions.iter().map(|p| p / magnification).collect())
}

/// Successive differences.
pub fn gaps(positions: &[f64]) -> Vec<f64> {
    positions.windows(2).map(|w| w[1] - w[0]).collect()
}
