use serde::Serialize;

use super::element::{apply_element, PhaseElement};
use super::field::ScalarField;
use super::metrics::{moment_diameters, spot_metrics, SpotMetrics};
use super::propagate::{angular_spectrum_propagate, AngularSpectrum};
use crate::error::{Error, Result};
use crate::gauss::Axis;

/// Element at axial position `z` downstream of the source plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacedElement {
    pub z: f64,
    pub element: PhaseElement,
}

/// Runs `source` through `elements` (sorted by `z`; equal positions are
/// applied in order) and returns the field just after the last one.
pub fn propagate_through(source: &ScalarField, elements: &[PlacedElement]) -> Result<ScalarField> {
    if elements.windows(2).any(|w| w[1].z < w[0].z) {
        return Err(Error::invalid("elements", "must be sorted by axial position"));
    }
    if elements.first().is_some_and(|e| e.z < 0.0 || !e.z.is_finite()) {
        return Err(Error::invalid("elements", "positions must be finite and >= 0"));
    }
    let mut field = source.clone();
    let mut z = 0.0;
    for placed in elements {
        if placed.z > z {
            field = angular_spectrum_propagate(&field, placed.z - z)?;
            z = placed.z;
        }
        apply_element(&mut field, &placed.element)?;
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocusSearch {
    /// Scan window measured from the plane of the last element.
    pub z_min: f64,
    pub z_max: f64,
    pub steps: usize,
    /// Axis whose moment diameter is minimized.
    pub axis: Axis,
}

impl FocusSearch {
    pub const MIN_STEPS: usize = 16;

    pub fn around(z: f64, half_width: f64, steps: usize) -> Self {
        Self {
            z_min: z - half_width,
            z_max: z + half_width,
            steps,
            axis: Axis::X,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.z_max > self.z_min) || !(self.z_min >= 0.0) || !self.z_max.is_finite() {
            return Err(Error::invalid("focus_search", "need 0 <= z_min < z_max"));
        }
        if self.steps < Self::MIN_STEPS {
            return Err(Error::invalid(
                "focus_search",
                format!("need at least {} steps", Self::MIN_STEPS),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSample {
    pub z: f64,
    pub centroid: (f64, f64),
    pub mfd_moment: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct FocusResult {
    /// Focus distance from the last element.
    pub z_focus: f64,
    pub metrics: SpotMetrics,
    pub field: ScalarField,
    pub scan: Vec<ScanSample>,
}

/// Scans the moment diameter behind the stack exit plane, refines the
/// minimum with a parabola in `d^2` (exact for a Gaussian beam) through the
/// three best samples and re-propagates to the refined distance.
pub fn find_focus(exit: &ScalarField, search: FocusSearch) -> Result<FocusResult> {
    search.validate()?;
    let spectrum = AngularSpectrum::new(exit);

    let h = (search.z_max - search.z_min) / (search.steps - 1) as f64;
    let mut scan = Vec::with_capacity(search.steps);
    for s in 0..search.steps {
        let z = search.z_min + h * s as f64;
        let f = spectrum.propagate(z)?;
        let (centroid, mfd_moment) = moment_diameters(&f);
        scan.push(ScanSample {
            z,
            centroid,
            mfd_moment,
        });
    }
    let size = |s: &ScanSample| match search.axis {
        Axis::X => s.mfd_moment.0,
        Axis::Y => s.mfd_moment.1,
    };
    let best = scan
        .iter()
        .enumerate()
        .min_by(|a, b| size(a.1).total_cmp(&size(b.1)))
        .map(|(i, _)| i)
        .expect("scan is non-empty");
    if best == 0 || best == scan.len() - 1 {
        return Err(Error::FocusNotBracketed { z: scan[best].z });
    }
    let sq = |s: &ScanSample| size(s).powi(2);
    let (d0, d1, d2) = (sq(&scan[best - 1]), sq(&scan[best]), sq(&scan[best + 1]));
    let curvature = d0 - 2.0 * d1 + d2;
    let shift = if curvature > 0.0 {
        (0.5 * h * (d0 - d2) / curvature).clamp(-h, h)
    } else {
        0.0
    };
    let z_focus = scan[best].z + shift;
    let field = spectrum.propagate(z_focus)?;
    Ok(FocusResult {
        z_focus,
        metrics: spot_metrics(&field),
        field,
        scan,
    })
}
