use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::synthesis::LensStackPrescription;
use crate::error::{Error, Result};
use crate::gauss::{beam_from_mfd, AxisBeam};
use crate::pic::{outcoupling_angle, TirMirrorSpec, WaveguideArraySpec};
use crate::wave::{
    find_focus, make_gaussian_field, propagate_through, ElementKind, FocusSearch, Grid, Launch, PlacedElement,
    ScalarField, ScanSample, SpotMetrics,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImagingMode {
    /// Each channel is propagated in its own chief-ray frame and placed at
    /// its paraxial image height: ideal, field-independent imaging.
    #[default]
    Isoplanatic,
    /// All channels share one frame; thin-screen field aberrations show up.
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationOptions {
    pub grid: Grid,
    pub mode: ImagingMode,
    /// Focus scan half-width around the design image distance.
    pub focus_half_width: f64,
    pub focus_steps: usize,
}

/// Off-normal propagation threshold for the focus-region centroid drift.
pub const OFF_NORMAL_LIMIT_DEG: f64 = 1.0;

impl SimulationOptions {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            mode: ImagingMode::Isoplanatic,
            focus_half_width: 25e-6,
            focus_steps: 26,
        }
    }
}

/// Focus report for one channel. Positions are in the common (ion) frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelFocus {
    pub channel: usize,
    pub source_position: f64,
    /// Paraxial image height of the waveguide.
    pub image_position: f64,
    /// Focus distance from the stack exit plane.
    pub z_focus: f64,
    pub metrics: SpotMetrics,
    /// Tilt of the centroid path through the focus scan, degrees (x, y).
    pub off_normal_deg: (f64, f64),
    pub off_normal: bool,
    pub axial_profile: Vec<ScanSample>,
}

/// Deviations from the nominal build used by tolerance sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Deviation {
    /// Exit angle the wedge was built for, replacing the nominal one.
    pub wedge_design_deg: Option<f64>,
    pub extra_tilt_deg: f64,
    pub source_offset: (f64, f64),
    /// Source plane moved away from the stack by this much.
    pub z_offset: f64,
}

/// One channel simulation with its fields kept for resampling. Field
/// coordinates must be offset by `x_shift` to land in the ion frame.
pub(crate) struct ChannelRun {
    pub focus: ChannelFocus,
    pub exit: Arc<ScalarField>,
    pub focus_field: Arc<ScalarField>,
    pub x_shift: f64,
}

pub(crate) fn source_tilt_deg(mirror: &TirMirrorSpec) -> Result<f64> {
    Ok(outcoupling_angle(mirror)?.exit_angle_deg)
}

/// Builds the tilted source of `channel`, runs it through the stack and
/// locates the x focus.
pub fn simulate_channel(
    prescription: &LensStackPrescription,
    array: &WaveguideArraySpec,
    channel: usize,
    mirror: &TirMirrorSpec,
    options: &SimulationOptions,
) -> Result<ChannelFocus> {
    Ok(run_channel(prescription, array, channel, mirror, options, Deviation::default())?.focus)
}

/// [`simulate_channel`] that also returns the field in the focal plane.
pub fn simulate_channel_field(
    prescription: &LensStackPrescription,
    array: &WaveguideArraySpec,
    channel: usize,
    mirror: &TirMirrorSpec,
    options: &SimulationOptions,
) -> Result<(ChannelFocus, ScalarField)> {
    let r = run_channel(prescription, array, channel, mirror, options, Deviation::default())?;
    let field = Arc::try_unwrap(r.focus_field).unwrap_or_else(|f| (*f).clone());
    Ok((r.focus, field))
}

pub(crate) fn run_channel(
    prescription: &LensStackPrescription,
    array: &WaveguideArraySpec,
    channel: usize,
    mirror: &TirMirrorSpec,
    options: &SimulationOptions,
    dev: Deviation,
) -> Result<ChannelRun> {
    array.validate()?;
    if channel >= array.channel_count() {
        return Err(Error::invalid(
            "channel",
            format!("index {channel} out of range for {} channels", array.channel_count()),
        ));
    }
    let x0 = array.positions[channel];
    let tilt_deg = source_tilt_deg(mirror)? + dev.extra_tilt_deg;
    let a = prescription.predicted.geometric_magnification;
    let image_position = a * x0;

    let mut beam = beam_from_mfd(
        array.mode_mfd.0,
        array.mode_mfd.1,
        prescription.wavelength,
        prescription.ambient_index,
    )?;
    let shift = |b: &mut AxisBeam| b.waist_position = -dev.z_offset;
    shift(&mut beam.x);
    shift(&mut beam.y);
    let tilt = tilt_deg.to_radians();
    let walk = dev.z_offset * tilt.tan();
    let (local_x, frame_shift) = match options.mode {
        ImagingMode::Isoplanatic => (0.0, (image_position, 0.0)),
        ImagingMode::Physical => (x0, (0.0, 0.0)),
    };
    let launch = Launch {
        tilt: (0.0, tilt),
        offset: (local_x + dev.source_offset.0, dev.source_offset.1 + walk),
    };

    let elements: Vec<PlacedElement> = prescription
        .elements
        .iter()
        .map(|e| {
            let mut e = *e;
            if let (ElementKind::Wedge { tilt_y, .. }, Some(design)) = (&mut e.element.kind, dev.wedge_design_deg) {
                *tilt_y = design.to_radians();
            }
            e
        })
        .collect();

    let wrap = |e: Error| Error::Channel {
        index: channel,
        source: Box::new(e),
    };
    let source = make_gaussian_field(&beam, launch, options.grid).map_err(wrap)?;
    let mut exit = propagate_through(&source, &elements).map_err(wrap)?;
    exit.origin = frame_shift;

    let search = FocusSearch::around(
        prescription.predicted.image_distance,
        options.focus_half_width,
        options.focus_steps,
    );
    let r = find_focus(&exit, search).map_err(wrap)?;
    let off_normal_deg = centroid_drift_deg(&r.scan);
    let off_normal = off_normal_deg.0.abs().max(off_normal_deg.1.abs()) > OFF_NORMAL_LIMIT_DEG;

    Ok(ChannelRun {
        focus: ChannelFocus {
            channel,
            source_position: x0,
            image_position,
            z_focus: r.z_focus,
            metrics: r.metrics,
            off_normal_deg,
            off_normal,
            axial_profile: r.scan,
        },
        exit: Arc::new(exit),
        focus_field: Arc::new(r.field),
        x_shift: 0.0,
    })
}

/// Least-squares slope of the centroid against z, as angles in degrees.
fn centroid_drift_deg(scan: &[ScanSample]) -> (f64, f64) {
    let n = scan.len() as f64;
    let zm = scan.iter().map(|s| s.z).sum::<f64>() / n;
    let szz: f64 = scan.iter().map(|s| (s.z - zm).powi(2)).sum();
    let slope = |c: &dyn Fn(&ScanSample) -> f64| {
        let cm = scan.iter().map(c).sum::<f64>() / n;
        scan.iter().map(|s| (s.z - zm) * (c(s) - cm)).sum::<f64>() / szz
    };
    (
        slope(&|s| s.centroid.0).atan().to_degrees(),
        slope(&|s| s.centroid.1).atan().to_degrees(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::synthesis::{synthesize_geometry, DesignTargets};
    use crate::pic::{LeakageReference, DEFAULT_LEAKAGE_DECAY};
    use approx::assert_relative_eq;

    fn mirror() -> TirMirrorSpec {
        TirMirrorSpec {
            facet_angle_deg: 52.0,
            n_effective: 1.466,
            n_ambient: 1.0,
            n_exit: 1.0,
        }
    }

    #[test]
    fn centre_channel_focuses_on_axis() {
        let m = mirror();
        let tilt = source_tilt_deg(&m).unwrap();
        let p = synthesize_geometry(&DesignTargets::new(0.6, 0.24, 175e-6, (1.93e-6, 5.79e-6), 729e-9), tilt).unwrap();
        let array = WaveguideArraySpec {
            positions: vec![-5e-6, 0.0, 5e-6],
            mode_mfd: (1.93e-6, 5.79e-6),
            leakage_decay: DEFAULT_LEAKAGE_DECAY,
            leakage_reference: LeakageReference {
                pitch: 5e-6,
                crosstalk_db: -30.0,
            },
        };
        let opts = SimulationOptions::new(Grid::new(2048, 2048, 0.2e-6).unwrap());
        let c = simulate_channel(&p, &array, 1, &m, &opts).unwrap();
        assert!(c.metrics.centroid.0.abs() < 0.05e-6, "{:?}", c.metrics.centroid);
        assert!((c.z_focus - 175e-6).abs() < 2e-6, "{}", c.z_focus);
        assert!(!c.off_normal);
        let edge = simulate_channel(&p, &array, 2, &m, &opts).unwrap();
        assert_relative_eq!(edge.metrics.centroid.0, -3e-6, epsilon = 0.05e-6);
        assert!(simulate_channel(&p, &array, 3, &m, &opts).is_err());
    }
}
