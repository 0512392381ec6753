use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{run_channel, source_tilt_deg, Deviation, SimulationOptions, OFF_NORMAL_LIMIT_DEG};
use super::synthesis::LensStackPrescription;
use crate::error::{Error, Result};
use crate::pic::{TirMirrorSpec, WaveguideArraySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    /// Exit angle (degrees) the wedge was built for; absolute, not a delta.
    PrismDesignAngle,
    /// Extra source tilt in the y-z plane, degrees.
    SourceTilt,
    /// Source displacement along x, metres.
    LateralOffset,
    /// Source moved away from the stack, metres.
    ZOffset,
    /// Rigid rotation of chip and stack about the stack exit, degrees.
    ChipWedge,
}

impl Parameter {
    pub const ALL: [Parameter; 5] = [
        Parameter::PrismDesignAngle,
        Parameter::SourceTilt,
        Parameter::LateralOffset,
        Parameter::ZOffset,
        Parameter::ChipWedge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::PrismDesignAngle => "prism_design_angle",
            Parameter::SourceTilt => "source_tilt",
            Parameter::LateralOffset => "lateral_offset",
            Parameter::ZOffset => "z_offset",
            Parameter::ChipWedge => "chip_wedge",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn is_angle(self) -> bool {
        matches!(
            self,
            Parameter::PrismDesignAngle | Parameter::SourceTilt | Parameter::ChipWedge
        )
    }
}

/// Linear range `start..=end` sampled at `steps` points (one point uses
/// `start`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub parameter: Parameter,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Perturbation {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 {
            return Err(Error::invalid("steps", "a sweep needs at least one point"));
        }
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(Error::invalid("range", "must be finite"));
        }
        if self.steps == 1 {
            return Ok(vec![self.start]);
        }
        let h = (self.end - self.start) / (self.steps - 1) as f64;
        Ok((0..self.steps).map(|i| self.start + h * i as f64).collect())
    }
}

pub const PRESETS: [&str; 2] = ["paper-prism-mismatch", "chip-wedge-budget"];

/// Named perturbation sets: the prism built for a 7 degree exit while the
/// mirror emits near 20.8 degrees, and the +-0.002 degree chip wedge budget.
pub fn preset(name: &str) -> Option<Vec<Perturbation>> {
    match name {
        "paper-prism-mismatch" => Some(vec![Perturbation {
            parameter: Parameter::PrismDesignAngle,
            start: 7.0,
            end: 7.0,
            steps: 1,
        }]),
        "chip-wedge-budget" => Some(vec![Perturbation {
            parameter: Parameter::ChipWedge,
            start: -0.002,
            end: 0.002,
            steps: 5,
        }]),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocusSummary {
    pub z_focus: f64,
    pub mfd_moment: (f64, f64),
    pub centroid: (f64, f64),
    pub clipped_fraction: f64,
    pub off_normal_deg: (f64, f64),
    pub off_normal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub values: Vec<(Parameter, f64)>,
    pub focus: FocusSummary,
    pub delta_z_focus: f64,
    pub delta_mfd: (f64, f64),
    pub delta_centroid: (f64, f64),
    /// Source tilt left after the wedge, degrees.
    pub residual_tilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    /// Worst-case (outermost) channel that was re-simulated.
    pub channel: usize,
    pub baseline: FocusSummary,
    pub points: Vec<SweepPoint>,
}

/// Residual tilt after a wedge built for `design_deg` corrects `actual_deg`.
pub fn residual_tilt_deg(actual_deg: f64, design_deg: f64) -> f64 {
    let s = actual_deg.to_radians().sin() - design_deg.to_radians().sin();
    s.clamp(-1.0, 1.0).asin().to_degrees()
}

/// Re-simulates the outermost channel over the Cartesian grid of
/// `perturbations` and reports deviations from the unperturbed build.
pub fn tolerance_sweep(
    prescription: &LensStackPrescription,
    array: &WaveguideArraySpec,
    mirror: &TirMirrorSpec,
    perturbations: &[Perturbation],
    options: &SimulationOptions,
) -> Result<SweepReport> {
    array.validate()?;
    let channel = (0..array.channel_count())
        .max_by(|&i, &j| {
            array.positions[i]
                .abs()
                .total_cmp(&array.positions[j].abs())
                .then(j.cmp(&i))
        })
        .expect("validated array is non-empty");

    let mut grid: Vec<Vec<(Parameter, f64)>> = vec![Vec::new()];
    for p in perturbations {
        let values = p.values()?;
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut row = prefix.clone();
                    row.push((p.parameter, v));
                    row
                })
            })
            .collect();
    }

    let actual_tilt = source_tilt_deg(mirror)?;
    let nominal_design = prescription.source_tilt_deg;
    let deviation = |point: &[(Parameter, f64)]| {
        let mut d = Deviation::default();
        for &(p, v) in point {
            match p {
                Parameter::PrismDesignAngle => d.wedge_design_deg = Some(v),
                Parameter::SourceTilt => d.extra_tilt_deg += v,
                Parameter::LateralOffset => d.source_offset.0 += v,
                Parameter::ZOffset => d.z_offset += v,
                Parameter::ChipWedge => {}
            }
        }
        d
    };

    // Distinct optical configurations, simulated once each (chip wedge is a
    // rigid motion applied afterwards).
    let mut unique: Vec<Deviation> = vec![Deviation::default()];
    for point in &grid {
        let d = deviation(point);
        if !unique.contains(&d) {
            unique.push(d);
        }
    }
    let summaries: Vec<FocusSummary> = unique
        .par_iter()
        .map(|&d| {
            let r = run_channel(prescription, array, channel, mirror, options, d)?;
            let f = &r.focus;
            Ok(FocusSummary {
                z_focus: f.z_focus,
                mfd_moment: f.metrics.mfd_moment,
                centroid: f.metrics.centroid,
                clipped_fraction: f.metrics.clipped_fraction,
                off_normal_deg: f.off_normal_deg,
                off_normal: f.off_normal,
            })
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .zip(&unique)
        .map(|(r, d)| {
            r.map_err(|e| {
                let (parameter, value) = describe(d);
                Error::Perturbation {
                    parameter,
                    value,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<_>>()?;
    let baseline = summaries[0];

    let points = grid
        .into_iter()
        .map(|point| {
            let d = deviation(&point);
            let idx = unique.iter().position(|u| *u == d).expect("collected above");
            let mut focus = summaries[idx];
            let wedge: f64 = point
                .iter()
                .filter(|(p, _)| *p == Parameter::ChipWedge)
                .map(|&(_, v)| v)
                .sum();
            if wedge != 0.0 {
                let t = wedge.to_radians();
                focus.centroid.0 += focus.z_focus * t.tan();
                focus.z_focus *= t.cos();
                focus.off_normal_deg.0 += wedge;
                focus.off_normal =
                    focus.off_normal_deg.0.abs().max(focus.off_normal_deg.1.abs()) > OFF_NORMAL_LIMIT_DEG;
            }
            let design = d.wedge_design_deg.unwrap_or(nominal_design);
            SweepPoint {
                residual_tilt_deg: residual_tilt_deg(actual_tilt + d.extra_tilt_deg, design),
                delta_z_focus: focus.z_focus - baseline.z_focus,
                delta_mfd: (
                    focus.mfd_moment.0 - baseline.mfd_moment.0,
                    focus.mfd_moment.1 - baseline.mfd_moment.1,
                ),
                delta_centroid: (
                    focus.centroid.0 - baseline.centroid.0,
                    focus.centroid.1 - baseline.centroid.1,
                ),
                focus,
                values: point,
            }
        })
        .collect();

    Ok(SweepReport {
        channel,
        baseline,
        points,
    })
}

fn describe(d: &Deviation) -> (String, f64) {
    if let Some(v) = d.wedge_design_deg {
        ("prism_design_angle".into(), v)
    } else if d.extra_tilt_deg != 0.0 {
        ("source_tilt".into(), d.extra_tilt_deg)
    } else if d.source_offset.0 != 0.0 {
        ("lateral_offset".into(), d.source_offset.0)
    } else if d.z_offset != 0.0 {
        ("z_offset".into(), d.z_offset)
    } else {
        ("none".into(), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn residual_tilt_of_the_prism_mismatch() {
        // sin(20.77) - sin(7) composes the two phase ramps.
        let r = residual_tilt_deg(20.7725, 7.0);
        assert_relative_eq!(r, 13.4613, epsilon = 1e-3);
        assert!((r - 13.8).abs() < 0.5);
        assert_eq!(residual_tilt_deg(20.0, 20.0), 0.0);
    }

    #[test]
    fn ranges_and_presets() {
        let p = Perturbation {
            parameter: Parameter::ChipWedge,
            start: -1.0,
            end: 1.0,
            steps: 5,
        };
        assert_eq!(p.values().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let single = Perturbation { steps: 1, ..p };
        assert_eq!(single.values().unwrap(), vec![-1.0]);
        assert!(Perturbation { steps: 0, ..p }.values().is_err());
        for name in PRESETS {
            assert!(preset(name).is_some());
        }
        assert!(preset("nope").is_none());
        for p in Parameter::ALL {
            assert_eq!(Parameter::from_name(p.name()), Some(p));
        }
    }

    #[test]
    fn chip_wedge_small_angle_shift() {
        // 170 um * tan(0.002 deg) = 5.9 nm.
        let shift = 170e-6 * 0.002f64.to_radians().tan();
        assert_relative_eq!(shift, 5.934e-9, epsilon = 1e-11);
    }
}
