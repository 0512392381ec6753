//! JSON run reports. Lengths are micrometres, angles degrees, crosstalk dB.

use ionaddr_core::design::{
    ChannelFocus, CrosstalkReport, FocusSummary, LensStackPrescription, PairCrosstalk, SweepPoint, SweepReport,
    Topology,
};
use ionaddr_core::ion_crystal::IonCrystal;
use ionaddr_core::wave::{ElementKind, LensProfile, PlacedElement};
use serde::Serialize;

use crate::scenario::{Scenario, SweepSection};

/// Bumped whenever the report layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Metres to micrometres, rounded to 1e-9 um so reports print cleanly
/// (negative zero becomes zero).
pub fn um(m: f64) -> f64 {
    (m * 1e15).round() / 1e9 + 0.0
}

fn um2(v: (f64, f64)) -> [f64; 2] {
    [um(v.0), um(v.1)]
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub toolkit: Toolkit,
    pub command: &'static str,
    pub units: Units,
    pub scenario: Scenario,
    pub crystal: CrystalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitch_plan: Option<PitchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prescription: Option<PrescriptionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crosstalk: Option<CrosstalkSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
    /// Excluded from reproducibility comparisons.
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: &'static str, scenario: &Scenario, crystal: CrystalReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            toolkit: Toolkit::current(),
            command,
            units: Units::default(),
            scenario: scenario.clone(),
            crystal,
            pitch_plan: None,
            prescription: None,
            channels: None,
            crosstalk: None,
            sweep: None,
            wall_time_s: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report types serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Toolkit {
    pub name: &'static str,
    pub version: &'static str,
}

impl Toolkit {
    pub fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Units {
    pub length: &'static str,
    pub angle: &'static str,
    pub frequency: &'static str,
    pub crosstalk: &'static str,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "um",
            angle: "deg",
            frequency: "Hz",
            crosstalk: "dB",
        }
    }
}

fn span(gaps: &[f64]) -> (Option<f64>, Option<f64>) {
    (
        gaps.iter().copied().reduce(f64::min),
        gaps.iter().copied().reduce(f64::max),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct CrystalReport {
    pub length_scale_um: f64,
    pub positions_um: Vec<f64>,
    pub gaps_um: Vec<f64>,
    pub min_gap_um: Option<f64>,
    pub max_gap_um: Option<f64>,
}

impl CrystalReport {
    pub fn new(c: &IonCrystal) -> Self {
        let positions_um: Vec<f64> = c.positions().into_iter().map(um).collect();
        let gaps_um = gaps_um(&c.positions());
        let (min_gap_um, max_gap_um) = span(&gaps_um);
        Self {
            length_scale_um: um(c.length_scale),
            positions_um,
            gaps_um,
            min_gap_um,
            max_gap_um,
        }
    }
}

fn gaps_um(positions: &[f64]) -> Vec<f64> {
    positions.windows(2).map(|w| um(w[1] - w[0])).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PitchReport {
    pub magnification: f64,
    /// `pitch_plan` or `scenario` when positions were given explicitly.
    pub source: &'static str,
    pub positions_um: Vec<f64>,
    pub gaps_um: Vec<f64>,
    pub min_gap_um: Option<f64>,
    pub max_gap_um: Option<f64>,
}

impl PitchReport {
    pub fn new(magnification: f64, source: &'static str, positions: &[f64]) -> Self {
        let gaps_um = gaps_um(positions);
        let (min_gap_um, max_gap_um) = span(&gaps_um);
        Self {
            magnification,
            source,
            positions_um: positions.iter().copied().map(um).collect(),
            gaps_um,
            min_gap_um,
            max_gap_um,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ElementReport {
    ThinLens {
        z_um: f64,
        offset_um: [f64; 2],
        focal_length_um: f64,
        profile: LensProfile,
    },
    Wedge {
        z_um: f64,
        offset_um: [f64; 2],
        tilt_x_deg: f64,
        tilt_y_deg: f64,
        index_step: f64,
        apex_angle_deg: Option<f64>,
    },
    RectAperture {
        z_um: f64,
        offset_um: [f64; 2],
        width_x_um: f64,
        width_y_um: f64,
    },
    CircAperture {
        z_um: f64,
        offset_um: [f64; 2],
        radius_um: f64,
    },
}

impl ElementReport {
    fn new(p: &PlacedElement) -> Self {
        let z_um = um(p.z);
        let offset_um = um2(p.element.offset);
        match p.element.kind {
            ElementKind::ThinLens { focal_length, profile } => ElementReport::ThinLens {
                z_um,
                offset_um,
                focal_length_um: um(focal_length),
                profile,
            },
            ElementKind::Wedge {
                tilt_x,
                tilt_y,
                index_step,
            } => ElementReport::Wedge {
                z_um,
                offset_um,
                tilt_x_deg: tilt_x.to_degrees(),
                tilt_y_deg: tilt_y.to_degrees(),
                index_step,
                apex_angle_deg: p.element.wedge_apex_angle().map(f64::to_degrees),
            },
            ElementKind::RectAperture { width_x, width_y } => ElementReport::RectAperture {
                z_um,
                offset_um,
                width_x_um: um(width_x),
                width_y_um: um(width_y),
            },
            ElementKind::CircAperture { radius } => ElementReport::CircAperture {
                z_um,
                offset_um,
                radius_um: um(radius),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictedReport {
    /// Image/object waist ratio per axis.
    pub magnification: [f64; 2],
    pub geometric_magnification: f64,
    pub image_distance_um: f64,
    pub waist_distance_um: [f64; 2],
    pub object_na: f64,
    pub image_na: f64,
    pub stop_na: f64,
    pub stack_height_um: f64,
    pub clear_aperture_um: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveCheckReport {
    pub probe_mfd_um: [f64; 2],
    pub abcd_ratio: [f64; 2],
    pub wave_ratio: [f64; 2],
    pub waist_distance_um: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct PrescriptionReport {
    pub topology: Topology,
    pub source_tilt_deg: f64,
    pub focal_lengths_um: Vec<f64>,
    pub exit_plane_um: f64,
    pub elements: Vec<ElementReport>,
    pub predicted: PredictedReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wave_check: Option<WaveCheckReport>,
}

impl PrescriptionReport {
    pub fn new(p: &LensStackPrescription) -> Self {
        let d = &p.predicted;
        Self {
            topology: p.topology,
            source_tilt_deg: p.source_tilt_deg,
            focal_lengths_um: p.focal_lengths.iter().copied().map(um).collect(),
            exit_plane_um: um(p.exit_plane()),
            elements: p.elements.iter().map(ElementReport::new).collect(),
            predicted: PredictedReport {
                magnification: [d.magnification.0, d.magnification.1],
                geometric_magnification: d.geometric_magnification,
                image_distance_um: um(d.image_distance),
                waist_distance_um: um2(d.waist_distance),
                object_na: d.object_na,
                image_na: d.image_na,
                stop_na: d.stop_na,
                stack_height_um: um(d.stack_height),
                clear_aperture_um: um(d.clear_aperture),
            },
            wave_check: p.wave_check.map(|w| WaveCheckReport {
                probe_mfd_um: um2(w.probe_mfd),
                abcd_ratio: [w.abcd_ratio.0, w.abcd_ratio.1],
                wave_ratio: [w.wave_ratio.0, w.wave_ratio.1],
                waist_distance_um: um2(w.waist_distance),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelReport {
    pub channel: usize,
    pub source_position_um: f64,
    pub image_position_um: f64,
    pub z_focus_um: f64,
    pub mfd_moment_um: [f64; 2],
    pub mfd_fit_um: [f64; 2],
    pub fit_failed: bool,
    pub centroid_um: [f64; 2],
    pub power: f64,
    pub clipped_fraction: f64,
    pub off_normal_deg: [f64; 2],
    pub off_normal: bool,
}

impl ChannelReport {
    pub fn new(c: &ChannelFocus) -> Self {
        let m = &c.metrics;
        Self {
            channel: c.channel,
            source_position_um: um(c.source_position),
            image_position_um: um(c.image_position),
            z_focus_um: um(c.z_focus),
            mfd_moment_um: um2(m.mfd_moment),
            mfd_fit_um: um2(m.mfd_fit),
            fit_failed: m.fit_failed,
            centroid_um: um2(m.centroid),
            power: m.power,
            clipped_fraction: m.clipped_fraction,
            off_normal_deg: [c.off_normal_deg.0, c.off_normal_deg.1],
            off_normal: c.off_normal,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosstalkSection {
    pub ion_plane_z_um: f64,
    pub ion_positions_um: Vec<f64>,
    pub channel_for_ion: Vec<usize>,
    /// Row: addressed ion; column: ion receiving the spill. Diagonal is 0.
    pub matrix_db: Vec<Vec<f64>>,
    pub worst_nearest_neighbour_db: Option<f64>,
    pub nearest_neighbour: Vec<PairCrosstalk>,
    pub contributions: Vec<PairCrosstalk>,
}

impl CrosstalkSection {
    pub fn new(r: &CrosstalkReport) -> Self {
        Self {
            ion_plane_z_um: um(r.ion_plane_z),
            ion_positions_um: r.ion_positions.iter().copied().map(um).collect(),
            channel_for_ion: r.channel_for_ion.clone(),
            matrix_db: r.matrix_db.clone(),
            worst_nearest_neighbour_db: r.worst_nearest_neighbour_db(),
            nearest_neighbour: r
                .contributions
                .iter()
                .filter(|c| c.source_ion.abs_diff(c.target_ion) == 1)
                .copied()
                .collect(),
            contributions: r.contributions.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FocusSummaryReport {
    pub z_focus_um: f64,
    pub mfd_moment_um: [f64; 2],
    pub centroid_um: [f64; 2],
    pub clipped_fraction: f64,
    pub off_normal_deg: [f64; 2],
    pub off_normal: bool,
}

impl FocusSummaryReport {
    fn new(f: &FocusSummary) -> Self {
        Self {
            z_focus_um: um(f.z_focus),
            mfd_moment_um: um2(f.mfd_moment),
            centroid_um: um2(f.centroid),
            clipped_fraction: f.clipped_fraction,
            off_normal_deg: [f.off_normal_deg.0, f.off_normal_deg.1],
            off_normal: f.off_normal,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepValue {
    pub parameter: &'static str,
    /// Micrometres for lengths, degrees for angles.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPointReport {
    pub values: Vec<SweepValue>,
    #[serde(flatten)]
    pub focus: FocusSummaryReport,
    pub delta_z_focus_um: f64,
    pub delta_mfd_um: [f64; 2],
    pub delta_centroid_um: [f64; 2],
    pub residual_tilt_deg: f64,
}

impl SweepPointReport {
    fn new(p: &SweepPoint) -> Self {
        Self {
            values: p
                .values
                .iter()
                .map(|&(parameter, v)| SweepValue {
                    parameter: parameter.name(),
                    value: if parameter.is_angle() { v } else { um(v) },
                })
                .collect(),
            focus: FocusSummaryReport::new(&p.focus),
            delta_z_focus_um: um(p.delta_z_focus),
            delta_mfd_um: um2(p.delta_mfd),
            delta_centroid_um: um2(p.delta_centroid),
            residual_tilt_deg: p.residual_tilt_deg,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub parameters: Vec<SweepSection>,
    pub channel: usize,
    pub baseline: FocusSummaryReport,
    pub max_abs_delta_centroid_um: f64,
    pub any_clipping: bool,
    pub any_off_normal: bool,
    pub points: Vec<SweepPointReport>,
}

impl SweepSummary {
    pub fn new(preset: Option<String>, parameters: Vec<SweepSection>, r: &SweepReport) -> Self {
        let points: Vec<SweepPointReport> = r.points.iter().map(SweepPointReport::new).collect();
        Self {
            preset,
            parameters,
            channel: r.channel,
            baseline: FocusSummaryReport::new(&r.baseline),
            max_abs_delta_centroid_um: points
                .iter()
                .flat_map(|p| p.delta_centroid_um)
                .map(f64::abs)
                .fold(0.0, f64::max),
            any_clipping: r.points.iter().any(|p| p.focus.clipped_fraction > 0.0),
            any_off_normal: r.points.iter().any(|p| p.focus.off_normal),
            points,
        }
    }

    /// One row per sweep point.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = self
            .parameters
            .iter()
            .map(|p| {
                let unit = if p.parameter.is_angle() { "deg" } else { "um" };
                format!("{}_{unit}", p.parameter.name())
            })
            .collect();
        let mut header = names;
        header.extend(
            [
                "z_focus_um",
                "delta_z_focus_um",
                "mfd_x_um",
                "mfd_y_um",
                "delta_mfd_x_um",
                "delta_mfd_y_um",
                "centroid_x_um",
                "centroid_y_um",
                "delta_centroid_x_um",
                "delta_centroid_y_um",
                "clipped_fraction",
                "residual_tilt_deg",
                "off_normal_x_deg",
                "off_normal_y_deg",
                "off_normal",
            ]
            .map(String::from),
        );
        out.push_str(&header.join(","));
        out.push('\n');
        for p in &self.points {
            let f = &p.focus;
            let mut row: Vec<String> = p.values.iter().map(|v| v.value.to_string()).collect();
            row.extend(
                [
                    f.z_focus_um,
                    p.delta_z_focus_um,
                    f.mfd_moment_um[0],
                    f.mfd_moment_um[1],
                    p.delta_mfd_um[0],
                    p.delta_mfd_um[1],
                    f.centroid_um[0],
                    f.centroid_um[1],
                    p.delta_centroid_um[0],
                    p.delta_centroid_um[1],
                    f.clipped_fraction,
                    p.residual_tilt_deg,
                    f.off_normal_deg[0],
                    f.off_normal_deg[1],
                ]
                .map(|v| v.to_string()),
            );
            row.push(f.off_normal.to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}
