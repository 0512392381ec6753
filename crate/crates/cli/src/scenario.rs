//! Scenario files: JSON in micrometres, degrees and hertz. Unknown keys are
//! rejected everywhere.

use std::path::Path;

use ionaddr_core::design::{DesignTargets, ImagingMode, Parameter, Perturbation, SimulationOptions, Topology};
use ionaddr_core::ion_crystal::TrapSpec;
use ionaddr_core::pic::{LeakageReference, TirMirrorSpec, WaveguideArraySpec, DEFAULT_LEAKAGE_DECAY};
use ionaddr_core::wave::Grid;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const UM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Free text carried into reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub trap: TrapSection,
    pub targets: TargetsSection,
    pub mirror: MirrorSection,
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub ion_mass_u: f64,
    #[serde(default = "one")]
    pub ion_charge: u32,
    pub axial_frequency_hz: f64,
    pub ion_count: usize,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsSection {
    pub magnification: f64,
    pub numerical_aperture: f64,
    pub image_distance_um: f64,
    /// Waveguide mode field diameters (x along the array, y vertical).
    pub source_mfd_um: (f64, f64),
    pub wavelength_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_stack_height_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture_budget_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_fill: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_index: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wedge_index_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_clearance_um: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorSection {
    pub facet_angle_deg: f64,
    pub n_effective: f64,
    #[serde(default = "unit_index")]
    pub n_ambient: f64,
    #[serde(default = "unit_index")]
    pub n_exit: f64,
}

fn unit_index() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    /// Explicit waveguide positions; the pitch plan is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions_um: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage_decay_per_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage_reference_pitch_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage_reference_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub pitch_um: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            nx: 2048,
            ny: 2048,
            pitch_um: 0.2,
        }
    }
}

impl GridSection {
    /// Parses `nx,ny,pitch_um`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [nx, ny, pitch] = parts[..] else {
            return Err(format!("expected nx,ny,pitch_um, got `{s}`"));
        };
        Ok(Self {
            nx: nx.parse().map_err(|e| format!("nx: {e}"))?,
            ny: ny.parse().map_err(|e| format!("ny: {e}"))?,
            pitch_um: pitch.parse().map_err(|e| format!("pitch_um: {e}"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub mode: ImagingMode,
    #[serde(default = "default_half_width")]
    pub focus_half_width_um: f64,
    #[serde(default = "default_focus_steps")]
    pub focus_steps: usize,
    #[serde(default = "yes")]
    pub include_leakage: bool,
}

fn default_half_width() -> f64 {
    25.0
}

fn default_focus_steps() -> usize {
    26
}

fn yes() -> bool {
    true
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            mode: ImagingMode::default(),
            focus_half_width_um: default_half_width(),
            focus_steps: default_focus_steps(),
            include_leakage: true,
        }
    }
}

/// One swept parameter; lengths in micrometres, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: Parameter,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl SweepSection {
    /// Parses `name=start:end:steps` or `name=value`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (name, range) = s
            .split_once('=')
            .ok_or_else(|| format!("expected name=start:end:steps, got `{s}`"))?;
        let parameter = Parameter::from_name(name.trim()).ok_or_else(|| {
            let known: Vec<&str> = Parameter::ALL.iter().map(|p| p.name()).collect();
            format!("unknown parameter `{name}` (known: {})", known.join(", "))
        })?;
        let nums: Vec<&str> = range.split(':').map(str::trim).collect();
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let (start, end, steps) = match nums[..] {
            [v] => (num(v)?, num(v)?, 1),
            [a, b, n] => (num(a)?, num(b)?, n.parse().map_err(|e| format!("steps `{n}`: {e}"))?),
            _ => return Err(format!("expected start:end:steps, got `{range}`")),
        };
        Ok(Self {
            parameter,
            start,
            end,
            steps,
        })
    }

    pub fn to_core(self) -> Perturbation {
        let scale = if self.parameter.is_angle() { 1.0 } else { UM };
        Perturbation {
            parameter: self.parameter,
            start: self.start * scale,
            end: self.end * scale,
            steps: self.steps,
        }
    }

    pub fn from_core(p: &Perturbation) -> Self {
        let scale = if p.parameter.is_angle() { 1.0 } else { UM };
        Self {
            parameter: p.parameter,
            start: p.start / scale,
            end: p.end / scale,
            steps: p.steps,
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|message| CliError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Parses scenario JSON; errors name the line, column and key path.
    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            format!("line {}, column {}, at `{path}`: {inner}", inner.line(), inner.column())
        })
    }

    pub fn trap(&self) -> TrapSpec {
        TrapSpec {
            ion_mass_u: self.trap.ion_mass_u,
            ion_charge: self.trap.ion_charge,
            axial_frequency_hz: self.trap.axial_frequency_hz,
            ion_count: self.trap.ion_count,
        }
    }

    pub fn mirror(&self) -> TirMirrorSpec {
        TirMirrorSpec {
            facet_angle_deg: self.mirror.facet_angle_deg,
            n_effective: self.mirror.n_effective,
            n_ambient: self.mirror.n_ambient,
            n_exit: self.mirror.n_exit,
        }
    }

    pub fn targets(&self) -> DesignTargets {
        let t = &self.targets;
        let mut d = DesignTargets::new(
            t.magnification,
            t.numerical_aperture,
            t.image_distance_um * UM,
            (t.source_mfd_um.0 * UM, t.source_mfd_um.1 * UM),
            t.wavelength_um * UM,
        );
        if let Some(v) = t.max_stack_height_um {
            d.max_stack_height = v * UM;
        }
        if let Some(v) = t.aperture_budget_um {
            d.aperture_budget = v * UM;
        }
        if let Some(v) = t.stop_fill {
            d.stop_fill = v;
        }
        if let Some(v) = t.topology {
            d.topology = v;
        }
        if let Some(v) = t.ambient_index {
            d.ambient_index = v;
        }
        if let Some(v) = t.wedge_index_step {
            d.wedge_index_step = v;
        }
        if let Some(v) = t.stop_clearance_um {
            d.stop_clearance = v * UM;
        }
        d
    }

    /// Waveguide array at `positions` (metres) unless the scenario overrides
    /// them.
    pub fn array(&self, positions: Vec<f64>) -> WaveguideArraySpec {
        let a = &self.array;
        WaveguideArraySpec {
            positions: a
                .positions_um
                .as_ref()
                .map_or(positions, |p| p.iter().map(|v| v * UM).collect()),
            mode_mfd: (self.targets.source_mfd_um.0 * UM, self.targets.source_mfd_um.1 * UM),
            leakage_decay: a.leakage_decay_per_um.map_or(DEFAULT_LEAKAGE_DECAY, |v| v / UM),
            leakage_reference: LeakageReference {
                pitch: a.leakage_reference_pitch_um.unwrap_or(5.0) * UM,
                crosstalk_db: a.leakage_reference_db.unwrap_or(-30.0),
            },
        }
    }

    pub fn grid(&self) -> Result<Grid, ionaddr_core::Error> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.pitch_um * UM)
    }

    pub fn simulation(&self) -> Result<SimulationOptions, ionaddr_core::Error> {
        let mut o = SimulationOptions::new(self.grid()?);
        o.mode = self.simulation.mode;
        o.focus_half_width = self.simulation.focus_half_width_um * UM;
        o.focus_steps = self.simulation.focus_steps;
        Ok(o)
    }
}
