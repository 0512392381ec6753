use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ionaddr_core::design::{
    crosstalk_matrix, pitch_plan, preset, simulate_channel_field, synthesize_lens_stack, tolerance_sweep,
    LensStackPrescription, PRESETS,
};
use ionaddr_core::ion_crystal::IonCrystal;
use ionaddr_core::pic::{outcoupling_angle, WaveguideArraySpec};
use ionaddr_core::wave::dump::{write_csv, write_sfld};

use crate::error::CliError;
use crate::report::{
    ChannelReport, CrosstalkSection, CrystalReport, PitchReport, PrescriptionReport, RunReport, SweepSummary,
};
use crate::scenario::{Scenario, SweepSection};

/// How a sweep's perturbations are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepRequest {
    Preset(String),
    Params(Vec<SweepSection>),
    /// Use the scenario's `sweeps` list.
    Scenario,
}

fn solve_crystal(s: &Scenario) -> Result<IonCrystal, CliError> {
    IonCrystal::solve(s.trap()).map_err(CliError::stage("crystal"))
}

pub fn cmd_crystal(s: &Scenario) -> Result<RunReport, CliError> {
    let crystal = solve_crystal(s)?;
    Ok(RunReport::new("crystal", s, CrystalReport::new(&crystal)))
}

struct Design {
    report: RunReport,
    crystal: IonCrystal,
    array: WaveguideArraySpec,
    prescription: LensStackPrescription,
}

/// Crystal, pitch plan and lens-stack synthesis shared by `design` and
/// `sweep`.
fn build_design(command: &'static str, s: &Scenario) -> Result<Design, CliError> {
    let crystal = solve_crystal(s)?;
    let mut report = RunReport::new(command, s, CrystalReport::new(&crystal));
    let targets = s.targets();
    let planned = pitch_plan(&crystal, targets.magnification).map_err(CliError::stage("pitch_plan"))?;
    let source = if s.array.positions_um.is_some() {
        "scenario"
    } else {
        "pitch_plan"
    };
    let array = s.array(planned);
    array.validate().map_err(CliError::stage("array"))?;
    report.pitch_plan = Some(PitchReport::new(targets.magnification, source, &array.positions));

    let mirror = s.mirror();
    let tilt = outcoupling_angle(&mirror)
        .map_err(CliError::stage("outcoupling"))?
        .exit_angle_deg;
    let grid = s.grid().map_err(CliError::stage("grid"))?;
    let prescription = synthesize_lens_stack(&targets, tilt, grid).map_err(CliError::stage("synthesize"))?;
    report.prescription = Some(PrescriptionReport::new(&prescription));
    Ok(Design {
        report,
        crystal,
        array,
        prescription,
    })
}

/// Full pipeline: pitch plan, synthesis, every channel and the crosstalk
/// matrix. With `dump_field` the centre channel's focal-plane field is
/// written as CSV (by extension) or SFLD binary.
pub fn cmd_design(s: &Scenario, dump_field: Option<&Path>) -> Result<RunReport, CliError> {
    let d = build_design("design", s)?;
    let mut report = d.report;
    let options = s.simulation().map_err(CliError::stage("grid"))?;
    let mirror = s.mirror();
    let xt = crosstalk_matrix(
        &d.prescription,
        &d.array,
        &d.crystal,
        &mirror,
        &options,
        s.simulation.include_leakage,
    )
    .map_err(CliError::stage("crosstalk"))?;
    report.channels = Some(xt.channel_focus.iter().map(ChannelReport::new).collect());
    report.crosstalk = Some(CrosstalkSection::new(&xt));

    if let Some(path) = dump_field {
        let centre = (0..d.array.channel_count())
            .min_by(|&i, &j| d.array.positions[i].abs().total_cmp(&d.array.positions[j].abs()))
            .expect("validated array is non-empty");
        let (_, field) = simulate_channel_field(&d.prescription, &d.array, centre, &mirror, &options)
            .map_err(CliError::stage("dump_field"))?;
        let io = |e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let out = BufWriter::new(File::create(path).map_err(io)?);
        let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if csv {
            write_csv(&field, out).map_err(io)?;
        } else {
            write_sfld(&field, out).map_err(io)?;
        }
    }
    Ok(report)
}

pub fn cmd_sweep(s: &Scenario, request: &SweepRequest) -> Result<RunReport, CliError> {
    let (preset_name, parameters) = match request {
        SweepRequest::Preset(name) => {
            let p = preset(name).ok_or_else(|| {
                CliError::Usage(format!("unknown preset `{name}`; available: {}", PRESETS.join(", ")))
            })?;
            (Some(name.clone()), p.iter().map(SweepSection::from_core).collect())
        }
        SweepRequest::Params(p) => (None, p.clone()),
        SweepRequest::Scenario => (None, s.sweeps.clone()),
    };
    if parameters.is_empty() {
        return Err(CliError::Usage(format!(
            "no sweep definitions: pass --preset ({}) or --param, or add `sweeps` to the scenario",
            PRESETS.join(", ")
        )));
    }

    let d = build_design("sweep", s)?;
    let mut report = d.report;
    let options = s.simulation().map_err(CliError::stage("grid"))?;
    let perturbations: Vec<_> = parameters.iter().map(|p| p.to_core()).collect();
    let sweep = tolerance_sweep(&d.prescription, &d.array, &s.mirror(), &perturbations, &options)
        .map_err(CliError::stage("tolerance_sweep"))?;
    report.sweep = Some(SweepSummary::new(preset_name, parameters, &sweep));
    Ok(report)
}
