use rayon::prelude::*;
use serde::Serialize;

use super::channel::{run_channel, ChannelFocus, ChannelRun, Deviation, ImagingMode, SimulationOptions};
use super::synthesis::LensStackPrescription;
use crate::error::{Error, Result};
use crate::ion_crystal::IonCrystal;
use crate::pic::{leakage_crosstalk, TirMirrorSpec, WaveguideArraySpec};
use crate::wave::AngularSpectrum;

/// Floor for intensity ratios that underflow (e.g. exact zeros).
pub const CROSSTALK_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCrosstalk {
    /// Ion addressed by the emitting channel.
    pub source_ion: usize,
    pub target_ion: usize,
    pub optical_db: f64,
    /// `None` when leakage is disabled.
    pub leakage_db: Option<f64>,
    pub total_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosstalkReport {
    /// `matrix_db[a][b]`: light of the channel addressing ion `a` at ion `b`.
    pub matrix_db: Vec<Vec<f64>>,
    pub contributions: Vec<PairCrosstalk>,
    pub ion_positions: Vec<f64>,
    /// Channel feeding each ion.
    pub channel_for_ion: Vec<usize>,
    /// Axial position of the common ion plane behind the stack exit.
    pub ion_plane_z: f64,
    /// Per-channel focus, indexed by channel.
    pub channel_focus: Vec<ChannelFocus>,
}

impl CrosstalkReport {
    /// Largest total crosstalk between neighbouring ions.
    pub fn worst_nearest_neighbour_db(&self) -> Option<f64> {
        let n = self.matrix_db.len();
        (0..n.saturating_sub(1))
            .flat_map(|a| [self.matrix_db[a][a + 1], self.matrix_db[a + 1][a]])
            .reduce(f64::max)
    }
}

pub fn power_sum_db(a: f64, b: f64) -> f64 {
    (10f64.powf(a / 10.0) + 10f64.powf(b / 10.0)).log10() * 10.0
}

fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(CROSSTALK_FLOOR_DB)
    } else {
        CROSSTALK_FLOOR_DB
    }
}

/// Simulates every channel and combines the optical spill at the other ions
/// with waveguide leakage (incoherent power sum).
pub fn crosstalk_matrix(
    prescription: &LensStackPrescription,
    array: &WaveguideArraySpec,
    crystal: &IonCrystal,
    mirror: &TirMirrorSpec,
    options: &SimulationOptions,
    include_leakage: bool,
) -> Result<CrosstalkReport> {
    array.validate()?;
    let n = array.channel_count();
    if crystal.len() != n {
        return Err(Error::invalid(
            "channel_count",
            format!("{n} waveguides for {} ions", crystal.len()),
        ));
    }
    let ions = crystal.positions();
    let a = prescription.predicted.geometric_magnification;

    // Ion addressed by each channel: nearest to its paraxial image.
    let ion_of: Vec<usize> = array
        .positions
        .iter()
        .map(|&p| {
            (0..n)
                .min_by(|&i, &j| (ions[i] - a * p).abs().total_cmp(&(ions[j] - a * p).abs()))
                .expect("n > 0")
        })
        .collect();
    let mut channel_for_ion = vec![usize::MAX; n];
    for (ch, &ion) in ion_of.iter().enumerate() {
        if channel_for_ion[ion] != usize::MAX {
            return Err(Error::InvalidGeometry(format!(
                "channels {} and {ch} both image onto ion {ion}",
                channel_for_ion[ion]
            )));
        }
        channel_for_ion[ion] = ch;
    }

    let centre = (0..n)
        .min_by(|&i, &j| array.positions[i].abs().total_cmp(&array.positions[j].abs()))
        .expect("n > 0");
    let mirror = *mirror;
    let run = |ch: usize| run_channel(prescription, array, ch, &mirror, options, Deviation::default());

    let sample = |r: &ChannelRun, z: f64| -> Result<Vec<f64>> {
        // Along the line through the channel's own spot.
        let y = r.focus.metrics.centroid.1;
        let dx = r.x_shift;
        if (r.focus.z_focus - z).abs() < 1e-15 {
            return Ok(ions.iter().map(|&x| r.focus_field.intensity_at(x - dx, y)).collect());
        }
        let f = AngularSpectrum::new(&r.exit).propagate(z).map_err(|e| Error::Channel {
            index: r.focus.channel,
            source: Box::new(e),
        })?;
        Ok(ions.iter().map(|&x| f.intensity_at(x - dx, y)).collect())
    };

    let base = run(centre)?;
    let ion_plane_z = base.focus.z_focus;
    // Isoplanatic channels differ only by placement, so one simulation serves
    // all; physical channels are simulated and sampled one by one.
    let per_channel: Vec<(ChannelFocus, Vec<f64>)> = match options.mode {
        ImagingMode::Isoplanatic => (0..n)
            .map(|ch| {
                let r = relocate(&base, ch, array.positions[ch], a);
                let s = sample(&r, ion_plane_z)?;
                Ok((r.focus, s))
            })
            .collect::<Result<_>>()?,
        ImagingMode::Physical => (0..n)
            .into_par_iter()
            .map(|ch| {
                let r = if ch == centre { None } else { Some(run(ch)?) };
                let r = r.as_ref().unwrap_or(&base);
                Ok((r.focus.clone(), sample(r, ion_plane_z)?))
            })
            .collect::<Result<_>>()?,
    };
    let (channel_focus, samples): (Vec<ChannelFocus>, Vec<Vec<f64>>) = per_channel.into_iter().unzip();

    let mut matrix_db = vec![vec![0.0; n]; n];
    let mut contributions = Vec::new();
    for src in 0..n {
        let ch = channel_for_ion[src];
        let own = samples[ch][src];
        for tgt in 0..n {
            if tgt == src {
                continue;
            }
            let optical_db = to_db(samples[ch][tgt] / own);
            let leakage_db = if include_leakage {
                Some(leakage_crosstalk(array, ch, channel_for_ion[tgt])?)
            } else {
                None
            };
            let total_db = leakage_db.map_or(optical_db, |l| power_sum_db(optical_db, l));
            matrix_db[src][tgt] = total_db;
            contributions.push(PairCrosstalk {
                source_ion: src,
                target_ion: tgt,
                optical_db,
                leakage_db,
                total_db,
            });
        }
    }

    Ok(CrosstalkReport {
        matrix_db,
        contributions,
        ion_positions: ions,
        channel_for_ion,
        ion_plane_z,
        channel_focus,
    })
}

/// Copy of an isoplanatic run moved to another channel's image height;
/// the fields are shared and sampled with an x offset.
fn relocate(base: &ChannelRun, channel: usize, source_position: f64, a: f64) -> ChannelRun {
    let image_position = a * source_position;
    let dx = image_position - base.focus.image_position;
    let mut focus = base.focus.clone();
    focus.channel = channel;
    focus.source_position = source_position;
    focus.image_position = image_position;
    focus.metrics.centroid.0 += dx;
    for s in &mut focus.axial_profile {
        s.centroid.0 += dx;
    }
    ChannelRun {
        focus,
        exit: base.exit.clone(),
        focus_field: base.focus_field.clone(),
        x_shift: base.x_shift + dx,
    }
}
