//! Addressing-unit design: pitch planning, lens-stack synthesis, channel
//! simulation, crosstalk and tolerance analysis.

mod channel;
mod crosstalk;
mod optimize;
mod pitch;
mod synthesis;
mod tolerance;

pub use channel::{
    simulate_channel, simulate_channel_field, ChannelFocus, ImagingMode, SimulationOptions, OFF_NORMAL_LIMIT_DEG,
};
pub use crosstalk::{crosstalk_matrix, power_sum_db, CrosstalkReport, PairCrosstalk, CROSSTALK_FLOOR_DB};
pub use optimize::{nelder_mead, Minimum};
pub use pitch::{gaps, pitch_plan, scale_positions};
pub use synthesis::{
    synthesize_geometry, synthesize_lens_stack, verify_with_wave, DesignTargets, LensStackPrescription, Predicted,
    Topology, WaveCheck,
};
pub use tolerance::{
    preset, residual_tilt_deg, tolerance_sweep, FocusSummary, Parameter, Perturbation, SweepPoint, SweepReport, PRESETS,
};
