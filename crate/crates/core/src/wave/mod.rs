//! Scalar wave optics on a uniform grid: angular-spectrum propagation, thin
//! phase elements, spot metrics and focus search.

pub mod dump;
mod element;
mod fft;
mod field;
mod focus;
mod metrics;
mod propagate;

pub use element::{apply_element, ElementKind, LensProfile, PhaseElement};
pub use fft::Fft2;
pub use field::{make_gaussian_field, Grid, Launch, ScalarField};
pub use focus::{find_focus, propagate_through, FocusResult, FocusSearch, PlacedElement, ScanSample};
pub use metrics::{moment_diameters, spot_metrics, SpotMetrics};
pub use propagate::{angular_spectrum_propagate, AngularSpectrum};
