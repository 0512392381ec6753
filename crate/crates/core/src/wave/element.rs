use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::ScalarField;
use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LensProfile {
    /// `-k r^2 / 2f`.
    Paraxial,
    /// `-k (sqrt(r^2 + f^2) - f)`: a perfect converging spherical wave for
    /// on-axis input.
    #[default]
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ElementKind {
    ThinLens {
        focal_length: f64,
        #[serde(default)]
        profile: LensProfile,
    },
    /// Thin wedge that removes a tilt of `(tilt_x, tilt_y)` radians, i.e.
    /// deflects by the negated angles. `index_step` only sets the apex angle.
    Wedge {
        tilt_x: f64,
        tilt_y: f64,
        index_step: f64,
    },
    RectAperture {
        width_x: f64,
        width_y: f64,
    },
    CircAperture {
        radius: f64,
    },
}

/// Thin transmission element centred at `offset` from the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseElement {
    pub kind: ElementKind,
    #[serde(default)]
    pub offset: (f64, f64),
}

const MAX_WEDGE_TILT: f64 = 30.0 * std::f64::consts::PI / 180.0;

impl PhaseElement {
    pub fn new(kind: ElementKind) -> Self {
        Self {
            kind,
            offset: (0.0, 0.0),
        }
    }

    pub fn thin_lens(focal_length: f64) -> Self {
        Self::new(ElementKind::ThinLens {
            focal_length,
            profile: LensProfile::Exact,
        })
    }

    pub fn circ_aperture(radius: f64) -> Self {
        Self::new(ElementKind::CircAperture { radius })
    }

    pub fn with_offset(mut self, offset: (f64, f64)) -> Self {
        self.offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ElementKind::ThinLens { focal_length, .. } => {
                if !focal_length.is_finite() || focal_length == 0.0 {
                    return Err(Error::invalid("focal_length", "must be finite and nonzero"));
                }
            }
            ElementKind::Wedge {
                tilt_x,
                tilt_y,
                index_step,
            } => {
                if !(tilt_x.abs() < MAX_WEDGE_TILT && tilt_y.abs() < MAX_WEDGE_TILT) {
                    return Err(Error::invalid("wedge tilt", "must lie within +-30 degrees"));
                }
                ensure_positive("index_step", index_step)?;
            }
            ElementKind::RectAperture { width_x, width_y } => {
                ensure_positive("width_x", width_x)?;
                ensure_positive("width_y", width_y)?;
            }
            ElementKind::CircAperture { radius } => ensure_positive("radius", radius)?,
        }
        if !(self.offset.0.is_finite() && self.offset.1.is_finite()) {
            return Err(Error::invalid("offset", "must be finite"));
        }
        Ok(())
    }

    /// Apex angle (radians) of a prism that deflects by the wedge tilt.
    pub fn wedge_apex_angle(&self) -> Option<f64> {
        match self.kind {
            ElementKind::Wedge {
                tilt_x,
                tilt_y,
                index_step,
            } => {
                let s = (tilt_x.sin().powi(2) + tilt_y.sin().powi(2)).sqrt();
                Some((s / index_step).atan())
            }
            _ => None,
        }
    }
}

/// Applies `element` in place. Returns the fraction of the incident power
/// removed (zero for pure phase elements).
pub fn apply_element(field: &mut ScalarField, element: &PhaseElement) -> Result<f64> {
    element.validate()?;
    let xs: Vec<f64> = field.x_coords().iter().map(|x| x - element.offset.0).collect();
    let ys: Vec<f64> = field.y_coords().iter().map(|y| y - element.offset.1).collect();
    let (x_lo, x_hi) = (xs[0], xs[xs.len() - 1]);
    let (y_lo, y_hi) = (ys[0], ys[ys.len() - 1]);
    if !(x_lo <= 0.0 && x_hi >= 0.0 && y_lo <= 0.0 && y_hi >= 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "element centre ({:.3e}, {:.3e}) m lies outside the grid",
            element.offset.0, element.offset.1
        )));
    }
    let k = field.k();

    match element.kind {
        ElementKind::ThinLens {
            focal_length: f,
            profile,
        } => {
            let phase = |r2: f64| match profile {
                LensProfile::Paraxial => -k * r2 / (2.0 * f),
                LensProfile::Exact => -f.signum() * k * ((r2 + f * f).sqrt() - f.abs()),
            };
            for ((i, j), s) in field.samples.indexed_iter_mut() {
                *s *= Complex64::from_polar(1.0, phase(xs[i] * xs[i] + ys[j] * ys[j]));
            }
            Ok(0.0)
        }
        ElementKind::Wedge { tilt_x, tilt_y, .. } => {
            let (sx, sy) = (tilt_x.sin(), tilt_y.sin());
            let px: Vec<Complex64> = xs.iter().map(|x| Complex64::from_polar(1.0, -k * sx * x)).collect();
            let py: Vec<Complex64> = ys.iter().map(|y| Complex64::from_polar(1.0, -k * sy * y)).collect();
            for ((i, j), s) in field.samples.indexed_iter_mut() {
                *s *= px[i] * py[j];
            }
            Ok(0.0)
        }
        ElementKind::RectAperture { width_x, width_y } => {
            if x_hi < -width_x / 2.0 || x_lo > width_x / 2.0 {
                return Err(Error::InvalidGeometry("aperture misses the grid".into()));
            }
            clip(field, |i, j| {
                xs[i].abs() <= width_x / 2.0 && ys[j].abs() <= width_y / 2.0
            })
        }
        ElementKind::CircAperture { radius } => {
            let r2 = radius * radius;
            clip(field, |i, j| xs[i] * xs[i] + ys[j] * ys[j] <= r2)
        }
    }
}

fn clip(field: &mut ScalarField, inside: impl Fn(usize, usize) -> bool) -> Result<f64> {
    let before = field.power();
    for ((i, j), s) in field.samples.indexed_iter_mut() {
        if !inside(i, j) {
            *s = Complex64::default();
        }
    }
    let after = field.power();
    let clipped = if before > 0.0 { 1.0 - after / before } else { 0.0 };
    field.clipped_fraction = 1.0 - (1.0 - field.clipped_fraction) * (1.0 - clipped);
    Ok(clipped)
}
