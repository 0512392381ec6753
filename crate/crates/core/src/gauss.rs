//! Paraxial astigmatic Gaussian beams and ray-transfer (ABCD) matrices.
//!
//! Each transverse axis is propagated independently through its complex beam
//! parameter `q`. Ray matrices act on `(height, angle)` with real angles, so a
//! flat interface has determinant `n1/n2` and `q` is referenced to the local
//! wavelength `lambda / n`.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Gaussian parameters along one transverse axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisBeam {
    /// 1/e^2 intensity waist radius in metres.
    pub waist_radius: f64,
    /// Signed distance from the current reference plane to the waist
    /// (positive: the waist lies downstream).
    pub waist_position: f64,
    pub ambient_index: f64,
}

impl AxisBeam {
    pub fn rayleigh_length(&self, wavelength: f64) -> f64 {
        PI * self.waist_radius * self.waist_radius * self.ambient_index / wavelength
    }

    /// Complex beam parameter at the reference plane.
    pub fn q(&self, wavelength: f64) -> Complex64 {
        Complex64::new(-self.waist_position, self.rayleigh_length(wavelength))
    }

    fn from_q(q: Complex64, wavelength: f64, index: f64) -> Result<Self> {
        if !(q.im > 0.0) || !q.re.is_finite() {
            return Err(Error::Singular(format!("beam parameter lost confinement: q = {q}")));
        }
        Ok(Self {
            waist_radius: (q.im * wavelength / (PI * index)).sqrt(),
            waist_position: -q.re,
            ambient_index: index,
        })
    }

    /// 1/e^2 radius at distance `z` downstream of the reference plane.
    pub fn radius_at(&self, z: f64, wavelength: f64) -> f64 {
        let zr = self.rayleigh_length(wavelength);
        let dz = z - self.waist_position;
        self.waist_radius * (1.0 + (dz / zr).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AstigmaticGaussian {
    /// Vacuum wavelength in metres.
    pub wavelength: f64,
    pub x: AxisBeam,
    pub y: AxisBeam,
}

impl AstigmaticGaussian {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("wavelength", self.wavelength)?;
        for b in [&self.x, &self.y] {
            ensure_positive("waist_radius", b.waist_radius)?;
            if !(b.ambient_index >= 1.0) {
                return Err(Error::invalid("ambient_index", "must be >= 1"));
            }
            if !b.waist_position.is_finite() {
                return Err(Error::invalid("waist_position", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn axis(&self, axis: Axis) -> &AxisBeam {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }

    pub fn mfd(&self) -> (f64, f64) {
        (2.0 * self.x.waist_radius, 2.0 * self.y.waist_radius)
    }
}

/// Beam with its waists at the reference plane from mode field diameters.
pub fn beam_from_mfd(mfd_x: f64, mfd_y: f64, wavelength: f64, index: f64) -> Result<AstigmaticGaussian> {
    ensure_positive("mfd_x", mfd_x)?;
    ensure_positive("mfd_y", mfd_y)?;
    ensure_positive("wavelength", wavelength)?;
    ensure_positive("index", index)?;
    let axis = |mfd: f64| AxisBeam {
        waist_radius: mfd / 2.0,
        waist_position: 0.0,
        ambient_index: index,
    };
    let beam = AstigmaticGaussian {
        wavelength,
        x: axis(mfd_x),
        y: axis(mfd_y),
    };
    beam.validate()?;
    Ok(beam)
}

pub fn rayleigh_length(beam: &AstigmaticGaussian, axis: Axis) -> f64 {
    beam.axis(axis).rayleigh_length(beam.wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaDirection {
    NaToWaist,
    WaistToNa,
}

/// Converts between far-field NA (sine of the 1/e^2 half-angle, small-angle
/// form `lambda / (pi w0)`) and waist radius, in vacuum.
pub fn na_waist_conversion(value: f64, direction: NaDirection, wavelength: f64) -> Result<f64> {
    ensure_positive("value", value)?;
    ensure_positive("wavelength", wavelength)?;
    let converted = wavelength / (PI * value);
    let na = match direction {
        NaDirection::NaToWaist => value,
        NaDirection::WaistToNa => converted,
    };
    if na >= 1.0 {
        return Err(Error::invalid(
            "numerical_aperture",
            format!("NA must be < 1, got {na}"),
        ));
    }
    Ok(converted)
}

/// 2x2 ray-transfer matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayMatrix {
    pub const IDENTITY: RayMatrix = RayMatrix {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn free_space(length: f64) -> Self {
        RayMatrix {
            a: 1.0,
            b: length,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn thin_lens(focal_length: f64) -> Self {
        RayMatrix {
            a: 1.0,
            b: 0.0,
            c: -1.0 / focal_length,
            d: 1.0,
        }
    }

    pub fn flat_interface(n1: f64, n2: f64) -> Self {
        RayMatrix {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: n1 / n2,
        }
    }

    pub fn transform_q(&self, q: Complex64) -> Result<Complex64> {
        let den = q * self.c + self.d;
        if den.norm() < 1e-300 {
            return Err(Error::Singular("Cq + D = 0".into()));
        }
        Ok((q * self.a + self.b) / den)
    }
}

impl Mul for RayMatrix {
    type Output = RayMatrix;

    /// `self * rhs` applies `rhs` first.
    fn mul(self, rhs: RayMatrix) -> RayMatrix {
        RayMatrix {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AbcdElement {
    FreeSpace { length: f64, index: f64 },
    ThinLens { focal_length: f64 },
    FlatInterface { n1: f64, n2: f64 },
}

impl AbcdElement {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AbcdElement::FreeSpace { length, index } => {
                if !(length >= 0.0) || !length.is_finite() {
                    return Err(Error::invalid("length", "must be finite and >= 0"));
                }
                if !(index >= 1.0) {
                    return Err(Error::invalid("index", "must be >= 1"));
                }
            }
            AbcdElement::ThinLens { focal_length } => {
                if focal_length == 0.0 || !focal_length.is_finite() {
                    return Err(Error::invalid("focal_length", "must be finite and non-zero"));
                }
            }
            AbcdElement::FlatInterface { n1, n2 } => {
                if !(n1 >= 1.0 && n2 >= 1.0) {
                    return Err(Error::invalid("index", "interface indices must be >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> RayMatrix {
        match *self {
            AbcdElement::FreeSpace { length, .. } => RayMatrix::free_space(length),
            AbcdElement::ThinLens { focal_length } => RayMatrix::thin_lens(focal_length),
            AbcdElement::FlatInterface { n1, n2 } => RayMatrix::flat_interface(n1, n2),
        }
    }
}

/// Composed ray matrix of a chain (first element acts first).
pub fn chain_matrix(chain: &[AbcdElement]) -> RayMatrix {
    chain.iter().fold(RayMatrix::IDENTITY, |acc, el| el.matrix() * acc)
}

/// Propagates both axes through `chain`, element by element.
///
/// The returned waist positions are relative to the plane after the last
/// element.
pub fn propagate_abcd(beam: &AstigmaticGaussian, chain: &[AbcdElement]) -> Result<AstigmaticGaussian> {
    beam.validate()?;
    let mut out = *beam;
    for axis in [Axis::X, Axis::Y] {
        let start = *beam.axis(axis);
        let mut index = start.ambient_index;
        let mut q = start.q(beam.wavelength);
        for el in chain {
            el.validate()?;
            match *el {
                AbcdElement::FreeSpace { index: n, .. } if (n - index).abs() > 1e-12 => {
                    return Err(Error::invalid(
                        "index",
                        format!("free-space index {n} does not match the beam medium {index}"),
                    ));
                }
                AbcdElement::FlatInterface { n1, n2 } => {
                    if (n1 - index).abs() > 1e-12 {
                        return Err(Error::invalid(
                            "index",
                            format!("interface n1 {n1} does not match the beam medium {index}"),
                        ));
                    }
                    index = n2;
                }
                _ => {}
            }
            q = el.matrix().transform_q(q)?;
        }
        let axis_out = AxisBeam::from_q(q, beam.wavelength, index)?;
        match axis {
            Axis::X => out.x = axis_out,
            Axis::Y => out.y = axis_out,
        }
    }
    Ok(out)
}

/// Image/object waist ratio per axis.
pub fn waist_ratio(input: &AstigmaticGaussian, output: &AstigmaticGaussian) -> (f64, f64) {
    (
        output.x.waist_radius / input.x.waist_radius,
        output.y.waist_radius / input.y.waist_radius,
    )
}
