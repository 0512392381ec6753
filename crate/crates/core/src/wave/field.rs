use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::gauss::{AstigmaticGaussian, Axis};

/// Square-pitch sampling grid. Sample `(i, j)` sits at
/// `origin + ((i - nx/2) * pitch, (j - ny/2) * pitch)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    /// Sample spacing in metres.
    pub pitch: f64,
}

impl Grid {
    pub const MIN_SIZE: usize = 64;

    pub fn new(nx: usize, ny: usize, pitch: f64) -> Result<Self> {
        let g = Self { nx, ny, pitch };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for n in [self.nx, self.ny] {
            if n < Self::MIN_SIZE || !n.is_power_of_two() {
                return Err(Error::invalid(
                    "grid",
                    format!("dimensions must be powers of two >= {}, got {n}", Self::MIN_SIZE),
                ));
            }
        }
        ensure_positive("grid.pitch", self.pitch)
    }

    pub fn width(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.nx as f64 * self.pitch,
            Axis::Y => self.ny as f64 * self.pitch,
        }
    }
}

/// Sampled complex scalar field on a transverse plane.
#[derive(Debug, Clone)]
pub struct ScalarField {
    /// Samples indexed `[ix, iy]`, `y` contiguous.
    pub samples: Array2<Complex64>,
    pub pitch: f64,
    /// Vacuum wavelength in metres.
    pub wavelength: f64,
    pub ambient_index: f64,
    /// Transverse position of the grid centre sample.
    pub origin: (f64, f64),
    /// Fraction of the launched power removed by apertures so far.
    pub clipped_fraction: f64,
}

impl ScalarField {
    pub fn zeros(grid: Grid, wavelength: f64, ambient_index: f64) -> Result<Self> {
        grid.validate()?;
        ensure_positive("wavelength", wavelength)?;
        if !(ambient_index >= 1.0) {
            return Err(Error::invalid("ambient_index", "must be >= 1"));
        }
        Ok(Self {
            samples: Array2::zeros((grid.nx, grid.ny)),
            pitch: grid.pitch,
            wavelength,
            ambient_index,
            origin: (0.0, 0.0),
            clipped_fraction: 0.0,
        })
    }

    pub fn grid(&self) -> Grid {
        let (nx, ny) = self.samples.dim();
        Grid {
            nx,
            ny,
            pitch: self.pitch,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin.0 + (i as f64 - (self.samples.dim().0 / 2) as f64) * self.pitch
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin.1 + (j as f64 - (self.samples.dim().1 / 2) as f64) * self.pitch
    }

    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.samples.dim().0).map(|i| self.x(i)).collect()
    }

    pub fn y_coords(&self) -> Vec<f64> {
        (0..self.samples.dim().1).map(|j| self.y(j)).collect()
    }

    /// Wavenumber in the ambient medium.
    pub fn k(&self) -> f64 {
        2.0 * PI * self.ambient_index / self.wavelength
    }

    /// Integrated intensity `sum |E|^2 * pitch^2`.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.pitch * self.pitch
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.samples.mapv(|v| v.norm_sqr())
    }

    /// Bilinear interpolation of the intensity at `(x, y)`; zero outside the grid.
    pub fn intensity_at(&self, x: f64, y: f64) -> f64 {
        let (nx, ny) = self.samples.dim();
        let fi = (x - self.origin.0) / self.pitch + (nx / 2) as f64;
        let fj = (y - self.origin.1) / self.pitch + (ny / 2) as f64;
        if !(fi >= 0.0 && fj >= 0.0 && fi <= (nx - 1) as f64 && fj <= (ny - 1) as f64) {
            return 0.0;
        }
        let (i0, j0) = (fi.floor() as usize, fj.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(nx - 1), (j0 + 1).min(ny - 1));
        let (tx, ty) = (fi - i0 as f64, fj - j0 as f64);
        let v = |i: usize, j: usize| self.samples[(i, j)].norm_sqr();
        (1.0 - tx) * ((1.0 - ty) * v(i0, j0) + ty * v(i0, j1)) + tx * ((1.0 - ty) * v(i1, j0) + ty * v(i1, j1))
    }

    pub fn scale_power_to(&mut self, target: f64) {
        let p = self.power();
        if p > 0.0 {
            let s = (target / p).sqrt();
            self.samples.mapv_inplace(|v| v * s);
        }
    }
}

/// Launch parameters for a sampled Gaussian beam.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Launch {
    /// Propagation-direction tilt in the x-z and y-z planes, radians.
    pub tilt: (f64, f64),
    /// Beam centre relative to the grid centre.
    pub offset: (f64, f64),
}

/// Samples an astigmatic Gaussian (unit power) on `grid`, including any
/// waist offset carried by `beam` and a linear tilt phase.
pub fn make_gaussian_field(beam: &AstigmaticGaussian, launch: Launch, grid: Grid) -> Result<ScalarField> {
    beam.validate()?;
    grid.validate()?;
    if (beam.x.ambient_index - beam.y.ambient_index).abs() > 1e-12 {
        return Err(Error::invalid("ambient_index", "x and y axes disagree"));
    }
    for t in [launch.tilt.0, launch.tilt.1] {
        if !(t.abs() < PI / 2.0) {
            return Err(Error::invalid("tilt", "must lie within (-90, 90) degrees"));
        }
    }

    let lambda = beam.wavelength;
    let w_min = beam.x.waist_radius.min(beam.y.waist_radius);
    let required = w_min / 4.0;
    if grid.pitch > required {
        return Err(Error::Sampling {
            pitch: grid.pitch,
            required,
        });
    }
    for axis in [Axis::X, Axis::Y] {
        let b = beam.axis(axis);
        let w = b.radius_at(0.0, lambda);
        let width = grid.width(axis);
        if width < 8.0 * w {
            return Err(Error::invalid(
                "grid",
                format!("window {width:.3e} m narrower than 8 beam radii ({w:.3e} m)"),
            ));
        }
        let c = match axis {
            Axis::X => launch.offset.0,
            Axis::Y => launch.offset.1,
        };
        if c.abs() + 2.0 * w > width / 2.0 {
            return Err(Error::InvalidGeometry(format!(
                "launch offset {c:.3e} m puts the beam outside the {axis:?} window"
            )));
        }
    }

    let mut field = ScalarField::zeros(grid, lambda, beam.x.ambient_index)?;
    let k = field.k();
    let qx = beam.x.q(lambda);
    let qy = beam.y.q(lambda);
    // exp(-i k r^2 / 2q) carries both the Gaussian envelope and wavefront curvature.
    let ax = Complex64::new(0.0, -k / 2.0) / qx;
    let ay = Complex64::new(0.0, -k / 2.0) / qy;
    let (sx, sy) = (launch.tilt.0.sin(), launch.tilt.1.sin());
    let xs: Vec<Complex64> = field
        .x_coords()
        .iter()
        .map(|&x| {
            let u = x - launch.offset.0;
            (ax * u * u + Complex64::new(0.0, k * sx * u)).exp()
        })
        .collect();
    let ys: Vec<Complex64> = field
        .y_coords()
        .iter()
        .map(|&y| {
            let v = y - launch.offset.1;
            (ay * v * v + Complex64::new(0.0, k * sy * v)).exp()
        })
        .collect();
    for ((i, j), s) in field.samples.indexed_iter_mut() {
        *s = xs[i] * ys[j];
    }
    field.scale_power_to(1.0);
    Ok(field)
}
