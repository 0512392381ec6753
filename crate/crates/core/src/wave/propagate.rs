use ndarray::Array2;
use num_complex::Complex64;

use super::fft::{frequency, Fft2};
use super::field::ScalarField;
use crate::error::{Error, Result};

/// Energy fraction that must stay inside the window.
const CONTAINMENT: f64 = 0.99;
/// Fraction of the half-width usable before the periodic boundary bites.
const USABLE_HALF_WIDTH: f64 = 0.98;
/// Width of the edge band inspected after propagation, in units of the
/// window width (at least two samples).
const BORDER_BAND: f64 = 1.0 / 64.0;
/// Largest power fraction allowed in the edge band.
const BORDER_LIMIT: f64 = 1e-4;

/// Spatial and angular extent of a field, used to predict where its energy
/// goes under propagation.
#[derive(Debug, Clone, Copy)]
struct AxisExtent {
    lo: f64,
    hi: f64,
    slope_lo: f64,
    slope_hi: f64,
    centre: f64,
    half_width: f64,
}

impl AxisExtent {
    fn predicted(&self, z: f64) -> (f64, f64) {
        if z >= 0.0 {
            (self.lo + z * self.slope_lo, self.hi + z * self.slope_hi)
        } else {
            (self.lo + z * self.slope_hi, self.hi + z * self.slope_lo)
        }
    }
}

/// Field spectrum, cached so one forward FFT serves many distances.
pub struct AngularSpectrum {
    spectrum: Array2<Complex64>,
    /// Axial wavenumber per bin; `None` marks evanescent components.
    kz: Array2<Option<f64>>,
    template: ScalarField,
    fft: Fft2,
    extents: [AxisExtent; 2],
}

impl AngularSpectrum {
    pub fn new(field: &ScalarField) -> Self {
        let (nx, ny) = field.samples.dim();
        let fft = Fft2::new(nx, ny);
        let mut spectrum = field.samples.clone();
        fft.forward(&mut spectrum);

        let k_medium = field.ambient_index / field.wavelength;
        let fxs: Vec<f64> = (0..nx).map(|i| frequency(i, nx, field.pitch)).collect();
        let fys: Vec<f64> = (0..ny).map(|j| frequency(j, ny, field.pitch)).collect();
        let kz = Array2::from_shape_fn((nx, ny), |(i, j)| {
            let arg = k_medium * k_medium - fxs[i] * fxs[i] - fys[j] * fys[j];
            (arg > 0.0).then(|| 2.0 * std::f64::consts::PI * arg.sqrt())
        });

        let power_spec = spectrum.mapv(|v| v.norm_sqr());
        let intensity = field.intensity();
        let slope = |f: f64| {
            let s = (f / k_medium).clamp(-0.999_999, 0.999_999);
            s / (1.0 - s * s).sqrt()
        };

        let spatial_x = quantiles(&sorted_marginal(&intensity, 0, |i| field.x(i)));
        let spatial_y = quantiles(&sorted_marginal(&intensity, 1, |j| field.y(j)));
        let angular_x = quantiles(&sorted_marginal(&power_spec, 0, |i| fxs[i]));
        let angular_y = quantiles(&sorted_marginal(&power_spec, 1, |j| fys[j]));
        let extent = |s: (f64, f64), a: (f64, f64), centre: f64, n: usize| AxisExtent {
            lo: s.0,
            hi: s.1,
            slope_lo: slope(a.0),
            slope_hi: slope(a.1),
            centre,
            half_width: 0.5 * n as f64 * field.pitch,
        };

        Self {
            extents: [
                extent(spatial_x, angular_x, field.origin.0, nx),
                extent(spatial_y, angular_y, field.origin.1, ny),
            ],
            spectrum,
            kz,
            template: field.clone_metadata(),
            fft,
        }
    }

    /// Fails if more than 1% of the energy is predicted to wrap around the
    /// periodic window after propagating `distance`. The prediction treats
    /// every ray as diverging, so it is pessimistic for converging beams.
    pub fn check_window(&self, distance: f64) -> Result<()> {
        for (axis, e) in ["x", "y"].into_iter().zip(self.extents.iter()) {
            let (lo, hi) = e.predicted(distance);
            let extent = (lo - e.centre).abs().max((hi - e.centre).abs());
            if extent > USABLE_HALF_WIDTH * e.half_width {
                return Err(Error::PropagationWindow {
                    distance,
                    axis,
                    extent,
                    half_width: e.half_width,
                });
            }
        }
        Ok(())
    }

    /// Field after propagating `distance` (may be negative) through the
    /// homogeneous ambient medium.
    ///
    /// When [`check_window`](Self::check_window) fails, the field is still
    /// computed and accepted if almost no power reached the window edges.
    pub fn propagate(&self, distance: f64) -> Result<ScalarField> {
        if !distance.is_finite() {
            return Err(Error::invalid("distance", "must be finite"));
        }
        let predicted = self.check_window(distance);
        let field = self.propagate_unchecked(distance);
        match predicted {
            Err(e) if border_fraction(&field) > BORDER_LIMIT => Err(e),
            _ => Ok(field),
        }
    }

    fn propagate_unchecked(&self, distance: f64) -> ScalarField {
        let mut samples = self.spectrum.clone();
        ndarray::Zip::from(&mut samples)
            .and(&self.kz)
            .for_each(|s, kz| match kz {
                Some(kz) => *s *= Complex64::from_polar(1.0, kz * distance),
                None => *s = Complex64::default(),
            });
        self.fft.inverse(&mut samples);
        ScalarField {
            samples,
            ..self.template.clone_metadata()
        }
    }
}

/// Power fraction in the band along the four window edges.
fn border_fraction(field: &ScalarField) -> f64 {
    let (nx, ny) = field.samples.dim();
    let bx = ((nx as f64 * BORDER_BAND) as usize).max(2);
    let by = ((ny as f64 * BORDER_BAND) as usize).max(2);
    let (mut edge, mut total) = (0.0, 0.0);
    for ((i, j), v) in field.samples.indexed_iter() {
        let p = v.norm_sqr();
        total += p;
        if i < bx || i >= nx - bx || j < by || j >= ny - by {
            edge += p;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

impl ScalarField {
    /// Copy of everything except the samples.
    pub(crate) fn clone_metadata(&self) -> ScalarField {
        ScalarField {
            samples: Array2::zeros((0, 0)),
            pitch: self.pitch,
            wavelength: self.wavelength,
            ambient_index: self.ambient_index,
            origin: self.origin,
            clipped_fraction: self.clipped_fraction,
        }
    }
}

/// Angular-spectrum propagation over `distance` with the exact transfer
/// function `exp(i kz z)`; evanescent components are discarded.
///
/// A zero distance returns the input unchanged.
pub fn angular_spectrum_propagate(field: &ScalarField, distance: f64) -> Result<ScalarField> {
    if distance == 0.0 {
        return Ok(field.clone());
    }
    AngularSpectrum::new(field).propagate(distance)
}

/// Marginal of `values` along `axis`, as (coordinate, weight) pairs sorted
/// by coordinate.
fn sorted_marginal(values: &Array2<f64>, axis: usize, coord: impl Fn(usize) -> f64) -> Vec<(f64, f64)> {
    let sums = values.sum_axis(ndarray::Axis(1 - axis));
    let mut m: Vec<(f64, f64)> = sums.iter().enumerate().map(|(i, &w)| (coord(i), w)).collect();
    m.sort_by(|a, b| a.0.total_cmp(&b.0));
    m
}

/// Coordinates bounding the central `CONTAINMENT` fraction of the weight.
fn quantiles(m: &[(f64, f64)]) -> (f64, f64) {
    let total: f64 = m.iter().map(|p| p.1).sum();
    if !(total > 0.0) {
        return (0.0, 0.0);
    }
    let tail = 0.5 * (1.0 - CONTAINMENT) * total;
    let mut acc = 0.0;
    let mut lo = m[0].0;
    for &(x, w) in m {
        acc += w;
        if acc > tail {
            lo = x;
            break;
        }
    }
    acc = 0.0;
    let mut hi = m[m.len() - 1].0;
    for &(x, w) in m.iter().rev() {
        acc += w;
        if acc > tail {
            hi = x;
            break;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::beam_from_mfd;
    use crate::wave::field::{make_gaussian_field, Grid, Launch};
    use approx::assert_relative_eq;

    fn field(grid: Grid) -> ScalarField {
        let beam = beam_from_mfd(3.0e-6, 4.0e-6, 729e-9, 1.0).unwrap();
        make_gaussian_field(&beam, Launch::default(), grid).unwrap()
    }

    #[test]
    fn zero_distance_is_identity() {
        let f = field(Grid::new(64, 64, 0.25e-6).unwrap());
        let g = angular_spectrum_propagate(&f, 0.0).unwrap();
        assert_eq!(f.samples, g.samples);
    }

    #[test]
    fn power_and_round_trip() {
        let f = field(Grid::new(128, 128, 0.25e-6).unwrap());
        let g = angular_spectrum_propagate(&f, 5e-6).unwrap();
        assert_relative_eq!(g.power(), f.power(), epsilon = 1e-9);
        let back = angular_spectrum_propagate(&g, -5e-6).unwrap();
        for (a, b) in back.samples.iter().zip(f.samples.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn long_throw_trips_window_guard() {
        let f = field(Grid::new(64, 64, 0.25e-6).unwrap());
        let err = angular_spectrum_propagate(&f, 500e-6).unwrap_err();
        assert!(matches!(err, Error::PropagationWindow { .. }), "{err}");
    }

    #[test]
    fn refocused_beam_passes_despite_pessimistic_prediction() {
        use crate::wave::{apply_element, PhaseElement};
        let beam = beam_from_mfd(56e-6, 56e-6, 729e-9, 1.0).unwrap();
        let mut f = make_gaussian_field(&beam, Launch::default(), Grid::new(512, 512, 0.5e-6).unwrap()).unwrap();
        apply_element(&mut f, &PhaseElement::thin_lens(100e-6)).unwrap();
        let asm = AngularSpectrum::new(&f);
        assert!(asm.check_window(280e-6).is_err());
        let out = asm.propagate(280e-6).unwrap();
        assert!((out.power() - f.power()).abs() < 1e-6);
    }
}
