use ndarray::Array2;
use serde::Serialize;

use super::field::ScalarField;

/// Integration window in units of the current diameter estimate.
const WINDOW_DIAMETERS: f64 = 3.0;
const MAX_WINDOW_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotMetrics {
    pub centroid: (f64, f64),
    /// Second-moment diameters `4 sigma` inside a window of three diameters
    /// centred on the centroid, iterated to self-consistency.
    pub mfd_moment: (f64, f64),
    /// `2w` of 1D Gaussian fits along lines through the centroid.
    pub mfd_fit: (f64, f64),
    pub peak_intensity: f64,
    pub power: f64,
    pub clipped_fraction: f64,
    /// Set when either Gaussian fit failed; `mfd_fit` then repeats the
    /// moment diameters.
    pub fit_failed: bool,
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    centroid: (f64, f64),
    diameter: (f64, f64),
}

pub fn spot_metrics(field: &ScalarField) -> SpotMetrics {
    let intensity = field.intensity();
    let moments = windowed_moments(field, &intensity);
    let peak_intensity = intensity.iter().cloned().fold(0.0, f64::max);
    let power = intensity.sum() * field.pitch * field.pitch;

    let (ic, jc) = nearest_index(field, moments.centroid);
    let xs = field.x_coords();
    let ys = field.y_coords();
    let row: Vec<f64> = intensity.row(ic).to_vec();
    let col: Vec<f64> = intensity.column(jc).to_vec();
    let fx = gaussian_fit(&ys, &row, moments.centroid.1, moments.diameter.1);
    let fy = gaussian_fit(&xs, &col, moments.centroid.0, moments.diameter.0);
    // `row` runs along y and `col` along x.
    let (fit_x, fit_y) = (fy, fx);
    let fit_failed = fit_x.is_none() || fit_y.is_none();
    let mfd_fit = match (fit_x, fit_y) {
        (Some(a), Some(b)) => (a, b),
        _ => moments.diameter,
    };

    SpotMetrics {
        centroid: moments.centroid,
        mfd_moment: moments.diameter,
        mfd_fit,
        peak_intensity,
        power,
        clipped_fraction: field.clipped_fraction,
        fit_failed,
    }
}

/// Only the windowed moment diameters and centroid; cheaper than
/// [`spot_metrics`] for axial scans.
pub fn moment_diameters(field: &ScalarField) -> ((f64, f64), (f64, f64)) {
    let m = windowed_moments(field, &field.intensity());
    (m.centroid, m.diameter)
}

fn nearest_index(field: &ScalarField, p: (f64, f64)) -> (usize, usize) {
    let (nx, ny) = field.samples.dim();
    let i = ((p.0 - field.origin.0) / field.pitch + (nx / 2) as f64).round();
    let j = ((p.1 - field.origin.1) / field.pitch + (ny / 2) as f64).round();
    (
        i.clamp(0.0, (nx - 1) as f64) as usize,
        j.clamp(0.0, (ny - 1) as f64) as usize,
    )
}

fn moments_in(
    intensity: &Array2<f64>,
    xs: &[f64],
    ys: &[f64],
    ir: (usize, usize),
    jr: (usize, usize),
) -> Option<Moments> {
    let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in ir.0..ir.1 {
        for j in jr.0..jr.1 {
            let v = intensity[(i, j)];
            s += v;
            sx += v * xs[i];
            sy += v * ys[j];
        }
    }
    if !(s > 0.0) {
        return None;
    }
    let (cx, cy) = (sx / s, sy / s);
    let (mut vx, mut vy) = (0.0, 0.0);
    for i in ir.0..ir.1 {
        let dx = xs[i] - cx;
        for j in jr.0..jr.1 {
            let v = intensity[(i, j)];
            let dy = ys[j] - cy;
            vx += v * dx * dx;
            vy += v * dy * dy;
        }
    }
    Some(Moments {
        centroid: (cx, cy),
        diameter: (4.0 * (vx / s).sqrt(), 4.0 * (vy / s).sqrt()),
    })
}

fn windowed_moments(field: &ScalarField, intensity: &Array2<f64>) -> Moments {
    let (nx, ny) = intensity.dim();
    let xs = field.x_coords();
    let ys = field.y_coords();
    let Some(mut m) = moments_in(intensity, &xs, &ys, (0, nx), (0, ny)) else {
        return Moments {
            centroid: field.origin,
            diameter: (0.0, 0.0),
        };
    };
    let range = |c: f64, d: f64, coords: &[f64]| {
        let half = 0.5 * WINDOW_DIAMETERS * d;
        let lo = coords.partition_point(|&v| v < c - half);
        let hi = coords.partition_point(|&v| v <= c + half);
        (lo, hi.max(lo + 1).min(coords.len()))
    };
    for _ in 0..MAX_WINDOW_ITERATIONS {
        let ir = range(m.centroid.0, m.diameter.0, &xs);
        let jr = range(m.centroid.1, m.diameter.1, &ys);
        let Some(next) = moments_in(intensity, &xs, &ys, ir, jr) else {
            break;
        };
        let change = (next.diameter.0 - m.diameter.0).abs() / m.diameter.0.max(f64::MIN_POSITIVE)
            + (next.diameter.1 - m.diameter.1).abs() / m.diameter.1.max(f64::MIN_POSITIVE);
        m = next;
        if change < 1e-9 {
            break;
        }
    }
    m
}

/// Fits `a exp(-2 (t - c)^2 / w^2)` by Levenberg-Marquardt over the samples
/// within 1.5 `diameter` of `centre`; returns `2w`.
fn gaussian_fit(t: &[f64], v: &[f64], centre: f64, diameter: f64) -> Option<f64> {
    if !(diameter > 0.0) {
        return None;
    }
    let half = 0.5 * WINDOW_DIAMETERS * diameter;
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(v)
        .filter(|(&ti, _)| (ti - centre).abs() <= half)
        .map(|(&ti, &vi)| (ti, vi))
        .collect();
    if pts.len() < 5 {
        return None;
    }
    let span = pts[pts.len() - 1].0 - pts[0].0;
    let peak = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    // Normalize for conditioning.
    let scale_t = diameter;
    let data: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(ti, vi)| ((ti - centre) / scale_t, vi / peak))
        .collect();
    let mut p = [1.0, 0.0, 0.5];
    let cost = |p: &[f64; 3]| -> f64 {
        data.iter()
            .map(|&(ti, vi)| {
                let r = p[0] * (-2.0 * (ti - p[1]).powi(2) / (p[2] * p[2])).exp() - vi;
                r * r
            })
            .sum()
    };
    let mut lambda = 1e-3;
    let mut c = cost(&p);
    let mut converged = false;
    for _ in 0..200 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(ti, vi) in &data {
            let u = ti - p[1];
            let e = (-2.0 * u * u / (p[2] * p[2])).exp();
            let r = p[0] * e - vi;
            let g = [
                e,
                p[0] * e * 4.0 * u / (p[2] * p[2]),
                p[0] * e * 4.0 * u * u / p[2].powi(3),
            ];
            for a in 0..3 {
                jtr[a] += g[a] * r;
                for b in 0..3 {
                    jtj[a][b] += g[a] * g[b];
                }
            }
        }
        let mut step_taken = false;
        for _ in 0..20 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] *= 1.0 + lambda;
            }
            let Some(d) = solve3(m, jtr.map(|x| -x)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
            let ct = cost(&trial);
            if ct.is_finite() && ct <= c && trial[2] > 0.0 {
                let rel = (c - ct) / c.max(1e-300);
                p = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                step_taken = true;
                if rel < 1e-12 || d.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !step_taken || converged {
            converged = true;
            break;
        }
    }
    let w = p[2].abs() * scale_t;
    if !converged || !w.is_finite() || w > span || !(p[0] > 0.0) {
        return None;
    }
    Some(2.0 * w)
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if !(d.abs() > 1e-300) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::beam_from_mfd;
    use crate::wave::element::{apply_element, PhaseElement};
    use crate::wave::field::{make_gaussian_field, Grid, Launch};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn grid() -> Grid {
        Grid::new(256, 256, 0.1e-6).unwrap()
    }

    #[test]
    fn gaussian_metrics_recover_mfd() {
        let beam = beam_from_mfd(1.3e-6, 3.5e-6, 729e-9, 1.0).unwrap();
        let launch = Launch {
            offset: (1.0e-6, -2.0e-6),
            ..Launch::default()
        };
        let m = spot_metrics(&make_gaussian_field(&beam, launch, grid()).unwrap());
        assert!(!m.fit_failed);
        assert_relative_eq!(m.mfd_fit.0, 1.3e-6, max_relative = 1e-6);
        assert_relative_eq!(m.mfd_fit.1, 3.5e-6, max_relative = 1e-6);
        // The window spans +-6 sigma, so truncation is negligible.
        assert_relative_eq!(m.mfd_moment.0, 1.3e-6, max_relative = 0.01);
        assert_relative_eq!(m.mfd_moment.1, 3.5e-6, max_relative = 0.01);
        assert_relative_eq!(m.centroid.0, 1.0e-6, epsilon = 1e-12);
        assert_relative_eq!(m.centroid.1, -2.0e-6, epsilon = 1e-12);
        assert_relative_eq!(m.power, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform_field_fails_the_fit() {
        let mut f = make_gaussian_field(
            &beam_from_mfd(2e-6, 2e-6, 729e-9, 1.0).unwrap(),
            Launch::default(),
            grid(),
        )
        .unwrap();
        f.samples.fill(Complex64::new(1.0, 0.0));
        let m = spot_metrics(&f);
        assert!(m.fit_failed);
        assert!(m.mfd_moment.0 > 0.0);
    }

    #[test]
    fn symmetric_pair_centroid_at_origin() {
        let mut f = make_gaussian_field(
            &beam_from_mfd(2e-6, 2e-6, 729e-9, 1.0).unwrap(),
            Launch::default(),
            grid(),
        )
        .unwrap();
        f.samples.fill(Complex64::default());
        f.samples[(100, 128)] = Complex64::new(1.0, 0.0);
        f.samples[(156, 128)] = Complex64::new(0.0, 1.0);
        let m = spot_metrics(&f);
        assert!(m.centroid.0.abs() < 1e-15 && m.centroid.1.abs() < 1e-15);
    }

    #[test]
    fn clipped_fraction_is_carried() {
        let mut f = make_gaussian_field(
            &beam_from_mfd(4e-6, 4e-6, 729e-9, 1.0).unwrap(),
            Launch::default(),
            grid(),
        )
        .unwrap();
        let c = apply_element(&mut f, &PhaseElement::circ_aperture(2e-6)).unwrap();
        assert_relative_eq!(spot_metrics(&f).clipped_fraction, c);
    }
}
